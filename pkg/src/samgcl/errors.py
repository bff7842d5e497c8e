"""Exception types shared across the package."""


class SamGCLError(Exception):
    """Base class for all package errors."""


class ShapeError(SamGCLError, ValueError):
    """Operand shapes are incompatible."""

    def __init__(self, message, *shapes):
        self.shapes = tuple(tuple(s) for s in shapes)
        if shapes:
            message = f"{message}: " + " vs ".join(str(s) for s in self.shapes)
        super().__init__(message)


class ConfigError(SamGCLError, ValueError):
    pass


class NumericalError(SamGCLError, ArithmeticError):
    pass


class DegenerateExplanation(SamGCLError):
    """The heat-map or its channel weights vanished; callers fall back to random masks."""


class ParseError(SamGCLError):
    def __init__(self, message, path=None, line=None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}" if where else message)
