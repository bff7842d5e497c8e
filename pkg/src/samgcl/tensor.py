"""Dense 2-D tensors with tape-based reverse-mode differentiation.

Every tensor gets a monotonically increasing id at creation.  Operations
whose inputs require gradients record their parents and a local backward
rule; :func:`backward` replays the recorded nodes in decreasing id order,
which is exactly the reverse of recording order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError

_next_id = itertools.count()


def _as_2d(data, dtype=None) -> np.ndarray:
    a = np.asarray(data, dtype=dtype)
    if dtype is None and not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError("tensors are 2-D", a.shape)
    return a


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "id", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_2d(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.id = next(_next_id)
        self.op = "leaf"
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item() needs a 1x1 tensor", self.shape)
        return float(self.data[0, 0])

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    __add__ = lambda self, o: add(self, o)  # noqa: E731
    __radd__ = lambda self, o: add(o, self)  # noqa: E731
    __sub__ = lambda self, o: sub(self, o)  # noqa: E731
    __rsub__ = lambda self, o: sub(o, self)  # noqa: E731
    __matmul__ = lambda self, o: matmul(self, o)  # noqa: E731
    __rmatmul__ = lambda self, o: matmul(o, self)  # noqa: E731
    __neg__ = lambda self: scalar_mul(self, -1.0)  # noqa: E731

    def __mul__(self, o):
        if np.isscalar(o):
            return scalar_mul(self, o)
        return elementwise_mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if not np.isscalar(c):
            raise TypeError("only division by a scalar is supported")
        return scalar_mul(self, 1.0 / c)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data, parents: Sequence[Tensor], op: str, rule: Callable) -> Tensor:
    """Wrap ``out_data``; attach ``rule(g) -> parent grads`` if any parent needs grad."""
    out = Tensor(out_data)
    out.op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = rule
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    axes = tuple(ax for ax in (0, 1) if shape[ax] == 1 and g.shape[ax] != 1)
    return g.sum(axis=axes, keepdims=True).reshape(shape)


def _broadcast_shape(a: Tensor, b: Tensor, op: str):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes do not broadcast", a.shape, b.shape) from None


# --------------------------------------------------------------------------
# operations


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul: inner dimensions differ", a.shape, b.shape)
    ad, bd = a.data, b.data
    return _record(ad @ bd, (a, b), "matmul", lambda g: (g @ bd.T, ad.T @ g))


def add(a, b) -> Tensor:
    """Sum with 2-D broadcasting (e.g. a ``1 x cols`` bias over rows)."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return _record(a.data + b.data, (a, b), "add", lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _record(a.data - b.data, (a, b), "sub", lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def elementwise_mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "elementwise_mul")
    ad, bd = a.data, b.data
    return _record(
        ad * bd,
        (a, b),
        "mul",
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def scalar_mul(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _record(a.data * c, (a,), "scalar_mul", lambda g: (g * c,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0  # subgradient 0 at exactly 0
    return _record(np.where(pos, a.data, 0.0), (a,), "relu", lambda g: (g * pos,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), "exp", lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _record(np.log(ad), (a,), "log", lambda g: (g / ad,))


def sum(a, axis=None) -> Tensor:  # noqa: A001
    """Full sum (``1x1``), per-row sums (``axis=1``, ``n x 1``) or per-column (``axis=0``)."""
    a = as_tensor(a)
    shape = a.shape
    if axis is None:
        out = np.array([[a.data.sum()]])
    else:
        out = a.data.sum(axis=axis, keepdims=True)
    return _record(out, (a,), "sum", lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    return scalar_mul(sum(a, axis), 1.0 / count)


def mean_rows(a) -> Tensor:
    """Average over rows: ``n x K -> 1 x K``."""
    return mean(a, axis=0)


def row_l2_normalize(a, eps: float = 0.0) -> Tensor:
    a = as_tensor(a)
    norm = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True)) + eps
    y = a.data / norm

    def rule(g):
        return ((g - y * (g * y).sum(axis=1, keepdims=True)) / norm,)

    return _record(y, (a,), "row_l2_normalize", rule)


def logsumexp_rows(a) -> Tensor:
    """Numerically stable ``log(sum(exp(a), axis=1))`` as an ``n x 1`` column."""
    a = as_tensor(a)
    shift = a.data.max(axis=1, keepdims=True)
    e = np.exp(a.data - shift)
    s = e.sum(axis=1, keepdims=True)
    soft = e / s
    return _record(np.log(s) + shift, (a,), "logsumexp_rows", lambda g: (g * soft,))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.T.copy(), (a,), "transpose", lambda g: (g.T,))


def concat_rows(tensors: Sequence) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    cols = {t.shape[1] for t in ts}
    if len(cols) != 1:
        raise ShapeError("concat_rows: column counts differ", *(t.shape for t in ts))
    bounds = np.cumsum([0] + [t.shape[0] for t in ts])
    return _record(
        np.concatenate([t.data for t in ts], axis=0),
        ts,
        "concat_rows",
        lambda g: tuple(g[bounds[k] : bounds[k + 1]] for k in range(len(ts))),
    )


def take_rows(a, index) -> Tensor:
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    shape = a.shape

    def rule(g):
        out = np.zeros(shape, dtype=g.dtype)
        np.add.at(out, index, g)
        return (out,)

    return _record(a.data[index], (a,), "take_rows", rule)


def stop_gradient(a) -> Tensor:
    """Forward identity; nothing flows back to ``a``."""
    a = as_tensor(a)
    out = Tensor(a.data)
    out.op = "stop_gradient"
    return out


# --------------------------------------------------------------------------
# reverse pass


def _tape(loss: Tensor) -> list[Tensor]:
    seen, stack, nodes = set(), [loss], []
    while stack:
        t = stack.pop()
        if t.id in seen or not t.requires_grad:
            continue
        seen.add(t.id)
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t.id, reverse=True)
    return nodes


def backward(loss: Tensor):
    """Accumulate ``d loss / d leaf`` into ``.grad`` of every leaf requiring grad."""
    if loss.shape != (1, 1):
        raise ShapeError("backward needs a scalar (1x1) loss", loss.shape)
    if not loss.requires_grad:
        return
    upstream = {loss.id: np.ones_like(loss.data)}
    for node in _tape(loss):
        g = upstream.pop(node.id, None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            prev = upstream.get(parent.id)
            upstream[parent.id] = pg if prev is None else prev + pg


# --------------------------------------------------------------------------
# finite-difference checker


@dataclass
class FDReport:
    max_rel_error: float
    per_param: list = field(default_factory=list)
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def fd_check(f: Callable[[], Tensor], params: Iterable[Tensor], h: float = 1e-5, tolerance: float = 1e-4) -> FDReport:
    """Compare analytic gradients of ``f()`` with central differences.

    ``f`` is evaluated exactly as written, so detached paths show up as a
    discrepancy rather than being skipped.  The error per entry is
    ``|analytic - numeric| / max(1, |analytic|)``.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    backward(f())
    errors = []
    for p in params:
        analytic = p.grad.copy()
        numeric = np.zeros_like(p.data)
        flat, nflat = p.data.reshape(-1), numeric.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = f().item()
            flat[k] = orig - h
            down = f().item()
            flat[k] = orig
            nflat[k] = (up - down) / (2 * h)
        rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
        errors.append(float(rel.max()) if rel.size else 0.0)
    return FDReport(max(errors, default=0.0), errors, tolerance)


# --------------------------------------------------------------------------
# optimizers


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def _check_grads(params, grads):
    if len(params) != len(grads):
        raise ShapeError("parameter/gradient counts differ", (len(params),), (len(grads),))
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ShapeError("gradient shape differs from parameter", p.shape, np.shape(g))


def sgd_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], lr: float):
    _check_grads(params, grads)
    for p, g in zip(params, grads):
        p.data = p.data - lr * g


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    _check_grads(params, grads)
    for p, m in zip(params, state.m):
        if m.shape != p.shape:
            raise ShapeError("optimizer state shape differs from parameter", m.shape, p.shape)
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for k, (p, g) in enumerate(zip(params, grads)):
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        p.data = p.data - lr * (state.m[k] / c1) / (np.sqrt(state.v[k] / c2) + eps)
