"""Explanation-guided graph contrastive learning on dense numpy graphs."""

__version__ = "0.1.0"
