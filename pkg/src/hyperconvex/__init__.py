"""Numerical checks of barrier-based decay bounds for relative extremal functions."""

__version__ = "0.1.0"
