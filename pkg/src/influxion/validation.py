"""Input validation helpers shared by the solver modules."""

from __future__ import annotations

import numbers

import numpy as np


class DimensionError(ValueError):
    """Array shape does not match the declared geometry."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit its subdivision cap before converging."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SolverError(RuntimeError):
    """Numerical breakdown inside a linear solve (non-finite values)."""


class DegenerateSegmentError(ValueError):
    """Segment of length 4 makes the constant-mode density undefined."""


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_finite(array, name: str) -> np.ndarray:
    a = np.asarray(array, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def check_shape(array, shape, name: str) -> np.ndarray:
    a = check_finite(array, name)
    if a.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {a.shape}, expected {tuple(shape)}")
    return a
