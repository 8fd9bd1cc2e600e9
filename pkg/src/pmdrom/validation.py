"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeMismatchError


def as_float_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, copying only when needed."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got ndim={out.ndim}")
    return out


def as_float_vector(a, name: str = "vector") -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 1:
        raise ShapeMismatchError(f"{name} must be 1-D, got ndim={out.ndim}")
    return out


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ShapeMismatchError(f"{name} contains non-finite entries")
    return a


def check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatchError(f"{name} must be square, got shape {a.shape}")
    return a
