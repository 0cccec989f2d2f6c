"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError, DimensionMismatch


def readonly(a: np.ndarray) -> np.ndarray:
    """Return a C-contiguous float copy with the writeable flag cleared."""
    out = np.array(a, dtype=float, order="C", copy=True)
    out.setflags(write=False)
    return out


def as_float_vector(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def as_float_matrix(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def check_returns_matrix(X, name: str = "returns") -> np.ndarray:
    """Validate a (periods, assets) matrix of simple per-period returns.

    Every entry must be finite and strictly greater than -1 (a return of
    -100% or worse would wipe out the position and break every gross
    return factor downstream).
    """
    arr = as_float_matrix(X, name)
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{name} must have at least one row and one column")
    if np.any(arr <= -1.0):
        raise DataError(f"{name} contains returns of -100% or worse")
    return arr


def check_weight_vector(K, m: int | None = None, name: str = "weights") -> np.ndarray:
    """Coerce a weight input (array-like or SimplexWeight) to a 1-D float array.

    Simplex membership is deliberately not enforced here: gradients and
    objectives are well defined off the simplex and finite-difference
    tests rely on evaluating there.
    """
    if hasattr(K, "weights"):
        K = K.weights
    arr = as_float_vector(K, name)
    if m is not None and arr.shape[0] != m:
        raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {m}")
    return arr
