"""Small input-validation helpers used by the estimators and functions."""

import numpy as np

from .errors import DimensionMismatchError


def as_float_vector(x, d=None, name="x"):
    """Return ``x`` as a contiguous float64 1-D array of length ``d``."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise DimensionMismatchError(f"{name} has length {arr.shape[0]}, expected {d}")
    return arr


def as_float_matrix(X, d=None, name="X"):
    """Return ``X`` as a float64 2-D array with ``d`` columns.

    A 1-D input is treated as a single row.
    """
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise DimensionMismatchError(f"{name} has {arr.shape[1]} columns, expected {d}")
    return arr
