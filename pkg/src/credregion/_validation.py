"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import DomainError, ShapeError


def check_counts(X, n_outcomes: int | None = None) -> np.ndarray:
    """Return one count vector as a 1-D int64 array.

    Accepts a flat vector or a single-row 2-D array.
    """
    arr = check_array(X, ensure_2d=False, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[0] != 1:
            raise ShapeError(f"expected a single count vector, got {arr.shape[0]} rows")
        arr = arr[0]
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise DomainError("counts must be non-negative integers")
    if n_outcomes is not None and arr.size != n_outcomes:
        raise ShapeError(f"expected {n_outcomes} counts, got {arr.size}")
    return arr.astype(np.int64)


def check_lambdas(X) -> np.ndarray:
    """Flatten ``X`` to a 1-D float array with every value in (0, 1)."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64).ravel()
    if np.any(arr <= 0) or np.any(arr >= 1):
        raise DomainError("lambda values must lie strictly inside (0, 1)")
    return arr


def check_bloch(X, d: int) -> np.ndarray:
    """2-D float array of Bloch vectors with ``d`` columns."""
    arr = check_array(np.atleast_2d(np.asarray(X, dtype=float)), dtype=np.float64)
    if arr.shape[1] != d:
        raise ShapeError(f"expected Bloch vectors of length {d}, got {arr.shape[1]}")
    return arr


def check_probability(x, name: str = "value") -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {x}")
    return x
