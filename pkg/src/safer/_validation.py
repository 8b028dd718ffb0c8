"""Small input-validation helpers used throughout the package.

All numeric compute inside the package is float64; casting happens here
and at the tensor-store boundary.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError


def as_float_matrix(values, name: str = "values") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def as_float_vector(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ArgumentError(f"{name} must be 1-D, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def check_finite(arr: np.ndarray, name: str = "values") -> None:
    if arr.size and not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains non-finite entries")


def check_dim(actual: int, expected: int, name: str = "dim") -> None:
    if actual != expected:
        raise ArgumentError(f"{name} mismatch: expected {expected}, got {actual}")


def check_orthonormal(basis: np.ndarray, tol: float = 1e-10, name: str = "basis") -> None:
    """Require basis.T @ basis == I(k) within tol (max-abs)."""
    k = basis.shape[1]
    gram = basis.T @ basis
    err = np.max(np.abs(gram - np.eye(k)))
    if err > tol:
        raise ArgumentError(f"{name} columns are not orthonormal (max deviation {err:.3e} > {tol:.0e})")
