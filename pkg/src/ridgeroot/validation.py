"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError, InputError, NonPositiveLambdaError


def as_matrix(name: str, obj, *, dtype=np.float64) -> np.ndarray:
    """Coerce ``obj`` to a 2-D float array with finite entries."""
    arr = np.asarray(obj, dtype=dtype)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if arr.size == 0:
        raise InputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf entries")
    return arr


def check_shape(name: str, arr: np.ndarray, shape: tuple) -> None:
    if arr.shape != shape:
        raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {shape}")


def check_positive_lambda(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0.0:
        raise NonPositiveLambdaError(f"lambda must be > 0, got {lam}")
    return lam


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def check_symmetric(name: str, a: np.ndarray, rel_tol: float = 1e-9) -> None:
    """Max-norm symmetry check with tolerance relative to the largest entry."""
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > rel_tol * max(scale, 1e-300):
        raise InputError(f"{name} is not symmetric to within {rel_tol} in max-norm")


def matrix_rank(a: np.ndarray) -> int:
    """Numerical rank from the SVD with the standard spectral-norm tolerance."""
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0:
        return 0
    tol = max(a.shape) * np.finfo(np.float64).eps * s[0]
    return int(np.sum(s > tol))
