"""Small input-validation helpers shared across modules.

All helpers return float64 numpy arrays so downstream math never has to
worry about lists, tuples, or mixed dtypes.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue, NotARotation

ROTATION_TOL = 1e-6


def as_vector(x, size: int, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
    return arr


def as_quaternion(q, name: str = "quaternion") -> np.ndarray:
    return as_vector(q, 4, name)


def as_vector3(t, name: str = "translation") -> np.ndarray:
    return as_vector(t, 3, name)


def as_matrix3(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.shape != (3, 3):
        raise ValueError(f"{name} must have shape (3, 3), got {arr.shape}")
    return arr


def ensure_finite(arr: np.ndarray, name: str = "value") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains a non-finite value")
    return arr


def check_rotation_matrix(m, tol: float = ROTATION_TOL) -> np.ndarray:
    """Validate orthonormality and det(R) = 1 within ``tol``."""
    r = as_matrix3(m, "rotation matrix")
    err = np.max(np.abs(r.T @ r - np.eye(3)))
    if err > tol:
        raise NotARotation(f"matrix is not orthonormal (max |R^T R - I| = {err:.3g})")
    det = np.linalg.det(r)
    if abs(det - 1.0) > tol:
        raise NotARotation(f"matrix determinant is {det:.6g}, expected 1")
    return r
