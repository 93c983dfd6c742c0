"""Quaternion and rotation-matrix algebra.

Conventions
-----------
- Quaternions are length-4 float arrays ordered ``(w, x, y, z)`` with the
  Hamilton product, so ``quat_to_rotmat(quat_multiply(a, b))`` equals
  ``quat_to_rotmat(a) @ quat_to_rotmat(b)``.
- ``q`` and ``-q`` encode the same rotation; ``quat_canonical`` fixes the
  hemisphere (w >= 0, ties broken by the first nonzero component) so stored
  labels are unique regression targets.
- Rotation matrices are world->camera maps with orthonormal columns and
  determinant +1.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateQuaternion
from .validation import as_quaternion, check_rotation_matrix

DEGENERATE_NORM = 1e-12

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    """Scale to unit length. Raises DegenerateQuaternion for near-zero input."""
    q = as_quaternion(q)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n <= DEGENERATE_NORM:
        raise DegenerateQuaternion(f"quaternion norm {n:.3g} is not normalizable")
    return q / n


def quat_conjugate(q) -> np.ndarray:
    q = as_quaternion(q)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_canonical(q) -> np.ndarray:
    """Flip sign so w >= 0; if w == 0, so the first nonzero component is > 0."""
    q = as_quaternion(q)
    for c in q:
        if c > 0.0:
            return q.copy()
        if c < 0.0:
            return -q
    return q.copy()


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a*b (not renormalized)."""
    aw, ax, ay, az = as_quaternion(a)
    bw, bx, by, bz = as_quaternion(b)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_rotmat(q) -> np.ndarray:
    """Unit quaternion -> 3x3 rotation matrix (input is normalized first)."""
    w, x, y, z = quat_normalize(q)
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def rotmat_to_quat(m) -> np.ndarray:
    """3x3 rotation matrix -> canonical unit quaternion.

    Validates orthonormality and determinant (raises NotARotation beyond
    1e-6) and uses the largest-pivot branch for numerical stability.
    """
    r = check_rotation_matrix(m)
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    if trace > 0.0:
        s = np.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] > r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    return quat_canonical(quat_normalize(q))


def random_unit_quaternion(rng: np.random.Generator) -> np.ndarray:
    """Uniformly random rotation as a canonical unit quaternion."""
    q = rng.normal(size=4)
    while np.linalg.norm(q) <= DEGENERATE_NORM:
        q = rng.normal(size=4)
    return quat_canonical(quat_normalize(q))
