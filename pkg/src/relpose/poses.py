"""Pose records, relative-pose computation, and pose-error metrics.

An absolute pose is the world->camera projection ``x_cam = R x_world + t``.
The relative pose between two cameras follows

    q_rel = q2 * conj(q1)
    t_rel = R2 (-R1^T t1) + t2

which is exactly the homogeneous composition ``T2 @ inv(T1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateQuaternion
from .rotations import (
    quat_canonical,
    quat_conjugate,
    quat_multiply,
    quat_normalize,
    quat_to_rotmat,
    rotmat_to_quat,
)
from .validation import as_quaternion, as_vector3, check_rotation_matrix


@dataclass
class AbsolutePose:
    """World->camera pose: unit quaternion (w,x,y,z) plus translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray
    frame_id: str = ""

    def __post_init__(self):
        self.rotation = as_quaternion(self.rotation)
        self.translation = as_vector3(self.translation)


@dataclass
class RelativePose:
    """Pose of camera 2 in camera 1's frame; rotation is unit and canonical."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = as_quaternion(self.rotation)
        self.translation = as_vector3(self.translation)


@dataclass
class RigidTransform:
    """Rotation + translation, i.e. a 4x4 homogeneous matrix with (0,0,0,1) bottom row."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = check_rotation_matrix(self.rotation)
        self.translation = as_vector3(self.translation)

    @classmethod
    def from_pose(cls, pose: AbsolutePose) -> "RigidTransform":
        return cls(quat_to_rotmat(pose.rotation), pose.translation)

    @classmethod
    def from_relative(cls, rel: RelativePose) -> "RigidTransform":
        return cls(quat_to_rotmat(rel.rotation), rel.translation)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"homogeneous matrix must be 4x4, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self applied after other: result maps x -> self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def quaternion(self) -> np.ndarray:
        return rotmat_to_quat(self.rotation)


def relative_pose(p1: AbsolutePose, p2: AbsolutePose) -> RelativePose:
    """Relative pose taking camera-1 coordinates to camera-2 coordinates."""
    q1 = quat_normalize(p1.rotation)
    q2 = quat_normalize(p2.rotation)
    q_rel = quat_canonical(quat_normalize(quat_multiply(q2, quat_conjugate(q1))))
    r1 = quat_to_rotmat(q1)
    r2 = quat_to_rotmat(q2)
    t_rel = r2 @ (-r1.T @ p1.translation) + p2.translation
    return RelativePose(q_rel, t_rel)


def rotation_error_deg(q_pred, q_gt) -> float:
    """Geodesic angle between two rotations, in degrees (sign-invariant, [0, 180])."""
    qp = quat_normalize(as_quaternion(q_pred))
    qg = quat_normalize(as_quaternion(q_gt))
    dot = min(1.0, abs(float(np.dot(qp, qg))))
    return float(np.degrees(2.0 * np.arccos(dot)))


def translation_error_m(t_pred, t_gt) -> float:
    """Euclidean distance between predicted and reference translation."""
    return float(np.linalg.norm(as_vector3(t_pred) - as_vector3(t_gt)))


__all__ = [
    "AbsolutePose",
    "RelativePose",
    "RigidTransform",
    "relative_pose",
    "rotation_error_deg",
    "translation_error_m",
    "DegenerateQuaternion",
]
