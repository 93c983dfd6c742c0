"""First-frame re-referencing of SfM trajectories.

A COLMAP record carries the world->camera projection (R', t'). The actual
camera trajectory translation is t = R'^-1 t'. Re-expressing every frame
relative to the first one (after sorting frames into time order) uses

    R_TRF = R'_ff^-1,   t_TRF = -t_ff
    R_abs_i = R'_i R_TRF,   t_abs_i = t_i + t_TRF

which forces the first frame to identity rotation and zero translation.
Consecutive relative motion is then T_rel_i = T_abs_i * T_abs_{i-1}^-1.
"""

from __future__ import annotations

import re

import numpy as np

from .colmap import ColmapImageRecord
from .errors import EmptySequence, SingleFrame
from .poses import AbsolutePose, RigidTransform
from .rotations import quat_to_rotmat, rotmat_to_quat

_DIGIT_RUN = re.compile(r"(\d+)")


def natural_sort_key(name: str) -> tuple:
    """Sort key treating digit runs numerically: frame2 < frame10."""
    parts = _DIGIT_RUN.split(name)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def sort_records_by_name(records: list[ColmapImageRecord]) -> list[ColmapImageRecord]:
    return sorted(records, key=lambda r: natural_sort_key(r.name))


def colmap_trajectory_translation(record: ColmapImageRecord) -> np.ndarray:
    """Trajectory translation t = R'^-1 t' of a world->camera record."""
    r = quat_to_rotmat(record.rotation)
    return r.T @ np.asarray(record.translation_raw, dtype=float)


def first_frame_transform(first: ColmapImageRecord) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and translation that re-reference a trajectory to its first frame."""
    r_trf = quat_to_rotmat(first.rotation).T
    t_trf = -colmap_trajectory_translation(first)
    return r_trf, t_trf


def apply_rereference(records: list[ColmapImageRecord], r_trf: np.ndarray,
                      t_trf: np.ndarray) -> list[AbsolutePose]:
    """Apply a first-frame transform to every record (records already sorted)."""
    if not records:
        raise EmptySequence("no records to re-reference")
    poses = []
    for rec in records:
        r_prime = quat_to_rotmat(rec.rotation)
        r_abs = r_prime @ r_trf
        t_abs = colmap_trajectory_translation(rec) + t_trf
        poses.append(AbsolutePose(rotmat_to_quat(r_abs), t_abs, frame_id=rec.name))
    return poses


def rereference_trajectory(records: list[ColmapImageRecord],
                           sort: bool = True) -> list[AbsolutePose]:
    """Sort by image name, then re-reference the whole trajectory to frame 1."""
    if not records:
        raise EmptySequence("no records to re-reference")
    ordered = sort_records_by_name(records) if sort else list(records)
    r_trf, t_trf = first_frame_transform(ordered[0])
    return apply_rereference(ordered, r_trf, t_trf)


def consecutive_relative(abs_poses: list[AbsolutePose]) -> list[RigidTransform]:
    """Relative transforms between consecutive frames: exactly N-1 outputs."""
    if not abs_poses:
        raise EmptySequence("no poses")
    if len(abs_poses) < 2:
        raise SingleFrame("need at least 2 poses for relative transforms")
    transforms = []
    prev = RigidTransform.from_pose(abs_poses[0])
    for pose in abs_poses[1:]:
        cur = RigidTransform.from_pose(pose)
        transforms.append(cur.compose(prev.inverse()))
        prev = cur
    return transforms
