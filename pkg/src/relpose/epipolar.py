"""Pinhole intrinsics, fundamental matrices from relative pose, and
epipolar-line reports.

Pixel convention: homogeneous point (u, v, 1), origin at the top-left corner,
u rightward, v downward. A fundamental matrix F maps a point in the first
image to its epipolar line in the second: x2^T F x1 = 0. F is only defined up
to scale, so every matrix built here is normalized to unit Frobenius norm
with the sign fixed so the largest-magnitude entry is positive.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .colmap import ColmapCameraRecord
from .datafiles import EpilineRecord, KeypointRecord, PairRecord
from .errors import (DegenerateLine, DegenerateTranslation, InputError,
                     InvalidFov, MissingKeypoints)
from .poses import RelativePose
from .rotations import quat_to_rotmat
from .trajectory import natural_sort_key
from .validation import as_vector3

ZERO_BASELINE_TOL = 1e-9
EPIPOLE_TOL = 1e-9


@dataclass
class CameraIntrinsics:
    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([
            [self.f, 0.0, self.cx],
            [0.0, self.f, self.cy],
            [0.0, 0.0, 1.0],
        ])


def approx_intrinsics(width: int, height: int, fov_deg: float) -> CameraIntrinsics:
    """Approximate intrinsics from image size and horizontal field of view:
    cx = width/2, cy = height/2, f = width / (2 tan(fov/2))."""
    if width <= 0 or height <= 0:
        raise InputError(f"image size must be positive, got {width}x{height}")
    if not (0.0 < fov_deg < 180.0):
        raise InvalidFov(f"field of view must be in (0, 180) degrees, got {fov_deg}")
    f = width / (2.0 * math.tan(math.radians(fov_deg) / 2.0))
    return CameraIntrinsics(f=f, cx=width / 2.0, cy=height / 2.0,
                            width=width, height=height)


def intrinsics_from_colmap_camera(camera: ColmapCameraRecord) -> CameraIntrinsics:
    """Intrinsics from a reconstructed camera (single-f models only).

    PINHOLE cameras with distinct fx, fy are reduced to their mean since the
    downstream matrix uses one focal length.
    """
    if camera.model_name == "SIMPLE_PINHOLE":
        f, cx, cy = camera.params
    elif camera.model_name == "PINHOLE":
        fx, fy, cx, cy = camera.params
        f = (fx + fy) / 2.0
    else:
        raise InputError(
            f"cannot derive single-focal intrinsics from model {camera.model_name}")
    return CameraIntrinsics(f=f, cx=cx, cy=cy, width=camera.width, height=camera.height)


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == cross(v, w)."""
    x, y, z = as_vector3(v)
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def _normalize_fundamental(f: np.ndarray) -> np.ndarray:
    f = f / np.linalg.norm(f)
    flat = np.abs(f).argmax()
    if f.flat[flat] < 0:
        f = -f
    return f


def fundamental_from_pose(k1: CameraIntrinsics, k2: CameraIntrinsics,
                          rel: RelativePose) -> np.ndarray:
    """F = K2^-T [t]x R K1^-1 for the relative pose mapping camera-1
    coordinates into camera 2, normalized for comparability."""
    t = as_vector3(rel.translation)
    if np.linalg.norm(t) <= ZERO_BASELINE_TOL:
        raise DegenerateTranslation(
            "fundamental matrix undefined for (near-)zero baseline")
    r = quat_to_rotmat(rel.rotation)
    k1_inv = np.linalg.inv(k1.matrix)
    k2_inv_t = np.linalg.inv(k2.matrix).T
    return _normalize_fundamental(k2_inv_t @ skew(t) @ r @ k1_inv)


@dataclass
class EpipolarLine:
    a: float
    b: float
    c: float

    def distance_to(self, point) -> float:
        u, v = float(point[0]), float(point[1])
        return abs(self.a * u + self.b * v + self.c)


def epipolar_line(f: np.ndarray, point, side: str = "left-to-right",
                  image_size: tuple[int, int] | None = None) -> EpipolarLine:
    """Epipolar line for a pixel point; coefficients scaled so a^2 + b^2 = 1.

    side "left-to-right" maps a first-image point to its line in the second
    image (l = F x); "right-to-left" uses F^T. Points outside image_size only
    warn: ground-truth keypoints near borders are still meaningful.
    """
    f = np.asarray(f, dtype=float)
    u, v = float(point[0]), float(point[1])
    if image_size is not None:
        w, h = image_size
        if not (0 <= u <= w and 0 <= v <= h):
            warnings.warn(f"point ({u}, {v}) outside {w}x{h} image")
    if side == "left-to-right":
        line = f @ np.array([u, v, 1.0])
    elif side == "right-to-left":
        line = f.T @ np.array([u, v, 1.0])
    else:
        raise ValueError(f"side must be left-to-right or right-to-left, got {side!r}")
    scale = math.hypot(line[0], line[1])
    if scale <= EPIPOLE_TOL * max(1.0, np.linalg.norm(f) * math.hypot(u, v, 1.0)):
        raise DegenerateLine(f"point ({u}, {v}) is (near) the epipole")
    line = line / scale
    return EpipolarLine(float(line[0]), float(line[1]), float(line[2]))


def epiline_report(pairs: list[PairRecord], keypoints: list[KeypointRecord],
                   sources: list[tuple[str, dict[tuple[str, str], np.ndarray]]],
                   image_size: tuple[int, int] | None = None) -> list[EpilineRecord]:
    """Lines + residuals for every (pair, matched keypoint, F source).

    Keypoints correspond across a pair when they share keypoint_id. For each
    correspondence the line of the first-image point is drawn in the second
    image and the residual is the distance of the second-image point to it.
    `sources` maps a source label (gt_pose, predicted_pose, external, ...) to
    per-pair fundamental matrices; pairs missing from a source are skipped.
    """
    if not keypoints:
        return []
    by_image: dict[str, dict[str, KeypointRecord]] = {}
    for kp in keypoints:
        by_image.setdefault(kp.image, {})[kp.keypoint_id] = kp
    records: list[EpilineRecord] = []
    for pair in pairs:
        kps_a = by_image.get(pair.image_a, {})
        kps_b = by_image.get(pair.image_b, {})
        shared = sorted(set(kps_a) & set(kps_b), key=natural_sort_key)
        if not shared:
            raise MissingKeypoints(
                f"no shared keypoint ids for pair {pair.image_a} / {pair.image_b}")
        pair_key = (pair.image_a, pair.image_b)
        pair_tag = f"{pair.image_a}::{pair.image_b}"
        for source_name, matrices in sources:
            f = matrices.get(pair_key)
            if f is None:
                continue
            for kid in shared:
                ka, kb = kps_a[kid], kps_b[kid]
                line = epipolar_line(f, (ka.u, ka.v), "left-to-right", image_size)
                records.append(EpilineRecord(
                    image_pair=pair_tag,
                    keypoint_id=kid,
                    source=source_name,
                    a=line.a, b=line.b, c=line.c,
                    residual_px=line.distance_to((kb.u, kb.v)),
                ))
    return records
