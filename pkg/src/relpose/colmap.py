"""Parsers for COLMAP text models (images.txt / cameras.txt).

Only the text export is supported; binary models must be converted with
COLMAP's ``model_converter`` first. Lines starting with ``#`` are comments.
Image records span two physical lines: the pose line

    IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME

followed by one 2D-observation line, which is skipped. The rotation and
translation are COLMAP's world->camera projection (q', t').
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import DuplicateImageId, ParseError
from .validation import ensure_finite

# params expected per interpreted camera model; other models pass through
KNOWN_CAMERA_MODELS = {"SIMPLE_PINHOLE": 3, "PINHOLE": 4}


@dataclass
class ColmapImageRecord:
    image_id: int
    rotation: np.ndarray        # (qw, qx, qy, qz), world->camera
    translation_raw: np.ndarray  # t' in COLMAP's projection convention
    camera_id: int
    name: str


@dataclass
class ColmapCameraRecord:
    camera_id: int
    model_name: str
    width: int
    height: int
    params: list[float]


def _iter_lines(source: str | IO[str] | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    return source


def _floats(fields: list[str], source: str, lineno: int, what: str) -> np.ndarray:
    try:
        values = np.array([float(f) for f in fields])
    except ValueError as exc:
        raise ParseError(f"bad {what}: {exc}", source, lineno) from None
    try:
        return ensure_finite(values, what)
    except ParseError as exc:
        raise type(exc)(f"bad {what}: non-finite value", source, lineno) from None


def parse_colmap_images(source, name: str = "images.txt") -> list[ColmapImageRecord]:
    """Parse a COLMAP images.txt stream, preserving file order."""
    records: list[ColmapImageRecord] = []
    seen: set[int] = set()
    expect_points = False
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if expect_points:
            # observation line (possibly empty), skipped verbatim
            expect_points = False
            continue
        if not line:
            continue
        fields = line.split()
        if len(fields) < 10:
            raise ParseError(
                f"image line needs 10 fields (id qw qx qy qz tx ty tz camera_id name), got {len(fields)}",
                name,
                lineno,
            )
        try:
            image_id = int(fields[0])
            camera_id = int(fields[8])
        except ValueError as exc:
            raise ParseError(f"bad integer field: {exc}", name, lineno) from None
        if image_id in seen:
            raise DuplicateImageId(f"image id {image_id} appears twice", name, lineno)
        seen.add(image_id)
        q = _floats(fields[1:5], name, lineno, "quaternion")
        t = _floats(fields[5:8], name, lineno, "translation")
        image_name = " ".join(fields[9:])
        records.append(ColmapImageRecord(image_id, q, t, camera_id, image_name))
        expect_points = True
    return records


def parse_colmap_cameras(source, name: str = "cameras.txt") -> list[ColmapCameraRecord]:
    """Parse a COLMAP cameras.txt stream.

    Unknown camera models are accepted verbatim; only SIMPLE_PINHOLE and
    PINHOLE are interpreted downstream.
    """
    records: list[ColmapCameraRecord] = []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 4:
            raise ParseError(
                f"camera line needs at least 4 fields (id model width height params...), got {len(fields)}",
                name,
                lineno,
            )
        try:
            camera_id = int(fields[0])
            width = int(fields[2])
            height = int(fields[3])
        except ValueError as exc:
            raise ParseError(f"bad integer field: {exc}", name, lineno) from None
        model = fields[1]
        if width <= 0 or height <= 0:
            raise ParseError(f"width/height must be positive, got {width}x{height}", name, lineno)
        params = [float(v) for v in _floats(fields[4:], name, lineno, "camera params")]
        expected = KNOWN_CAMERA_MODELS.get(model)
        if expected is not None and len(params) != expected:
            raise ParseError(
                f"{model} expects {expected} params, got {len(params)}", name, lineno
            )
        records.append(ColmapCameraRecord(camera_id, model, width, height, params))
    return records
