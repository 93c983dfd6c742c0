"""Readers and writers for the toolkit's on-disk formats.

All CSV files have a single header row and use 17-significant-digit float
formatting so that values round-trip exactly through IEEE doubles. Readers
accept a path or an open text file; parse_* functions also accept the file
content as a string.
"""

from __future__ import annotations

import csv
import math
from contextlib import nullcontext
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import DegenerateTranslation, NonFiniteValue, ParseError

POSE_HEADER = ["image", "qw", "qx", "qy", "qz", "tx", "ty", "tz"]
PAIRS_HEADER = [
    "image_a", "image_b", "sequence_id",
    "qw", "qx", "qy", "qz",
    "tx", "ty", "tz",
    "tnx", "tny", "tnz",
]
PREDICTIONS_HEADER = ["image_a", "image_b", "qw", "qx", "qy", "qz", "tx", "ty", "tz"]
KEYPOINTS_HEADER = ["image", "u", "v", "keypoint_id"]
LINES_HEADER = ["image_pair", "keypoint_id", "source", "a", "b", "c", "residual_px"]

# max deviation of a stored unit translation from norm 1
UNIT_NORM_TOL = 1e-9


def fmt(value: float) -> str:
    """Serialize a real number with enough digits for exact round-trip."""
    return format(float(value), ".17g")


@dataclass
class DatasetPoseRecord:
    image_path: str
    rotation: np.ndarray     # (qw, qx, qy, qz)
    translation: np.ndarray  # meters


@dataclass
class PairRecord:
    image_a: str
    image_b: str
    sequence_id: str
    rotation: np.ndarray                # shared by both label sets
    translation_metric: np.ndarray
    translation_normalized: np.ndarray


@dataclass
class PredictionRecord:
    image_a: str
    image_b: str
    rotation: np.ndarray
    translation: np.ndarray


@dataclass
class KeypointRecord:
    image: str
    u: float
    v: float
    keypoint_id: str


@dataclass
class EpilineRecord:
    image_pair: str   # "image_a::image_b"
    keypoint_id: str
    source: str       # gt_pose | predicted_pose | external
    a: float
    b: float
    c: float
    residual_px: float


def _opened(target, mode: str):
    if hasattr(target, "read") or hasattr(target, "write"):
        return nullcontext(target)
    return open(target, mode, newline="")


def _iter_lines(source: str | IO[str] | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    return source


def _parse_float(text: str, column: str, source: str, lineno: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"bad value for {column}: {text!r}", source, lineno) from None
    if not math.isfinite(value):
        raise NonFiniteValue(f"non-finite value for {column}: {text!r}", source, lineno)
    return value


def parse_landmark_poses(source, name: str = "poses.txt") -> list[DatasetPoseRecord]:
    """Parse a landmark-style pose list: 3 header lines, then rows of

        ImageFile X Y Z W P Q R

    with position (X, Y, Z) and rotation quaternion (W, P, Q, R) = (qw, qx, qy, qz).
    """
    records: list[DatasetPoseRecord] = []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        if lineno <= 3:
            continue
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 8:
            raise ParseError(
                f"pose row needs 8 fields (image x y z w p q r), got {len(fields)}",
                name,
                lineno,
            )
        values = [_parse_float(f, c, name, lineno)
                  for f, c in zip(fields[1:], ["x", "y", "z", "w", "p", "q", "r"])]
        records.append(DatasetPoseRecord(
            image_path=fields[0],
            rotation=np.array(values[3:7]),
            translation=np.array(values[0:3]),
        ))
    return records


def write_landmark_poses(records: list[DatasetPoseRecord], target,
                         header: str = "toolkit pose export") -> None:
    with _opened(target, "w") as fh:
        fh.write(f"{header}\n\n{'ImageFile X Y Z W P Q R'}\n")
        for r in records:
            t, q = r.translation, r.rotation
            fh.write(" ".join([r.image_path] + [fmt(v) for v in (*t, *q)]) + "\n")


def write_pose_csv(records: list[DatasetPoseRecord], target) -> None:
    with _opened(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POSE_HEADER)
        for r in records:
            writer.writerow([r.image_path] + [fmt(v) for v in r.rotation]
                            + [fmt(v) for v in r.translation])


def _check_header(row: list[str] | None, expected: list[str], name: str) -> None:
    if row != expected:
        raise ParseError(f"expected header {','.join(expected)}, got {row}", name, 1)


def _read_header(reader, name: str) -> list[str] | None:
    try:
        return next(reader, None)
    except csv.Error as exc:
        raise ParseError(f"malformed CSV: {exc}", name, 1) from None


def _csv_rows(reader, name: str):
    """Iterate csv rows, converting low-level csv errors (NUL bytes,
    oversized fields) into ParseError."""
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            raise ParseError(f"malformed CSV: {exc}", name, reader.line_num) from None
        yield row


def read_pose_csv(source, name: str = "poses.csv") -> list[DatasetPoseRecord]:
    with _opened(source, "r") as fh:
        reader = csv.reader(fh)
        _check_header(_read_header(reader, name), POSE_HEADER, name)
        records = []
        for row in _csv_rows(reader, name):
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != len(POSE_HEADER):
                raise ParseError(f"expected {len(POSE_HEADER)} columns, got {len(row)}",
                                 name, lineno)
            values = [_parse_float(v, c, name, lineno)
                      for v, c in zip(row[1:], POSE_HEADER[1:])]
            records.append(DatasetPoseRecord(row[0], np.array(values[0:4]),
                                             np.array(values[4:7])))
    return records


def write_pairs_csv(records: list[PairRecord], target) -> None:
    with _opened(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PAIRS_HEADER)
        for r in records:
            writer.writerow(
                [r.image_a, r.image_b, r.sequence_id]
                + [fmt(v) for v in r.rotation]
                + [fmt(v) for v in r.translation_metric]
                + [fmt(v) for v in r.translation_normalized]
            )


def read_pairs_csv(source, name: str = "pairs.csv") -> list[PairRecord]:
    with _opened(source, "r") as fh:
        reader = csv.reader(fh)
        _check_header(_read_header(reader, name), PAIRS_HEADER, name)
        records = []
        for row in _csv_rows(reader, name):
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != len(PAIRS_HEADER):
                raise ParseError(f"expected {len(PAIRS_HEADER)} columns, got {len(row)}",
                                 name, lineno)
            values = [_parse_float(v, c, name, lineno)
                      for v, c in zip(row[3:], PAIRS_HEADER[3:])]
            tn = np.array(values[7:10])
            if abs(np.linalg.norm(tn) - 1.0) > UNIT_NORM_TOL:
                raise DegenerateTranslation(
                    f"{name}:{lineno}: normalized translation has norm "
                    f"{np.linalg.norm(tn)!r}, expected 1"
                )
            records.append(PairRecord(row[0], row[1], row[2], np.array(values[0:4]),
                                      np.array(values[4:7]), tn))
    return records


def write_predictions_csv(records: list[PredictionRecord], target) -> None:
    with _opened(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for r in records:
            writer.writerow([r.image_a, r.image_b]
                            + [fmt(v) for v in r.rotation]
                            + [fmt(v) for v in r.translation])


def read_predictions_csv(source, name: str = "predictions.csv") -> list[PredictionRecord]:
    with _opened(source, "r") as fh:
        reader = csv.reader(fh)
        _check_header(_read_header(reader, name), PREDICTIONS_HEADER, name)
        records = []
        for row in _csv_rows(reader, name):
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != len(PREDICTIONS_HEADER):
                raise ParseError(
                    f"expected {len(PREDICTIONS_HEADER)} columns, got {len(row)}",
                    name, lineno)
            values = [_parse_float(v, c, name, lineno)
                      for v, c in zip(row[2:], PREDICTIONS_HEADER[2:])]
            records.append(PredictionRecord(row[0], row[1], np.array(values[0:4]),
                                            np.array(values[4:7])))
    return records


def write_keypoints_csv(records: list[KeypointRecord], target) -> None:
    with _opened(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(KEYPOINTS_HEADER)
        for r in records:
            writer.writerow([r.image, fmt(r.u), fmt(r.v), r.keypoint_id])


def read_keypoints_csv(source, name: str = "keypoints.csv") -> list[KeypointRecord]:
    with _opened(source, "r") as fh:
        reader = csv.reader(fh)
        _check_header(_read_header(reader, name), KEYPOINTS_HEADER, name)
        records = []
        for row in _csv_rows(reader, name):
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != len(KEYPOINTS_HEADER):
                raise ParseError(f"expected {len(KEYPOINTS_HEADER)} columns, got {len(row)}",
                                 name, lineno)
            records.append(KeypointRecord(
                row[0],
                _parse_float(row[1], "u", name, lineno),
                _parse_float(row[2], "v", name, lineno),
                row[3],
            ))
    return records


def write_epilines_csv(records: list[EpilineRecord], target) -> None:
    with _opened(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LINES_HEADER)
        for r in records:
            writer.writerow([r.image_pair, r.keypoint_id, r.source,
                             fmt(r.a), fmt(r.b), fmt(r.c), fmt(r.residual_px)])


def write_features_csv(keys: list[tuple[str, str]], features: np.ndarray, target) -> None:
    """Write per-pair feature vectors: columns image_a, image_b, f0..f{D-1}."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or len(keys) != features.shape[0]:
        raise ValueError("features must be 2-D with one row per key")
    with _opened(target, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_a", "image_b"]
                        + [f"f{i}" for i in range(features.shape[1])])
        for (a, b), row in zip(keys, features):
            writer.writerow([a, b] + [fmt(v) for v in row])


def read_features_csv(source, name: str = "features.csv") -> tuple[list[tuple[str, str]], np.ndarray]:
    with _opened(source, "r") as fh:
        reader = csv.reader(fh)
        header = _read_header(reader, name)
        if (header is None or len(header) < 3 or header[:2] != ["image_a", "image_b"]
                or header[2:] != [f"f{i}" for i in range(len(header) - 2)]):
            raise ParseError("expected header image_a,image_b,f0,...", name, 1)
        dim = len(header) - 2
        keys: list[tuple[str, str]] = []
        rows: list[list[float]] = []
        for row in _csv_rows(reader, name):
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != dim + 2:
                raise ParseError(f"expected {dim + 2} columns, got {len(row)}", name, lineno)
            keys.append((row[0], row[1]))
            rows.append([_parse_float(v, f"f{i}", name, lineno)
                         for i, v in enumerate(row[2:])])
    return keys, np.array(rows, dtype=float).reshape(len(keys), dim)


def parse_external_fundamental(source, name: str = "F.txt") -> np.ndarray:
    """Parse an externally estimated fundamental matrix given as 9 numbers
    (row-major), separated by whitespace and/or commas."""
    if not isinstance(source, str):
        source = source.read()
    fields = source.replace(",", " ").split()
    if len(fields) != 9:
        raise ParseError(f"expected 9 numbers, got {len(fields)}", name, 1)
    values = [_parse_float(f, f"F[{i}]", name, 1) for i, f in enumerate(fields)]
    return np.array(values).reshape(3, 3)
