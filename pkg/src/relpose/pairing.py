"""Sequence-aware image pair generation with two ground-truth label sets.

Pairs are always intra-sequence, stored as (earlier frame, later frame) in
sequence order, and never duplicated in either order. Sampling is seeded per
sequence, so output is reproducible regardless of how sequences are scheduled.
"""

from __future__ import annotations

import posixpath
import warnings
import zlib
from dataclasses import dataclass

import numpy as np

from .datafiles import DatasetPoseRecord, PairRecord
from .errors import DegenerateTranslation
from .poses import AbsolutePose, RelativePose, relative_pose
from .rotations import quat_canonical, quat_conjugate, quat_to_rotmat
from .trajectory import natural_sort_key

MODES = ("random", "consecutive")

# below this relative-translation norm a pair is dropped as stationary
DEGENERATE_BASELINE = 1e-9


@dataclass
class PairingConfig:
    pairs_per_image: int = 8
    max_index_gap: int | None = None
    rng_seed: int = 0
    mode: str = "random"

    def __post_init__(self):
        if self.pairs_per_image < 1:
            raise ValueError("pairs_per_image must be positive")
        if self.max_index_gap is not None and self.max_index_gap < 1:
            raise ValueError("max_index_gap must be positive or None")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


def group_by_sequence(records: list[DatasetPoseRecord]) -> dict[str, list[DatasetPoseRecord]]:
    """Group pose records by the directory part of their image path."""
    groups: dict[str, list[DatasetPoseRecord]] = {}
    for rec in records:
        seq = posixpath.dirname(rec.image_path)
        groups.setdefault(seq, []).append(rec)
    for seq in groups:
        groups[seq].sort(key=lambda r: natural_sort_key(r.image_path))
    return groups


def make_label_sets(rel: RelativePose) -> tuple[RelativePose, RelativePose]:
    """Split a relative pose into (normalized-translation, metric-translation) labels."""
    norm = float(np.linalg.norm(rel.translation))
    if norm <= DEGENERATE_BASELINE:
        raise DegenerateTranslation(
            f"translation norm {norm!r} too small to normalize")
    first = RelativePose(rel.rotation, rel.translation / norm)
    second = RelativePose(rel.rotation, rel.translation)
    return first, second


def _sample_partner_indices(n: int, cfg: PairingConfig,
                            rng: np.random.Generator) -> list[tuple[int, int]]:
    """Pick index pairs (i, j), i < j, for one sequence of n frames.

    Each image's turn samples up to pairs_per_image partners uniformly without
    replacement from frames not yet paired with it, taking earlier frames
    first: their own turns have passed, so this is the last opportunity to
    emit those pairs. With quota >= n-1 this provably emits every eligible
    pair; smaller quotas stay within the per-turn cap.
    """
    emitted: set[tuple[int, int]] = set()
    ordered: list[tuple[int, int]] = []
    gap = cfg.max_index_gap
    for i in range(n):
        def unpaired(j: int) -> bool:
            return (gap is None or abs(i - j) <= gap) and (min(i, j), max(i, j)) not in emitted

        last_chance = [j for j in range(i) if unpaired(j)]
        later = [j for j in range(i + 1, n) if unpaired(j)]
        quota = cfg.pairs_per_image
        chosen: list[int] = []
        for pool in (last_chance, later):
            take = min(quota, len(pool))
            if take:
                idx = rng.choice(len(pool), size=take, replace=False)
                chosen += [pool[c] for c in sorted(idx)]
                quota -= take
        for j in chosen:
            pair = (min(i, j), max(i, j))
            emitted.add(pair)
            ordered.append(pair)
    return ordered


def _consecutive_indices(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def _as_pose(rec: DatasetPoseRecord) -> AbsolutePose:
    return AbsolutePose(rec.rotation, rec.translation, frame_id=rec.image_path)


def generate_pairs(records: list[DatasetPoseRecord],
                   cfg: PairingConfig) -> tuple[list[PairRecord], dict]:
    """Generate labeled training pairs from absolute poses.

    Returns the pair rows plus a generation summary (counts, drops, seed).
    Sequences with fewer than 2 frames are skipped with a warning; pairs whose
    relative translation is numerically zero are dropped and counted.
    """
    groups = group_by_sequence(records)
    pairs: list[PairRecord] = []
    dropped = 0
    skipped_sequences = 0
    for seq_id in sorted(groups):
        frames = groups[seq_id]
        if len(frames) < 2:
            skipped_sequences += 1
            warnings.warn(f"sequence {seq_id!r} has {len(frames)} frame(s), skipped")
            continue
        if cfg.mode == "consecutive":
            index_pairs = _consecutive_indices(len(frames))
        else:
            rng = np.random.default_rng([cfg.rng_seed, zlib.crc32(seq_id.encode())])
            index_pairs = _sample_partner_indices(len(frames), cfg, rng)
        for i, j in index_pairs:
            rel = relative_pose(_as_pose(frames[i]), _as_pose(frames[j]))
            try:
                first, second = make_label_sets(rel)
            except DegenerateTranslation:
                dropped += 1
                continue
            pairs.append(PairRecord(
                image_a=frames[i].image_path,
                image_b=frames[j].image_path,
                sequence_id=seq_id,
                rotation=rel.rotation,
                translation_metric=second.translation,
                translation_normalized=first.translation,
            ))
    summary = {
        "sequences": len(groups),
        "skipped_short_sequences": skipped_sequences,
        "frames": len(records),
        "pairs": len(pairs),
        "dropped_degenerate": dropped,
        "pairs_per_image": cfg.pairs_per_image,
        "max_index_gap": cfg.max_index_gap,
        "mode": cfg.mode,
        "seed": cfg.rng_seed,
    }
    return pairs, summary


def mirror_pairs(pairs: list[PairRecord]) -> list[PairRecord]:
    """Append the reversed direction of every pair, with labels recomputed
    for the swapped order. Doubles the dataset; the result intentionally
    contains both orders of each image pair."""
    out = list(pairs)
    for p in pairs:
        r = quat_to_rotmat(p.rotation)
        t_rev = -(r.T @ p.translation_metric)
        q_rev = quat_canonical(quat_conjugate(p.rotation))
        out.append(PairRecord(
            image_a=p.image_b,
            image_b=p.image_a,
            sequence_id=p.sequence_id,
            rotation=q_rev,
            translation_metric=t_rev,
            translation_normalized=t_rev / np.linalg.norm(t_rev),
        ))
    return out
