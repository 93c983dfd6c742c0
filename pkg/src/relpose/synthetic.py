"""Synthetic pair sets that stand in for CNN image features.

Each pair's feature vector is a fixed orthonormal mixing of its ground-truth
relative pose, features = A @ [t; q] + sigma * noise, so the regression task
is provably solvable (linear least squares recovers the labels exactly at
sigma = 0) while exercising the full training protocol at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datafiles import PairRecord
from .rotations import quat_canonical, quat_normalize

LABEL_DIM = 7  # [tx, ty, tz, qw, qx, qy, qz]


@dataclass
class SyntheticPairSet:
    features: np.ndarray       # (n, feature_dim)
    rotations: np.ndarray      # (n, 4) canonical unit quaternions
    translations: np.ndarray   # (n, 3) metric
    mixing: np.ndarray         # (feature_dim, 7) orthonormal columns
    noise_sigma: float
    seed: int

    def __len__(self) -> int:
        return self.features.shape[0]

    def translations_normalized(self) -> np.ndarray:
        norms = np.linalg.norm(self.translations, axis=1, keepdims=True)
        return self.translations / norms

    def labels(self) -> np.ndarray:
        """Stacked (qw, qx, qy, qz, tx, ty, tz) rows, metric translation."""
        return np.hstack([self.rotations, self.translations])


def make_synthetic(seed: int, n_pairs: int, feature_dim: int,
                   noise_sigma: float = 0.0) -> SyntheticPairSet:
    """Deterministic synthetic pair set; feature_dim must be >= 7 so the
    mixing matrix can have full column rank."""
    if feature_dim < LABEL_DIM:
        raise ValueError(f"feature_dim must be >= {LABEL_DIM}, got {feature_dim}")
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be positive, got {n_pairs}")
    rng = np.random.default_rng(seed)

    q, r = np.linalg.qr(rng.standard_normal((feature_dim, LABEL_DIM)))
    mixing = q * np.sign(np.diag(r))

    quats = rng.standard_normal((n_pairs, 4))
    quats = np.array([quat_canonical(quat_normalize(row)) for row in quats])

    translations = rng.uniform(-1.0, 1.0, size=(n_pairs, 3))
    # stationary pairs are rejected upstream in the real pipeline; keep the
    # synthetic set free of them too
    tiny = np.linalg.norm(translations, axis=1) < 1e-6
    while tiny.any():
        translations[tiny] = rng.uniform(-1.0, 1.0, size=(int(tiny.sum()), 3))
        tiny = np.linalg.norm(translations, axis=1) < 1e-6

    signal = np.hstack([translations, quats]) @ mixing.T
    features = signal + noise_sigma * rng.standard_normal((n_pairs, feature_dim))
    return SyntheticPairSet(features, quats, translations, mixing,
                            float(noise_sigma), int(seed))


def split_pair_set(pair_set: SyntheticPairSet,
                   n_train: int) -> tuple[SyntheticPairSet, SyntheticPairSet]:
    """Split into (train, test) along the pair axis, sharing the mixing matrix."""
    if not (0 < n_train < len(pair_set)):
        raise ValueError(f"n_train must be in (0, {len(pair_set)}), got {n_train}")

    def take(sl: slice) -> SyntheticPairSet:
        return SyntheticPairSet(pair_set.features[sl], pair_set.rotations[sl],
                                pair_set.translations[sl], pair_set.mixing,
                                pair_set.noise_sigma, pair_set.seed)

    return take(slice(0, n_train)), take(slice(n_train, len(pair_set)))


def to_pair_records(pair_set: SyntheticPairSet,
                    prefix: str = "synth") -> tuple[list[PairRecord], list[tuple[str, str]]]:
    """Pair rows (and their feature-file keys) for writing a synthetic set
    through the regular CSV formats."""
    records = []
    keys = []
    tn = pair_set.translations_normalized()
    for i in range(len(pair_set)):
        a = f"{prefix}/{i:05d}_a.png"
        b = f"{prefix}/{i:05d}_b.png"
        records.append(PairRecord(
            image_a=a, image_b=b, sequence_id=prefix,
            rotation=pair_set.rotations[i],
            translation_metric=pair_set.translations[i],
            translation_normalized=tn[i],
        ))
        keys.append((a, b))
    return records, keys
