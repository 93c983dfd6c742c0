"""Training protocols, checkpoints, and an estimator wrapper.

Two protocols share one loop:

* two-stage: the model first fits unit-norm translation labels, then is
  finetuned on metric translations (30 + 20 epochs by default);
* one-stage: metric translations from the start (50 epochs by default).

Rotation labels are the same canonical unit quaternions in both stages.
Training is a pure function of (seed, dataset, config): reruns produce
bitwise-identical parameters, which the checkpoint format preserves.
"""

from __future__ import annotations

import json
import time
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datafiles import PairRecord
from .errors import DegenerateTranslation, IdMismatch, ParseError
from .nn import Adam, PoseMlp, init_model, loss_and_gradients, predict_array
from .rotations import quat_canonical, quat_normalize
from .synthetic import SyntheticPairSet

CHECKPOINT_FORMAT = "pose-mlp-checkpoint"
CHECKPOINT_VERSION = 1

LABEL_NORMALIZED = "normalized"
LABEL_METRIC = "metric"


@dataclass
class TrainConfig:
    stage1_epochs: int = 30
    stage2_epochs: int = 20
    one_stage_epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.001
    squared_norms: bool = False
    reset_optimizer_between_stages: bool = True
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("stage1_epochs", "stage2_epochs", "one_stage_epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class PairDataset:
    """Feature vectors with both ground-truth label sets."""
    features: np.ndarray                 # (n, d)
    rotations: np.ndarray                # (n, 4) unit quaternions
    translations_metric: np.ndarray      # (n, 3)
    translations_normalized: np.ndarray  # (n, 3), unit rows

    def __len__(self) -> int:
        return self.features.shape[0]

    @classmethod
    def from_pair_set(cls, pair_set: SyntheticPairSet) -> "PairDataset":
        return cls(pair_set.features, pair_set.rotations, pair_set.translations,
                   pair_set.translations_normalized())

    @classmethod
    def from_records(cls, pairs: list[PairRecord], keys: list[tuple[str, str]],
                     features: np.ndarray) -> "PairDataset":
        """Join pair rows with a feature table keyed by (image_a, image_b)."""
        by_key = {k: i for i, k in enumerate(keys)}
        rows = []
        for p in pairs:
            key = (p.image_a, p.image_b)
            if key not in by_key:
                raise IdMismatch(f"no feature row for pair {key[0]} / {key[1]}")
            rows.append(by_key[key])
        idx = np.array(rows, dtype=int)
        return cls(
            features=np.asarray(features, dtype=float)[idx],
            rotations=np.array([p.rotation for p in pairs]),
            translations_metric=np.array([p.translation_metric for p in pairs]),
            translations_normalized=np.array([p.translation_normalized for p in pairs]),
        )


def _config_record(cfg: TrainConfig, mode: str, dataset: PairDataset) -> dict:
    return {
        "event": "config",
        "mode": mode,
        "stage1_epochs": cfg.stage1_epochs,
        "stage2_epochs": cfg.stage2_epochs,
        "one_stage_epochs": cfg.one_stage_epochs,
        "batch_size": cfg.batch_size,
        "learning_rate": cfg.learning_rate,
        "squared_norms": cfg.squared_norms,
        "reset_optimizer_between_stages": cfg.reset_optimizer_between_stages,
        "shuffle": cfg.shuffle,
        "seed": cfg.seed,
        "n_pairs": len(dataset),
        "feature_dim": int(dataset.features.shape[1]),
    }


def _run_stage(model: PoseMlp, dataset: PairDataset, cfg: TrainConfig,
               optimizer: Adam, rng: np.random.Generator, label_set: str,
               stage: int, first_epoch: int, n_epochs: int, log: list[dict]) -> None:
    if label_set == LABEL_NORMALIZED:
        t_ref_all = dataset.translations_normalized
    else:
        t_ref_all = dataset.translations_metric
    q_ref_all = dataset.rotations
    features = dataset.features
    n = len(dataset)
    for e in range(n_epochs):
        start_time = time.perf_counter()
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            value, grads = loss_and_gradients(
                model, features[idx], t_ref_all[idx], q_ref_all[idx],
                squared=cfg.squared_norms)
            model.set_param_list(optimizer.step(model.param_list(), grads))
            total += value
        log.append({
            "epoch": first_epoch + e,
            "stage": stage,
            "label_set": label_set,
            "loss": total / n,
            "wall_time_s": time.perf_counter() - start_time,
        })


def train_two_stage(model: PoseMlp, dataset: PairDataset,
                    cfg: TrainConfig) -> tuple[PoseMlp, list[dict]]:
    """Stage 1 on unit-translation labels, stage 2 finetunes on metric ones.

    Optimizer moments are reset at the stage boundary unless the config says
    to carry them over; either way the choice is recorded in the log.
    """
    log = [_config_record(cfg, "two-stage", dataset)]
    optimizer = Adam(cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    _run_stage(model, dataset, cfg, optimizer, rng, LABEL_NORMALIZED,
               stage=1, first_epoch=1, n_epochs=cfg.stage1_epochs, log=log)
    if cfg.reset_optimizer_between_stages:
        optimizer.reset()
    _run_stage(model, dataset, cfg, optimizer, rng, LABEL_METRIC,
               stage=2, first_epoch=cfg.stage1_epochs + 1,
               n_epochs=cfg.stage2_epochs, log=log)
    return model, log


def train_one_stage(model: PoseMlp, dataset: PairDataset,
                    cfg: TrainConfig) -> tuple[PoseMlp, list[dict]]:
    """Single stage on metric translation labels for one_stage_epochs."""
    log = [_config_record(cfg, "one-stage", dataset)]
    optimizer = Adam(cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    _run_stage(model, dataset, cfg, optimizer, rng, LABEL_METRIC,
               stage=1, first_epoch=1, n_epochs=cfg.one_stage_epochs, log=log)
    return model, log


def write_training_log(log: list[dict], target) -> None:
    """JSON-lines, one record per line, keys sorted for stable output."""
    ctx = nullcontext(target) if hasattr(target, "write") else open(target, "w")
    with ctx as fh:
        for record in log:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_training_log(source, name: str = "train_log.jsonl") -> list[dict]:
    ctx = nullcontext(source) if hasattr(source, "read") else open(source)
    records = []
    with ctx as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad log record: {exc}", name, lineno) from None
    return records


def save_checkpoint(model: PoseMlp, target) -> None:
    """Versioned JSON checkpoint; float repr round-trips doubles exactly and
    the layout is fully deterministic, so equal models give equal bytes."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": model.input_dim,
        "hidden_sizes": list(model.hidden_sizes),
        "seed": model.seed,
        "parameters": {
            "trunk_weights": [w.tolist() for w in model.trunk_weights],
            "trunk_biases": [b.tolist() for b in model.trunk_biases],
            "t_weight": model.t_weight.tolist(),
            "t_bias": model.t_bias.tolist(),
            "q_weight": model.q_weight.tolist(),
            "q_bias": model.q_bias.tolist(),
        },
    }
    data = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if hasattr(target, "write"):
        target.write(data)
    else:
        with open(target, "w") as fh:
            fh.write(data)


def load_checkpoint(source) -> PoseMlp:
    ctx = nullcontext(source) if hasattr(source, "read") else open(source)
    with ctx as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"checkpoint is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError("not a pose-mlp checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {payload.get('version')!r}")
    try:
        params = payload["parameters"]
        model = PoseMlp(int(payload["input_dim"]),
                        tuple(int(h) for h in payload["hidden_sizes"]),
                        int(payload["seed"]))
        model.trunk_weights = [np.array(w, dtype=float) for w in params["trunk_weights"]]
        model.trunk_biases = [np.array(b, dtype=float) for b in params["trunk_biases"]]
        model.t_weight = np.array(params["t_weight"], dtype=float)
        model.t_bias = np.array(params["t_bias"], dtype=float)
        model.q_weight = np.array(params["q_weight"], dtype=float)
        model.q_bias = np.array(params["q_bias"], dtype=float)
    except (KeyError, TypeError, ValueError, OverflowError) as exc:
        raise ParseError(f"malformed checkpoint: {exc}") from None
    for p in model.param_list():
        if not np.isfinite(p).all():
            raise ParseError("checkpoint contains non-finite parameters")
    return model


class RelativePoseRegressor(BaseEstimator, RegressorMixin):
    """Estimator over (features, pose labels) rows.

    X is a (n, d) feature matrix; y rows are (qw, qx, qy, qz, tx, ty, tz)
    with metric translation. The normalized-translation labels used by the
    first training stage are derived internally. predict returns rows in the
    same layout with a canonical unit rotation quaternion.
    """

    def __init__(self, hidden_sizes=(128, 128), mode="two-stage",
                 stage1_epochs=30, stage2_epochs=20, one_stage_epochs=50,
                 batch_size=64, learning_rate=0.001, squared_norms=False,
                 reset_optimizer_between_stages=True, shuffle=True,
                 random_state=0):
        self.hidden_sizes = hidden_sizes
        self.mode = mode
        self.stage1_epochs = stage1_epochs
        self.stage2_epochs = stage2_epochs
        self.one_stage_epochs = one_stage_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.squared_norms = squared_norms
        self.reset_optimizer_between_stages = reset_optimizer_between_stages
        self.shuffle = shuffle
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            stage1_epochs=self.stage1_epochs,
            stage2_epochs=self.stage2_epochs,
            one_stage_epochs=self.one_stage_epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            squared_norms=self.squared_norms,
            reset_optimizer_between_stages=self.reset_optimizer_between_stages,
            shuffle=self.shuffle,
            seed=self.random_state,
        )

    def fit(self, X, y):
        if self.mode not in ("two-stage", "one-stage"):
            raise ValueError(f"mode must be two-stage or one-stage, got {self.mode!r}")
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if y.ndim != 2 or y.shape[1] != 7:
            raise ValueError("y must have 7 columns (qw, qx, qy, qz, tx, ty, tz)")
        rotations = np.array([quat_canonical(quat_normalize(q)) for q in y[:, :4]])
        metric = y[:, 4:7]
        norms = np.linalg.norm(metric, axis=1)
        if np.any(norms <= 1e-9):
            raise DegenerateTranslation(
                "zero-translation rows cannot be normalized for stage 1")
        dataset = PairDataset(X, rotations, metric, metric / norms[:, None])

        cfg = self._config()
        model = init_model(X.shape[1], tuple(self.hidden_sizes), cfg.seed)
        if self.mode == "two-stage":
            model, log = train_two_stage(model, dataset, cfg)
        else:
            model, log = train_one_stage(model, dataset, cfg)
        self.model_ = model
        self.log_ = log
        self.loss_curve_ = [r["loss"] for r in log if "loss" in r]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return predict_array(self.model_, X)
