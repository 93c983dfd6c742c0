"""Evaluation statistics: per-pair errors, medians, empirical CDFs,
box-plot summaries, and comparison tables.

Rotation error is the geodesic angle between unit quaternions in degrees;
translation error is the Euclidean distance in meters against the metric
labels. Quartiles use the exclusive median-of-halves rule (the median is
left out of both halves for odd counts) so numbers are reproducible across
implementations.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .datafiles import PairRecord, PredictionRecord, fmt
from .errors import EmptyInput, IdMismatch, ZeroBaseline
from .poses import rotation_error_deg, translation_error_m


@dataclass
class ErrorSample:
    pair_id: str  # "image_a::image_b"
    rotation_error_deg: float
    translation_error_m: float
    model_tag: str
    scene_tag: str


@dataclass
class CdfSeries:
    thresholds: np.ndarray  # sorted unique error values
    fractions: np.ndarray   # cumulative fractions, ending at exactly 1


@dataclass
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: list[float] = field(default_factory=list)


def score(predictions: list[PredictionRecord], labels: list[PairRecord],
          model_tag: str = "model") -> list[ErrorSample]:
    """Per-pair errors; every label pair must have exactly one prediction."""
    by_key: dict[tuple[str, str], PredictionRecord] = {}
    for p in predictions:
        key = (p.image_a, p.image_b)
        if key in by_key:
            raise IdMismatch(f"duplicate prediction for pair {key[0]} / {key[1]}")
        by_key[key] = p
    if len(predictions) != len(labels):
        raise IdMismatch(
            f"{len(predictions)} predictions for {len(labels)} labeled pairs")
    samples = []
    for label in labels:
        key = (label.image_a, label.image_b)
        pred = by_key.get(key)
        if pred is None:
            raise IdMismatch(f"no prediction for pair {key[0]} / {key[1]}")
        samples.append(ErrorSample(
            pair_id=f"{label.image_a}::{label.image_b}",
            rotation_error_deg=rotation_error_deg(pred.rotation, label.rotation),
            translation_error_m=translation_error_m(pred.translation,
                                                    label.translation_metric),
            model_tag=model_tag,
            scene_tag=label.sequence_id,
        ))
    return samples


def median_errors(samples: list[ErrorSample]) -> tuple[float, float]:
    """(median translation m, median rotation deg); even counts average the
    two central order statistics."""
    if not samples:
        raise EmptyInput("no error samples")
    t = np.median([s.translation_error_m for s in samples])
    r = np.median([s.rotation_error_deg for s in samples])
    return float(t), float(r)


def _metric_values(samples: list[ErrorSample], metric: str) -> np.ndarray:
    if metric == "rotation":
        return np.array([s.rotation_error_deg for s in samples])
    if metric == "translation":
        return np.array([s.translation_error_m for s in samples])
    raise ValueError(f"metric must be rotation or translation, got {metric!r}")


def cdf(samples: list[ErrorSample], metric: str) -> CdfSeries:
    """Empirical CDF over one error metric."""
    if not samples:
        raise EmptyInput("no error samples")
    values = np.sort(_metric_values(samples, metric))
    thresholds, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / values.size
    fractions[-1] = 1.0
    return CdfSeries(thresholds, fractions)


def _median_of(values: np.ndarray) -> float:
    return float(np.median(values))


def box_stats(values) -> BoxStats:
    """Five-number summary with exclusive quartiles and 1.5*IQR whiskers
    clamped to the data. A single observation degenerates to a zero-width box."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise EmptyInput("no values")
    med = _median_of(values)
    half = values.size // 2
    if values.size == 1:
        q1 = q3 = med
    else:
        q1 = _median_of(values[:half])
        q3 = _median_of(values[-half:])
    iqr = q3 - q1
    low_bound = q1 - 1.5 * iqr
    high_bound = q3 + 1.5 * iqr
    inside = values[(values >= low_bound) & (values <= high_bound)]
    whisker_low = float(inside[0])
    whisker_high = float(inside[-1])
    outliers = [float(v) for v in values[(values < low_bound) | (values > high_bound)]]
    return BoxStats(float(values[0]), q1, med, q3, float(values[-1]),
                    whisker_low, whisker_high, outliers)


def grouped_box_stats(samples: list[ErrorSample],
                      metric: str) -> dict[tuple[str, str], BoxStats]:
    """Box statistics per (scene_tag, model_tag) group."""
    groups: dict[tuple[str, str], list[ErrorSample]] = {}
    for s in samples:
        groups.setdefault((s.scene_tag, s.model_tag), []).append(s)
    return {key: box_stats(_metric_values(group, metric))
            for key, group in sorted(groups.items())}


def percent_change(baseline: float, ours: float) -> float:
    """Improvement over a baseline: 100 * (baseline - ours) / baseline."""
    if baseline <= 0:
        raise ZeroBaseline(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - ours) / baseline


def report_rows(samples: list[ErrorSample]) -> list[dict]:
    """Median summary per (scene_tag, model_tag), stable sorted."""
    groups: dict[tuple[str, str], list[ErrorSample]] = {}
    for s in samples:
        groups.setdefault((s.scene_tag, s.model_tag), []).append(s)
    rows = []
    for (scene, model), group in sorted(groups.items()):
        t_med, r_med = median_errors(group)
        rows.append({
            "scene": scene,
            "model": model,
            "pairs": len(group),
            "median_translation_m": t_med,
            "median_rotation_deg": r_med,
        })
    return rows


def render_metrics_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scene", "model", "pairs",
                     "median_translation_m", "median_rotation_deg"])
    for row in rows:
        writer.writerow([row["scene"], row["model"], row["pairs"],
                         fmt(row["median_translation_m"]),
                         fmt(row["median_rotation_deg"])])
    return buf.getvalue()


def render_text_table(rows: list[dict]) -> str:
    """Aligned text table; the median column reads like "1.51m, 2.93deg"
    with the degree sign."""
    header = ["scene", "model", "pairs", "median (t, r)"]
    body = [[row["scene"], row["model"], str(row["pairs"]),
             f"{row['median_translation_m']:.2f}m, {row['median_rotation_deg']:.2f}°"]
            for row in rows]
    widths = [max(len(header[c]), *(len(r[c]) for r in body)) if body else len(header[c])
              for c in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_report(samples: list[ErrorSample]) -> tuple[str, str]:
    """(metrics CSV text, aligned text table) for scored samples."""
    rows = report_rows(samples)
    return render_metrics_csv(rows), render_text_table(rows)


def write_cdf_csv(series: CdfSeries, target) -> None:
    rows = [["threshold", "fraction"]]
    rows += [[fmt(t), fmt(f)] for t, f in zip(series.thresholds, series.fractions)]
    _write_rows(rows, target)


def write_box_csv(stats_by_group: dict[tuple[str, str], BoxStats], target) -> None:
    rows = [["scene", "model", "min", "q1", "median", "q3", "max",
             "whisker_low", "whisker_high", "n_outliers"]]
    for (scene, model), b in sorted(stats_by_group.items()):
        rows.append([scene, model, fmt(b.minimum), fmt(b.q1), fmt(b.median),
                     fmt(b.q3), fmt(b.maximum), fmt(b.whisker_low),
                     fmt(b.whisker_high), str(len(b.outliers))])
    _write_rows(rows, target)


def _write_rows(rows: list[list[str]], target) -> None:
    if hasattr(target, "write"):
        writer = csv.writer(target, lineterminator="\n")
        writer.writerows(rows)
        return
    with open(target, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
