"""Evaluation: ranking quality, thresholded metrics, and latency.

The ranking metric is computed from midranks, which equals pair counting
(ties at half weight) exactly, not just to within floating-point noise:
for the dataset sizes used in tests both routes produce the same dyadic
rationals. The bootstrap band follows the convention of mean plus or minus
twice the resampled standard deviation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateLabels
from .verbalizer import render_prompt, verbalizer_score

__all__ = [
    "auc_roc",
    "bootstrap_auc",
    "Metrics",
    "confusion_matrix",
    "binary_metrics",
    "per_group_confusion",
    "evaluate_scores",
    "LatencyStats",
    "bench",
    "render_prompt",
    "verbalizer_score",
]


def _as_binary(values: Sequence[int], name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    out = arr.astype(np.int64, copy=False)
    if not np.array_equal(out, arr) or not np.isin(out, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return out


def auc_roc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Probability a positive outranks a negative, ties counting half."""
    y = _as_binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError(f"labels and scores differ in shape: {y.shape} vs {s.shape}")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(
            f"need both classes, got {n_pos} positive and {n_neg} negative"
        )
    ranks = rankdata(s, method="average")
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def bootstrap_auc(
    labels: Sequence[int],
    scores: Sequence[float],
    n_boot: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Mean and band (twice the standard deviation) of resampled AUC.

    Resamples drawing only one class are skipped; at least one resample
    must survive.
    """
    y = _as_binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    auc_roc(y, s)
    if n_boot < 1:
        raise ValueError(f"n_boot must be positive, got {n_boot}")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_boot):
        idx = rng.integers(0, y.size, size=y.size)
        yb = y[idx]
        if yb.min() == yb.max():
            continue
        values.append(auc_roc(yb, s[idx]))
    if not values:
        raise DegenerateLabels("every bootstrap resample drew a single class")
    arr = np.asarray(values)
    return float(arr.mean()), float(2.0 * arr.std())


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def confusion_matrix(labels: Sequence[int], preds: Sequence[int]) -> np.ndarray:
    """2x2 counts laid out [[tn, fp], [fn, tp]]."""
    y = _as_binary(labels, "labels")
    p = _as_binary(preds, "preds")
    if p.shape != y.shape:
        raise ValueError(f"labels and preds differ in shape: {y.shape} vs {p.shape}")
    out = np.zeros((2, 2), dtype=np.int64)
    np.add.at(out, (y, p), 1)
    return out


def binary_metrics(labels: Sequence[int], preds: Sequence[int]) -> Metrics:
    """Accuracy, precision, recall, F1; empty denominators score zero."""
    cm = confusion_matrix(labels, preds)
    tn, fp = int(cm[0, 0]), int(cm[0, 1])
    fn, tp = int(cm[1, 0]), int(cm[1, 1])
    total = tn + fp + fn + tp
    return Metrics(
        accuracy=(tp + tn) / total,
        precision=tp / (tp + fp) if tp + fp else 0.0,
        recall=tp / (tp + fn) if tp + fn else 0.0,
        f1=2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0,
    )


def per_group_confusion(
    groups: Sequence[str], labels: Sequence[int], preds: Sequence[int]
) -> dict[str, np.ndarray]:
    """Confusion matrix per group key (typically one per wiki)."""
    if not (len(groups) == len(labels) == len(preds)):
        raise ValueError("groups, labels, and preds must align")
    keys = np.asarray(groups)
    y = _as_binary(labels, "labels")
    p = _as_binary(preds, "preds")
    out: dict[str, np.ndarray] = {}
    for key in sorted(set(groups)):
        sel = keys == key
        out[key] = confusion_matrix(y[sel], p[sel])
    return out


def evaluate_scores(
    labels: Sequence[int],
    scores: Sequence[float],
    threshold: float = 0.5,
    n_boot: int = 1000,
    seed: int = 0,
) -> dict:
    """Full report: ranking quality with bootstrap band plus thresholded metrics."""
    y = _as_binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    preds = (s >= threshold).astype(np.int64)
    auc = auc_roc(y, s)
    mean, band = bootstrap_auc(y, s, n_boot=n_boot, seed=seed)
    report = {
        "auc": auc,
        "auc_bootstrap_mean": mean,
        "auc_bootstrap_band": band,
        "threshold": threshold,
        "confusion": confusion_matrix(y, preds).tolist(),
    }
    report.update(binary_metrics(y, preds).as_dict())
    return report


@dataclass(frozen=True)
class LatencyStats:
    times: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.times))

    @property
    def median(self) -> float:
        return float(np.median(self.times))

    @property
    def p95(self) -> float:
        return float(np.percentile(self.times, 95))

    @property
    def best(self) -> float:
        return float(np.min(self.times))


def bench(fn: Callable[[], object], repeats: int = 30, warmup: int = 3) -> LatencyStats:
    """Wall-clock seconds per call of fn, after warmup calls."""
    if repeats < 1:
        raise ValueError(f"repeats must be positive, got {repeats}")
    if warmup < 0:
        raise ValueError(f"warmup must be non-negative, got {warmup}")
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return LatencyStats(times=tuple(times))
