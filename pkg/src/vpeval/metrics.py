"""Binary classification metrics with explicit tie and degenerate conventions.

Label 1 = malignant = positive throughout. AUROC uses the midrank
Mann-Whitney formulation (tied pairs count 0.5); AUPRC is step-wise average
precision with tie blocks processed as a single step at block-end precision.
Zero denominators yield 0 for precision/F1/MCC and are flagged in the
report; metrics that are mathematically undefined for the given split raise
UndefinedMetricError instead of returning NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedMetricError, ValidationError

# Table-style column order for serialized reports.
METRIC_COLUMNS = (
    "auroc",
    "auprc",
    "f1",
    "precision",
    "recall",
    "accuracy",
    "balanced_accuracy",
    "mcc",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class DerivedScalars:
    precision: float
    recall: float
    f1: float
    accuracy: float
    balanced_accuracy: float
    mcc: float
    zero_division: tuple[str, ...]


@dataclass(frozen=True)
class MetricsReport:
    auroc: float
    auprc: float
    f1: float
    precision: float
    recall: float
    accuracy: float
    balanced_accuracy: float
    mcc: float
    n_pos: int
    n_neg: int
    zero_division: tuple[str, ...] = ()

    def csv_values(self) -> list[float]:
        return [getattr(self, name) for name in METRIC_COLUMNS]


def _as_binary(values: Sequence[int], name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D sequence")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


def _as_scores(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("scores must be a non-empty 1-D sequence")
    if not np.isfinite(arr).all():
        raise ValidationError("scores must be finite")
    return arr


def confusion(labels: Sequence[int], preds: Sequence[int]) -> ConfusionMatrix:
    y = _as_binary(labels, "labels")
    p = _as_binary(preds, "preds")
    if y.shape != p.shape:
        raise ValidationError(f"length mismatch: {y.size} labels vs {p.size} preds")
    tp = int(((y == 1) & (p == 1)).sum())
    fp = int(((y == 0) & (p == 1)).sum())
    tn = int(((y == 0) & (p == 0)).sum())
    fn = int(((y == 1) & (p == 0)).sum())
    return ConfusionMatrix(tp, fp, tn, fn)


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average rank of their block."""
    n = scores.size
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    boundaries = np.nonzero(np.diff(s))[0]
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries, [n - 1]))
    mid = (starts + ends) / 2.0 + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(mid, ends - starts + 1)
    return ranks


def auroc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Probability that a random positive outranks a random negative,
    ties counting one half: rank-sum over positives, O(n log n)."""
    y = _as_binary(labels, "labels")
    s = _as_scores(scores)
    if y.shape != s.shape:
        raise ValidationError(f"length mismatch: {y.size} labels vs {s.size} scores")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(f"AUROC undefined: {n_pos} positives, {n_neg} negatives")
    ranks = _midranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Average precision over distinct thresholds, descending; a tie block
    contributes one step at its block-end precision."""
    y = _as_binary(labels, "labels")
    s = _as_scores(scores)
    if y.shape != s.shape:
        raise ValidationError(f"length mismatch: {y.size} labels vs {s.size} scores")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC undefined: no positive labels")
    order = np.argsort(-s, kind="mergesort")
    s_desc = s[order]
    y_desc = y[order]
    ap = 0.0
    tp = 0
    fp = 0
    r_prev = 0.0
    i = 0
    n = y.size
    while i < n:
        j = i
        while j + 1 < n and s_desc[j + 1] == s_desc[i]:
            j += 1
        block = y_desc[i : j + 1]
        tp += int(block.sum())
        fp += block.size - int(block.sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - r_prev) * precision
        r_prev = recall
        i = j + 1
    return float(ap)


def derived_scalars(cm: ConfusionMatrix) -> DerivedScalars:
    """Textbook confusion-matrix scalars with the zero-denominator convention."""
    if cm.total == 0:
        raise ValidationError("confusion matrix is empty")
    if min(cm.tp, cm.fp, cm.tn, cm.fn) < 0:
        raise ValidationError(f"negative counts in {cm}")
    n_pos = cm.tp + cm.fn
    n_neg = cm.tn + cm.fp
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"balanced accuracy undefined: {n_pos} positives, {n_neg} negatives"
        )
    flagged = []

    if cm.tp + cm.fp == 0:
        precision = 0.0
        flagged.append("precision")
    else:
        precision = cm.tp / (cm.tp + cm.fp)
    recall = cm.tp / n_pos

    if precision + recall == 0.0:
        f1 = 0.0
        flagged.append("f1")
    else:
        f1 = 2.0 * precision * recall / (precision + recall)

    accuracy = (cm.tp + cm.tn) / cm.total
    balanced_accuracy = (recall + cm.tn / n_neg) / 2.0

    den = (cm.tp + cm.fp) * n_pos * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    if den == 0:
        mcc = 0.0
        flagged.append("mcc")
    else:
        mcc = (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(den)

    return DerivedScalars(precision, recall, f1, accuracy, balanced_accuracy, mcc, tuple(flagged))


def full_report(
    labels: Sequence[int], scores: Sequence[float], threshold: float = 0.5
) -> MetricsReport:
    """All eight metrics from labels and continuous scores; hard decisions
    are scores >= threshold."""
    y = _as_binary(labels, "labels")
    s = _as_scores(scores)
    if y.shape != s.shape:
        raise ValidationError(f"length mismatch: {y.size} labels vs {s.size} scores")
    preds = (s >= threshold).astype(np.int64)
    cm = confusion(y, preds)
    scalars = derived_scalars(cm)
    return MetricsReport(
        auroc=auroc(y, s),
        auprc=auprc(y, s),
        f1=scalars.f1,
        precision=scalars.precision,
        recall=scalars.recall,
        accuracy=scalars.accuracy,
        balanced_accuracy=scalars.balanced_accuracy,
        mcc=scalars.mcc,
        n_pos=int(y.sum()),
        n_neg=int(y.size - y.sum()),
        zero_division=scalars.zero_division,
    )
