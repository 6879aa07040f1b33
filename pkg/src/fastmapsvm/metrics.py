"""Confusion matrices, derived scores, and ROC/AUC with class 1 as positive."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    """Counts from boolean-like truth and prediction arrays (truthy = positive)."""
    t = np.asarray(y_true).astype(bool)
    p = np.asarray(y_pred).astype(bool)
    if t.shape != p.shape:
        raise ValueError("y_true and y_pred differ in length")
    return ConfusionMatrix(
        tp=int(np.sum(t & p)),
        fp=int(np.sum(~t & p)),
        tn=int(np.sum(~t & ~p)),
        fn=int(np.sum(t & ~p)),
    )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    balanced_accuracy: float
    undefined: frozenset = field(default_factory=frozenset)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
        }


def _ratio(num, den, name, undefined: set) -> float:
    if den == 0:
        undefined.add(name)
        return 0.0
    return num / den


def classification_metrics(cm: ConfusionMatrix) -> Metrics:
    """Precision, recall, F1, accuracy, balanced accuracy.

    A 0/0 ratio is reported as 0 and its name is listed in ``undefined``.
    """
    undefined: set = set()
    precision = _ratio(cm.tp, cm.tp + cm.fp, "precision", undefined)
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", undefined)
    specificity = _ratio(cm.tn, cm.tn + cm.fp, "specificity", undefined)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", undefined)
    accuracy = _ratio(cm.tp + cm.tn, cm.total, "accuracy", undefined)
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        balanced_accuracy=(recall + specificity) / 2,
        undefined=frozenset(undefined),
    )


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """ROC curve over the unique score thresholds and its trapezoidal area.

    Tied scores enter the curve as one step. The area is accumulated in
    integer count units and divided once at the end, which makes it equal
    to the positive/negative pair-ordering probability (ties counted as 1/2)
    without rounding differences.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes required for ROC analysis")

    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    thresholds, starts = np.unique(-s, return_index=True)
    thresholds = -thresholds
    ends = np.append(starts[1:], len(s))
    tp_steps = np.array([int(y[a:b].sum()) for a, b in zip(starts, ends)], dtype=np.int64)
    fp_steps = (ends - starts) - tp_steps

    tp_cum = np.concatenate([[0], np.cumsum(tp_steps)])
    fp_cum = np.concatenate([[0], np.cumsum(fp_steps)])
    # Trapezoids in count units: width fp_step, heights tp_before and tp_after.
    twice_area = int(np.sum(fp_steps * (tp_cum[:-1] + tp_cum[1:])))
    auc = twice_area / (2 * n_pos * n_neg)
    return RocCurve(
        fpr=fp_cum / n_neg,
        tpr=tp_cum / n_pos,
        thresholds=np.concatenate([[np.inf], thresholds]),
        auc=auc,
    )
