"""Confusion counts, sensitivity/specificity/accuracy, ROC and AUC.

Strabismus (label 1) is the positive class and a score ``>= threshold``
predicts positive. ``auc`` integrates the ROC polyline; ``auc_rank`` is the
Mann-Whitney statistic and serves as an independent cross-check.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

CSV_HEADER = ("TP", "TN", "FP", "FN", "Se", "Sp", "Acc", "AUC")
UNDEFINED = "NA"


@dataclass(frozen=True)
class ConfusionCounts:
    TP: int
    TN: int
    FP: int
    FN: int

    def __post_init__(self):
        if min(self.TP, self.TN, self.FP, self.FN) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self):
        return self.TP + self.TN + self.FP + self.FN


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # thresholds[i] produced point i; the first is +inf

    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 (normal) or 1 (strabismus)")
    return scores, labels.astype(np.int64)


def _check_both_classes(labels):
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("ROC/AUC needs both positive and negative samples")
    return n_pos, len(labels) - n_pos


def confusion(scores, labels, threshold=0.5):
    scores, labels = _check(scores, labels)
    pred = scores >= threshold
    pos = labels == 1
    return ConfusionCounts(
        TP=int(np.sum(pred & pos)),
        TN=int(np.sum(~pred & ~pos)),
        FP=int(np.sum(pred & ~pos)),
        FN=int(np.sum(~pred & pos)),
    )


def _ratio(num, den):
    return None if den == 0 else Fraction(num, den)


def se_sp_acc_exact(c):
    """Exact rationals ``(Se, Sp, Acc)``; None marks an undefined metric."""
    return _ratio(c.TP, c.TP + c.FN), _ratio(c.TN, c.TN + c.FP), _ratio(c.TP + c.TN, c.total)


def se_sp_acc(c):
    """``(Se, Sp, Acc)`` as floats, None where a denominator is zero."""
    return tuple(None if v is None else float(v) for v in se_sp_acc_exact(c))


def roc_curve(scores, labels):
    """Sweep the threshold down through every distinct score.

    Tied scores enter together, so a tie between classes gives one diagonal
    segment. The curve starts at (0, 0) and ends at (1, 1).
    """
    scores, labels = _check(scores, labels)
    n_pos, n_neg = _check_both_classes(labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.r_[0, np.cumsum(y)[last]]
    fp = np.r_[0, np.cumsum(1 - y)[last]]
    return RocCurve(fpr=fp / n_neg, tpr=tp / n_pos, thresholds=np.r_[np.inf, s[last]])


def auc(curve):
    """Trapezoidal area under a RocCurve."""
    return float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1])) / 2.0)


def _midranks(x):
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    return ((upper - counts + 1 + upper) / 2.0)[inverse]


def auc_rank(scores, labels):
    """Mann-Whitney AUC: P(positive outranks negative), ties counted as one half."""
    scores, labels = _check(scores, labels)
    n_pos, n_neg = _check_both_classes(labels)
    rank_sum = _midranks(scores)[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _fmt(v):
    return UNDEFINED if v is None else f"{v:.4f}"


@dataclass(frozen=True)
class MetricReport:
    counts: ConfusionCounts
    se: float
    sp: float
    acc: float
    auc: float

    @classmethod
    def from_counts(cls, counts, auc_value=None):
        se, sp, acc = se_sp_acc(counts)
        return cls(counts, se, sp, acc, auc_value)

    @classmethod
    def from_scores(cls, scores, labels, threshold=0.5):
        counts = confusion(scores, labels, threshold)
        _, labels = _check(scores, labels)
        try:
            _check_both_classes(labels)
            area = auc(roc_curve(scores, labels))
        except ValueError:
            area = None
        return cls.from_counts(counts, area)

    def csv_row(self):
        c = self.counts
        return [str(c.TP), str(c.TN), str(c.FP), str(c.FN), _fmt(self.se), _fmt(self.sp), _fmt(self.acc), _fmt(self.auc)]
