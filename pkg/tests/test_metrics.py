from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfcnn.metrics import (
    CSV_HEADER,
    ConfusionCounts,
    MetricReport,
    auc,
    auc_rank,
    confusion,
    roc_curve,
    se_sp_acc,
    se_sp_acc_exact,
)

seeds = st.integers(0, 2**31 - 1)


def random_set(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 80))
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    scores = rng.integers(0, int(rng.integers(1, 12)), n) / 10.0  # coarse grid forces ties
    return scores, labels


def test_confusion_trivial():
    assert confusion([1.0] * 4, [1] * 4, 0.5) == ConfusionCounts(4, 0, 0, 0)
    assert confusion([0.2, 0.9, 1.0], [0, 1, 0], 1.5) == ConfusionCounts(0, 2, 0, 1)


def test_confusion_hand_case():
    scores = [0.9, 0.5, 0.49, 0.1, 0.7, 0.5]
    labels = [1, 1, 1, 0, 0, 0]
    # predictions at >= 0.5: 1 1 0 0 1 1
    assert confusion(scores, labels, 0.5) == ConfusionCounts(TP=2, TN=1, FP=2, FN=1)


def test_confusion_length_mismatch():
    with pytest.raises(ValueError):
        confusion([0.1, 0.2], [1], 0.5)


def test_reference_counts():
    c = ConfusionCounts(TP=452, TN=1685, FP=121, FN=18)
    se, sp, acc = se_sp_acc_exact(c)
    assert acc == Fraction(2137, 2276)
    assert se == Fraction(452, 470) and sp == Fraction(1685, 1806)
    se, sp, acc = se_sp_acc(c)
    assert abs(acc - 0.9389) < 5e-5 and abs(se - 0.9617) < 5e-5 and abs(sp - 0.9330) < 5e-5


def test_undefined_metrics_are_none():
    assert se_sp_acc(ConfusionCounts(0, 3, 1, 0)) == (None, 0.75, 0.75)
    assert se_sp_acc(ConfusionCounts(0, 0, 0, 0)) == (None, None, None)
    assert se_sp_acc(ConfusionCounts(1, 1, 0, 0)) == (1.0, 1.0, 1.0)


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


@given(seeds)
def test_acc_is_prevalence_weighted_mix(seed):
    scores, labels = random_set(seed)
    c = confusion(scores, labels, 0.5)
    se, sp, acc = se_sp_acc_exact(c)
    assert c.total == len(labels)
    p = Fraction(int(labels.sum()), len(labels))
    assert acc == p * se + (1 - p) * sp


def test_roc_perfect_and_flat():
    curve = roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert (0.0, 1.0) in curve.points()
    assert auc(curve) == 1.0
    flat = roc_curve([0.3] * 5, [1, 0, 1, 0, 0])
    assert flat.points() == [(0.0, 0.0), (1.0, 1.0)]
    assert auc(flat) == 0.5 == auc_rank([0.3] * 5, [1, 0, 1, 0, 0])


def test_roc_hand_sweep():
    scores = [0.9, 0.7, 0.7, 0.4, 0.2]
    labels = [1, 0, 1, 1, 0]
    curve = roc_curve(scores, labels)
    # thresholds 0.9, 0.7 (tie of one pos and one neg), 0.4, 0.2
    assert curve.points() == [(0.0, 0.0), (0.0, 1 / 3), (0.5, 2 / 3), (0.5, 1.0), (1.0, 1.0)]
    assert curve.thresholds[0] == np.inf and list(curve.thresholds[1:]) == [0.9, 0.7, 0.4, 0.2]
    assert auc(curve) == pytest.approx(4.5 / 6)  # six pos/neg pairs, one tie


def test_single_class_rejected():
    with pytest.raises(ValueError):
        roc_curve([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auc_rank([0.1, 0.2], [0, 0])


@given(seeds)
def test_trapezoid_equals_rank_statistic(seed):
    scores, labels = random_set(seed)
    curve = roc_curve(scores, labels)
    assert abs(auc(curve) - auc_rank(scores, labels)) < 1e-12
    assert (np.diff(curve.fpr) >= 0).all() and (np.diff(curve.tpr) >= 0).all()
    assert curve.points()[0] == (0.0, 0.0) and curve.points()[-1] == (1.0, 1.0)


@given(seeds)
def test_monotone_transform_invariance(seed):
    scores, labels = random_set(seed)
    warped = np.exp(3.0 * scores) - 7.0
    a, b = roc_curve(scores, labels), roc_curve(warped, labels)
    assert a.points() == b.points()
    assert auc(a) == auc(b)


def test_report_csv_row():
    r = MetricReport.from_counts(ConfusionCounts(452, 1685, 121, 18), 0.9865)
    assert CSV_HEADER == ("TP", "TN", "FP", "FN", "Se", "Sp", "Acc", "AUC")
    assert r.csv_row() == ["452", "1685", "121", "18", "0.9617", "0.9330", "0.9389", "0.9865"]
    assert MetricReport.from_counts(ConfusionCounts(0, 2, 0, 0)).csv_row()[4] == "NA"


def test_report_from_scores_single_class_has_no_auc():
    r = MetricReport.from_scores([0.9, 0.1], [1, 1])
    assert r.auc is None and r.counts == ConfusionCounts(1, 0, 0, 1)
