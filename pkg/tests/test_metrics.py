import numpy as np
import pytest

from fastmapsvm.metrics import ConfusionMatrix, classification_metrics, confusion_matrix, roc_auc

from oracles import auc_pairs


def test_confusion_counts():
    cm = confusion_matrix([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 1, 1, 1)
    assert cm.total == 5


def test_metrics_values():
    m = classification_metrics(ConfusionMatrix(tp=8, fp=2, tn=6, fn=4))
    assert m.precision == pytest.approx(0.8)
    assert m.recall == pytest.approx(8 / 12)
    assert m.f1 == pytest.approx(2 * 0.8 * (8 / 12) / (0.8 + 8 / 12))
    assert m.accuracy == pytest.approx(14 / 20)
    assert m.balanced_accuracy == pytest.approx(0.5 * (8 / 12 + 6 / 8))
    assert not m.undefined


def test_undefined_ratios_flagged():
    m = classification_metrics(ConfusionMatrix(tp=0, fp=0, tn=5, fn=0))
    assert m.precision == 0.0 and m.recall == 0.0
    assert {"precision", "recall"} <= m.undefined


def test_balanced_accuracy_equals_accuracy_when_balanced():
    m = classification_metrics(confusion_matrix([1] * 10 + [0] * 10, [1] * 7 + [0] * 3 + [0] * 8 + [1] * 2))
    assert m.balanced_accuracy == pytest.approx(m.accuracy)


def test_auc_perfect_and_reversed():
    assert roc_auc([0.9, 0.8, 0.1], [1, 1, 0]).auc == 1.0
    assert roc_auc([0.1, 0.2, 0.9], [1, 1, 0]).auc == 0.0
    assert roc_auc([0.5, 0.5], [1, 0]).auc == 0.5


def test_auc_equals_pair_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 60))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        scores = rng.integers(-5, 6, n) / 2.0  # many ties
        assert roc_auc(scores, labels).auc == auc_pairs(scores, labels)


def test_roc_endpoints(rng):
    s = rng.standard_normal(30)
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    r = roc_auc(s, y)
    assert (r.fpr[0], r.tpr[0], r.fpr[-1], r.tpr[-1]) == (0, 0, 1, 1)
    assert np.all(np.diff(r.fpr) >= 0) and np.all(np.diff(r.tpr) >= 0)


def test_auc_single_class():
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])


def test_f1_from_precision_and_recall():
    # precision 1.0 and recall 0.97 on 100 positives
    m = classification_metrics(ConfusionMatrix(tp=97, fp=0, tn=100, fn=3))
    assert (m.precision, m.recall) == (1.0, 0.97)
    assert m.f1 == pytest.approx(0.9848, abs=1e-4)


def test_perfect_counts():
    m = classification_metrics(ConfusionMatrix(tp=50, fp=0, tn=50, fn=0))
    assert m.as_dict()["precision"] == m.recall == m.f1 == m.accuracy == m.balanced_accuracy == 1.0


def test_degenerate_no_predictions():
    m = classification_metrics(ConfusionMatrix(tp=0, fp=0, tn=0, fn=10))
    assert m.precision == 0.0 and "precision" in m.undefined and m.recall == 0.0


def test_auc_small_example():
    s, y = [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]
    assert roc_auc(s, y).auc == auc_pairs(s, y) == 0.75
