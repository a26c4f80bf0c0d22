import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdperl.classifier import (ClassifierOracle, EvalMetrics, LogisticConfig, auc, confusion,
                               evaluate, metrics_from_confusion, train_classifier,
                               write_metrics_csv)
from sdperl.dataset import DataError, FeatureMatrix

from oracles import brute_auc


def _fm(X, y):
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    return FeatureMatrix([f"x{i}" for i in range(X.shape[1])], X, y)


def test_auc_examples():
    assert auc([1, 0, 1], [0.9, 0.8, 0.3]) == 0.5
    assert auc([0, 0, 1, 1], [0.1, 0.2, 0.3, 0.4]) == 1.0
    assert auc([0, 1, 0, 1], [0.7] * 4) == 0.5
    with pytest.raises(ValueError):
        auc([1, 1], [0.2, 0.3])


def test_auc_matches_brute_force_1000_cases():
    rng = np.random.default_rng(0)
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            continue
        # few distinct values so ties are common
        scores = rng.integers(0, 4, n) / 4.0 if rng.random() < 0.5 else rng.random(n)
        assert auc(labels, scores) == brute_auc(labels, scores)
        done += 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-5, 5)), min_size=2, max_size=30))
def test_auc_invariances(rows):
    labels = np.array([r[0] for r in rows])
    scores = np.array([r[1] for r in rows], dtype=float)
    if labels.min() == labels.max():
        return
    base = auc(labels, scores)
    assert auc(labels, np.exp(scores)) == base
    assert auc(labels, 3 * scores + 7) == base
    assert auc(1 - labels, -scores) == pytest.approx(base, abs=1e-15)


def test_confusion_formula_example():
    p, r, f1, _ = metrics_from_confusion(2, 1, 1, 0)
    assert (p, r, f1) == (pytest.approx(2 / 3), pytest.approx(2 / 3), pytest.approx(2 / 3))
    assert metrics_from_confusion(0, 0, 3, 4)[:3] == (0.0, 0.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40))
def test_confusion_oracle(pairs):
    labels = [a for a, _ in pairs]
    preds = [b for _, b in pairs]
    tp = sum(a and b for a, b in pairs)
    fp = sum((not a) and b for a, b in pairs)
    fn = sum(a and not b for a, b in pairs)
    tn = sum((not a) and not b for a, b in pairs)
    assert confusion(labels, preds) == (tp, fp, fn, tn)
    p, r, f1, acc = metrics_from_confusion(tp, fp, fn, tn)
    assert p == (tp / (tp + fp) if tp + fp else 0.0)
    assert r == (tp / (tp + fn) if tp + fn else 0.0)
    assert f1 == (2 * p * r / (p + r) if p + r else 0.0)
    assert acc == (tp + tn) / len(pairs)
    assert all(0.0 <= v <= 1.0 for v in (p, r, f1, acc))


def test_separable_training_accuracy():
    X = np.array([-1.0] * 10 + [1.0] * 10)
    data = _fm(X, [0] * 10 + [1] * 10)
    clf = train_classifier(data, [0])
    m = evaluate(clf, data)
    assert (m.accuracy, m.precision, m.recall, m.f1, m.auc) == (1.0, 1.0, 1.0, 1.0, 1.0)
    assert clf.weights.shape == (2,)


def test_null_feature_auc_near_half():
    rng = np.random.default_rng(4)
    for seed in range(5):
        X = rng.standard_normal(400)
        y = rng.integers(0, 2, 400)
        clf = train_classifier(_fm(X[:200], y[:200]), [0])
        assert abs(evaluate(clf, _fm(X[200:], y[200:])).auc - 0.5) <= 0.15


def test_retrain_is_bitwise_identical():
    rng = np.random.default_rng(1)
    data = _fm(rng.standard_normal((60, 5)), rng.integers(0, 2, 60))
    a = train_classifier(data, [4, 0, 2])
    b = train_classifier(data, [4, 0, 2])
    assert np.array_equal(a.weights, b.weights) and a.feature_subset == [4, 0, 2]


def test_zero_variance_column_passes_through():
    X = np.column_stack([np.ones(10), np.r_[np.zeros(5), np.ones(5)]])
    clf = train_classifier(_fm(X, [0] * 5 + [1] * 5), [0, 1])
    assert clf.sd[0] == 1.0 and np.isfinite(clf.weights).all()


def test_gradient_descent_reaches_regularised_optimum():
    # independent check: the stationarity condition of the L2 logistic objective
    rng = np.random.default_rng(2)
    data = _fm(rng.standard_normal((80, 3)), rng.integers(0, 2, 80))
    clf = train_classifier(data, [0, 1, 2], LogisticConfig(steps=20_000))
    Z = np.hstack([(data.X - clf.mean) / clf.sd, np.ones((80, 1))])
    p = 1 / (1 + np.exp(-Z @ clf.weights))
    grad = Z.T @ (p - data.y) / 80 + 1e-3 * np.r_[clf.weights[:-1], 0.0]
    assert np.abs(grad).max() < 1e-8


@pytest.mark.parametrize("subset", [[], [0, 0], [5]])
def test_bad_subsets(subset):
    with pytest.raises(ValueError):
        train_classifier(_fm(np.zeros((4, 2)), [0, 1, 0, 1]), subset)


def test_single_class_training_rejected():
    with pytest.raises(DataError):
        train_classifier(_fm(np.zeros(4), [0] * 4), [0])


def test_eval_without_positives_has_undefined_auc():
    data = _fm([-1.0, 1.0, -2.0, 2.0], [0, 1, 0, 1])
    m = evaluate(train_classifier(data, [0]), _fm([-1.0, -3.0], [0, 0]))
    assert m.auc is None and m.f1 == 0.0 and m.accuracy == 1.0
    assert m.get("auc") == 0.0


def test_oracle_order_invariant_and_cached():
    rng = np.random.default_rng(3)
    tr = _fm(rng.standard_normal((50, 6)), rng.integers(0, 2, 50))
    ev = _fm(rng.standard_normal((20, 6)), [0, 1] * 10)
    oracle = ClassifierOracle(tr, ev)
    s1, m1 = oracle([3, 1, 5])
    s2, m2 = oracle([5, 3, 1])
    assert s1 == s2 and m1 == m2 and oracle.calls == 2
    assert s1 == evaluate(train_classifier(tr, [1, 3, 5]), ev).f1
    with pytest.raises(ValueError):
        ClassifierOracle(tr, ev, metric="mcc")
    assert ClassifierOracle(tr, ev, metric="auc")([0])[0] == evaluate(train_classifier(tr, [0]), ev).auc


def test_model_json_and_metrics_csv(tmp_path):
    data = _fm([-1.0, 1.0, -2.0, 2.0], [0, 1, 0, 1])
    clf = train_classifier(data, [0])
    clf.to_json(tmp_path / "model.json", data.feature_names)
    doc = json.loads((tmp_path / "model.json").read_text())
    assert doc["feature_names"] == ["x0"] and len(doc["weights"]) == 2
    write_metrics_csv(tmp_path / "m.csv", [{"split": "test", "auc": None, "f1": 0.5}])
    assert (tmp_path / "m.csv").read_text() == "split,auc,f1\ntest,,0.5\n"
    assert EvalMetrics(1, 1, 1, None, 1).get("f1") == 1.0
