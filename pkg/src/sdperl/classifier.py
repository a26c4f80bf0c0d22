"""The classifier oracle whose evaluation score drives the reward.

A plain L2-regularised logistic regression trained by full-batch gradient
descent on z-scored columns. No randomness is involved, so retraining on the
same inputs reproduces the weights bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataset import DataError, FeatureMatrix

METRICS = ("f1", "auc", "accuracy")


@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1e-3
    steps: int = 500
    learning_rate: float = 0.1


@dataclass(frozen=True)
class EvalMetrics:
    precision: float
    recall: float
    f1: float
    auc: float | None
    accuracy: float

    def get(self, name: str) -> float:
        value = getattr(self, name)
        # an undefined AUC earns no reward
        return 0.0 if value is None else float(value)


@dataclass
class TrainedClassifier:
    weights: np.ndarray  # one per selected feature, bias last
    feature_subset: list[int]
    mean: np.ndarray
    sd: np.ndarray

    def scores(self, X: np.ndarray) -> np.ndarray:
        Z = (X[:, self.feature_subset] - self.mean) / self.sd
        return _sigmoid(Z @ self.weights[:-1] + self.weights[-1])

    def to_json(self, path, feature_names=None) -> None:
        doc = {
            "family": "logistic",
            "feature_subset": self.feature_subset,
            "feature_names": None if feature_names is None
            else [feature_names[i] for i in self.feature_subset],
            "weights": [float(w) for w in self.weights],
            "mean": [float(m) for m in self.mean],
            "sd": [float(s) for s in self.sd],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_subset(subset, n_features):
    subset = [int(i) for i in subset]
    if not subset:
        raise ValueError("feature subset is empty")
    if len(set(subset)) != len(subset):
        raise ValueError(f"feature subset has duplicates: {subset}")
    bad = [i for i in subset if not 0 <= i < n_features]
    if bad:
        raise ValueError(f"feature ids out of range: {bad}")
    return subset


def train_classifier(train: FeatureMatrix, subset, cfg: LogisticConfig = LogisticConfig()
                     ) -> TrainedClassifier:
    subset = _check_subset(subset, train.n_features)
    if train.n_defective in (0, train.n_rows):
        raise DataError("training data has a single class")
    X = train.X[:, subset]
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mean) / sd
    Z1 = np.hstack([Z, np.ones((len(Z), 1))])
    y = train.y.astype(np.float64)
    n = len(y)
    w = np.zeros(Z1.shape[1])
    reg = np.ones_like(w)
    reg[-1] = 0.0  # the bias is not penalised
    for _ in range(cfg.steps):
        grad = Z1.T @ (_sigmoid(Z1 @ w) - y) / n + cfg.l2 * reg * w
        w -= cfg.learning_rate * grad
    return TrainedClassifier(w, subset, mean, sd)


def confusion(labels, preds) -> tuple[int, int, int, int]:
    labels = np.asarray(labels).astype(bool)
    preds = np.asarray(preds).astype(bool)
    tp = int((labels & preds).sum())
    fp = int((~labels & preds).sum())
    fn = int((labels & ~preds).sum())
    tn = int((~labels & ~preds).sum())
    return tp, fp, fn, tn


def metrics_from_confusion(tp, fp, fn, tn) -> tuple[float, float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    return precision, recall, f1, accuracy


def auc(labels, scores) -> float:
    """Mann-Whitney AUC: (concordant + 0.5 * tied) / (n_pos * n_neg)."""
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    # midranks handle ties: each tie contributes one half
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(clf: TrainedClassifier, data: FeatureMatrix, threshold: float = 0.5) -> EvalMetrics:
    scores = clf.scores(data.X)
    preds = scores >= threshold
    precision, recall, f1, accuracy = metrics_from_confusion(*confusion(data.y, preds))
    has_both = 0 < data.n_defective < data.n_rows
    return EvalMetrics(precision, recall, f1, auc(data.y, scores) if has_both else None, accuracy)


class ClassifierOracle:
    """Scores a feature subset: train on ``train``, evaluate on ``eval_``.

    Subsets are scored as sets: ids are sorted before training, so the score
    does not depend on selection order, and results are memoised.
    """

    def __init__(self, train: FeatureMatrix, eval_: FeatureMatrix, metric: str = "f1",
                 config: LogisticConfig = LogisticConfig(), cache_size: int = 200_000):
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
        if eval_.feature_names != train.feature_names:
            raise DataError("train and eval feature spaces differ")
        self.train = train
        self.eval = eval_
        self.metric = metric
        self.config = config
        self.calls = 0
        self.cache_size = cache_size
        self._cache: dict[tuple[int, ...], EvalMetrics] = {}

    def __call__(self, subset) -> tuple[float, EvalMetrics]:
        self.calls += 1
        key = tuple(sorted(_check_subset(subset, self.train.n_features)))
        m = self._cache.get(key)
        if m is None:
            m = evaluate(train_classifier(self.train, key, self.config), self.eval)
            if len(self._cache) < self.cache_size:
                self._cache[key] = m
        return m.get(self.metric), m


def write_metrics_csv(path, rows: list[dict]) -> None:
    """Rows of metric dicts; None becomes an empty cell."""
    if not rows:
        raise ValueError("no metric rows to write")
    cols = list(rows[0])
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float)
                                                   else row[c]) for c in cols])


def metrics_dict(m: EvalMetrics) -> dict:
    return asdict(m)
