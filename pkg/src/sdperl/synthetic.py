"""Planted-signal datasets for smoke tests and desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .dataset import FeatureMatrix


def make_planted_dataset(n_rows: int = 600, n_features: int = 50, n_informative: int = 10,
                         shift: float = 1.5, defect_rate: float = 0.15, seed: int = 0,
                         informative=None):
    """Gaussian features where only ``n_informative`` columns separate the classes.

    Benign rows are standard normal in every column; defective rows have
    their informative columns shifted by ``shift`` standard deviations. The
    informative columns are chosen at random unless given. Returns
    ``(matrix, sorted informative ids)``.
    """
    rng = np.random.default_rng(seed)
    if informative is None:
        informative = rng.choice(n_features, size=n_informative, replace=False)
    informative = np.sort(np.asarray(informative, dtype=np.int64))
    n_pos = int(round(defect_rate * n_rows))
    y = np.zeros(n_rows, dtype=np.int64)
    y[rng.choice(n_rows, size=n_pos, replace=False)] = 1
    X = rng.standard_normal((n_rows, n_features))
    X[np.ix_(y == 1, informative)] += shift
    names = [f"f{i:03d}" for i in range(n_features)]
    return FeatureMatrix(names, X, y), [int(i) for i in informative]


def make_version_pair(seed: int = 0, **kwargs):
    """An earlier and a later 'version' drawn from the same planted distribution.

    Returns ``(earlier, later, informative)``; both versions share the
    informative columns.
    """
    earlier, informative = make_planted_dataset(seed=seed, **kwargs)
    kwargs.pop("informative", None)
    later, _ = make_planted_dataset(seed=seed + 10_000, informative=informative, **kwargs)
    return earlier, later, informative
