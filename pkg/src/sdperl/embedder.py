"""Feature embeddings: per-class statistics plus multi-k cluster one-hots.

Every feature ``i`` is summarised by ``s_i = (mean_0, var_0, mean_1, var_1)``
computed over the benign (0) and defective (1) training rows. The statistic
vectors of all features are clustered with K-means for each ``k`` in
``[k_start, k_end]`` and the feature embedding is

    v_i = onehot_k_start(i) || ... || onehot_k_end(i) || s_i

so ``dim = 4 + sum(k)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DataError, FeatureMatrix
from .rng import derive_seed

MAX_ITER = 300
STAT_NAMES = ("mean_benign", "var_benign", "mean_defective", "var_defective")


def statistical_vectors(train: FeatureMatrix) -> np.ndarray:
    """Return an ``(n_features, 4)`` array of class-wise means and population variances."""
    benign = train.X[train.y == 0]
    defective = train.X[train.y == 1]
    if len(benign) == 0 or len(defective) == 0:
        raise DataError("statistics need at least one benign and one defective row")
    return np.column_stack([
        benign.mean(axis=0),
        benign.var(axis=0),
        defective.mean(axis=0),
        defective.var(axis=0),
    ])


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)


def _kmeans_pp(points, k, rng):
    n = len(points)
    centers = [points[rng.integers(n)]]
    closest = _sq_dists(points, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            break
        idx = rng.choice(n, p=closest / total)
        centers.append(points[idx])
        closest = np.minimum(closest, _sq_dists(points, points[idx][None])[:, 0])
    return np.array(centers)


def kmeans(points, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns integer labels in ``[0, k)``.

    Stops when assignments no longer change or after ``max_iter`` rounds. A
    cluster that goes empty is re-seeded with the point farthest from its
    current centre, so every cluster ends non-empty.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if k < 1:
        raise ValueError("k must be positive")
    n_distinct = len(np.unique(points, axis=0))
    if k > n_distinct:
        raise ValueError(f"k={k} exceeds the {n_distinct} distinct points")

    rng = np.random.default_rng(seed)
    labels = np.argmin(_sq_dists(points, _kmeans_pp(points, k, rng)), axis=1)
    labels = _fill_empty(points, labels, k)
    for _ in range(max_iter):
        centers = _centers(points, labels, k)
        new_labels = _fill_empty(points, np.argmin(_sq_dists(points, centers), axis=1), k)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels


def _centers(points, labels, k):
    return np.array([points[labels == j].mean(axis=0) for j in range(k)])


def _fill_empty(points, labels, k):
    labels = labels.copy()
    for j in range(k):
        if (labels == j).any():
            continue
        counts = np.bincount(labels, minlength=k)
        means = {c: points[labels == c].mean(axis=0) for c in np.flatnonzero(counts)}
        own = np.array([((p - means[c]) ** 2).sum() for p, c in zip(points, labels)])
        # moving a singleton would just relocate the hole
        own[counts[labels] <= 1] = -1.0
        labels[int(np.argmax(own))] = j
    return labels


def within_cluster_ss(points, labels) -> float:
    points = np.asarray(points, dtype=np.float64)
    total = 0.0
    for j in np.unique(labels):
        members = points[labels == j]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def silhouette(points, labels) -> float | None:
    """Mean silhouette coefficient, or None when it is undefined."""
    points = np.asarray(points, dtype=np.float64)
    ks, idx = np.unique(labels, return_inverse=True)
    n = len(points)
    if not 2 <= len(ks) <= n - 1:
        return None
    d = np.sqrt(_sq_dists(points, points))
    onehot = np.zeros((n, len(ks)))
    onehot[np.arange(n), idx] = 1.0
    sums = d @ onehot  # distance from each point to every cluster, summed
    sizes = onehot.sum(axis=0)
    own = sizes[idx]
    a = np.where(own > 1, sums[np.arange(n), idx] / np.maximum(own - 1, 1), 0.0)
    means = sums / sizes
    means[np.arange(n), idx] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    # singletons score 0 by convention
    s[own == 1] = 0.0
    return float(s.mean())


@dataclass
class EmbeddingTable:
    vectors: np.ndarray
    k_start: int
    k_end: int
    stats: np.ndarray
    labels: dict[int, np.ndarray] = field(default_factory=dict)
    seeds: dict[int, int] = field(default_factory=dict)
    silhouettes: dict[int, float | None] = field(default_factory=dict)
    standardize: bool = True

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_features(self) -> int:
        return self.vectors.shape[0]

    def block(self, k: int) -> np.ndarray:
        """The one-hot columns contributed by clustering with ``k``."""
        start = sum(range(self.k_start, k))
        return self.vectors[:, start:start + k]

    def manifest(self) -> dict:
        return {
            "dim": self.dim,
            "k_start": self.k_start,
            "k_end": self.k_end,
            "standardize": self.standardize,
            "seeds": {str(k): s for k, s in self.seeds.items()},
            "silhouette": {str(k): s for k, s in self.silhouettes.items()},
        }


def embedding_dim(k_start: int, k_end: int) -> int:
    return 4 + sum(range(k_start, k_end + 1))


def _canonical_order(stats: np.ndarray) -> np.ndarray:
    # lexicographic order over the four statistics makes clustering
    # independent of the column order of the input
    return np.lexsort(stats.T[::-1])


def build_embeddings(train: FeatureMatrix, k_start: int = 5, k_end: int = 14, seed: int = 0,
                     standardize: bool = True) -> EmbeddingTable:
    """Cluster the statistic vectors for every ``k`` and stack the one-hots."""
    if not 2 <= k_start <= k_end:
        raise ValueError("need 2 <= k_start <= k_end")
    if k_end > train.n_features:
        raise ValueError(f"k_end={k_end} exceeds the {train.n_features} features")
    stats = statistical_vectors(train)
    order = _canonical_order(stats)
    sorted_stats = stats[order]
    points = sorted_stats
    if standardize:
        sd = sorted_stats.std(axis=0)
        sd[sd == 0] = 1.0
        points = (sorted_stats - sorted_stats.mean(axis=0)) / sd

    n = train.n_features
    blocks, labels, seeds, sil = [], {}, {}, {}
    for k in range(k_start, k_end + 1):
        k_seed = derive_seed(seed, "kmeans", k)
        sorted_labels = kmeans(points, k, k_seed)
        lab = np.empty(n, dtype=np.int64)
        lab[order] = sorted_labels
        onehot = np.zeros((n, k))
        onehot[np.arange(n), lab] = 1.0
        blocks.append(onehot)
        labels[k] = lab
        seeds[k] = k_seed
        sil[k] = silhouette(points, sorted_labels)
    vectors = np.hstack(blocks + [stats])
    return EmbeddingTable(vectors, k_start, k_end, stats, labels, seeds, sil, standardize)


def save_embeddings(table: EmbeddingTable, feature_names, out_csv) -> Path:
    """Write one row per feature and a ``<out>.manifest.json`` next to it."""
    out_csv = Path(out_csv)
    cols = [f"k{k}_c{j}" for k in range(table.k_start, table.k_end + 1) for j in range(k)]
    cols += list(STAT_NAMES)
    with out_csv.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature"] + cols)
        for name, vec in zip(feature_names, table.vectors):
            w.writerow([name] + [repr(float(v)) for v in vec])
    manifest = out_csv.with_suffix(".manifest.json")
    with manifest.open("w", encoding="utf-8") as fh:
        json.dump(table.manifest(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
