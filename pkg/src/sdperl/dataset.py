"""Labeled feature matrices: CSV I/O, defect-aware splitting and SMOTE."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_LABEL = "Bug"
DEFAULT_ID_COLUMN = "path"
MAX_RESPLIT_ATTEMPTS = 100_000


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass
class FeatureMatrix:
    """Rows are files, columns are features, ``y`` is the binary defect label."""

    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    source_ids: list[str] | None = None

    def __post_init__(self):
        self.feature_names = list(self.feature_names)
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise DataError("feature values must form a 2-D array")
        n, d = self.X.shape
        if d == 0 or n == 0:
            raise DataError("a feature matrix needs at least one feature and one row")
        if len(self.feature_names) != d:
            raise DataError(f"{len(self.feature_names)} names for {d} feature columns")
        if len(set(self.feature_names)) != d:
            raise DataError("feature names must be unique")
        if self.y.shape != (n,):
            raise DataError("one label per row is required")
        if not np.isin(self.y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if self.source_ids is not None:
            self.source_ids = list(self.source_ids)
            if len(self.source_ids) != n:
                raise DataError("one source id per row is required")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_defective(self) -> int:
        return int(self.y.sum())

    def take(self, rows) -> FeatureMatrix:
        rows = np.asarray(rows, dtype=np.int64)
        ids = None if self.source_ids is None else [self.source_ids[i] for i in rows]
        return FeatureMatrix(self.feature_names, self.X[rows], self.y[rows], ids)

    def select(self, columns) -> FeatureMatrix:
        columns = list(columns)
        return FeatureMatrix(
            [self.feature_names[c] for c in columns], self.X[:, columns], self.y, self.source_ids
        )

    def concat(self, other: FeatureMatrix) -> FeatureMatrix:
        if other.feature_names != self.feature_names:
            raise DataError("cannot concatenate matrices with different feature spaces")
        ids = None
        if self.source_ids is not None and other.source_ids is not None:
            ids = self.source_ids + other.source_ids
        return FeatureMatrix(
            self.feature_names,
            np.vstack([self.X, other.X]),
            np.concatenate([self.y, other.y]),
            ids,
        )


@dataclass(frozen=True)
class SplitConfig:
    eval_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.eval_fraction < 1.0:
            raise ValueError("eval_fraction must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def load_feature_matrix(
    path, label_column: str = DEFAULT_LABEL, id_column: str | None = DEFAULT_ID_COLUMN
) -> FeatureMatrix:
    """Read a CSV with a header row into a :class:`FeatureMatrix`.

    ``id_column`` is used for ``source_ids`` when the file has such a column;
    every other non-label column must be numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise DataError(f"{path}: duplicate column names {dupes}")
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not found")
        label_idx = header.index(label_column)
        id_idx = header.index(id_column) if id_column and id_column in header else None
        feat_idx = [i for i in range(len(header)) if i not in (label_idx, id_idx)]

        values, labels, ids = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            raw_label = row[label_idx].strip()
            try:
                label = float(raw_label)
            except ValueError:
                label = math.nan
            if label not in (0.0, 1.0):
                raise DataError(f"{path}:{lineno}: label {raw_label!r} is not 0 or 1")
            rec = []
            for i in feat_idx:
                try:
                    rec.append(float(row[i]))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: column {header[i]!r} has non-numeric value {row[i]!r}"
                    ) from None
            values.append(rec)
            labels.append(int(label))
            if id_idx is not None:
                ids.append(row[id_idx])

    if not values:
        raise DataError(f"{path}: no data rows")
    names = [header[i] for i in feat_idx]
    return FeatureMatrix(names, np.array(values, dtype=np.float64).reshape(len(values), len(names)),
                         np.array(labels), ids if id_idx is not None else None)


def save_feature_matrix(matrix: FeatureMatrix, path, label_column: str = DEFAULT_LABEL,
                        id_column: str = DEFAULT_ID_COLUMN) -> None:
    """Write ``matrix`` as CSV; floats use ``repr`` so a reload is exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        has_ids = matrix.source_ids is not None
        w.writerow(([id_column] if has_ids else []) + matrix.feature_names + [label_column])
        for i in range(matrix.n_rows):
            row = [repr(float(v)) for v in matrix.X[i]] + [str(int(matrix.y[i]))]
            w.writerow(([matrix.source_ids[i]] if has_ids else []) + row)


def _eval_size(n: int, fraction: float) -> int:
    n_eval = int(math.floor(fraction * n + 0.5))
    if not 1 <= n_eval <= n - 1:
        raise DataError(f"eval fraction {fraction} of {n} rows leaves an empty split")
    return n_eval


def split_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """One random split: the first ``round(fraction*n)`` entries of a
    ``numpy.random.default_rng(seed)`` permutation go to eval. Both index
    arrays are returned in ascending row order."""
    n_eval = _eval_size(n, fraction)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_eval:]), np.sort(perm[:n_eval])


def resplit_until_defective(matrix: FeatureMatrix, cfg: SplitConfig):
    """Split into (train, eval), bumping the seed until eval holds a defect.

    Returns ``(train, eval, used_seed)``.
    """
    if matrix.n_defective == 0:
        raise DataError("dataset has no defective rows; eval split can never contain one")
    _eval_size(matrix.n_rows, cfg.eval_fraction)
    for seed in range(cfg.seed, cfg.seed + MAX_RESPLIT_ATTEMPTS):
        train_idx, eval_idx = split_indices(matrix.n_rows, cfg.eval_fraction, seed)
        if matrix.y[eval_idx].any():
            return matrix.take(train_idx), matrix.take(eval_idx), seed
    raise DataError(f"no split with a defective eval row in {MAX_RESPLIT_ATTEMPTS} seeds")


def save_split(directory, train: FeatureMatrix, eval_: FeatureMatrix, used_seed: int,
               eval_fraction: float, label_column: str = DEFAULT_LABEL) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_feature_matrix(train, directory / "train.csv", label_column)
    save_feature_matrix(eval_, directory / "eval.csv", label_column)
    with open(directory / "split.json", "w", encoding="utf-8") as fh:
        json.dump({"used_seed": used_seed, "eval_fraction": eval_fraction}, fh, indent=2)
        fh.write("\n")


@dataclass
class SmoteResult:
    """Balanced matrix plus, for audit, the generating pair of each synthetic row."""

    matrix: FeatureMatrix
    pairs: list[tuple[int, int]] = field(default_factory=list)


def smote_oversample(train: FeatureMatrix, k_neighbors: int = 5, seed: int = 0,
                     return_pairs: bool = False):
    """Balance the classes by interpolating between minority neighbours.

    Each synthetic row is ``x_i + u * (x_nn - x_i)`` with ``u ~ U[0, 1)``,
    ``x_i`` a random minority row and ``x_nn`` one of its ``k`` nearest
    minority neighbours (Euclidean, raw units). ``k`` is clamped to the
    minority size minus one. Original rows come first, synthetic rows are
    appended. With ``return_pairs`` a :class:`SmoteResult` is returned whose
    pairs index into ``train``.
    """
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be positive")
    n_pos = train.n_defective
    n_neg = train.n_rows - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("SMOTE needs both classes present")
    minority_label = 1 if n_pos < n_neg else 0
    minority = np.flatnonzero(train.y == minority_label)
    deficit = abs(n_pos - n_neg)
    if deficit == 0:
        return SmoteResult(train, []) if return_pairs else train
    if len(minority) < 2:
        raise DataError("minority class has a single row; no neighbour to interpolate with")

    k = min(k_neighbors, len(minority) - 1)
    pts = train.X[minority]
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    # stable sort: equal distances resolve to the lower minority index
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    base = rng.integers(0, len(minority), size=deficit)
    pick = rng.integers(0, k, size=deficit)
    gap = rng.random(deficit)
    nn = neighbours[base, pick]
    synth = pts[base] + gap[:, None] * (pts[nn] - pts[base])

    ids = None
    if train.source_ids is not None:
        ids = train.source_ids + [f"smote:{i}" for i in range(deficit)]
    out = FeatureMatrix(
        train.feature_names,
        np.vstack([train.X, synth]),
        np.concatenate([train.y, np.full(deficit, minority_label)]),
        ids,
    )
    if return_pairs:
        return SmoteResult(out, [(int(minority[b]), int(minority[j])) for b, j in zip(base, nn)])
    return out

