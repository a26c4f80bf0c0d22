"""Per-feature quality evidence accumulated from TD rewards.

The table keeps, for each feature, the running sum of the TD rewards it
earned and how often it was selected. Their ratio is the pheromone level.
There is no evaporation.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

DEFAULT_TEMPERATURE = 0.05


class PheromoneTable:
    def __init__(self, n_features: int):
        if n_features < 1:
            raise ValueError("n_features must be positive")
        self.cum_reward = np.zeros(n_features, dtype=np.float64)
        self.count = np.zeros(n_features, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.count)

    def _check(self, feature_id: int) -> int:
        if not 0 <= feature_id < len(self):
            raise IndexError(f"feature id {feature_id} outside [0, {len(self)})")
        return int(feature_id)

    def pairs(self) -> list[tuple[float, int]]:
        return [(float(p), int(c)) for p, c in zip(self.cum_reward, self.count)]

    def update(self, feature_id: int, td_reward: float) -> None:
        i = self._check(feature_id)
        self.cum_reward[i] += td_reward
        self.count[i] += 1

    def average_level(self, feature_id: int) -> float | None:
        """``cum_reward / count``, or None for a feature never selected."""
        i = self._check(feature_id)
        if self.count[i] == 0:
            return None
        return float(self.cum_reward[i] / self.count[i])

    def averages(self) -> np.ndarray:
        """All pheromone levels; NaN where undefined."""
        out = np.full(len(self), np.nan)
        seen = self.count > 0
        out[seen] = self.cum_reward[seen] / self.count[seen]
        return out

    def sample_seed_features(self, count: int, rng: np.random.Generator,
                             temperature: float = DEFAULT_TEMPERATURE) -> list[int]:
        """Draw ``count`` distinct features, favouring high pheromone levels.

        Visited features are drawn without replacement with probability
        ``softmax(level / temperature)``, where levels are min-max normalised
        to [0, 1] across visited features. If too few features have been
        visited, the rest are drawn uniformly from the unvisited ones.
        """
        n = len(self)
        if not 0 < count <= n:
            raise ValueError(f"cannot draw {count} distinct features from {n}")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        visited = np.flatnonzero(self.count > 0)
        unvisited = np.flatnonzero(self.count == 0)
        chosen: list[int] = []
        if len(visited):
            levels = self.cum_reward[visited] / self.count[visited]
            span = levels.max() - levels.min()
            norm = (levels - levels.min()) / span if span > 0 else np.zeros_like(levels)
            logits = norm / temperature
            weights = np.exp(logits - logits.max())
            pool = list(visited)
            w = list(weights)
            for _ in range(min(count, len(pool))):
                p = np.array(w) / sum(w)
                j = int(rng.choice(len(pool), p=p))
                chosen.append(int(pool.pop(j)))
                w.pop(j)
        remaining = count - len(chosen)
        if remaining:
            chosen.extend(int(i) for i in rng.choice(unvisited, size=remaining, replace=False))
        return chosen

    def top_k(self, k: int) -> list[int]:
        """Ids of the ``k`` highest levels; unvisited count as -inf, ties go to the lower id."""
        n = len(self)
        if not 0 <= k <= n:
            raise ValueError(f"k={k} outside [0, {n}]")
        levels = np.where(self.count > 0, self.averages(), -np.inf)
        order = np.lexsort((np.arange(n), -levels))
        return [int(i) for i in order[:k]]

    def to_csv(self, path, feature_names=None) -> None:
        path = Path(path)
        names = feature_names if feature_names is not None else [str(i) for i in range(len(self))]
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature_id", "name", "cum_reward", "count", "average"])
            for i in range(len(self)):
                avg = self.average_level(i)
                w.writerow([i, names[i], repr(float(self.cum_reward[i])), int(self.count[i]),
                            "" if avg is None else repr(avg)])
