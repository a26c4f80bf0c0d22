"""Sequential feature-selection environment.

An episode builds a subset of ``capacity`` features. The observation is the
ordered list of selected-feature representations padded with zero vectors.
Each agent action is resolved to one unselected feature, the classifier
oracle is retrained on the grown subset, and the TD reward is the change in
its evaluation score.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .classifier import ClassifierOracle, EvalMetrics
from .pheromone import DEFAULT_TEMPERATURE, PheromoneTable


class Mode(str, Enum):
    SIMPLE = "simple"
    CUSTOM = "custom"


@dataclass
class EpisodeState:
    capacity: int
    slots: np.ndarray  # (capacity, slot_dim), zero rows past the filled prefix
    selected_ids: list[int]
    seeded_count: int
    mode: Mode
    prev_score: float

    @property
    def n_filled(self) -> int:
        return len(self.selected_ids)

    @property
    def done(self) -> bool:
        return self.n_filled >= self.capacity

    def snapshot(self) -> tuple[np.ndarray, int]:
        return self.slots.copy(), self.n_filled


@dataclass(frozen=True)
class StepOutcome:
    feature_id: int
    reward: float
    score: float
    done: bool
    metrics: EvalMetrics


def resolve_action(action, selected, representations: np.ndarray, mode: Mode) -> int:
    """Map an action to an unselected feature id.

    Custom mode picks the nearest representation in Euclidean distance,
    Simple mode the highest score. Ties go to the lowest id.
    """
    action = np.asarray(action, dtype=np.float64)
    n, dim = representations.shape
    selected = list(selected)
    if len(set(selected)) >= n:
        raise ValueError("every feature is already selected")
    if Mode(mode) is Mode.CUSTOM:
        if action.shape != (dim,):
            raise ValueError(f"action has shape {action.shape}, expected ({dim},)")
        cost = ((representations - action) ** 2).sum(axis=1)
    else:
        if action.shape != (n,):
            raise ValueError(f"action has shape {action.shape}, expected ({n},)")
        cost = -action
    cost = cost.copy()
    cost[selected] = np.inf
    # inf-only rows cannot occur because at least one id is free
    return int(np.argmin(cost))


@dataclass
class FeatureSelectionEnv:
    """Holds the oracle and representations; ``reset``/``step`` drive an episode.

    In Simple mode ``representations`` is the identity (one-hot per feature).
    """

    oracle: ClassifierOracle
    representations: np.ndarray
    capacity: int = 20
    mode: Mode = Mode.CUSTOM
    use_pheromone: bool = False
    table: PheromoneTable | None = None
    temperature: float = DEFAULT_TEMPERATURE
    state: EpisodeState | None = field(default=None, init=False)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        n = self.representations.shape[0]
        if self.capacity < 1 or self.capacity > n:
            raise ValueError(f"capacity {self.capacity} must lie in [1, {n}]")
        if self.table is None:
            self.table = PheromoneTable(n)

    @property
    def n_features(self) -> int:
        return self.representations.shape[0]

    @property
    def slot_dim(self) -> int:
        return self.representations.shape[1]

    @property
    def seed_count(self) -> int:
        return self.capacity // 3 if self.use_pheromone else 0

    @property
    def steps_per_episode(self) -> int:
        return self.capacity - self.seed_count

    def reset(self, rng: np.random.Generator) -> EpisodeState:
        slots = np.zeros((self.capacity, self.slot_dim))
        seeded: list[int] = []
        if self.seed_count:
            seeded = self.table.sample_seed_features(self.seed_count, rng, self.temperature)
            slots[:len(seeded)] = self.representations[seeded]
        # seeded quality is the baseline, so it is not credited to the first action
        baseline = self.oracle(seeded)[0] if seeded else 0.0
        self.state = EpisodeState(self.capacity, slots, seeded, len(seeded), self.mode, baseline)
        return self.state

    def step(self, action) -> StepOutcome:
        state = self.state
        if state is None or state.done:
            raise RuntimeError("call reset() before stepping a finished episode")
        fid = resolve_action(action, state.selected_ids, self.representations, self.mode)
        subset = state.selected_ids + [fid]
        try:
            score, metrics = self.oracle(subset)
        except Exception as exc:
            raise RuntimeError(f"oracle failed on step {state.n_filled} with subset {subset}") from exc
        reward = score - state.prev_score
        state.slots[state.n_filled] = self.representations[fid]
        state.selected_ids.append(fid)
        state.prev_score = score
        if self.use_pheromone:
            self.table.update(fid, reward)
        return StepOutcome(fid, reward, score, state.done, metrics)
