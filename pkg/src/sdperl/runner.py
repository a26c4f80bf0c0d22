"""End-to-end experiments: training loop, test-time selection, statistics."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from .agent import PPOAgent, PPOConfig, RolloutBuffer
from .classifier import (METRICS, ClassifierOracle, EvalMetrics, TrainedClassifier, evaluate,
                         train_classifier)
from .dataset import DataError, FeatureMatrix, SplitConfig, load_feature_matrix, \
    resplit_until_defective, smote_oversample
from .embedder import EmbeddingTable, build_embeddings
from .environment import FeatureSelectionEnv, Mode
from .pheromone import DEFAULT_TEMPERATURE, PheromoneTable
from .rng import derive_seed, stream

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class PheromoneMode(str, Enum):
    VANILLA = "vanilla"
    PHEROMONE = "pheromone"
    BEST_ACTION = "best-action"


@dataclass
class ExperimentConfig:
    mode: str = "custom"
    pheromone_mode: str = "pheromone"
    M: int = 20
    timesteps: int = 30_000
    k_start: int = 5
    k_end: int = 14
    seed: int = 0
    train_path: str | None = None
    test_path: str | None = None
    label_column: str = "Bug"
    classifier: str = "logistic"
    metric: str = "f1"
    eval_fraction: float = 0.2
    smote_k: int = 5
    temperature: float = DEFAULT_TEMPERATURE
    standardize_stats: bool = True
    output_dir: str | None = None
    ppo: PPOConfig = field(default_factory=PPOConfig)

    @classmethod
    def from_mapping(cls, values: dict) -> ExperimentConfig:
        """Build from a flat mapping; PPO hyperparameters may appear at top level."""
        own = {f.name for f in dataclasses.fields(cls)} - {"ppo"}
        ppo_fields = {f.name for f in dataclasses.fields(PPOConfig)}
        kwargs, ppo_kwargs = {}, {}
        for key, val in values.items():
            key = key.replace("-", "_")
            if key == "ppo" and isinstance(val, dict):
                continue
            if key == "m":
                key = "M"
            if key == "pheromone":
                key = "pheromone_mode"
            if key in own:
                kwargs[key] = val
            elif key in ppo_fields:
                ppo_kwargs[key] = val
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if isinstance(values.get("ppo"), dict):
            ppo_kwargs.update(values["ppo"])
        unknown = set(ppo_kwargs) - ppo_fields
        if unknown:
            raise ConfigError(f"unknown PPO keys {sorted(unknown)}")
        cfg = cls(**kwargs, ppo=PPOConfig(**ppo_kwargs))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            Mode(self.mode)
            PheromoneMode(self.pheromone_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.M < 1:
            raise ConfigError("M must be positive")
        if self.timesteps < self.M:
            raise ConfigError("timesteps must be at least M")
        if Mode(self.mode) is Mode.CUSTOM and not 2 <= self.k_start <= self.k_end:
            raise ConfigError("custom mode needs 2 <= k_start <= k_end")
        if self.classifier != "logistic":
            raise ConfigError(f"unsupported classifier {self.classifier!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if not 0 < self.eval_fraction < 1:
            raise ConfigError("eval_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Episode:
    subset: list[int]
    score: float
    baseline: float
    seeded_count: int


@dataclass
class RunReport:
    config: ExperimentConfig
    feature_names: list[str]
    best_subset: list[int]
    best_score: float
    episodes: list[Episode]
    test_subset: list[int]
    test_metrics: EvalMetrics
    best_eval_metrics: EvalMetrics
    pheromone: PheromoneTable
    training_log: list[dict]
    used_seed: int
    classifier: TrainedClassifier
    embedding: EmbeddingTable | None = None
    agent: PPOAgent | None = None
    update_diagnostics: list[dict] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def episode_scores(self) -> list[float]:
        return [ep.score for ep in self.episodes]

    @property
    def steps_taken(self) -> int:
        return len(self.training_log)


def select_test_features(pheromone_mode, table: PheromoneTable, history: list[Episode],
                         M: int | None = None) -> list[int]:
    """Subset used at test time.

    Vanilla and best-action use the best training episode, pheromone the
    ``M`` highest pheromone levels.
    """
    mode = PheromoneMode(pheromone_mode)
    if mode is PheromoneMode.PHEROMONE:
        if M is None:
            if not history:
                raise ValueError("M is required when there is no history")
            M = len(history[0].subset)
        return table.top_k(M)
    if not history:
        raise ValueError("no training episodes to choose from")
    return list(best_episode(history).subset)


def best_episode(history: list[Episode]) -> Episode:
    # strict improvement keeps the earliest of equally scored episodes
    best = history[0]
    for ep in history[1:]:
        if ep.score > best.score:
            best = ep
    return best


def _load(path, label):
    if path is None:
        raise ConfigError("dataset path missing from config")
    return load_feature_matrix(path, label)


def run_experiment(config: ExperimentConfig, data: FeatureMatrix | None = None,
                   test_data: FeatureMatrix | None = None, resume: str | None = None) -> RunReport:
    """Train the agent on the earlier version and evaluate on the later one."""
    config.validate()
    started = time.perf_counter()
    data = data if data is not None else _load(config.train_path, config.label_column)
    test_data = test_data if test_data is not None else _load(config.test_path, config.label_column)
    if test_data.feature_names != data.feature_names:
        raise DataError("train and test versions have different feature columns")
    n = data.n_features
    if config.M > n:
        raise ConfigError(f"M={config.M} exceeds the {n} available features")
    mode = Mode(config.mode)
    ph_mode = PheromoneMode(config.pheromone_mode)
    seed = config.seed

    train, eval_, used_seed = resplit_until_defective(data, SplitConfig(config.eval_fraction, seed))
    balanced = smote_oversample(train, config.smote_k, derive_seed(seed, "smote"))

    embedding = None
    if mode is Mode.CUSTOM:
        if config.k_end > n:
            raise ConfigError(f"k_end={config.k_end} exceeds the {n} available features")
        embedding = build_embeddings(train, config.k_start, config.k_end,
                                     derive_seed(seed, "embed"), config.standardize_stats)
        representations = embedding.vectors
    else:
        representations = np.eye(n)

    table = PheromoneTable(n)
    oracle = ClassifierOracle(balanced, eval_, config.metric)
    env = FeatureSelectionEnv(oracle, representations, config.M, mode,
                              use_pheromone=ph_mode is not PheromoneMode.VANILLA,
                              table=table, temperature=config.temperature)
    action_dim = representations.shape[1] if mode is Mode.CUSTOM else n
    agent = PPOAgent(representations.shape[1], config.M, action_dim, config.ppo,
                     derive_seed(seed, "agent"))
    if resume:
        agent.load(resume)

    policy_rng = stream(seed, "policy")
    seeding_rng = stream(seed, "seeding")
    batch_rng = stream(seed, "minibatch")

    n_episodes = config.timesteps // env.steps_per_episode
    episodes: list[Episode] = []
    training_log: list[dict] = []
    diagnostics: list[dict] = []
    buffer = RolloutBuffer()
    t = 0
    for ep_idx in range(n_episodes):
        state = env.reset(seeding_rng)
        baseline = state.prev_score
        while not state.done:
            slots, n_filled = state.snapshot()
            action, log_prob, value = agent.act(slots, n_filled, policy_rng)
            out = env.step(action)
            buffer.add(slots, n_filled, action, log_prob, value, out.reward, out.done)
            t += 1
            training_log.append({
                "timestep": t,
                "episode": ep_idx,
                "feature_id": out.feature_id,
                "feature": data.feature_names[out.feature_id],
                "reward": out.reward,
                "score": out.score,
                "f1": out.metrics.f1,
                "auc": out.metrics.auc,
            })
        episodes.append(Episode(list(state.selected_ids), state.prev_score, baseline,
                                state.seeded_count))
        if (ep_idx + 1) % config.ppo.episodes_per_rollout == 0:
            buffer.finish(config.ppo.gamma, config.ppo.gae_lambda, config.ppo.normalize_advantage)
            diagnostics.append(agent.update(buffer, batch_rng))
            buffer = RolloutBuffer()
            log.info("episode %d/%d best %.4f", ep_idx + 1, n_episodes,
                     max(e.score for e in episodes))

    best = best_episode(episodes)
    best_eval = oracle(best.subset)[1]
    test_subset = select_test_features(ph_mode, table, episodes, config.M)

    # final model: whole earlier version, rebalanced, restricted to the chosen subset
    full = smote_oversample(data, config.smote_k, derive_seed(seed, "final-smote"))
    clf = train_classifier(full, test_subset, oracle.config)
    test_metrics = evaluate(clf, test_data)

    return RunReport(
        config=config,
        feature_names=list(data.feature_names),
        best_subset=list(best.subset),
        best_score=best.score,
        episodes=episodes,
        test_subset=test_subset,
        test_metrics=test_metrics,
        best_eval_metrics=best_eval,
        pheromone=table,
        training_log=training_log,
        used_seed=used_seed,
        classifier=clf,
        embedding=embedding,
        agent=agent,
        update_diagnostics=diagnostics,
        wall_clock=time.perf_counter() - started,
    )


@dataclass(frozen=True)
class Comparison:
    t_statistic: float
    p_value: float
    cohens_d: float


def _scores(group) -> np.ndarray:
    return np.array([g.best_score if isinstance(g, RunReport) else float(g) for g in group])


def compare_settings(reports_a, reports_b) -> Comparison:
    """Pooled-variance two-sample t-test and Cohen's d on best scores.

    Either argument may hold :class:`RunReport` objects or plain scores.
    """
    a, b = _scores(reports_a), _scores(reports_b)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each group needs at least two runs")
    na, nb = len(a), len(b)
    pooled_var = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    diff = a.mean() - b.mean()
    if pooled_var == 0:
        raise ValueError("zero pooled variance; t is undefined")
    pooled_sd = math.sqrt(pooled_var)
    t = diff / (pooled_sd * math.sqrt(1 / na + 1 / nb))
    p = 2 * stats.t.sf(abs(t), na + nb - 2)
    return Comparison(float(t), float(p), float(diff / pooled_sd))


def sweep_feature_count(config: ExperimentConfig, m_values, data=None, test_data=None) -> list[dict]:
    """One run per subset size; returns rows of test metrics keyed by ``M``."""
    unique = []
    for m in m_values:
        if int(m) in unique:
            warnings.warn(f"duplicate M={m} dropped from sweep", stacklevel=2)
            continue
        unique.append(int(m))
    rows = []
    for m in unique:
        cfg = dataclasses.replace(config, M=m, seed=derive_seed(config.seed, "sweep", m),
                                  timesteps=max(config.timesteps, m))
        report = run_experiment(cfg, data, test_data)
        row = {"M": m, **dataclasses.asdict(report.test_metrics), "best_eval_score": report.best_score}
        rows.append(row)
    return rows
