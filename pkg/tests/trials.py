"""Desk-scale experiment protocol used by the acceptance suite.

Each trial runs one full experiment on a planted-signal version pair, writes
its report, and returns a small summary. Trials are independent, so they can
run in parallel processes.
"""

import os
import time
from concurrent.futures import ProcessPoolExecutor
from multiprocessing import get_context

import numpy as np

from sdperl.classifier import evaluate, train_classifier
from sdperl.dataset import smote_oversample
from sdperl.report import emit_report
from sdperl.rng import derive_seed, stream
from sdperl.runner import ExperimentConfig, run_experiment
from sdperl.synthetic import make_version_pair

TIMESTEPS = 3000
M = 20
N_RANDOM_SUBSETS = 20


def random_subset_baseline(earlier, later, size, seed, draws=N_RANDOM_SUBSETS, smote_k=5):
    """Mean test F1 of uniformly random subsets under the final-model protocol."""
    full = smote_oversample(earlier, smote_k, derive_seed(seed, "final-smote"))
    rng = stream(seed, "random-baseline")
    scores = []
    for _ in range(draws):
        subset = rng.choice(earlier.n_features, size=size, replace=False)
        scores.append(evaluate(train_classifier(full, subset), later).f1)
    return float(np.mean(scores))


def planted_trial(mode, pheromone_mode, seed, out_dir, timesteps=TIMESTEPS, m=M):
    import torch

    torch.set_num_threads(1)
    earlier, later, informative = make_version_pair(seed=seed)
    cfg = ExperimentConfig(mode=mode, pheromone_mode=pheromone_mode, M=m, timesteps=timesteps,
                           seed=seed)
    started = time.perf_counter()
    report = run_experiment(cfg, earlier, later)
    wall = time.perf_counter() - started
    emit_report(report, out_dir, checkpoint=False)
    top = report.pheromone.top_k(m)
    return {
        "mode": mode,
        "pheromone_mode": pheromone_mode,
        "seed": seed,
        "out_dir": str(out_dir),
        "wall": wall,
        "best_score": report.best_score,
        "informative_in_top": len(set(top) & set(informative)),
        "test_f1": report.test_metrics.f1,
        "random_f1": random_subset_baseline(earlier, later, m, seed),
    }


def run_trials(jobs):
    """Run ``(mode, pheromone_mode, seed, out_dir)`` jobs, in parallel when cores allow."""
    workers = min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        return [planted_trial(*job) for job in jobs]
    with ProcessPoolExecutor(workers, mp_context=get_context("spawn")) as pool:
        return list(pool.map(planted_trial, *zip(*jobs)))
