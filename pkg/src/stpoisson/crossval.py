"""Regularization-weight selection by replicated held-out likelihood.

Each replication trains on a single fold (proportion 1/k of the observations
in every cell, so the training share is deliberately the small side) and
scores the fitted intensities by Poisson log-likelihood on the remaining
folds.  The winning weight maximizes the average score; ties go to the
smaller weight.  The final model is refit on the full sample.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import intensity
from .errors import EmptySample, InputError
from .events import AggregatedSample, split_folds
from .projgrad import CalibrationResult, OptimizerConfig


@dataclass
class CVConfig:
    """Weight grid and fold layout; train proportion is 1/folds."""

    weights_grid: list
    folds: int = 5
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not list(self.weights_grid):
            raise InputError("weights grid is empty")
        if self.folds < 2:
            raise InputError("need at least 2 folds")


@dataclass
class CVResult:
    best_weight: object
    weight_scores: list              # (weight, mean held-out log-likelihood)
    per_replication: np.ndarray      # (folds, n_weights)
    solution: np.ndarray             # refit at best_weight on the full sample
    refit: CalibrationResult = None
    wall_time: float = 0.0


def _weight_key(w):
    return tuple(w) if isinstance(w, (tuple, list)) else (float(w),)


def cross_validate(sample: AggregatedSample, make_spec, cfg: CVConfig) -> CVResult:
    """Pick the best regularization weight for the no-covariate model.

    `make_spec(sample_part, weight)` must build the NoRegSpec for a given
    weight; weights may be scalars or (time, space) pairs.  Cells with no
    training observations score with the epsilon floor, consistent with the
    model's pinning rule.
    """
    if int(sample.n_obs.sum()) == 0:
        raise EmptySample("sample has no observations")
    t0 = time.perf_counter()

    grid = []
    seen = set()
    for w in cfg.weights_grid:
        key = _weight_key(w)
        if key not in seen:
            seen.add(key)
            grid.append(w)

    folds = split_folds(sample, cfg.folds, cfg.seed)
    scores = np.zeros((cfg.folds, len(grid)))
    for r, (train, test) in enumerate(folds):
        n_test, m_test, dur = test.flat_time()
        for wi, w in enumerate(grid):
            spec = make_spec(train, w)
            lam = intensity.fit(spec, cfg.optimizer).solution
            scores[r, wi] = intensity.poisson_loglik(lam, n_test, m_test, dur)

    means = scores.mean(axis=0)
    order = sorted(range(len(grid)), key=lambda i: (-means[i], _weight_key(grid[i])))
    best = grid[order[0]]

    refit = intensity.fit(make_spec(sample, best), cfg.optimizer)
    return CVResult(best, list(zip(grid, means.tolist())), scores,
                    refit.solution, refit, time.perf_counter() - t0)
