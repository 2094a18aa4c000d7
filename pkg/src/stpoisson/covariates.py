"""Linear-in-covariates Poisson model: expected counts beta' x per block.

Each (type c, day-class d, interval t) block owns one coefficient vector
beta[c, d, t] in R^K; the expected arrival count in zone i is beta' x_i.  The
feasible set B couples coefficients only within a block: beta' x_i >= epsilon
for every zone with observations, plus a [0, 1] box on the population
coordinate.  Blocks therefore project and calibrate independently, and all
blocks share the same constraint geometry, so the projection sweeps run
vectorized across blocks.
"""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleBeta, InfeasibleSet, InputError, NumericalError
from .events import AggregatedSample
from .projgrad import CalibrationResult, OptimizerConfig, minimize

DEFAULT_EPSILON = 1e-3
FEAS_SLACK = 1e-8
DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_SWEEPS = 100_000


class CovSpec:
    """Counts with a day-class axis, per-zone covariates, and the feasible set."""

    def __init__(self, n_obs, arrivals, covariates, durations,
                 epsilon: float = DEFAULT_EPSILON, pop_coord: int = 0):
        self.n_obs = np.asarray(n_obs)            # (C, D, T, I)
        self.arrivals = np.asarray(arrivals)      # (C, D, T, I)
        self.covariates = np.asarray(covariates, dtype=float)  # (I, K)
        self.durations = np.asarray(durations, dtype=float)    # (T,)
        self.epsilon = float(epsilon)
        self.pop_coord = int(pop_coord)
        if self.n_obs.ndim != 4 or self.n_obs.shape != self.arrivals.shape:
            raise InputError("n_obs and arrivals must both have shape (C, D, T, I)")
        if self.covariates.ndim != 2 or self.covariates.shape[0] != self.n_obs.shape[3]:
            raise InputError("covariates must have shape (n_zones, K)")
        if not np.all(np.isfinite(self.covariates)):
            raise InputError("covariates must be finite")
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")
        if not 0 <= self.pop_coord < self.covariates.shape[1]:
            raise InputError("pop_coord out of range")
        self.used_zones = np.flatnonzero(self.n_obs.sum(axis=(0, 1, 2)) > 0)
        used_x = self.covariates[self.used_zones]
        if len(used_x) and np.any(np.all(used_x == 0.0, axis=1)):
            raise InputError("a zone with observations has an all-zero covariate vector")

    @property
    def block_shape(self):
        c, d, t, _ = self.n_obs.shape
        return (c, d, t)

    @property
    def n_coeffs(self) -> int:
        return self.covariates.shape[1]

    @property
    def beta_shape(self):
        return self.block_shape + (self.n_coeffs,)

    @classmethod
    def from_sample(cls, sample: AggregatedSample, covariates,
                    epsilon: float = DEFAULT_EPSILON, pop_coord: int = 0) -> "CovSpec":
        n = np.transpose(sample.n_obs, (0, 2, 3, 1))
        m = np.transpose(sample.arrivals, (0, 2, 3, 1))
        return cls(n, m, covariates, sample.durations, epsilon, pop_coord)


def expected_counts(spec: CovSpec, beta: np.ndarray) -> np.ndarray:
    """Per-cell expected arrival counts beta' x, shape (C, D, T, I)."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != spec.beta_shape:
        raise InputError(f"beta shape {beta.shape} != {spec.beta_shape}")
    return beta @ spec.covariates.T


def intensity_from_beta(spec: CovSpec, beta: np.ndarray, c: int, i: int,
                        d: int, t: int) -> float:
    """Arrival rate per time unit for one cell: beta' x_i / D_t."""
    rate = float(np.dot(np.asarray(beta)[c, d, t], spec.covariates[i]))
    return rate / float(spec.durations[t])


def _check_feasible(spec: CovSpec, rates: np.ndarray):
    if len(spec.used_zones):
        worst = rates[..., spec.used_zones].min()
        if worst < spec.epsilon - FEAS_SLACK * max(1.0, spec.epsilon):
            raise InfeasibleBeta(f"beta' x = {worst:.6g} below epsilon = {spec.epsilon}"
                                 " on a zone with observations")


def cov_nll(spec: CovSpec, beta: np.ndarray) -> float:
    """Negative log-likelihood: sum of N*(beta'x) - M*log(beta'x)."""
    rates = expected_counts(spec, beta)
    _check_feasible(spec, rates)
    linear = (spec.n_obs * rates).sum()
    mask = spec.arrivals > 0
    logs = (spec.arrivals[mask] * np.log(rates[mask])).sum()
    return float(linear - logs)


def cov_gradient(spec: CovSpec, beta: np.ndarray) -> np.ndarray:
    """Gradient per block: sum over zones of (N - M/(beta'x)) x_i."""
    rates = expected_counts(spec, beta)
    _check_feasible(spec, rates)
    coef = spec.n_obs.astype(float).copy()
    mask = spec.arrivals > 0
    coef[mask] -= spec.arrivals[mask] / rates[mask]
    return coef @ spec.covariates


def project_B(spec: CovSpec, beta0: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the feasible set, block by block.

    Dykstra's cyclic projection over the half-spaces {beta' x_i >= epsilon}
    (zones with observations only) and the [0, 1] box on the population
    coordinate.  Identical constraints apply to every block, so all blocks
    advance together through each sweep.
    """
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != spec.beta_shape:
        raise InputError(f"beta shape {beta0.shape} != {spec.beta_shape}")
    xs = spec.covariates[spec.used_zones]
    norms2 = (xs ** 2).sum(axis=1)
    n_half = len(xs)

    flat = beta0.reshape(-1, spec.n_coeffs).copy()
    corrections = np.zeros((n_half + 1,) + flat.shape)
    for _ in range(DYKSTRA_MAX_SWEEPS):
        prev = flat.copy()
        for c in range(n_half):
            w = flat + corrections[c]
            gap = (spec.epsilon - w @ xs[c]) / norms2[c]
            projected = w + np.maximum(gap, 0.0)[:, None] * xs[c]
            corrections[c] = w - projected
            flat = projected
        w = flat + corrections[n_half]
        projected = w.copy()
        projected[:, spec.pop_coord] = np.clip(projected[:, spec.pop_coord], 0.0, 1.0)
        corrections[n_half] = w - projected
        flat = projected
        if np.abs(flat - prev).max() < DYKSTRA_TOL:
            break
    else:
        viol = _max_violation(spec, flat)
        if viol > 1e-6 * max(1.0, spec.epsilon):
            raise InfeasibleSet("projection does not converge; feasible set looks empty")
        raise NumericalError("Dykstra projection failed to converge")
    return flat.reshape(spec.beta_shape)


def _max_violation(spec: CovSpec, flat: np.ndarray) -> float:
    xs = spec.covariates[spec.used_zones]
    viol = 0.0
    if len(xs):
        viol = max(viol, float((spec.epsilon - flat @ xs.T).max()))
    pop = flat[:, spec.pop_coord]
    viol = max(viol, float((-pop).max()), float((pop - 1.0).max()))
    return viol


def initial_beta(spec: CovSpec) -> np.ndarray:
    """Strictly feasible start for nonnegative covariates: 0.1 everywhere, projected."""
    beta0 = np.full(spec.beta_shape, 0.1)
    beta = project_B(spec, beta0)
    if _max_violation(spec, beta.reshape(-1, spec.n_coeffs)) > 1e-6 * max(1.0, spec.epsilon):
        raise InfeasibleSet("no coefficient vector satisfies the constraints")
    return beta


def fit(spec: CovSpec, cfg: OptimizerConfig | None = None,
        beta0: np.ndarray | None = None) -> CalibrationResult:
    """Calibrate coefficients by projected gradient over the feasible set."""
    cfg = cfg or OptimizerConfig()
    start = initial_beta(spec) if beta0 is None else project_B(spec, np.asarray(beta0))
    return minimize(lambda b: cov_nll(spec, b), lambda b: cov_gradient(spec, b),
                    lambda b: project_B(spec, b), start, cfg)
