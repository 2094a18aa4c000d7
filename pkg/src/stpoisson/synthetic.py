"""Synthetic benchmark scenarios on the 10x10 unit grid over [0,10]^2.

The square splits into two interleaved 5x5-block colors ("blue" holds the
upper-left and lower-right quadrants, "red" the other two).  Four scenarios
are provided: piecewise-constant rates alternating with period 2 (ex1), a
linear-in-space rate field (ex2), rates linear in a zone-aggregated covariate
vector (ex3), and the same with a holiday effect split across 8 distinct
holiday day classes (ex4).  Counts are simulated per cell from the exact zone
integral of the rate, with a counter-based generator keyed per cell so results
do not depend on iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .events import AggregatedSample, empty_per_obs

GRID_N = 10
N_ZONES = GRID_N * GRID_N
N_INTERVALS = 28
N_HOLIDAY_CLASSES = 8

# Expected counts per occurrence, indexed (parity of interval, color 0=blue 1=red).
EX1_RATES = np.array([[0.1, 0.5],
                      [0.5, 0.1]])
EX2_FACTORS = np.array([[1.0, 5.0],
                        [5.0, 1.0]])
# Coefficients (x1, x2, x3) indexed by interval parity; holiday rows double them.
EX3_BETA = np.array([[0.0, 6.0, 3.0],
                     [0.05, 18.0, 6.0]])
EX4_BETA_HOLIDAY = np.array([[0.0, 12.0, 6.0],
                             [0.1, 36.0, 12.0]])
# Zone-aggregated constant covariates (x2, x3) per color.
X23 = {0: (0.25, 0.5), 1: (0.5, 0.25)}


def zone_row_col(i: int) -> tuple[int, int]:
    return divmod(i, GRID_N)


def zone_is_blue(i: int) -> bool:
    row, col = zone_row_col(i)
    return (col < 5) != (row < 5)


def zone_colors() -> np.ndarray:
    """0 for blue zones, 1 for red zones, indexed by zone id."""
    return np.array([0 if zone_is_blue(i) else 1 for i in range(N_ZONES)])


def point_color(x: float, y: float) -> int:
    return 0 if (x <= 5) != (y <= 5) else 1


@dataclass
class GroundTruth:
    """Exact expected counts per interval occurrence, shape (C, I, D, T)."""

    rates: np.ndarray
    durations: np.ndarray

    @property
    def shape(self):
        return self.rates.shape


def _interval_parity() -> np.ndarray:
    return np.arange(N_INTERVALS) % 2


def truth_ex1() -> GroundTruth:
    colors = zone_colors()
    rates = EX1_RATES[_interval_parity()[None, :], colors[:, None]]
    return GroundTruth(rates[None, :, None, :], np.ones(N_INTERVALS))


def truth_ex2() -> GroundTruth:
    colors = zone_colors()
    centroid_sum = np.array([sum(zone_row_col(i)) + 1.0 for i in range(N_ZONES)])
    rates = centroid_sum[:, None] * EX2_FACTORS[_interval_parity()[None, :], colors[:, None]]
    return GroundTruth(rates[None, :, None, :], np.ones(N_INTERVALS))


def sin_zone_integral(i: int, k: int) -> float:
    """Integral of |sin(2 pi k s / 10)| over the unit span [i-1, i].

    Closed form splitting the span at the sign-change lattice s = 5 l / k;
    ceil/floor arguments are evaluated in exact integer arithmetic.
    """
    if not (1 <= i <= 10 and 1 <= k <= 10):
        raise InputError("need 1 <= i <= 10 and 1 <= k <= 10")
    a = -((-k * (i - 1)) // 5)   # ceil(k (i-1) / 5)
    b = (k * i) // 5             # floor(k i / 5)
    scale = 5.0 / (math.pi * k)
    if 5 * a <= i * k:
        first = scale * (-1.0) ** a * (math.cos(math.pi * a) - math.cos(math.pi * k * (i - 1) / 5.0))
        middle = 2.0 * scale * (b - a)
        last = -scale * (-1.0) ** b * (math.cos(math.pi * k * i / 5.0) - math.cos(math.pi * b))
        return first + middle + last
    return scale * (-1.0) ** b * (math.cos(math.pi * k * (i - 1) / 5.0)
                                  - math.cos(math.pi * k * i / 5.0))


def x1_pointwise(x: float, y: float, u_blue: np.ndarray, u_red: np.ndarray) -> float:
    """The oscillating covariate at a point (used by integration oracles)."""
    u = u_blue if point_color(x, y) == 0 else u_red + 1.0
    total = 0.0
    for j in range(1, 11):
        total += 0.5 ** j * (u[2 * j - 2] * abs(math.sin(2 * math.pi * j * x / 10.0))
                             + u[2 * j - 1] * abs(math.sin(2 * math.pi * j * y / 10.0)))
    return total


def covariate_field(seed: int = 0):
    """Zone-aggregated covariates y[i] = (integral of x1, x2, x3), shape (100, 3).

    Draws the 20 + 20 uniform coefficients from `seed` and assembles the x1
    integrals from the per-axis closed form.  Returns (y, u_blue, u_red).
    """
    rng = np.random.default_rng(seed)
    u_blue = rng.uniform(size=2 * 10)
    u_red = rng.uniform(size=2 * 10)
    col_int = np.array([[sin_zone_integral(c + 1, j) for j in range(1, 11)]
                        for c in range(GRID_N)])  # (col, j)
    y = np.zeros((N_ZONES, 3))
    for i in range(N_ZONES):
        row, col = zone_row_col(i)
        u = u_blue if zone_is_blue(i) else u_red + 1.0
        powers = 0.5 ** np.arange(1, 11)
        y[i, 0] = float(np.sum(powers * (u[0::2] * col_int[col] + u[1::2] * col_int[row])))
        y[i, 1], y[i, 2] = X23[0 if zone_is_blue(i) else 1]
    return y, u_blue, u_red


def truth_ex3(y: np.ndarray) -> GroundTruth:
    rates = y @ EX3_BETA.T                       # (I, parity)
    rates = rates[:, _interval_parity()]         # (I, T)
    return GroundTruth(rates[None, :, None, :], np.ones(N_INTERVALS))


def truth_ex4(y: np.ndarray) -> GroundTruth:
    normal = (y @ EX3_BETA.T)[:, _interval_parity()]        # (I, T)
    holiday = (y @ EX4_BETA_HOLIDAY.T)[:, _interval_parity()]
    rates = np.empty((1, N_ZONES, 1 + N_HOLIDAY_CLASSES, N_INTERVALS))
    rates[0, :, 0, :] = normal
    rates[0, :, 1:, :] = holiday[:, None, :]
    return GroundTruth(rates, np.ones(N_INTERVALS))


def ex4_observation_schedule(years: int) -> np.ndarray:
    """Observation counts per day class: 51*years normal weeks, `years` per holiday."""
    if years < 1:
        raise InputError("years must be >= 1")
    return np.array([51 * years] + [years] * N_HOLIDAY_CLASSES)


def _cell_generator(seed: int, c: int, i: int, d: int, t: int) -> np.random.Generator:
    # Distinct cells get distinct high counter words; draws only advance word 0.
    counter = np.array([0, t + N_INTERVALS * d, i, c], dtype=np.uint64)
    key = np.array([np.uint64(seed), np.uint64(0x9E3779B97F4A7C15)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def simulate_counts(truth: GroundTruth, n_obs, seed: int = 0) -> AggregatedSample:
    """Draw per-observation Poisson counts with mean rate * duration.

    `n_obs` is an int, a per-day-class vector, or a full (C, I, D, T) array.
    Each cell uses its own counter-based generator keyed on (seed, c, i, d, t).
    """
    if np.any(truth.rates <= 0):
        raise InputError("ground-truth rates must be positive")
    shape = truth.shape
    n_arr = np.asarray(n_obs, dtype=np.int64)
    if n_arr.ndim == 1:  # per day class
        n_arr = n_arr[None, None, :, None]
    n_arr = np.broadcast_to(n_arr, shape).copy()
    if (n_arr < 1).any():
        raise InputError("need at least one observation per cell")
    means = truth.rates * truth.durations[None, None, None, :]
    per_obs = np.empty(shape, dtype=object)
    arrivals = np.zeros(shape, dtype=np.int64)
    for idx in np.ndindex(shape):
        rng = _cell_generator(seed, *idx)
        draws = rng.poisson(means[idx], size=int(n_arr[idx]))
        per_obs[idx] = draws.astype(np.int64)
        arrivals[idx] = draws.sum()
    return AggregatedSample(truth.durations.copy(), n_arr, arrivals, per_obs)


def mean_relative_error(truth: GroundTruth | np.ndarray, estimate: np.ndarray) -> float:
    """Average over cells of |truth - estimate| / truth."""
    rates = truth.rates if isinstance(truth, GroundTruth) else np.asarray(truth)
    est = np.asarray(estimate).reshape(rates.shape)
    if np.any(rates <= 0):
        raise InputError("truth must be positive")
    return float(np.mean(np.abs(rates - est) / rates))


# -- model-building helpers ----------------------------------------------------

def parity_groups(n_groups: int, n_intervals: int = N_INTERVALS) -> list:
    """Partition interval indices by residue modulo `n_groups`."""
    return [np.arange(n_intervals)[np.arange(n_intervals) % n_groups == r]
            for r in range(n_groups)]


def ex4_flat_groups() -> list:
    """Parity groups on the flattened (day-class, interval) axis.

    Holiday day classes share the generating coefficients, so all of them pool
    into one group per parity; normal weeks form their own parity pair.
    """
    flat = np.arange((1 + N_HOLIDAY_CLASSES) * N_INTERVALS)
    d, t = flat // N_INTERVALS, flat % N_INTERVALS
    groups = []
    for parity in (0, 1):
        groups.append(flat[(d == 0) & (t % 2 == parity)])
        groups.append(flat[(d > 0) & (t % 2 == parity)])
    return groups


def grid_neighbor_pairs(rule: str = "edge-only", same_color_only: bool = False) -> np.ndarray:
    """Unordered neighboring zone pairs of the 10x10 grid (ids row-major)."""
    if rule not in ("edge-only", "edge-or-vertex"):
        raise InputError(f"unknown neighbor rule {rule!r}")
    steps = [(0, 1), (1, 0)]
    if rule == "edge-or-vertex":
        steps += [(1, 1), (1, -1)]
    pairs = []
    for i in range(N_ZONES):
        row, col = zone_row_col(i)
        for dr, dc in steps:
            r2, c2 = row + dr, col + dc
            if not (0 <= r2 < GRID_N and 0 <= c2 < GRID_N):
                continue
            j = r2 * GRID_N + c2
            if same_color_only and zone_is_blue(i) != zone_is_blue(j):
                continue
            pairs.append((min(i, j), max(i, j)))
    return np.array(sorted(pairs), dtype=int)
