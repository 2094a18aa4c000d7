"""Projected gradient methods with Armijo line search, plus gap-based stopping.

Two variants are provided: line search along a feasible direction (project the
full gradient step once, then backtrack on the segment toward it) and line
search along the boundary (re-project at every halved step).  Both double the
trial step between accepted iterations and halve it inside the line search, so
the step self-tunes; the step multiplier is capped defensively at `delta_cap`.

Optional stopping certifies epsilon-optimality by sandwiching the optimum
between the best objective seen and the minimum over a user-supplied box of
the pointwise maximum of gradient cuts (affine minorants of a convex
objective).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import InputError, LineSearchOverflow, MissingBox, NumericalError


@dataclass
class OptimizerConfig:
    """Knobs for the projected gradient loop.

    `stall_tol` stops after `stall_iters` consecutive relative objective
    changes below it; set to None to disable.  `gap_tol` enables bound-based
    stopping and requires `box = (lo, hi)`.
    """

    sigma: float = 0.5
    delta_bar: float = 2.0
    max_iters: int = 1000
    variant: str = "feasible-direction"   # or "boundary"
    stall_tol: float | None = 1e-9
    stall_iters: int = 10
    gap_tol: float | None = None
    box: tuple | None = None
    max_cuts: int = 50
    j_cap: int = 60
    delta_cap: float = 1e12
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise InputError("sigma must lie in (0, 1)")
        if self.delta_bar <= 0:
            raise InputError("delta_bar must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")


@dataclass
class CalibrationResult:
    """Solution, per-iteration objective trace, and stopping diagnostics."""

    solution: np.ndarray
    objective_trace: list
    stop_reason: str
    iterations: int
    wall_time: float
    upper_bound: float | None = None
    lower_bound: float | None = None
    step_exponents: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "objective_trace": [float(v) for v in self.objective_trace],
            "upper_bound": self.upper_bound,
            "lower_bound": self.lower_bound,
        }

    def save(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def _as_box(box, x):
    if box is None:
        raise MissingBox("gap-based stopping requires box bounds (lo, hi)")
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), x.shape)
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), x.shape)
    if np.any(lo > hi):
        raise InputError("box lower bounds exceed upper bounds")
    return lo, hi


def gap_bounds(cuts, box, best_value: float | None = None):
    """Upper/lower bounds on the minimum of a convex function over a box.

    `cuts` is a list of (point, value, gradient) triples.  The upper bound is
    the best recorded value; the lower bound minimizes the pointwise max of
    the affine minorants over the box - coordinatewise for a single cut, via a
    small epigraph LP for several.
    """
    if not cuts:
        raise InputError("need at least one cut")
    x0 = np.asarray(cuts[0][0], dtype=float)
    lo, hi = _as_box(box, x0)
    upper = min(v for _, v, _ in cuts)
    if best_value is not None:
        upper = min(upper, best_value)

    if len(cuts) == 1:
        x, v, g = cuts[0]
        g = np.asarray(g, dtype=float)
        corner = np.where(g > 0, lo, hi)
        lower = v + float(np.vdot(g, corner - x))
        return upper, lower

    n = x0.size
    a_ub = np.empty((len(cuts), n + 1))
    b_ub = np.empty(len(cuts))
    for r, (x, v, g) in enumerate(cuts):
        g = np.asarray(g, dtype=float).ravel()
        a_ub[r, :n] = g
        a_ub[r, n] = -1.0
        b_ub[r] = float(np.vdot(g, np.asarray(x).ravel())) - v
    bounds = [(float(a), float(b)) for a, b in zip(lo.ravel(), hi.ravel())]
    bounds.append((None, None))
    c = np.zeros(n + 1)
    c[n] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise NumericalError(f"lower-bound LP failed: {res.message}")
    return upper, float(res.fun)


def _noise_floor(f: float) -> float:
    return 1e-14 * (1.0 + abs(f))


def _run(objective, gradient, project, x0, cfg: OptimizerConfig):
    t0 = time.perf_counter()
    lam = project(np.asarray(x0, dtype=float))
    f = float(objective(lam))
    trace = [f]
    exponents = []
    delta = cfg.delta_bar
    cuts = [] if cfg.gap_tol is not None else None
    if cfg.gap_tol is not None:
        _as_box(cfg.box, lam)  # validate up front
    upper = lower = None
    stop_reason = "max-iters"
    stall = 0
    boundary = cfg.variant == "boundary"
    if cfg.variant not in ("feasible-direction", "boundary"):
        raise InputError(f"unknown variant {cfg.variant!r}")

    k = 0
    while k < cfg.max_iters:
        g = gradient(lam)

        if cuts is not None:
            cuts.append((lam.copy(), f, np.asarray(g, dtype=float).copy()))
            del cuts[:-cfg.max_cuts]
            upper, lower = gap_bounds(cuts, cfg.box, best_value=min(trace))
            if upper - lower <= cfg.gap_tol:
                stop_reason = "gap"
                break

        z = project(lam - delta * g)
        d = z - lam
        slope = float(np.vdot(g, d))
        if slope >= -_noise_floor(f):
            stop_reason = "stationary"
            break

        j = 0
        if boundary:
            fz = float(objective(z))
            while fz > f + cfg.sigma * float(np.vdot(g, z - lam)):
                j += 1
                if j > cfg.j_cap:
                    raise LineSearchOverflow("Armijo step below 2^-60; "
                                             "gradient and objective disagree")
                z = project(lam - (delta / 2.0 ** j) * g)
                fz = float(objective(z))
            lam, f = z, fz
        else:
            zaux = z
            fz = float(objective(zaux))
            while fz > f + (cfg.sigma / 2.0 ** j) * slope:
                j += 1
                if j > cfg.j_cap:
                    raise LineSearchOverflow("Armijo step below 2^-60; "
                                             "gradient and objective disagree")
                zaux = lam + d / 2.0 ** j
                fz = float(objective(zaux))
            lam, f = zaux, fz

        delta = min(2.0 * delta / 2.0 ** j, cfg.delta_cap)
        trace.append(f)
        exponents.append(j)
        k += 1

        if cfg.stall_tol is not None and len(trace) >= 2:
            change = abs(trace[-2] - trace[-1]) / max(1.0, abs(trace[-1]))
            stall = stall + 1 if change <= cfg.stall_tol else 0
            if stall >= cfg.stall_iters:
                stop_reason = "objective-stall"
                break

    return CalibrationResult(lam, trace, stop_reason, k, time.perf_counter() - t0,
                             upper, lower, exponents)


def pg_feasible_direction(objective, gradient, project, x0,
                          cfg: OptimizerConfig | None = None) -> CalibrationResult:
    """Armijo backtracking on the segment from the iterate to its projected step."""
    cfg = cfg or OptimizerConfig()
    if cfg.variant != "feasible-direction":
        cfg = OptimizerConfig(**{**cfg.__dict__, "variant": "feasible-direction"})
    return _run(objective, gradient, project, x0, cfg)


def pg_boundary(objective, gradient, project, x0,
                cfg: OptimizerConfig | None = None) -> CalibrationResult:
    """Armijo backtracking that re-projects the halved gradient step each trial."""
    cfg = cfg or OptimizerConfig()
    if cfg.variant != "boundary":
        cfg = OptimizerConfig(**{**cfg.__dict__, "variant": "boundary"})
    return _run(objective, gradient, project, x0, cfg)


def minimize(objective, gradient, project, x0,
             cfg: OptimizerConfig | None = None) -> CalibrationResult:
    """Run the variant selected by the config."""
    cfg = cfg or OptimizerConfig()
    return _run(objective, gradient, project, x0, cfg)
