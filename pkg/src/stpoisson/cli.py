"""Batch front-end: discretize, aggregate, simulate, calibrate, cv, report, reallocate.

Every subcommand validates its inputs, computes fully, then writes outputs,
and finishes by writing `<output>.manifest.json` recording the resolved
configuration, SHA-256 hashes of the inputs, and all output paths.  A JSON
config file may supply any flag (keys use underscores); explicit flags win.

Exit codes: 0 success, 2 usage/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from datetime import datetime

import numpy as np

from . import covariates, crossval, events, intensity, spacegrid, synthetic, timegrid
from .errors import InputError, NumericalError, StpoissonError
from .projgrad import OptimizerConfig

__version__ = "0.1.0"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(args, inputs: list, outputs: list):
    config = {k: v for k, v in vars(args).items()
              if k not in ("func", "config") and v is not None}
    manifest = {
        "subcommand": args.subcommand,
        "version": __version__,
        "config": {k: (v if not isinstance(v, float) else float(v)) for k, v in config.items()},
        "inputs": {p: _sha256(p) for p in inputs if p and os.path.exists(p)},
        "outputs": outputs,
    }
    path = outputs[0] + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, default=str)


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _require(path: str):
    if not os.path.exists(path):
        raise InputError(f"file not found: {path}")


# -- subcommands ----------------------------------------------------------------


def cmd_discretize(args) -> int:
    _require(args.border)
    border = spacegrid.region_from_features(args.border)
    rule = args.neighbor_rule
    if args.method == "rect":
        disc = spacegrid.rect_discretize(border, args.nx, args.ny, rule)
    elif args.method == "hex":
        disc = spacegrid.hex_discretize(border, args.scale, rule)
    elif args.method == "voronoi":
        _require(args.sites)
        sites = []
        with open(args.sites, newline="") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    sites.append((float(row["x"]), float(row["y"])))
                except (KeyError, ValueError) as exc:
                    raise InputError(f"{args.sites}:{lineno}: bad site ({exc})") from None
        disc = spacegrid.voronoi_discretize(border, sites, rule)
    elif args.method == "custom":
        _require(args.subregions)
        feats = spacegrid.load_features(args.subregions)
        polys, attrs = [], []
        for props, parts in feats:
            for p in parts:
                polys.append(p)
                attrs.append(props)
        disc = spacegrid.custom_discretize(border, polys, rule, attributes=attrs)
    else:
        raise InputError(f"unknown method {args.method!r}")
    with open(args.output, "w") as fh:
        json.dump(spacegrid.discretization_to_json(disc), fh)
    _write_manifest(args, [args.border, args.sites, args.subregions], [args.output])
    return 0


def cmd_aggregate(args) -> int:
    _require(args.events)
    _require(args.discretization)
    _require(args.time_config)
    disc = spacegrid.discretization_from_json(_load_json(args.discretization))
    td = timegrid.from_config(_load_json(args.time_config))
    evts = events.read_events_csv(args.events)
    horizon = (datetime.fromisoformat(args.start), datetime.fromisoformat(args.end))
    sample = events.aggregate(evts, disc, td, horizon, n_types=args.types)
    sample.save(args.output)
    _write_manifest(args, [args.events, args.discretization, args.time_config],
                    [args.output])
    return 0


def cmd_simulate(args) -> int:
    seed = args.seed
    if args.scenario == "ex1":
        truth = synthetic.truth_ex1()
        n_obs = args.observations
    elif args.scenario == "ex2":
        truth = synthetic.truth_ex2()
        n_obs = args.observations
    elif args.scenario == "ex3":
        y, _, _ = synthetic.covariate_field(seed)
        truth = synthetic.truth_ex3(y)
        n_obs = args.observations
    elif args.scenario == "ex4":
        y, _, _ = synthetic.covariate_field(seed)
        truth = synthetic.truth_ex4(y)
        n_obs = synthetic.ex4_observation_schedule(args.years)
    else:
        raise InputError(f"unknown scenario {args.scenario!r}")
    sample = synthetic.simulate_counts(truth, n_obs, seed)
    sample.save(args.output)
    outputs = [args.output]
    if args.truth_output:
        with open(args.truth_output, "w") as fh:
            json.dump({"shape": list(truth.shape),
                       "rates": truth.rates.ravel().tolist(),
                       "durations": truth.durations.tolist(),
                       "seed": seed}, fh)
        outputs.append(args.truth_output)
    if args.scenario in ("ex3", "ex4"):
        y_path = args.output + ".covariates.csv"
        _write_covariates_csv(y_path, y)
        outputs.append(y_path)
    _write_manifest(args, [], outputs)
    return 0


def _write_covariates_csv(path: str, y: np.ndarray):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["zone_id"] + [f"x{k + 1}" for k in range(y.shape[1])])
        for i, row in enumerate(y):
            writer.writerow([i] + [_fmt(v) for v in row])


def _read_covariates_csv(path: str) -> np.ndarray:
    _require(path)
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "zone_id" not in reader.fieldnames:
            raise InputError(f"{path}: covariates header must contain zone_id")
        cols = [c for c in reader.fieldnames if c != "zone_id"]
        for lineno, row in enumerate(reader, start=2):
            try:
                rows[int(row["zone_id"])] = [float(row[c]) for c in cols]
            except (ValueError, KeyError) as exc:
                raise InputError(f"{path}:{lineno}: bad covariate row ({exc})") from None
    if not rows:
        raise InputError(f"{path}: no covariate rows")
    n = max(rows) + 1
    out = np.zeros((n, len(cols)))
    for i, vals in rows.items():
        out[i] = vals
    return out


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(variant=args.variant, max_iters=args.max_iters)


def _groups_for_sample(args, sample) -> list:
    """Time groups for the flattened (context, interval) axis."""
    if not args.time_config:
        return []
    doc = _load_json(args.time_config)
    if "groups" not in doc:
        return []
    t_count = sample.n_intervals
    groups = []
    for g in doc["groups"]:
        for d in range(sample.n_contexts):
            groups.append(np.asarray(g, dtype=int) + d * t_count)
    return groups


def _space_pairs(args) -> tuple[np.ndarray, bool]:
    if not args.discretization:
        return np.zeros((0, 2), dtype=int), False
    doc = _load_json(args.discretization)
    return np.asarray(doc.get("adjacency", []), dtype=int).reshape(-1, 2), True


def _noreg_spec_builder(args, base_sample):
    pairs, _ = _space_pairs(args)
    groups = _groups_for_sample(args, base_sample)

    def build(sample_part, weight):
        wt, ws = (weight if isinstance(weight, (tuple, list)) else (weight, weight))
        return intensity.NoRegSpec.from_sample(
            sample_part, groups=groups, group_weight=wt,
            space_pairs=pairs, space_weight=ws, epsilon=args.epsilon)

    return build


def _write_intensity_csv(path: str, lam: np.ndarray):
    c_n, i_n, t_n = lam.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c", "i", "t", "lambda"])
        for c in range(c_n):
            for i in range(i_n):
                for t in range(t_n):
                    writer.writerow([c, i, t, _fmt(lam[c, i, t])])


def cmd_calibrate(args) -> int:
    _require(args.sample)
    sample = events.AggregatedSample.load(args.sample)
    outputs = [args.output]
    if args.model == "noreg":
        build = _noreg_spec_builder(args, sample)
        spec = build(sample, (args.time_weight, args.space_weight))
        result = intensity.fit(spec, _optimizer_config(args))
        _write_intensity_csv(args.output, result.solution)
    elif args.model == "cov":
        if not args.covariates:
            raise InputError("--covariates is required for the covariate model")
        x = _read_covariates_csv(args.covariates)
        spec = covariates.CovSpec.from_sample(sample, x, epsilon=args.epsilon)
        result = covariates.fit(spec, _optimizer_config(args))
        beta = result.solution
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["c", "d", "t", "k", "beta"])
            for idx in np.ndindex(beta.shape):
                writer.writerow([*idx, _fmt(beta[idx])])
    else:
        raise InputError(f"unknown model {args.model!r}")
    if args.result_output:
        result.save(args.result_output)
        outputs.append(args.result_output)
    _write_manifest(args, [args.sample, args.covariates, args.discretization,
                           args.time_config], outputs)
    return 0


def cmd_cv(args) -> int:
    _require(args.sample)
    sample = events.AggregatedSample.load(args.sample)
    if args.weights_list:
        grid = [float(w) for w in args.weights_list]
    elif args.weights_file:
        _require(args.weights_file)
        with open(args.weights_file) as fh:
            grid = [float(w) for w in fh.read().split()]
    else:
        raise InputError("supply --weights-list or --weights-file")
    k = round(1.0 / args.cv_proportion)
    if k < 2:
        raise InputError("--cv-proportion must be at most 0.5")
    cfg = crossval.CVConfig(grid, folds=k, seed=args.seed,
                            optimizer=_optimizer_config(args))
    result = crossval.cross_validate(sample, _noreg_spec_builder(args, sample), cfg)
    _write_intensity_csv(args.output, result.solution)
    outputs = [args.output]
    if args.scores_output:
        with open(args.scores_output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["weight", "mean_heldout_loglik"])
            for w, s in result.weight_scores:
                writer.writerow([_fmt(w), _fmt(s)])
        outputs.append(args.scores_output)
    print(f"best weight: {result.best_weight}")
    _write_manifest(args, [args.sample, args.discretization, args.time_config,
                           args.weights_file], outputs)
    return 0


def cmd_report(args) -> int:
    _require(args.intensities)
    sums: dict = {}
    with open(args.intensities, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"c", "i", "t", "lambda"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise InputError(f"{args.intensities}: header must contain {sorted(needed)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                c, t, lam = int(row["c"]), int(row["t"]), float(row["lambda"])
            except (ValueError, TypeError) as exc:
                raise InputError(f"{args.intensities}:{lineno}: bad row ({exc})") from None
            key = (c, t) if args.group_by == "c,t" else (t,)
            sums[key] = sums.get(key, 0.0) + lam
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        if args.group_by == "c,t":
            writer.writerow(["c", "t", "rate"])
            for key in sorted(sums):
                writer.writerow([key[0], key[1], _fmt(sums[key])])
        else:
            writer.writerow(["t", "rate"])
            for key in sorted(sums):
                writer.writerow([key[0], _fmt(sums[key])])
    _write_manifest(args, [args.intensities], [args.output])
    return 0


def cmd_reallocate(args) -> int:
    _require(args.source)
    _require(args.target)
    d1 = spacegrid.discretization_from_json(_load_json(args.source))
    d2 = spacegrid.discretization_from_json(_load_json(args.target))
    values = spacegrid.reallocate_attribute(d1, args.attribute, d2)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["zone_id", args.attribute])
        for i, v in enumerate(values):
            writer.writerow([i, _fmt(v)])
    _write_manifest(args, [args.source, args.target], [args.output])
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stpoisson",
        description="Discretize space and time, aggregate events, and calibrate "
                    "Poisson intensity models.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file supplying defaults for any flag")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("STPOISSON_THREADS", "0")) or None,
                       help="worker cap (informational; execution is deterministic)")

    p = sub.add_parser("discretize", help="build a spatial discretization")
    common(p)
    p.add_argument("--border", required=True)
    p.add_argument("--method", required=True, choices=["rect", "hex", "voronoi", "custom"])
    p.add_argument("--nx", type=int, default=10)
    p.add_argument("--ny", type=int, default=10)
    p.add_argument("--scale", type=int, default=7)
    p.add_argument("--sites", help="CSV with x,y site columns (voronoi)")
    p.add_argument("--subregions", help="features JSON (custom)")
    p.add_argument("--neighbor-rule", default="edge-only",
                   choices=["edge-only", "edge-or-vertex"])
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("aggregate", help="bin events into count tensors")
    common(p)
    p.add_argument("--events", required=True)
    p.add_argument("--discretization", required=True)
    p.add_argument("--time-config", required=True)
    p.add_argument("--start", required=True, help="horizon start (ISO-8601)")
    p.add_argument("--end", required=True, help="horizon end (ISO-8601)")
    p.add_argument("--types", type=int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("simulate", help="generate synthetic benchmark samples")
    common(p)
    p.add_argument("--scenario", required=True, choices=["ex1", "ex2", "ex3", "ex4"])
    p.add_argument("--observations", type=int, default=10)
    p.add_argument("--years", type=int, default=1, help="data years (ex4 schedule)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--truth-output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit a model on an aggregated sample")
    common(p)
    p.add_argument("--sample", required=True)
    p.add_argument("--model", required=True, choices=["noreg", "cov"])
    p.add_argument("--time-weight", type=float, default=0.0)
    p.add_argument("--space-weight", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=intensity.DEFAULT_EPSILON)
    p.add_argument("--covariates")
    p.add_argument("--discretization", help="source of the zone adjacency list")
    p.add_argument("--time-config", help="source of the time groups")
    p.add_argument("--variant", default="feasible-direction",
                   choices=["feasible-direction", "boundary"])
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--output", required=True)
    p.add_argument("--result-output")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("cv", help="select regularization weights by cross-validation")
    common(p)
    p.add_argument("--sample", required=True)
    p.add_argument("--weights-list", nargs="+")
    p.add_argument("--weights-file")
    p.add_argument("--cv-proportion", type=float, default=0.2,
                   help="training share per replication; folds = round(1/p)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=intensity.DEFAULT_EPSILON)
    p.add_argument("--discretization")
    p.add_argument("--time-config")
    p.add_argument("--variant", default="feasible-direction",
                   choices=["feasible-direction", "boundary"])
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--output", required=True)
    p.add_argument("--scores-output")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("report", help="aggregate calibrated rates by interval")
    common(p)
    p.add_argument("--intensities", required=True)
    p.add_argument("--group-by", default="t", choices=["t", "c,t"])
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reallocate", help="transfer a zone attribute between discretizations")
    common(p)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--attribute", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_reallocate)

    return parser


def _apply_config_file(parser, argv):
    """Seed parser defaults from --config JSON; explicit flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    doc = _load_json(known.config)
    if not isinstance(doc, dict):
        raise InputError(f"{known.config}: config must be a JSON object")
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            valid = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in doc.items() if k in valid})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except StpoissonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
