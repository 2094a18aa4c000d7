"""Event ingestion and aggregation into count tensors.

An observation is one complete occurrence of a time interval within the data
horizon.  Aggregation produces, per (type, zone, context, interval) cell, the
number of observations N, the total arrival count M, and the per-observation
arrival counts used for fold splitting.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import InputError, InvalidFoldCount, UnknownType
from .spacegrid import SpatialDiscretization
from .timegrid import TimeDiscretization, anchored, count_observations


@dataclass(frozen=True)
class EventRecord:
    """One observed arrival: timestamp, planar location, and type index."""

    ts: datetime
    x: float
    y: float
    type: int
    day_class: int | None = None


@dataclass
class AggregatedSample:
    """Count tensors indexed by (type c, zone i, context d, interval t).

    The context axis flattens day class and custom subset.  `per_obs` is an
    object array of int vectors: per_obs[c, i, d, t][n] is the arrival count of
    observation n, so arrivals = per-cell sums of per_obs.
    """

    durations: np.ndarray          # (T,)
    n_obs: np.ndarray              # (C, I, D, T) int
    arrivals: np.ndarray           # (C, I, D, T) int
    per_obs: np.ndarray | None = None
    dropped_outside: int = 0
    dropped_partial: int = 0

    @property
    def shape(self):
        return self.n_obs.shape

    @property
    def n_types(self) -> int:
        return self.n_obs.shape[0]

    @property
    def n_zones(self) -> int:
        return self.n_obs.shape[1]

    @property
    def n_contexts(self) -> int:
        return self.n_obs.shape[2]

    @property
    def n_intervals(self) -> int:
        return self.n_obs.shape[3]

    def total_arrivals(self) -> int:
        return int(self.arrivals.sum())

    def validate(self):
        if self.n_obs.shape != self.arrivals.shape:
            raise InputError("n_obs and arrivals shapes differ")
        if len(self.durations) != self.n_intervals:
            raise InputError("durations length must match the interval axis")
        if (self.n_obs < 0).any() or (self.arrivals < 0).any():
            raise InputError("counts must be nonnegative")
        if self.per_obs is not None:
            for idx in np.ndindex(self.shape):
                cell = self.per_obs[idx]
                if len(cell) != self.n_obs[idx] or cell.sum() != self.arrivals[idx]:
                    raise InputError(f"per-observation counts inconsistent at {idx}")
        return self

    def flat_time(self):
        """Fold the context axis into time: (N, M, durations) with T' = D*T.

        Flat index (d, t) -> d * T + t; durations repeat per context block.
        """
        c, i, d, t = self.shape
        n = self.n_obs.reshape(c, i, d * t)
        m = self.arrivals.reshape(c, i, d * t)
        dur = np.tile(self.durations, d)
        return n, m, dur

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        doc = {
            "shape": list(self.shape),
            "durations": [float(d) for d in self.durations],
            "n_obs": self.n_obs.ravel().tolist(),
            "arrivals": self.arrivals.ravel().tolist(),
            "dropped_outside": self.dropped_outside,
            "dropped_partial": self.dropped_partial,
        }
        if self.per_obs is not None:
            flat = []
            for idx in np.ndindex(self.shape):
                flat.extend(int(v) for v in self.per_obs[idx])
            doc["per_obs"] = flat
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "AggregatedSample":
        shape = tuple(doc["shape"])
        n_obs = np.array(doc["n_obs"], dtype=np.int64).reshape(shape)
        arrivals = np.array(doc["arrivals"], dtype=np.int64).reshape(shape)
        per_obs = None
        if "per_obs" in doc:
            flat = np.array(doc["per_obs"], dtype=np.int64)
            per_obs = np.empty(shape, dtype=object)
            pos = 0
            for idx in np.ndindex(shape):
                n = int(n_obs[idx])
                per_obs[idx] = flat[pos:pos + n].copy()
                pos += n
        return cls(np.array(doc["durations"], dtype=float), n_obs, arrivals, per_obs,
                   int(doc.get("dropped_outside", 0)),
                   int(doc.get("dropped_partial", 0))).validate()

    def save(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str) -> "AggregatedSample":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def empty_per_obs(n_obs: np.ndarray) -> np.ndarray:
    per = np.empty(n_obs.shape, dtype=object)
    for idx in np.ndindex(n_obs.shape):
        per[idx] = np.zeros(int(n_obs[idx]), dtype=np.int64)
    return per


def read_events_csv(path: str) -> list[EventRecord]:
    """Strictly parse an events CSV with header ts,lat,lon,type[,day_class]."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"ts", "lat", "lon", "type"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InputError(f"{path}: header must contain {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                ts = datetime.fromisoformat(row["ts"])
                lat, lon = float(row["lat"]), float(row["lon"])
                etype = int(row["type"])
                if not (math.isfinite(lat) and math.isfinite(lon)):
                    raise ValueError("non-finite coordinates")
                dc = row.get("day_class")
                day_class = int(dc) if dc not in (None, "") else None
            except (ValueError, TypeError, KeyError) as exc:
                raise InputError(f"{path}:{lineno}: bad event record ({exc})") from None
            out.append(EventRecord(ts, lon, lat, etype, day_class))
    return out


def aggregate(events, sd: SpatialDiscretization, td: TimeDiscretization,
              horizon: tuple[datetime, datetime],
              n_types: int | None = None) -> AggregatedSample:
    """Bin events into (type, zone, context, interval, observation) cells.

    Events outside the border are tallied in `dropped_outside`; events falling
    in a partial interval occurrence at the horizon edge (which carries no
    observation) are tallied in `dropped_partial`.
    """
    events = list(events)
    start, end = horizon
    td = anchored(td, start)
    if n_types is None:
        n_types = max((e.type for e in events), default=0) + 1
    for e in events:
        if not 0 <= e.type < n_types:
            raise UnknownType(f"event type {e.type} outside [0, {n_types})")
        if not start <= e.ts < end:
            raise InputError(f"event at {e.ts} outside the horizon")

    overrides: dict = {}
    for e in events:
        if e.day_class is None:
            continue
        prev = overrides.setdefault(e.ts.date(), e.day_class)
        if prev != e.day_class:
            raise InputError(f"conflicting day_class overrides on {e.ts.date()}")

    obs = count_observations(td, start, end, day_class_overrides=overrides or None)
    n_ctx = obs.counts.shape[0]
    n_zones = sd.n_zones
    t_count = td.n_intervals

    n_obs = np.broadcast_to(obs.counts[None, None], (n_types, n_zones, n_ctx, t_count)).copy()
    arrivals = np.zeros_like(n_obs)
    per_obs = empty_per_obs(n_obs)

    dropped_outside = 0
    dropped_partial = 0
    if events:
        xs = np.array([e.x for e in events])
        ys = np.array([e.y for e in events])
        zone_ids = sd.locate_many(xs, ys)
        period = td.period_seconds
        for e, zid in zip(events, zone_ids):
            if zid < 0:
                dropped_outside += 1
                continue
            key = td.map_timestamp(e.ts)
            k = math.floor((e.ts - td.epoch).total_seconds() / period)
            hit = obs.lookup.get((key.interval, k))
            if hit is None:
                dropped_partial += 1
                continue
            ctx, n = hit
            arrivals[e.type, zid, ctx, key.interval] += 1
            per_obs[e.type, zid, ctx, key.interval][n] += 1

    return AggregatedSample(td.durations_array(), n_obs, arrivals, per_obs,
                            dropped_outside, dropped_partial).validate()


def split_folds(sample: AggregatedSample, k: int, seed: int):
    """Partition observations of every cell into k near-even folds.

    Returns k (train, test) pairs: replication r trains on fold r alone and
    tests on the union of the other folds, so the training share is 1/k.
    Observation indices are shuffled with a per-cell seeded generator, making
    the split independent of cell iteration order.
    """
    if k < 2:
        raise InvalidFoldCount("fold count must be >= 2")
    if sample.per_obs is None:
        raise InputError("sample lacks per-observation counts; cannot split")

    shape = sample.shape
    fold_members = np.empty(shape, dtype=object)  # cell -> list of k index arrays
    for idx in np.ndindex(shape):
        n = int(sample.n_obs[idx])
        rng = np.random.default_rng((seed,) + idx)
        perm = rng.permutation(n)
        base, extra = divmod(n, k)
        members, pos = [], 0
        for f in range(k):
            size = base + (1 if f < extra else 0)
            members.append(np.sort(perm[pos:pos + size]))
            pos += size
        fold_members[idx] = members

    def subsample(fold_sets):
        n_obs = np.zeros(shape, dtype=np.int64)
        arrivals = np.zeros(shape, dtype=np.int64)
        per = np.empty(shape, dtype=object)
        for idx in np.ndindex(shape):
            picks = np.concatenate([fold_members[idx][f] for f in fold_sets]) \
                if fold_sets else np.zeros(0, dtype=np.int64)
            picks = np.sort(picks)
            cell = sample.per_obs[idx][picks]
            per[idx] = cell
            n_obs[idx] = len(cell)
            arrivals[idx] = cell.sum()
        return AggregatedSample(sample.durations.copy(), n_obs, arrivals, per)

    out = []
    for r in range(k):
        train = subsample([r])
        test = subsample([f for f in range(k) if f != r])
        out.append((train, test))
    return out
