"""Periodic time discretizations with day classes and custom subset windows.

Timestamps are naive local datetimes; there is no DST arithmetic.  Interval
boundaries are left-closed/right-open, so a timestamp exactly on a boundary
maps to the interval that starts there.  Periodic schemes are anchored at an
epoch (by default the Monday 00:00 at or before the data start).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta

import numpy as np

from .errors import InputError

UNIT_SECONDS = {
    "second": 1.0,
    "minute": 60.0,
    "hour": 3600.0,
    "day": 86400.0,
    "week": 604800.0,
}


@dataclass(frozen=True)
class TimeKey:
    """Discrete time coordinates of one instant."""

    interval: int
    day_class: int = 0
    subset: int = 0


@dataclass(frozen=True)
class HolidayRule:
    """A special calendar day: fixed date, or yearly repeating when year is None."""

    month: int
    day: int
    year: int | None = None

    def matches(self, d: date) -> bool:
        if self.year is not None and d.year != self.year:
            return False
        return d.month == self.month and d.day == self.day

    @classmethod
    def parse(cls, text: str) -> "HolidayRule":
        parts = text.split("-")
        if len(parts) == 3:
            return cls(int(parts[1]), int(parts[2]), int(parts[0]))
        if len(parts) == 2:
            return cls(int(parts[0]), int(parts[1]))
        raise InputError(f"bad holiday rule {text!r} (want YYYY-MM-DD or MM-DD)")


@dataclass(frozen=True)
class SubsetWindow:
    """A [start, end) window; yearly windows repeat on the same dates each year."""

    start: datetime
    end: datetime
    yearly: bool = False

    def __post_init__(self):
        if self.end <= self.start:
            raise InputError("subset window end must be after start")

    def contains(self, ts: datetime) -> bool:
        if not self.yearly:
            return self.start <= ts < self.end
        try:
            s = self.start.replace(year=ts.year)
            e = self.end.replace(year=ts.year + (1 if self.end.year > self.start.year else 0))
        except ValueError:  # Feb 29 in a non-leap year
            return False
        if e.year > ts.year:
            return ts >= s or ts < e.replace(year=ts.year)
        return s <= ts < e


@dataclass(frozen=True)
class TimeDiscretization:
    """Indexed time intervals with durations, groups, day classes, and subsets."""

    durations: tuple
    time_unit: str = "hour"
    epoch: datetime | None = None
    kind: str = "periodic-equal"
    groups: tuple | None = None
    weekday_classes: bool = False
    holidays: tuple = ()
    custom_subsets: tuple = ()  # of (subset_index, tuple[SubsetWindow, ...])

    def __post_init__(self):
        if self.time_unit not in UNIT_SECONDS:
            raise InputError(f"unknown time unit {self.time_unit!r}")
        if len(self.durations) == 0 or any(d <= 0 for d in self.durations):
            raise InputError("interval durations must be positive")
        if self.groups is not None:
            flat = sorted(t for g in self.groups for t in g)
            if flat != list(range(len(self.durations))):
                raise InputError("groups must partition the interval indices")
        for idx, windows in self.custom_subsets:
            if idx < 1:
                raise InputError("custom subset indices start at 1 (0 is the default subset)")
            spans = sorted((w.start, w.end) for w in windows)
            for (s1, e1), (s2, _) in zip(spans, spans[1:]):
                if s2 < e1:
                    raise InputError(f"subset {idx} has overlapping windows")

    # -- sizes ---------------------------------------------------------------

    @property
    def n_intervals(self) -> int:
        return len(self.durations)

    @property
    def period_length(self) -> float:
        return float(sum(self.durations))

    @property
    def period_seconds(self) -> float:
        return self.period_length * UNIT_SECONDS[self.time_unit]

    @property
    def n_day_classes(self) -> int:
        return (7 if self.weekday_classes else 1) + len(self.holidays)

    @property
    def n_subsets(self) -> int:
        return 1 + max((idx for idx, _ in self.custom_subsets), default=0)

    @property
    def n_contexts(self) -> int:
        return self.n_day_classes * self.n_subsets

    def context_index(self, day_class: int, subset: int) -> int:
        return day_class * self.n_subsets + subset

    def durations_array(self) -> np.ndarray:
        return np.asarray(self.durations, dtype=float)

    def with_epoch(self, epoch: datetime) -> "TimeDiscretization":
        return replace(self, epoch=epoch)

    # -- classification -------------------------------------------------------

    def day_class_of(self, d: date) -> int:
        base = 7 if self.weekday_classes else 1
        for k, rule in enumerate(self.holidays):
            if rule.matches(d):
                return base + k
        return d.weekday() if self.weekday_classes else 0

    def subset_of(self, ts: datetime) -> int:
        for idx, windows in self.custom_subsets:
            if any(w.contains(ts) for w in windows):
                return idx
        return 0

    def _interval_starts(self):
        starts = [0.0]
        unit = UNIT_SECONDS[self.time_unit]
        for d in self.durations:
            starts.append(starts[-1] + d * unit)
        return starts

    def map_timestamp(self, ts: datetime) -> TimeKey:
        """Discrete coordinates of a timestamp (left-closed interval convention)."""
        if self.epoch is None:
            raise InputError("time discretization has no epoch; anchor it first")
        starts = self._interval_starts()
        pos = (ts - self.epoch).total_seconds() % self.period_seconds
        interval = bisect.bisect_right(starts, pos) - 1
        interval = min(max(interval, 0), self.n_intervals - 1)
        return TimeKey(interval, self.day_class_of(ts.date()), self.subset_of(ts))

    def interval_window(self, k: int, t: int) -> tuple[datetime, datetime]:
        """Absolute [start, end) of interval t in period occurrence k."""
        starts = self._interval_starts()
        base = self.epoch + timedelta(seconds=k * self.period_seconds)
        return (base + timedelta(seconds=starts[t]), base + timedelta(seconds=starts[t + 1]))


def default_epoch(data_start: datetime) -> datetime:
    """The Monday 00:00 at or before `data_start`."""
    day = datetime(data_start.year, data_start.month, data_start.day)
    return day - timedelta(days=day.weekday())


def anchored(td: TimeDiscretization, data_start: datetime) -> TimeDiscretization:
    """Resolve the epoch: keep an explicit one, else anchor to the default."""
    return td if td.epoch is not None else td.with_epoch(default_epoch(data_start))


class ObservationIndex:
    """Complete occurrences of each (interval, context) within a horizon.

    counts[ctx, t] is the number of complete occurrences N; lookup maps
    (interval, period-occurrence) to (context, 0-based occurrence position).
    """

    def __init__(self, counts: np.ndarray, lookup: dict):
        self.counts = counts
        self.lookup = lookup


def count_observations(td: TimeDiscretization, data_start: datetime,
                       data_end: datetime, day_class_overrides: dict | None = None,
                       n_day_classes: int | None = None) -> ObservationIndex:
    """Count complete occurrences of each (interval, context) in [start, end).

    Partial occurrences at the horizon edges are excluded.  The context of an
    occurrence (day class and custom subset) is taken at its start instant.
    `day_class_overrides` maps dates to day-class indices and takes precedence
    over the calendar rules.
    """
    if data_end <= data_start:
        raise InputError("data_end must be after data_start")
    if td.epoch is None:
        raise InputError("time discretization has no epoch; anchor it first")
    overrides = day_class_overrides or {}
    n_cls = n_day_classes or max(td.n_day_classes,
                                 max(overrides.values(), default=0) + 1)
    n_sub = td.n_subsets
    period = td.period_seconds
    k_lo = math.floor((data_start - td.epoch).total_seconds() / period) - 1
    k_hi = math.ceil((data_end - td.epoch).total_seconds() / period) + 1
    counts = np.zeros((n_cls * n_sub, td.n_intervals), dtype=np.int64)
    lookup: dict = {}
    for k in range(k_lo, k_hi + 1):
        for t in range(td.n_intervals):
            w_start, w_end = td.interval_window(k, t)
            if w_start < data_start or w_end > data_end:
                continue
            cls = overrides.get(w_start.date())
            if cls is None:
                cls = td.day_class_of(w_start.date())
            ctx = cls * n_sub + td.subset_of(w_start)
            lookup[(t, k)] = (ctx, int(counts[ctx, t]))
            counts[ctx, t] += 1
    return ObservationIndex(counts, lookup)


# -- JSON configuration -------------------------------------------------------

def from_config(doc: dict) -> TimeDiscretization:
    """Build a time discretization from its JSON configuration document."""
    unit = doc.get("time_unit", "hour")
    if "durations" in doc:
        durations = [float(d) for d in doc["durations"]]
        kind = "periodic-unequal"
        if "period" in doc:
            period = float(doc["period"])
            block = sum(durations)
            reps = period / block
            if abs(reps - round(reps)) > 1e-9 or reps < 1:
                raise InputError("period must be a positive multiple of the duration sum")
            durations = durations * int(round(reps))
    elif "slot" in doc:
        slot = float(doc["slot"])
        period = float(doc["period"])
        n = period / slot
        if abs(n - round(n)) > 1e-9 or n < 1:
            raise InputError("period must be a positive multiple of the slot length")
        durations = [slot] * int(round(n))
        kind = "periodic-equal"
    else:
        raise InputError("time config needs either 'durations' or 'slot'")

    epoch = datetime.fromisoformat(doc["epoch"]) if "epoch" in doc else None
    groups = tuple(tuple(int(t) for t in g) for g in doc["groups"]) if "groups" in doc else None
    holidays = tuple(HolidayRule.parse(h) for h in doc.get("holidays", []))
    subsets = []
    for sub in doc.get("custom_subsets", []):
        windows = tuple(
            SubsetWindow(datetime.fromisoformat(w["start"]),
                         datetime.fromisoformat(w["end"]),
                         bool(w.get("yearly", False)))
            for w in sub["windows"]
        )
        subsets.append((int(sub["index"]), windows))
    if subsets:
        kind = "custom"
    return TimeDiscretization(
        durations=tuple(durations),
        time_unit=unit,
        epoch=epoch,
        kind=doc.get("kind", kind),
        groups=groups,
        weekday_classes=bool(doc.get("weekday_classes", False)),
        holidays=holidays,
        custom_subsets=tuple(subsets),
    )


def periodic_equal(slot: float, count: int, time_unit: str = "hour",
                   **kwargs) -> TimeDiscretization:
    return TimeDiscretization((float(slot),) * count, time_unit,
                              kind="periodic-equal", **kwargs)


def periodic_unequal(durations, time_unit: str = "hour", **kwargs) -> TimeDiscretization:
    return TimeDiscretization(tuple(float(d) for d in durations), time_unit,
                              kind="periodic-unequal", **kwargs)
