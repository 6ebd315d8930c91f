"""Confounder diagnostics on death registers and rosters.

Histograms of registration times, indices for time heaping and the
midnight registration spike, admissions-vs-deaths monthly series,
staffing-level cross-tabulations and shift start/end distributions.
"""

from __future__ import annotations

import calendar
import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    AdmissionRecord,
    DeathRecord,
    EmptyInputError,
    ShiftRecord,
)

DAY_START = 7 * 60
DAY_END = 21 * 60
SPIKE_WINDOW = 5
WEEKDAYS = tuple(calendar.day_abbr)
MONTHS = tuple(calendar.month_abbr[1:])


@dataclass(frozen=True)
class Histogram:
    bin_labels: tuple
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.bin_labels) != len(self.counts):
            raise ValueError("labels and counts differ in length")
        if any(c < 0 for c in self.counts):
            raise ValueError("negative count")

    @classmethod
    def from_mapping(cls, counts: Mapping, labels: Sequence) -> "Histogram":
        return cls(tuple(labels), tuple(int(counts.get(k, 0)) for k in labels))

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __getitem__(self, label) -> int:
        return self.counts[self.bin_labels.index(label)]

    def __add__(self, other: "Histogram") -> "Histogram":
        if self.bin_labels != other.bin_labels:
            raise ValueError("cannot merge histograms with different bins")
        return Histogram(self.bin_labels, tuple(a + b for a, b in zip(self.counts, other.counts)))

    def as_dict(self) -> dict:
        return {"labels": list(self.bin_labels), "counts": list(self.counts)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("label", "count"))
        w.writerows(zip(self.bin_labels, self.counts))
        return buf.getvalue()


def render_histogram(hist: Histogram, label_title: str, count_title: str = "frequency",
                     drop: str | None = None) -> str:
    """Two-row text table: labels on top, counts below.

    ``drop="zeros"`` omits every empty bin, ``drop="trim"`` only strips
    leading and trailing empty bins.
    """
    pairs = list(zip(hist.bin_labels, hist.counts))
    if drop == "zeros":
        pairs = [p for p in pairs if p[1]]
    elif drop == "trim":
        nz = [i for i, (_, c) in enumerate(pairs) if c]
        pairs = pairs[nz[0]:nz[-1] + 1] if nz else []
    elif drop is not None:
        raise ValueError(f"unknown drop mode {drop!r}")
    labels = [str(l) for l, _ in pairs]
    counts = [str(c) for _, c in pairs]
    widths = [max(len(a), len(b)) for a, b in zip(labels, counts)]
    head = max(len(label_title), len(count_title))
    top = " ".join(a.rjust(w) for a, w in zip(labels, widths))
    bottom = " ".join(b.rjust(w) for b, w in zip(counts, widths))
    return f"{label_title.rjust(head)} | {top}\n{count_title.rjust(head)} | {bottom}\n"


def _histogram(values: Iterable, labels: Sequence) -> Histogram:
    return Histogram.from_mapping(Counter(values), labels)


def deaths_by_hour(deaths: Iterable[DeathRecord]) -> Histogram:
    return _histogram((d.registered_at.hour for d in deaths), range(24))


def deaths_by_minute(deaths: Iterable[DeathRecord]) -> Histogram:
    return _histogram((d.registered_at.minute for d in deaths), range(60))


def deaths_by_weekday(deaths: Iterable[DeathRecord]) -> Histogram:
    """Bins Monday..Sunday."""
    counts = Counter(d.registered_at.date.weekday() for d in deaths)
    return Histogram(WEEKDAYS, tuple(counts.get(i, 0) for i in range(7)))


def deaths_by_month(deaths: Iterable[DeathRecord]) -> Histogram:
    """Bins January..December, pooled over years."""
    counts = Counter(d.registered_at.date.month for d in deaths)
    return Histogram(MONTHS, tuple(counts.get(i, 0) for i in range(1, 13)))


def heaping_index(deaths: Iterable[DeathRecord]) -> float:
    """Share of registrations on :00 or :30, relative to the 2/60 expected
    under uniform minutes. 1 means no heaping; the maximum is 30."""
    minutes = [d.registered_at.minute for d in deaths]
    if not minutes:
        raise EmptyInputError("heaping index needs at least one death")
    share = sum(m in (0, 30) for m in minutes) / len(minutes)
    return share / (2 / 60)


@dataclass(frozen=True)
class MidnightSpike:
    window_count: int
    mean_neighbor_count: float
    ratio: float

    def as_dict(self) -> dict:
        return {"window_count": self.window_count,
                "mean_neighbor_count": self.mean_neighbor_count,
                "ratio": self.ratio}


def midnight_spike(deaths: Iterable[DeathRecord]) -> MidnightSpike:
    """Deaths registered in [00:00, 00:05) against the mean of the other
    287 five-minute windows of the day. ``ratio`` is +inf when every
    registration falls inside the midnight window."""
    windows = np.zeros(1440 // SPIKE_WINDOW, dtype=np.int64)
    n = 0
    for d in deaths:
        windows[d.registered_at.minute_of_day // SPIKE_WINDOW] += 1
        n += 1
    if n == 0:
        raise EmptyInputError("midnight spike needs at least one death")
    window = int(windows[0])
    mean_other = float(windows[1:].sum()) / (len(windows) - 1)
    ratio = window / mean_other if mean_other > 0 else math.inf
    return MidnightSpike(window, mean_other, ratio)


@dataclass(frozen=True)
class MonthRow:
    month: str
    admissions: int
    deaths: int


def monthly_series(admissions: Iterable[AdmissionRecord],
                   deaths: Iterable[DeathRecord]) -> list[MonthRow]:
    """Admissions (by admit date) and deaths (by registration date) per
    calendar month, covering every month from the first to the last event,
    empty months included."""
    adm = Counter((a.admit_date.year, a.admit_date.month) for a in admissions)
    dth = Counter((d.registered_at.date.year, d.registered_at.date.month) for d in deaths)
    keys = set(adm) | set(dth)
    if not keys:
        return []
    (y, m), last = min(keys), max(keys)
    rows = []
    while (y, m) <= last:
        rows.append(MonthRow(f"{y:04d}-{m:02d}", adm.get((y, m), 0), dth.get((y, m), 0)))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return rows


@dataclass(frozen=True)
class ShiftEdges:
    start_target: Histogram
    start_others: Histogram
    end_target: Histogram
    end_others: Histogram

    def as_dict(self) -> dict:
        return {k: getattr(self, k).as_dict()
                for k in ("start_target", "start_others", "end_target", "end_others")}


def shift_edge_histograms(roster: Iterable[ShiftRecord], target_nurse: str) -> ShiftEdges:
    """Hour-of-day histograms of clock-in and clock-out times, for the
    target nurse and for everyone else."""
    starts = {True: Counter(), False: Counter()}
    ends = {True: Counter(), False: Counter()}
    for s in roster:
        is_target = s.nurse_id == target_nurse
        starts[is_target][s.clock_in.hour] += 1
        ends[is_target][s.clock_out.hour] += 1
    hours = range(24)
    return ShiftEdges(
        Histogram.from_mapping(starts[True], hours),
        Histogram.from_mapping(starts[False], hours),
        Histogram.from_mapping(ends[True], hours),
        Histogram.from_mapping(ends[False], hours),
    )


class DutyIndex:
    """Vectorised lookup of who is on duty at given instants.

    A nurse is on duty at t iff clock_in <= t < clock_out for one of their
    shifts. Each nurse is counted once however many records cover t.
    """

    def __init__(self, roster: Iterable[ShiftRecord]):
        shifts = list(roster)
        self.nurse_ids = list(dict.fromkeys(s.nurse_id for s in shifts))
        code = {n: i for i, n in enumerate(self.nurse_ids)}
        self._nurse = np.array([code[s.nurse_id] for s in shifts], dtype=np.int64)
        self._start = np.array([s.start for s in shifts], dtype=np.int64)
        self._end = np.array([s.end for s in shifts], dtype=np.int64)

    def on_duty(self, t: int) -> np.ndarray:
        """Boolean mask over ``nurse_ids`` for instant ``t`` (CivilTime.stamp)."""
        active = (self._start <= t) & (t < self._end)
        mask = np.zeros(len(self.nurse_ids), dtype=bool)
        mask[self._nurse[active]] = True
        return mask

    def count(self, t: int) -> int:
        return int(self.on_duty(t).sum())

    def is_on_duty(self, nurse_id: str, t: int) -> bool:
        if nurse_id not in self.nurse_ids:
            return False
        return bool(self.on_duty(t)[self.nurse_ids.index(nurse_id)])


@dataclass(frozen=True)
class StaffingCrossTab:
    """Deaths tabulated by the number of nurses on duty at registration.

    ``tables`` maps a split part (``all``; ``day``/``night``;
    ``with``/``without``) to {staffing level: death count}.
    """

    split: str
    tables: dict[str, dict[int, int]]

    def levels(self) -> list[int]:
        return sorted({k for t in self.tables.values() for k in t})

    def total(self) -> dict[int, int]:
        out: Counter = Counter()
        for t in self.tables.values():
            out.update(t)
        return {k: out[k] for k in sorted(out)}

    def as_dict(self) -> dict:
        return {"split": self.split,
                "tables": {part: {str(k): v for k, v in sorted(t.items())}
                           for part, t in self.tables.items()}}

    def render(self, target_label: str = "target") -> str:
        levels = self.levels()
        names = {"all": "number of deaths", "day": "deaths (day)", "night": "deaths (night)",
                 "with": f"deaths with {target_label}", "without": "deaths others"}
        rows = [("number of nurses", [str(l) for l in levels])]
        for part, table in self.tables.items():
            rows.append((names[part], [str(table.get(l, 0)) for l in levels]))
        widths = [max(len(r[1][i]) for r in rows) for i in range(len(levels))]
        head = max(len(r[0]) for r in rows)
        return "".join(
            f"{name.rjust(head)} | " + " ".join(c.rjust(w) for c, w in zip(cells, widths)) + "\n"
            for name, cells in rows
        )


SPLITS = ("none", "day/night", "with/without")


def staffing_crosstab(roster: Iterable[ShiftRecord], deaths: Iterable[DeathRecord],
                      target_nurse: str | None = None, split: str = "none",
                      day_start: int = DAY_START, day_end: int = DAY_END) -> StaffingCrossTab:
    """Tabulate deaths by how many nurses were on duty when each was registered.

    ``day_start``/``day_end`` are minutes of day; day is [day_start,
    day_end), night the complement. The with/without split needs
    ``target_nurse`` and separates deaths registered while the target nurse was on duty.
    """
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    if split == "with/without" and target_nurse is None:
        raise ValueError("with/without split needs a target nurse")
    index = DutyIndex(roster)
    parts = {"none": ("all",), "day/night": ("day", "night"), "with/without": ("with", "without")}[split]
    tables: dict[str, Counter] = {p: Counter() for p in parts}
    for d in deaths:
        t = d.registered_at.stamp
        mask = index.on_duty(t)
        level = int(mask.sum())
        if split == "none":
            part = "all"
        elif split == "day/night":
            part = "day" if day_start <= d.registered_at.minute_of_day < day_end else "night"
        else:
            present = target_nurse in index.nurse_ids and mask[index.nurse_ids.index(target_nurse)]
            part = "with" if present else "without"
        tables[part][level] += 1
    return StaffingCrossTab(split, {p: dict(sorted(c.items())) for p, c in tables.items()})


AGE_LABELS = ("<=50", "(50,60]", "(60,70]", "(70,80]", "(80,90]", "(90,100]", ">100")


def _age_bin(age: int) -> str:
    if age <= 50:
        return AGE_LABELS[0]
    if age > 100:
        return AGE_LABELS[-1]
    return AGE_LABELS[(age - 1) // 10 - 4]


@dataclass(frozen=True)
class AgeSummary:
    median: int
    decade_histogram: Histogram

    def as_dict(self) -> dict:
        return {"median": self.median, "decade_histogram": self.decade_histogram.as_dict()}


def age_summary(deaths: Iterable[DeathRecord]) -> AgeSummary:
    """Median age (lower-middle value for even counts) and ten-year bins
    right-closed like (80,90], with open-ended bins at both extremes."""
    ages = sorted(d.age_years for d in deaths)
    if not ages:
        raise EmptyInputError("age summary needs at least one death")
    median = ages[(len(ages) - 1) // 2]
    return AgeSummary(median, _histogram((_age_bin(a) for a in ages), AGE_LABELS))
