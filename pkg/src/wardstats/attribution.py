"""Assigning deaths to nurses, and same/opposite-zone risk tables.

Two attribution rules are implemented side by side so their divergence
can be measured:

* ``per_day``: a death counts for a nurse if it was registered on any
  calendar date touched by one of the nurse's shifts. A night shift
  touches two dates, so deaths well before arrival and after departure
  are counted.
* ``per_presence``: a death counts only if the nurse was on duty at the
  registration instant, using half-open intervals [clock_in, clock_out).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import CivilTime, DeathRecord, ShiftRecord, Zone

MODES = ("per_day", "per_presence")
HANDOVER_RULES = ("both", "incoming_only", "outgoing_only")

# official handover windows (minute of day, length)
HANDOVER_STARTS = (7 * 60, 14 * 60, 21 * 60)
HANDOVER_LENGTH = 10
# how far from a window a punch may be and still belong to that handover
HANDOVER_SLACK = 120


@dataclass(frozen=True)
class AttributionPolicy:
    mode: str = "per_presence"
    handover_rule: str = "both"
    # per_day only: a date worked in both zones counts a death as "same"
    tie_same: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.handover_rule not in HANDOVER_RULES:
            raise ValueError(f"handover_rule must be one of {HANDOVER_RULES}")


def _shifts_of(roster: Iterable[ShiftRecord], nurse: str) -> list[ShiftRecord]:
    return [s for s in roster if s.nurse_id == nurse]


def dates_touched(shift: ShiftRecord) -> list[dt.date]:
    """Calendar dates with at least one on-duty minute."""
    last = CivilTime.from_minutes(shift.end - 1).date
    day, out = shift.clock_in.date, []
    while day <= last:
        out.append(day)
        day += dt.timedelta(days=1)
    return out


def attribute_per_day(roster: Iterable[ShiftRecord], deaths: Iterable[DeathRecord], nurse: str) -> int:
    dates = {d for s in _shifts_of(roster, nurse) for d in dates_touched(s)}
    return sum(d.registered_at.date in dates for d in deaths)


def _handover_window(t: CivilTime) -> tuple[int, int] | None:
    for start in HANDOVER_STARTS:
        if start <= t.minute_of_day < start + HANDOVER_LENGTH:
            base = t.stamp - t.minute_of_day
            return base + start, base + start + HANDOVER_LENGTH
    return None


def handover_role(shift: ShiftRecord, t: CivilTime) -> str | None:
    """Role of an active shift at instant t: ``incoming``, ``outgoing``,
    or None outside a handover window or when the shift spans it widely
    (a double shift passing through)."""
    window = _handover_window(t)
    if window is None or not shift.covers(t):
        return None
    ws, we = window
    if shift.end <= we + HANDOVER_SLACK and shift.start < ws:
        return "outgoing"
    if shift.start >= ws - HANDOVER_SLACK and shift.end > we:
        return "incoming"
    return None


def _counts_under(shift: ShiftRecord, t: CivilTime, rule: str) -> bool:
    if not shift.covers(t):
        return False
    if rule == "both":
        return True
    role = handover_role(shift, t)
    if rule == "incoming_only":
        return role != "outgoing"
    return role != "incoming"


def covering_shift(shifts: Sequence[ShiftRecord], t: CivilTime, rule: str = "both") -> ShiftRecord | None:
    """First shift (in roster order) under which a death at t counts."""
    for s in shifts:
        if _counts_under(s, t, rule):
            return s
    return None


def attribute_per_presence(roster: Iterable[ShiftRecord], deaths: Iterable[DeathRecord], nurse: str,
                           policy: AttributionPolicy | None = None) -> int:
    rule = (policy or AttributionPolicy()).handover_rule
    shifts = _shifts_of(roster, nurse)
    return sum(covering_shift(shifts, d.registered_at, rule) is not None for d in deaths)


def attribute(roster, deaths, nurse: str, policy: AttributionPolicy | None = None) -> int:
    policy = policy or AttributionPolicy()
    if policy.mode == "per_day":
        return attribute_per_day(roster, deaths, nurse)
    return attribute_per_presence(roster, deaths, nurse, policy)


def merge_intervals(intervals: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def hours_on_duty(roster: Iterable[ShiftRecord], nurse: str,
                  period: tuple[CivilTime, CivilTime] | None = None) -> float:
    """Hours covered by the union of a nurse's shifts, optionally clipped
    to ``period`` = [start, end). Overlapping records are not double counted."""
    spans = [(s.start, s.end) for s in _shifts_of(roster, nurse)]
    if period is not None:
        lo, hi = period[0].stamp, period[1].stamp
        spans = [(max(a, lo), min(b, hi)) for a, b in spans if b > lo and a < hi]
    return sum(b - a for a, b in merge_intervals(spans)) / 60.0


def duty_mask(shifts: Iterable[ShiftRecord], origin: int, n_minutes: int) -> np.ndarray:
    """Boolean per-minute presence over [origin, origin + n_minutes)."""
    mask = np.zeros(n_minutes, dtype=bool)
    for s in shifts:
        a, b = max(s.start - origin, 0), min(s.end - origin, n_minutes)
        if a < b:
            mask[a:b] = True
    return mask


@dataclass(frozen=True)
class RiskTableRow:
    nurse_id: str
    same_zone_deaths: int
    opposite_zone_deaths: int
    total: int
    hours_on_duty: float
    rate_same: float | None
    rate_opposite: float | None
    relative_risk: float | None
    absolute_risk: float | None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in TABLE_COLUMNS}


TABLE_COLUMNS = ("nurse_id", "same_zone_deaths", "opposite_zone_deaths", "total", "hours_on_duty",
                 "rate_same", "rate_opposite", "relative_risk", "absolute_risk")


def zone_risk_row(same: int, opposite: int, hours: float, nurse_id: str = "") -> RiskTableRow:
    """Shares of a nurse's deaths in the nurse's own zone vs the opposite zone.

    rates are count/total (they sum to 1), relative risk is their ratio
    and absolute risk their difference. RR is +inf when opposite is 0 and
    same is not; all derived fields are None when there are no deaths.
    """
    if same < 0 or opposite < 0:
        raise ValueError("counts must be non-negative")
    total = same + opposite
    if total == 0:
        return RiskTableRow(nurse_id, same, opposite, 0, hours, None, None, None, None)
    rate_same, rate_opp = same / total, opposite / total
    rr = same / opposite if opposite else math.inf
    return RiskTableRow(nurse_id, same, opposite, total, hours, rate_same, rate_opp, rr, rate_same - rate_opp)


def zone_counts(roster: Iterable[ShiftRecord], deaths: Iterable[DeathRecord], nurse: str,
                policy: AttributionPolicy | None = None) -> tuple[int, int]:
    """(same-zone, opposite-zone) deaths attributed to ``nurse``.

    per_presence: the zone of the shift active at registration decides.
    per_day: any shift touching the registration date; a date worked in
    both zones counts as "same" unless ``policy.tie_same`` is False.
    """
    policy = policy or AttributionPolicy()
    shifts = _shifts_of(roster, nurse)
    same = opposite = 0
    if policy.mode == "per_presence":
        for d in deaths:
            s = covering_shift(shifts, d.registered_at, policy.handover_rule)
            if s is None:
                continue
            if s.zone == d.zone:
                same += 1
            else:
                opposite += 1
        return same, opposite
    zones_by_date: dict[dt.date, set[Zone]] = defaultdict(set)
    for s in shifts:
        for day in dates_touched(s):
            zones_by_date[day].add(s.zone)
    for d in deaths:
        zones = zones_by_date.get(d.registered_at.date)
        if not zones:
            continue
        if len(zones) == 2:
            is_same = policy.tie_same
        else:
            is_same = d.zone in zones
        if is_same:
            same += 1
        else:
            opposite += 1
    return same, opposite


def similar_hours(roster: Sequence[ShiftRecord], target: str, tolerance: float = 0.10) -> Callable[[str], bool]:
    """Filter accepting nurses whose hours are within ±tolerance of the target's."""
    ref = hours_on_duty(roster, target)
    hours = {n: hours_on_duty(roster, n) for n in {s.nurse_id for s in roster}}
    return lambda nurse: abs(hours.get(nurse, 0.0) - ref) <= tolerance * ref


def risk_table(roster: Sequence[ShiftRecord], deaths: Sequence[DeathRecord],
               nurse_filter: Callable[[str], bool] | None = None,
               policy: AttributionPolicy | None = None) -> list[RiskTableRow]:
    """One row per nurse in roster order (optionally filtered)."""
    roster, deaths = list(roster), list(deaths)
    rows = []
    for nurse in dict.fromkeys(s.nurse_id for s in roster):
        if nurse_filter is not None and not nurse_filter(nurse):
            continue
        same, opp = zone_counts(roster, deaths, nurse, policy)
        rows.append(zone_risk_row(same, opp, hours_on_duty(roster, nurse), nurse))
    return rows


CSV_HEADER = ("nurse", "same_zone", "opposite_zone", "total_deaths", "hours_on_duty",
              "rate_same", "rate_opposite", "relative_risk", "absolute_risk")


def _cell(value, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.{digits}f}"
    return str(value)


def risk_table_csv(rows: Iterable[RiskTableRow], digits: int = 2) -> str:
    """CSV in the column order of the classic same/opposite zone table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.nurse_id, r.same_zone_deaths, r.opposite_zone_deaths, r.total,
                    _cell(float(r.hours_on_duty), 0),
                    *(_cell(v, digits) for v in (r.rate_same, r.rate_opposite, r.relative_risk, r.absolute_risk))])
    return buf.getvalue()
