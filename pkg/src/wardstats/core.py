"""Domain types and CSV ingestion for rosters, deaths and admissions.

All timestamps are naive civil time at one-minute resolution. Three CSV
schemas are supported, each with a mandatory header row::

    nurse_id,sector,clock_in,clock_out
    patient_id,sector,registered_at,age_years
    patient_id,sector,admit_date,discharge_date,age_years,died

Timestamps are ISO-8601 to the minute (``2013-04-01T06:55``), dates are
``YYYY-MM-DD``. A shift's sector field may name one sector (``A``) or two
contiguous sectors of the same zone (``CD``).
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

MINUTES_PER_DAY = 1440
MAX_SHIFT_MINUTES = 16 * 60
MAX_AGE = 120

ROSTER_HEADER = ("nurse_id", "sector", "clock_in", "clock_out")
DEATHS_HEADER = ("patient_id", "sector", "registered_at", "age_years")
ADMISSIONS_HEADER = ("patient_id", "sector", "admit_date", "discharge_date", "age_years", "died")


class WardStatsError(ValueError):
    """Base class for domain errors (bad input, degenerate data)."""


class EmptyInputError(WardStatsError):
    """A statistic was requested on an empty sample where it is undefined."""


@dataclass(frozen=True)
class RecordError:
    line: int
    column: str | None
    message: str

    def as_dict(self) -> dict:
        return {"line": self.line, "column": self.column, "message": self.message}

    def __str__(self) -> str:
        where = f"line {self.line}" + (f", column {self.column}" if self.column else "")
        return f"{where}: {self.message}"


class ParseError(WardStatsError):
    """Raised when one or more CSV rows fail validation.

    ``errors`` lists every failing row; ``records`` holds the rows that
    did validate, so ``len(records) + len(errors)`` is the row count.
    """

    def __init__(self, errors: Sequence[RecordError], records: Sequence = ()):
        self.errors = list(errors)
        self.records = list(records)
        head = "; ".join(str(e) for e in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{len(self.errors)} invalid row(s): {head}{more}")


class Zone(str, enum.Enum):
    AB = "AB"
    CD = "CD"

    @property
    def sectors(self) -> tuple["Sector", "Sector"]:
        return (Sector.A, Sector.B) if self is Zone.AB else (Sector.C, Sector.D)

    def other(self) -> "Zone":
        return Zone.CD if self is Zone.AB else Zone.AB


class Sector(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"

    @property
    def zone(self) -> Zone:
        return Zone.AB if self in (Sector.A, Sector.B) else Zone.CD


def zone(sector: Sector | str) -> Zone:
    return Sector(sector).zone


@dataclass(frozen=True, order=True)
class CivilTime:
    """A calendar date plus minute of day (0-1439)."""

    date: dt.date
    minute_of_day: int

    def __post_init__(self):
        if not 0 <= self.minute_of_day < MINUTES_PER_DAY:
            raise ValueError(f"minute_of_day out of range: {self.minute_of_day}")

    @classmethod
    def parse(cls, text: str) -> "CivilTime":
        text = text.strip()
        stamp = dt.datetime.strptime(text, "%Y-%m-%dT%H:%M")
        return cls(stamp.date(), stamp.hour * 60 + stamp.minute)

    @classmethod
    def from_datetime(cls, stamp: dt.datetime) -> "CivilTime":
        return cls(stamp.date(), stamp.hour * 60 + stamp.minute)

    @classmethod
    def from_minutes(cls, minutes: int, origin: dt.date = dt.date(1970, 1, 1)) -> "CivilTime":
        days, minute = divmod(int(minutes), MINUTES_PER_DAY)
        return cls(origin + dt.timedelta(days=days), minute)

    @property
    def hour(self) -> int:
        return self.minute_of_day // 60

    @property
    def minute(self) -> int:
        return self.minute_of_day % 60

    @property
    def stamp(self) -> int:
        """Minutes since 1970-01-01 00:00; a total order across days."""
        return self.date.toordinal() * MINUTES_PER_DAY + self.minute_of_day - _EPOCH

    def minutes_since(self, origin: dt.date) -> int:
        return (self.date - origin).days * MINUTES_PER_DAY + self.minute_of_day

    def to_datetime(self) -> dt.datetime:
        return dt.datetime.combine(self.date, dt.time(self.hour, self.minute))

    def isoformat(self) -> str:
        return f"{self.date.isoformat()}T{self.hour:02d}:{self.minute:02d}"

    def __str__(self) -> str:
        return self.isoformat()


_EPOCH = dt.date(1970, 1, 1).toordinal() * MINUTES_PER_DAY


def parse_sectors(text: str) -> frozenset[Sector]:
    """``"A"`` -> {A}; ``"CD"`` -> {C, D}. Sectors must share a zone."""
    text = text.strip().upper()
    if not text:
        raise ValueError("empty sector")
    try:
        sectors = frozenset(Sector(ch) for ch in text)
    except ValueError:
        raise ValueError(f"unknown sector {text!r}") from None
    if len({s.zone for s in sectors}) != 1:
        raise ValueError(f"sectors {text!r} span both zones")
    return sectors


def format_sectors(sectors: Iterable[Sector]) -> str:
    return "".join(sorted(s.value for s in sectors))


@dataclass(frozen=True)
class ShiftRecord:
    nurse_id: str
    sectors: frozenset[Sector]
    clock_in: CivilTime
    clock_out: CivilTime

    def __post_init__(self):
        if isinstance(self.sectors, str):
            object.__setattr__(self, "sectors", parse_sectors(self.sectors))
        else:
            object.__setattr__(self, "sectors", frozenset(Sector(s) for s in self.sectors))
        if not self.sectors:
            raise ValueError("shift has no sector")
        if len({s.zone for s in self.sectors}) != 1:
            raise ValueError("shift sectors span both zones")
        if self.clock_out <= self.clock_in:
            raise ValueError("clock_out must be after clock_in")
        if self.duration_min > MAX_SHIFT_MINUTES:
            raise ValueError(f"shift lasts {self.duration_min} min, over the 16 h bound")

    @property
    def zone(self) -> Zone:
        return next(iter(self.sectors)).zone

    @property
    def start(self) -> int:
        return self.clock_in.stamp

    @property
    def end(self) -> int:
        return self.clock_out.stamp

    @property
    def duration_min(self) -> int:
        return self.clock_out.stamp - self.clock_in.stamp

    def covers(self, t: CivilTime) -> bool:
        return self.clock_in <= t < self.clock_out


@dataclass(frozen=True)
class DeathRecord:
    patient_id: str
    sector: Sector
    registered_at: CivilTime
    age_years: int

    def __post_init__(self):
        object.__setattr__(self, "sector", Sector(self.sector))
        if not 0 <= self.age_years <= MAX_AGE:
            raise ValueError(f"age {self.age_years} out of range 0-{MAX_AGE}")

    @property
    def zone(self) -> Zone:
        return self.sector.zone


@dataclass(frozen=True)
class AdmissionRecord:
    patient_id: str
    sector: Sector
    admit_date: dt.date
    discharge_date: dt.date
    age_years: int
    died: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "sector", Sector(self.sector))
        if self.discharge_date < self.admit_date:
            raise ValueError("discharge_date before admit_date")
        if not 0 <= self.age_years <= MAX_AGE:
            raise ValueError(f"age {self.age_years} out of range 0-{MAX_AGE}")

    @property
    def length_of_stay(self) -> int:
        return (self.discharge_date - self.admit_date).days


@dataclass
class ParseResult:
    records: list
    errors: list[RecordError]

    @property
    def ok(self) -> bool:
        return not self.errors


def _rows(text: str, header: tuple[str, ...]):
    """Yield (line_number, dict) for each data row; header errors raise."""
    text = text.lstrip("﻿")
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError([RecordError(1, None, "missing header row")]) from None
    got = tuple(h.strip() for h in first)
    if got != header:
        raise ParseError([RecordError(1, None, f"expected header {','.join(header)}, got {','.join(got)}")])
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            yield line, None, f"expected {len(header)} fields, got {len(row)}"
            continue
        yield line, dict(zip(header, (cell.strip() for cell in row))), None


def _int_field(value: str, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise _FieldError(name, f"not an integer: {value!r}") from None


def _time_field(value: str, name: str) -> CivilTime:
    try:
        return CivilTime.parse(value)
    except ValueError:
        raise _FieldError(name, f"malformed timestamp {value!r}") from None


def _date_field(value: str, name: str) -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except ValueError:
        raise _FieldError(name, f"malformed date {value!r}") from None


def _sector_field(value: str, name: str, multi: bool = False):
    try:
        sectors = parse_sectors(value)
    except ValueError as exc:
        raise _FieldError(name, str(exc)) from None
    if not multi:
        if len(sectors) != 1:
            raise _FieldError(name, f"expected a single sector, got {value!r}")
        return next(iter(sectors))
    return sectors


class _FieldError(Exception):
    def __init__(self, column: str, message: str):
        self.column = column
        self.message = message


def _load(text: str, header, build) -> ParseResult:
    records, errors = [], []
    for line, row, problem in _rows(text, header):
        if problem:
            errors.append(RecordError(line, None, problem))
            continue
        try:
            records.append(build(row))
        except _FieldError as exc:
            errors.append(RecordError(line, exc.column, exc.message))
    return ParseResult(records, errors)


def _build_shift(row: dict) -> ShiftRecord:
    sectors = _sector_field(row["sector"], "sector", multi=True)
    clock_in = _time_field(row["clock_in"], "clock_in")
    clock_out = _time_field(row["clock_out"], "clock_out")
    if clock_out <= clock_in:
        raise _FieldError("clock_out", "clock_out is not after clock_in")
    if clock_out.stamp - clock_in.stamp > MAX_SHIFT_MINUTES:
        raise _FieldError("clock_out", "shift longer than 16 hours")
    if not row["nurse_id"]:
        raise _FieldError("nurse_id", "empty nurse_id")
    return ShiftRecord(row["nurse_id"], sectors, clock_in, clock_out)


def _build_death(row: dict) -> DeathRecord:
    if not row["patient_id"]:
        raise _FieldError("patient_id", "empty patient_id")
    sector = _sector_field(row["sector"], "sector")
    at = _time_field(row["registered_at"], "registered_at")
    age = _int_field(row["age_years"], "age_years")
    if not 0 <= age <= MAX_AGE:
        raise _FieldError("age_years", f"age {age} out of range 0-{MAX_AGE}")
    return DeathRecord(row["patient_id"], sector, at, age)


def _build_admission(row: dict) -> AdmissionRecord:
    if not row["patient_id"]:
        raise _FieldError("patient_id", "empty patient_id")
    sector = _sector_field(row["sector"], "sector")
    admit = _date_field(row["admit_date"], "admit_date")
    discharge = _date_field(row["discharge_date"], "discharge_date")
    if discharge < admit:
        raise _FieldError("discharge_date", "discharge_date before admit_date")
    age = _int_field(row["age_years"], "age_years")
    if not 0 <= age <= MAX_AGE:
        raise _FieldError("age_years", f"age {age} out of range 0-{MAX_AGE}")
    died = row["died"].lower()
    if died not in ("0", "1", "true", "false"):
        raise _FieldError("died", f"expected 0/1, got {row['died']!r}")
    return AdmissionRecord(row["patient_id"], sector, admit, discharge, age, died in ("1", "true"))


def load_roster(csv_text: str) -> ParseResult:
    """Parse a roster, collecting row errors instead of raising."""
    return _load(csv_text, ROSTER_HEADER, _build_shift)


def load_deaths(csv_text: str) -> ParseResult:
    return _load(csv_text, DEATHS_HEADER, _build_death)


def load_admissions(csv_text: str) -> ParseResult:
    return _load(csv_text, ADMISSIONS_HEADER, _build_admission)


def _strict(result: ParseResult) -> list:
    if result.errors:
        raise ParseError(result.errors, result.records)
    return result.records


def parse_roster(csv_text: str) -> list[ShiftRecord]:
    """Parse roster CSV text into shift records, in input order.

    Raises ParseError listing every bad row (with its line number) if any
    row fails: malformed timestamp, unknown sector, clock_out not after
    clock_in, or a shift longer than 16 hours.
    """
    return _strict(load_roster(csv_text))


def parse_deaths(csv_text: str) -> list[DeathRecord]:
    return _strict(load_deaths(csv_text))


def parse_admissions(csv_text: str) -> list[AdmissionRecord]:
    return _strict(load_admissions(csv_text))


def _write(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def format_roster(shifts: Iterable[ShiftRecord]) -> str:
    return _write(ROSTER_HEADER, (
        (s.nurse_id, format_sectors(s.sectors), s.clock_in.isoformat(), s.clock_out.isoformat())
        for s in shifts
    ))


def format_deaths(deaths: Iterable[DeathRecord]) -> str:
    return _write(DEATHS_HEADER, (
        (d.patient_id, d.sector.value, d.registered_at.isoformat(), d.age_years) for d in deaths
    ))


def format_admissions(admissions: Iterable[AdmissionRecord]) -> str:
    return _write(ADMISSIONS_HEADER, (
        (a.patient_id, a.sector.value, a.admit_date.isoformat(), a.discharge_date.isoformat(),
         a.age_years, int(a.died))
        for a in admissions
    ))


def check_outcomes(admissions: Iterable[AdmissionRecord], deaths: Iterable[DeathRecord]) -> list[str]:
    """Cross-check ``died`` flags against the death register.

    Returns one message per patient whose flag disagrees with the presence
    of a matching death record; an empty list means the files agree.
    """
    dead = {d.patient_id for d in deaths}
    problems = []
    for a in admissions:
        if a.died and a.patient_id not in dead:
            problems.append(f"patient {a.patient_id} flagged died but has no death record")
        elif not a.died and a.patient_id in dead:
            problems.append(f"patient {a.patient_id} has a death record but died=0")
    return problems


def nurses(roster: Iterable[ShiftRecord]) -> list[str]:
    """Distinct nurse ids in first-seen order."""
    return list(dict.fromkeys(s.nurse_id for s in roster))
