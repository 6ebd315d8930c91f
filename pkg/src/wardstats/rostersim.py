"""Null-model ward simulator.

Deaths arrive as an inhomogeneous Poisson process with a 24-hour
piecewise-constant intensity and are independent of who is on duty.
Registration then distorts the times (heaping on :00/:30, late deaths
booked just after midnight, pull towards handovers). Comparing each
nurse's on-duty and off-duty death rates under this null shows how
staffing patterns alone inflate the ratio for full-time, morning-heavy,
early-arriving nurses.
"""

from __future__ import annotations

import datetime as dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .attribution import duty_mask
from .core import AdmissionRecord, CivilTime, DeathRecord, MINUTES_PER_DAY, Sector, ShiftRecord, WardStatsError

SHIFT_TYPES = ("morning", "afternoon", "night")
ROTATION_CODES = {"M": "morning", "A": "afternoon", "N": "night", "O": "off"}
# official grid, minutes from the start of the day the shift begins
SHIFT_GRID = {"morning": (420, 850), "afternoon": (840, 1270), "night": (1260, 1870)}
HANDOVER_STARTS = (420, 840, 1260)
DEFAULT_START = dt.date(2013, 1, 7)
HANDOVER_PULL_MIN = 180
LATE_EVENING = 21 * 60
MIDNIGHT_WINDOW = 5

# deaths/hour, ward-wide: morning peak with a spike in the 7 o'clock hour,
# a registration bump at midnight, quiet small hours
CIRCADIAN_RATES = (
    1.4, 0.5, 0.5, 0.5, 0.5, 0.7,
    1.3, 3.0, 2.4, 2.1, 1.8, 1.5,
    1.3, 1.2, 1.0, 0.9, 0.9, 0.8,
    0.8, 0.7, 0.7, 0.6, 0.5, 0.5,
)


@dataclass(frozen=True)
class IntensityProfile:
    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if len(rates) != 24:
            raise ValueError("intensity needs 24 hourly rates")
        if any(r < 0 or not math.isfinite(r) for r in rates):
            raise ValueError("hourly rates must be finite and non-negative")

    @classmethod
    def flat(cls, rate: float = 1.0) -> "IntensityProfile":
        return cls((rate,) * 24)

    @classmethod
    def circadian(cls, scale: float = 1.0) -> "IntensityProfile":
        return cls(tuple(r * scale for r in CIRCADIAN_RATES))

    @property
    def max(self) -> float:
        return max(self.rates)

    @property
    def daily_total(self) -> float:
        return sum(self.rates)

    def per_minute(self, n_minutes: int) -> np.ndarray:
        """Rate (per hour) at each minute of [0, n_minutes) from midnight."""
        hours = (np.arange(n_minutes) % MINUTES_PER_DAY) // 60
        return np.asarray(self.rates)[hours]


@dataclass(frozen=True)
class RegistrationModel:
    heap_prob: float = 0.0
    delay_past_midnight_prob: float = 0.0
    handover_attraction_prob: float = 0.0

    def __post_init__(self):
        for name in ("heap_prob", "delay_past_midnight_prob", "handover_attraction_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class NurseProfile:
    nurse_id: str
    rotation: tuple[str, ...]
    arrival_offset_min: int = 0
    departure_offset_min: int = 0
    sector: str = "A"

    def __post_init__(self):
        rot = tuple(ROTATION_CODES.get(r, r) for r in
                    (self.rotation.split(",") if isinstance(self.rotation, str) else self.rotation))
        rot = tuple(r.strip() for r in rot)
        object.__setattr__(self, "rotation", rot)
        if not rot or any(r not in (*SHIFT_TYPES, "off") for r in rot):
            raise ValueError(f"bad rotation {self.rotation!r}")
        for name in ("arrival_offset_min", "departure_offset_min"):
            v = getattr(self, name)
            if not 0 <= v <= 120:
                raise ValueError(f"{name} must lie in [0, 120]")

    def shift_on(self, day: int) -> str:
        return self.rotation[day % len(self.rotation)]


@dataclass(frozen=True)
class WardConfig:
    staffing: Mapping[str, int] = field(default_factory=lambda: {"morning": 6, "afternoon": 4, "night": 3})
    horizon_days: int = 28
    seed: int = 0
    start_date: dt.date = DEFAULT_START

    def __post_init__(self):
        staffing = {k: int(self.staffing.get(k, 0)) for k in SHIFT_TYPES}
        object.__setattr__(self, "staffing", staffing)
        if any(v < 1 for v in staffing.values()):
            raise ValueError("every shift needs at least one nurse")
        if self.horizon_days < 1:
            raise ValueError("horizon must be at least one day")

    @property
    def origin(self) -> int:
        return CivilTime(self.start_date, 0).stamp

    @property
    def n_minutes(self) -> int:
        return self.horizon_days * MINUTES_PER_DAY


_POOL_SECTORS = (Sector.A, Sector.B, Sector.C, Sector.D)


def gen_roster(config: WardConfig, profiles: Sequence[NurseProfile] = ()) -> list[ShiftRecord]:
    """Deterministic roster: profiled nurses follow their rotations (with
    their arrival/departure offsets), the remaining slots of every shift
    are filled by pool nurses ``pool-<shift>-<k>`` working the official
    times."""
    ids = [p.nurse_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate nurse ids in profiles")
    origin = config.origin
    roster = []
    for day in range(config.horizon_days):
        base = origin + day * MINUTES_PER_DAY
        for kind in SHIFT_TYPES:
            start, end = SHIFT_GRID[kind]
            assigned = [p for p in profiles if p.shift_on(day) == kind]
            if len(assigned) > config.staffing[kind]:
                raise WardStatsError(f"day {day}: {len(assigned)} profiled nurses on the {kind} shift, "
                                     f"staffing is {config.staffing[kind]}")
            for p in assigned:
                roster.append(ShiftRecord(
                    p.nurse_id, p.sector,
                    CivilTime.from_minutes(base + start - p.arrival_offset_min),
                    CivilTime.from_minutes(base + end + p.departure_offset_min),
                ))
            for k in range(config.staffing[kind] - len(assigned)):
                roster.append(ShiftRecord(
                    f"pool-{kind}-{k + 1}", frozenset({_POOL_SECTORS[k % 4]}),
                    CivilTime.from_minutes(base + start), CivilTime.from_minutes(base + end),
                ))
    return roster


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replicate_rng(master_seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replicate ``rep``, keyed on (seed, rep) only."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(rep),)))


def sample_death_minutes(intensity: IntensityProfile, registration: RegistrationModel,
                         horizon_days: int, rng) -> np.ndarray:
    """Registered times (integer minutes from the start of day 0), sorted.

    Thinning: candidates from a homogeneous process at the peak rate are
    kept with probability rate(hour) / peak. Registration may move times
    past the horizon end; the count is never changed.
    """
    rng = _rng(rng)
    lam_max = intensity.max
    hours = horizon_days * 24
    if lam_max == 0.0:
        return np.empty(0, dtype=np.int64)
    n = rng.poisson(lam_max * hours)
    t = np.sort(rng.uniform(0.0, hours, size=n))
    keep = rng.uniform(size=n) * lam_max < np.asarray(intensity.rates)[t.astype(np.int64) % 24]
    minutes = np.floor(t[keep] * 60.0).astype(np.int64)
    return distort_registration(minutes, registration, rng)


def distort_registration(minutes: np.ndarray, registration: RegistrationModel, rng) -> np.ndarray:
    rng = _rng(rng)
    m = np.array(minutes, dtype=np.int64)
    n = len(m)
    u_pull, u_late, u_heap = rng.uniform(size=(3, n))
    jitter_pull = rng.integers(0, 10, size=n)
    jitter_late = rng.integers(0, MIDNIGHT_WINDOW, size=n)

    day = m // MINUTES_PER_DAY * MINUTES_PER_DAY
    mod = m % MINUTES_PER_DAY
    for b in HANDOVER_STARTS:
        near = (mod >= b - HANDOVER_PULL_MIN) & (mod < b) & (u_pull < registration.handover_attraction_prob)
        m = np.where(near, day + b + jitter_pull, m)

    mod = m % MINUTES_PER_DAY
    day = m // MINUTES_PER_DAY * MINUTES_PER_DAY
    late = (mod >= LATE_EVENING) & (u_late < registration.delay_past_midnight_prob)
    m = np.where(late, day + MINUTES_PER_DAY + jitter_late, m)

    heap = u_heap < registration.heap_prob
    m = np.where(heap, (m + 15) // 30 * 30, m)
    return np.sort(m)


def gen_deaths(intensity: IntensityProfile, registration: RegistrationModel, horizon_days: int,
               seed=0, start_date: dt.date = DEFAULT_START) -> list[DeathRecord]:
    """Simulated death register: times as in ``sample_death_minutes``,
    sectors uniform over A-D, ages roughly matching an elderly ward."""
    rng = _rng(seed)
    minutes = sample_death_minutes(intensity, registration, horizon_days, rng)
    n = len(minutes)
    sectors = rng.integers(0, 4, size=n)
    ages = np.clip(np.rint(rng.normal(86.0, 8.0, size=n)), 40, 110).astype(int)
    origin = CivilTime(start_date, 0).stamp
    return [
        DeathRecord(f"sim-{i + 1:06d}", _POOL_SECTORS[s], CivilTime.from_minutes(origin + int(t)), int(a))
        for i, (t, s, a) in enumerate(zip(minutes, sectors, ages))
    ]


def gen_ward(intensity: IntensityProfile, registration: RegistrationModel, config: WardConfig,
             profiles: Sequence[NurseProfile] = (), survivors_per_death: float = 4.0):
    """A coherent synthetic ward: (roster, admissions, deaths).

    Every death gets an admission that ends on the death date; survivors
    are added at ``survivors_per_death`` per death with younger ages and
    stays of 1-14 days inside the horizon. Deterministic in ``config.seed``.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(config.seed), spawn_key=(2**31,)))
    roster = gen_roster(config, profiles)
    deaths = gen_deaths(intensity, registration, config.horizon_days, rng, config.start_date)
    last = config.start_date + dt.timedelta(days=config.horizon_days - 1)
    admissions = []
    for d in deaths:
        death_day = min(d.registered_at.date, last)
        back = int(rng.integers(0, 11))
        admit = max(config.start_date, death_day - dt.timedelta(days=back))
        admissions.append(AdmissionRecord(d.patient_id, d.sector, admit, d.registered_at.date, d.age_years, True))
    n_surv = int(round(survivors_per_death * len(deaths)))
    starts = rng.integers(0, config.horizon_days, size=n_surv)
    stays = rng.integers(1, 15, size=n_surv)
    sectors = rng.integers(0, 4, size=n_surv)
    ages = np.clip(np.rint(rng.normal(78.0, 10.0, size=n_surv)), 18, 110).astype(int)
    for i in range(n_surv):
        admit = config.start_date + dt.timedelta(days=int(starts[i]))
        discharge = min(last, admit + dt.timedelta(days=int(stays[i])))
        admissions.append(AdmissionRecord(f"adm-{i + 1:06d}", _POOL_SECTORS[sectors[i]], admit, discharge,
                                          int(ages[i]), False))
    return roster, admissions, deaths


def expected_rate_ratio(schedule, intensity: IntensityProfile, start_date: dt.date | None = None,
                        horizon_days: int | None = None) -> float:
    """Analytic on-duty / off-duty death-rate ratio under the null.

    (integral of intensity over on-duty time / on-duty hours) divided by
    the same for off-duty time. ``schedule`` is either a boolean per-minute
    mask starting at midnight, or shifts together with ``start_date`` and
    ``horizon_days``. Returns +inf when the nurse is never off duty (or
    the off-duty intensity integrates to zero) and nan when never on duty.
    """
    if isinstance(schedule, np.ndarray):
        mask = schedule.astype(bool)
    else:
        if start_date is None or horizon_days is None:
            raise ValueError("shift schedules need start_date and horizon_days")
        mask = duty_mask(schedule, CivilTime(start_date, 0).stamp, horizon_days * MINUTES_PER_DAY)
    lam = intensity.per_minute(len(mask))
    on, off = int(mask.sum()), int((~mask).sum())
    if on == 0:
        return math.nan
    lam_on = float(lam[mask].sum()) / on
    lam_off = float(lam[~mask].sum()) / off if off else 0.0
    if lam_off == 0.0:
        return math.inf
    return lam_on / lam_off


@dataclass(frozen=True)
class NurseSummary:
    nurse_id: str
    n_used: int
    n_excluded: int
    mean: float
    sd: float
    se: float
    quantiles: dict[str, float]
    expected: float

    def as_dict(self) -> dict:
        return {"nurse_id": self.nurse_id, "n_used": self.n_used, "n_excluded": self.n_excluded,
                "mean": self.mean, "sd": self.sd, "se": self.se, "quantiles": dict(self.quantiles),
                "expected": self.expected}


@dataclass
class ExperimentResult:
    nurse_ids: list[str]
    on_hours: np.ndarray
    off_hours: np.ndarray
    on_deaths: np.ndarray  # reps x nurses
    off_deaths: np.ndarray
    summaries: dict[str, NurseSummary]

    @property
    def reps(self) -> int:
        return self.on_deaths.shape[0]

    def ratios(self) -> np.ndarray:
        """reps x nurses observed rate ratios (nan where undefined)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (self.on_deaths / self.on_hours) / (self.off_deaths / self.off_hours)
        bad = (self.off_deaths == 0) | (self.on_hours == 0) | (self.off_hours == 0)
        return np.where(bad, np.nan, r)

    def replicate_rows(self):
        r = self.ratios()
        for i in range(self.reps):
            for j, nurse in enumerate(self.nurse_ids):
                yield i, nurse, int(self.on_deaths[i, j]), int(self.off_deaths[i, j]), float(r[i, j])

    def as_dict(self) -> dict:
        return {"reps": self.reps,
                "nurses": {n: {**self.summaries[n].as_dict(), "on_hours": float(self.on_hours[j]),
                               "off_hours": float(self.off_hours[j])}
                           for j, n in enumerate(self.nurse_ids)}}


QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def _summarize(nurse: str, ratios: np.ndarray, expected: float) -> NurseSummary:
    used = ratios[np.isfinite(ratios)]
    k = len(used)
    if k == 0:
        return NurseSummary(nurse, 0, len(ratios), math.nan, math.nan, math.nan,
                            {f"q{int(q * 100):02d}": math.nan for q in QUANTILES}, expected)
    mean = float(used.mean())
    sd = float(used.std(ddof=1)) if k > 1 else 0.0
    qs = np.quantile(used, QUANTILES)
    return NurseSummary(nurse, k, len(ratios) - k, mean, sd, sd / math.sqrt(k),
                        {f"q{int(q * 100):02d}": float(v) for q, v in zip(QUANTILES, qs)}, expected)


def run_null_experiment(config: WardConfig, profiles: Sequence[NurseProfile], intensity: IntensityProfile,
                        registration: RegistrationModel = RegistrationModel(), reps: int = 1000,
                        workers: int = 1, roster: Sequence[ShiftRecord] | None = None) -> ExperimentResult:
    """Simulate ``reps`` independent death registers over a fixed roster and
    compare every nurse's on-duty and off-duty death rates.

    The roster is ``gen_roster(config, profiles)`` unless an explicit
    ``roster`` is given (e.g. shifts off the official grid); ``config``
    still fixes the horizon, start date and master seed.

    A death counts as on duty when its registered minute falls inside one
    of the nurse's shifts [clock_in, clock_out). Deaths registered outside
    the horizon are ignored. Replicate i draws from ``replicate_rng(seed, i)``
    so results do not depend on ``workers``. Replicates with no off-duty
    deaths are excluded from the nurse's summary and counted.
    """
    if reps < 0:
        raise ValueError("reps must be non-negative")
    roster = gen_roster(config, profiles) if roster is None else list(roster)
    nurse_ids = list(dict.fromkeys(s.nurse_id for s in roster))
    n_min = config.n_minutes
    by_nurse: dict[str, list[ShiftRecord]] = {n: [] for n in nurse_ids}
    for s in roster:
        by_nurse[s.nurse_id].append(s)
    masks = np.stack([duty_mask(by_nurse[n], config.origin, n_min) for n in nurse_ids]) \
        if nurse_ids else np.zeros((0, n_min), dtype=bool)
    on_hours = masks.sum(axis=1) / 60.0
    off_hours = n_min / 60.0 - on_hours
    expected = {n: expected_rate_ratio(masks[j], intensity) for j, n in enumerate(nurse_ids)}

    def one(rep: int) -> tuple[np.ndarray, np.ndarray]:
        minutes = sample_death_minutes(intensity, registration, config.horizon_days,
                                       replicate_rng(config.seed, rep))
        minutes = minutes[(minutes >= 0) & (minutes < n_min)]
        on = masks[:, minutes].sum(axis=1)
        return on, len(minutes) - on

    if workers > 1 and reps > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(reps)))
    else:
        results = [one(i) for i in range(reps)]

    k = len(nurse_ids)
    on_d = np.array([r[0] for r in results], dtype=np.int64).reshape(reps, k)
    off_d = np.array([r[1] for r in results], dtype=np.int64).reshape(reps, k)
    result = ExperimentResult(nurse_ids, on_hours, off_hours, on_d, off_d, {})
    ratios = result.ratios()
    result.summaries = {n: _summarize(n, ratios[:, j], expected[n]) for j, n in enumerate(nurse_ids)}
    return result


def morning_heavy_setup(horizon_days: int = 84, seed: int = 0, scale: float = 1.0):
    """A ward where a full-time nurse ("FT") works mostly mornings, arrives
    an hour early and leaves half an hour late; everyone else keeps to the
    official grid. Returns (config, profiles, intensity, registration)."""
    config = WardConfig({"morning": 6, "afternoon": 4, "night": 3}, horizon_days, seed)
    profiles = [NurseProfile("FT", ("morning", "morning", "morning", "afternoon", "morning", "off", "off"),
                             arrival_offset_min=60, departure_offset_min=30)]
    return config, profiles, IntensityProfile.circadian(scale), RegistrationModel()


@dataclass
class SimulationSetup:
    config: WardConfig
    profiles: list[NurseProfile]
    intensity: IntensityProfile
    registration: RegistrationModel


def parse_config(text: str) -> SimulationSetup:
    """Read a ``key = value`` simulation config (``#`` starts a comment).

    Keys: horizon_days, seed, start_date, staff_morning, staff_afternoon,
    staff_night, intensity (``circadian``, ``flat:<rate>`` or 24 comma-separated
    rates), intensity_scale, heap_prob, delay_past_midnight_prob,
    handover_attraction_prob, and per nurse ``nurse.<id>.rotation``
    (e.g. ``M,M,A,N,O``), ``nurse.<id>.arrival``, ``nurse.<id>.departure``,
    ``nurse.<id>.sector``.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise WardStatsError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value

    def pop(key, default=None):
        return values.pop(key, default)

    try:
        staffing = {k: int(pop(f"staff_{k}", d)) for k, d in (("morning", 6), ("afternoon", 4), ("night", 3))}
        config = WardConfig(staffing, int(pop("horizon_days", 28)), int(pop("seed", 0)),
                            dt.date.fromisoformat(pop("start_date", "2013-01-07")))
        kind = pop("intensity", "circadian")
        scale = float(pop("intensity_scale", 1.0))
        if kind == "circadian":
            intensity = IntensityProfile.circadian(scale)
        elif kind.startswith("flat:"):
            intensity = IntensityProfile.flat(float(kind[5:]) * scale)
        else:
            intensity = IntensityProfile(tuple(float(v) * scale for v in kind.split(",")))
        registration = RegistrationModel(float(pop("heap_prob", 0.0)),
                                         float(pop("delay_past_midnight_prob", 0.0)),
                                         float(pop("handover_attraction_prob", 0.0)))
        nurse_keys: dict[str, dict[str, str]] = {}
        for key in [k for k in values if k.startswith("nurse.")]:
            _, nid, attr = key.split(".", 2)
            nurse_keys.setdefault(nid, {})[attr] = values.pop(key)
        profiles = [NurseProfile(nid, attrs["rotation"], int(attrs.get("arrival", 0)),
                                 int(attrs.get("departure", 0)), attrs.get("sector", "A"))
                    for nid, attrs in nurse_keys.items()]
    except (KeyError, ValueError) as exc:
        raise WardStatsError(f"bad simulation config: {exc}") from None
    if values:
        raise WardStatsError("unknown config key(s): " + ", ".join(sorted(values)))
    return SimulationSetup(config, profiles, intensity, registration)
