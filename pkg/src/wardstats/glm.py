"""Logistic regression of in-hospital death on patient covariates.

The design has one row per admission with response ``death`` and the
covariates sector (dummies for B, C, D; baseline A), ``times`` (number
of target-nurse shifts overlapping the stay in the patient's sector),
``age`` and ``present`` (target nurse on duty in the patient's zone when
the death was registered; 0 for survivors).

``present`` can only be 1 for patients who died, so it separates the
response quasi-completely: its maximum-likelihood estimate diverges and
IRLS stops at a huge coefficient with a huge standard error.
"""

from __future__ import annotations

import datetime as dt
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .attribution import covering_shift
from .core import AdmissionRecord, CivilTime, DeathRecord, ShiftRecord, WardStatsError

COVARIATES = ("sector_b", "sector_c", "sector_d", "times", "age", "present")
LABELS = {"sector_b": "Sector B", "sector_c": "Sector C", "sector_d": "Sector D",
          "times": "Times", "age": "Age", "present": "Present", "intercept": "Intercept"}
SEPARATION_BETA = 15.0
SEPARATION_PROB = 1e-8


class RankDeficientError(WardStatsError):
    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__("design is rank deficient; collinear column(s): " + ", ".join(self.columns))


@dataclass(frozen=True)
class DesignRow:
    death: int
    sector_b: int
    sector_c: int
    sector_d: int
    times: int
    age: float
    present: int
    patient_id: str = field(default="", compare=False)


def _stay_bounds(a: AdmissionRecord) -> tuple[int, int]:
    start = CivilTime(a.admit_date, 0).stamp
    end = CivilTime(a.discharge_date + dt.timedelta(days=1), 0).stamp
    return start, end


def count_times(admission: AdmissionRecord, shifts: Iterable[ShiftRecord]) -> int:
    """Target-nurse shifts overlapping the stay (whole calendar days,
    admission through discharge) in the patient's sector."""
    lo, hi = _stay_bounds(admission)
    return sum(1 for s in shifts if admission.sector in s.sectors and s.start < hi and s.end > lo)


def build_design(admissions: Iterable[AdmissionRecord], roster: Iterable[ShiftRecord], target_nurse: str,
                 subset: str = "m1", deaths: Iterable[DeathRecord] = ()) -> list[DesignRow]:
    """Design rows for model ``m1`` (all admissions) or ``m2`` (patients
    with at least one target-nurse shift in their sector during the stay).

    ``deaths`` supplies registration times for ``present``; a patient who
    died without a matching death record gets present = 0.
    """
    if subset not in ("m1", "m2"):
        raise ValueError("subset must be 'm1' or 'm2'")
    shifts = [s for s in roster if s.nurse_id == target_nurse]
    death_at = {d.patient_id: d for d in deaths}
    rows = []
    for a in admissions:
        times = count_times(a, shifts)
        if subset == "m2" and times == 0:
            continue
        present = 0
        d = death_at.get(a.patient_id)
        if a.died and d is not None:
            s = covering_shift(shifts, d.registered_at)
            present = int(s is not None and s.zone == d.zone)
        rows.append(DesignRow(
            death=int(a.died),
            sector_b=int(a.sector.value == "B"),
            sector_c=int(a.sector.value == "C"),
            sector_d=int(a.sector.value == "D"),
            times=times, age=float(a.age_years), present=present,
            patient_id=a.patient_id,
        ))
    return rows


def design_matrix(rows: Sequence[DesignRow], covariates: Sequence[str] = COVARIATES):
    """(X, y, names) with an intercept column first."""
    X = np.column_stack([np.ones(len(rows))] + [[float(getattr(r, c)) for r in rows] for c in covariates]) \
        if rows else np.empty((0, len(covariates) + 1))
    y = np.array([r.death for r in rows], dtype=float)
    return X, y, ["intercept", *covariates]


@dataclass
class GlmFit:
    names: list[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    null_log_likelihood: float
    aic: float
    pseudo_r2: float
    n_obs: int
    converged: bool
    n_iter: int
    separation_flags: dict[str, bool]
    dropped: list[str] = field(default_factory=list)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.std_errors[self.names.index(name)])

    def as_dict(self) -> dict:
        terms = {
            n: {"estimate": float(b), "std_error": float(s), "z": float(z), "p_value": float(p)}
            for n, b, s, z, p in zip(self.names, self.coefficients, self.std_errors, self.z_scores, self.p_values)
        }
        return {"terms": terms, "log_likelihood": self.log_likelihood,
                "null_log_likelihood": self.null_log_likelihood, "aic": self.aic,
                "pseudo_r2": self.pseudo_r2, "n_obs": self.n_obs, "converged": self.converged,
                "n_iter": self.n_iter, "separation_flags": dict(self.separation_flags),
                "dropped_columns": list(self.dropped)}


def _expit(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    eta = X @ beta
    # log(1 + e^eta) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return X.T @ (y - _expit(X @ beta))


def _null_loglik(y: np.ndarray) -> float:
    n, k = len(y), float(y.sum())
    out = 0.0
    if k > 0:
        out += k * math.log(k / n)
    if n - k > 0:
        out += (n - k) * math.log((n - k) / n)
    return out


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    bad, kept = [], []
    for j in range(X.shape[1]):
        trial = X[:, kept + [j]]
        if np.linalg.matrix_rank(trial) < len(kept) + 1:
            bad.append(names[j])
        else:
            kept.append(j)
    return bad


def _normal_p(z: np.ndarray) -> np.ndarray:
    return np.array([math.erfc(abs(v) / math.sqrt(2.0)) for v in z])


def fit_logistic(X, y, names: Sequence[str] | None = None, *, max_iter: int = 25,
                 tol: float = 1e-8) -> GlmFit:
    """Maximum-likelihood logistic fit by IRLS (Newton-Raphson).

    Starts from beta = 0, halves the step whenever the deviance goes up and
    stops once the relative deviance change falls below ``tol`` or after
    ``max_iter`` iterations (then ``converged`` is False). Non-intercept
    columns that are constant are dropped with a warning; remaining
    collinear columns raise RankDeficientError.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be n x k and match y")
    if X.shape[0] == 0:
        raise WardStatsError("cannot fit a model to zero rows")
    names = list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]

    # the first constant column plays the intercept; later ones are dropped
    dropped, keep, have_const = [], [], False
    for j, name in enumerate(names):
        col = X[:, j]
        if np.all(col == col[0]):
            if have_const:
                dropped.append(name)
                continue
            have_const = True
        keep.append(j)
    if dropped:
        warnings.warn(f"dropping constant column(s): {', '.join(dropped)}", stacklevel=2)
        X = X[:, keep]
        names = [names[j] for j in keep]
    bad = _collinear_columns(X, names)
    if bad:
        raise RankDeficientError(bad)

    beta = np.zeros(X.shape[1])
    dev = -2.0 * log_likelihood(beta, X, y)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = _expit(X @ beta)
        w = p * (1.0 - p)
        info = X.T @ (X * w[:, None])
        step = np.linalg.lstsq(info, X.T @ (y - p), rcond=None)[0]
        new = beta + step
        new_dev = -2.0 * log_likelihood(new, X, y)
        halvings = 0
        while not np.isfinite(new_dev) or new_dev > dev + 1e-12 * abs(dev):
            step = step / 2.0
            new = beta + step
            new_dev = -2.0 * log_likelihood(new, X, y)
            halvings += 1
            if halvings > 30:
                break
        beta = new
        change = abs(new_dev - dev) / (abs(new_dev) + 0.1)
        dev = new_dev
        if change < tol:
            converged = True
            break

    p = _expit(X @ beta)
    w = p * (1.0 - p)
    info = X.T @ (X * w[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info, hermitian=True)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    ll = log_likelihood(beta, X, y)
    null_ll = _null_loglik(y)
    k = X.shape[1]
    pseudo = 1.0 - ll / null_ll if null_ll != 0 else 0.0
    fit = GlmFit(
        names=names, coefficients=beta, std_errors=se, z_scores=z, p_values=_normal_p(z),
        log_likelihood=ll, null_log_likelihood=null_ll, aic=2 * k - 2 * ll, pseudo_r2=pseudo,
        n_obs=len(y), converged=converged, n_iter=it, separation_flags={}, dropped=dropped,
    )
    fit.separation_flags = detect_separation(fit, X)
    return fit


def fit_design(rows: Sequence[DesignRow], covariates: Sequence[str] = COVARIATES, **kwargs) -> GlmFit:
    X, y, names = design_matrix(rows, covariates)
    return fit_logistic(X, y, names, **kwargs)


def detect_separation(fit: GlmFit, X) -> dict[str, bool]:
    """Flag covariates whose estimates point at (quasi-)complete separation.

    A covariate is flagged when |beta| > 15, or when its effect across its
    observed range exceeds 15 on the logit scale and some row at the edge
    of that range has a fitted probability within 1e-8 of 0 or 1.
    ``X`` is the design matrix the fit was computed on (columns matching
    ``fit.names``); a list of DesignRow is also accepted.
    """
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], DesignRow):
        X = design_matrix(X, [n for n in fit.names if n != "intercept"])[0]
    X = np.asarray(X, dtype=float)
    beta = fit.coefficients
    flags = {}
    if X.size == 0:
        return {n: bool(abs(b) > SEPARATION_BETA) for n, b in zip(fit.names, beta) if n != "intercept"}
    p = _expit(X @ beta)
    extreme = (p < SEPARATION_PROB) | (p > 1.0 - SEPARATION_PROB)
    for j, name in enumerate(fit.names):
        if name == "intercept":
            continue
        col = X[:, j]
        lo, hi = col.min(), col.max()
        flag = abs(beta[j]) > SEPARATION_BETA
        if not flag and abs(beta[j]) * (hi - lo) > SEPARATION_BETA:
            edge = (col == lo) | (col == hi)
            flag = bool(np.any(extreme & edge))
        flags[name] = bool(flag)
    return flags


def stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


_ORDER = ("sector_b", "sector_c", "sector_d", "times", "age", "present", "intercept")


def summarize(*fits: GlmFit, titles: Sequence[str] | None = None) -> str:
    """Side-by-side text table: estimate with significance stars, standard
    error in parentheses below, then fit statistics."""
    if not fits:
        raise ValueError("nothing to summarize")
    titles = list(titles) if titles else [f"Model {i + 1}" for i in range(len(fits))]
    names = [n for n in _ORDER if any(n in f.names for f in fits)]
    names += [n for f in fits for n in f.names if n not in names]
    rows: list[list[str]] = [["", *titles], ["Variable", *["Estimate"] * len(fits)],
                             ["", *["(std. err.)"] * len(fits)], None]
    for n in names:
        est, err = [LABELS.get(n, n)], [""]
        for f in fits:
            if n in f.names:
                j = f.names.index(n)
                est.append(f"{f.coefficients[j]:.3f}{stars(f.p_values[j])}")
                err.append(f"({f.std_errors[j]:.3f})")
            else:
                est.append("")
                err.append("")
        rows += [est, err]
    rows.append(None)
    rows.append(["N. observations", *[f"{f.n_obs:,}" for f in fits]])
    rows.append(["Log Likelihood", *[f"{f.log_likelihood:,.0f}" for f in fits]])
    rows.append(["Pseudo-R2", *[f"{f.pseudo_r2:.2f}" for f in fits]])
    rows.append(["Akaike Inf. Crit.", *[f"{f.aic:,.0f}" for f in fits]])
    rows.append(None)
    rows.append(["Note:", "*p<0.1; **p<0.05; ***p<0.01"])
    body = [r for r in rows if r is not None and r[0] != "Note:"]
    width = [max(len(r[i]) for r in body) for i in range(len(fits) + 1)]
    rule = "-" * (sum(width) + 3 * len(fits) + 1)
    out = []
    for r in rows:
        if r is None:
            out.append(rule)
        elif r[0] == "Note:":
            out.append(f"{r[0].ljust(width[0])} | {r[1]}")
        else:
            out.append(" | ".join([r[0].ljust(width[0]), *(c.rjust(w) for c, w in zip(r[1:], width[1:]))]))
    return "\n".join(out) + "\n"
