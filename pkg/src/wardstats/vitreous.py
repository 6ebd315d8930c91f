"""Quadratic regression of vitreous potassium on post-mortem interval,
with exact Student-t prediction intervals.

The model is K = b0 + b1*PMI + b2*PMI^2 fitted by ordinary least squares.
PMI is centred before the fit (QR on the centred basis) and the results
are mapped back to the raw basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import WardStatsError

_CF_EPS = 1e-16
_CF_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    max_iter = 200 + int(20 * math.sqrt(max(a, b)))
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _stirling_tail(z: float) -> float:
    """lgamma(z) minus its leading Stirling terms, for z >= 10."""
    z2 = z * z
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z


def log_beta(a: float, b: float) -> float:
    """log B(a, b), without cancellation when one argument is large."""
    small, large = min(a, b), max(a, b)
    if large < 100.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    # lgamma(large + small) - lgamma(large) from the Stirling series
    diff = ((large - 0.5) * math.log1p(small / large) + small * math.log(large + small) - small
            + _stirling_tail(large + small) - _stirling_tail(large))
    return math.lgamma(small) - diff


def _beta_series(a: float, b: float, x: float, y: float) -> float:
    """I_x(a, b) by its power series; fast when (a + b) * x is moderate."""
    log_front = a * _log_of(x, y) + b * _log_of(y, x) - log_beta(a, b) - math.log(a)
    total, term, n = 1.0, 1.0, 0
    while True:
        term *= (a + b + n) * x / (a + 1.0 + n)
        total += term
        n += 1
        if term < 1e-17 * total:
            return math.exp(log_front) * total
        if n > 100_000:
            raise ArithmeticError("incomplete beta series did not converge")


def _gamma_q(s: float, u: float) -> float:
    """Regularized upper incomplete gamma Q(s, u) for s > 0, u >= 0."""
    if u <= 0.0:
        return 1.0
    if s == 0.5:
        return math.erfc(math.sqrt(u))
    log_front = s * math.log(u) - u - math.lgamma(s)
    if u < s + 1.0:
        term = total = 1.0 / s
        n = 0
        while abs(term) > 1e-17 * abs(total):
            n += 1
            term *= u / (s + n)
            total += term
        return 1.0 - math.exp(log_front) * total
    # Lentz continued fraction for Q
    b = u + 1.0 - s
    c, d = 1.0 / _CF_TINY, 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = b + an / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return math.exp(log_front) * h


_ODD_FACTORIALS = [math.factorial(2 * n + 1) for n in range(32)]


def _beta_large_a(a: float, b: float, x: float, y: float) -> float:
    """I_x(a, b) for huge a, b <= 1 and x near 1: asymptotic expansion in
    the incomplete gamma function (DiDonato and Morris's BGRAT). Avoids
    the cancellation of 1 - I_y(b, a) when the result is small."""
    lx = _log_of(x, y)
    t = a + (b - 1.0) / 2.0
    u = -t * lx
    if u <= 0.0:
        return 1.0
    log_h = b * math.log(u) - u - math.lgamma(b)
    log_prefix = b * math.log(u / t) - u - log_beta(a, b)
    prefix = math.exp(log_prefix)
    j = _gamma_q(b, u) / math.exp(log_h)
    total = prefix * j
    lx2 = (lx / 2.0) ** 2
    lxp, b2n, t4 = 1.0, b, 4.0 * t * t
    p = [1.0]
    for n in range(1, 30):
        pn = sum((m * b - n) * p[n - m] / _ODD_FACTORIALS[m] for m in range(1, n))
        p.append(pn / n + (b - 1.0) / _ODD_FACTORIALS[n])
        j = (b2n * (b2n + 1.0) * j + (u + b2n + 1.0) * lxp) / t4
        lxp *= lx2
        b2n += 2.0
        r = prefix * p[n] * j
        total += r
        if abs(r) <= 1e-17 * abs(total):
            break
    return total


def _log_of(x: float, y: float) -> float:
    """log(x) given y = 1 - x, accurate for x near 1."""
    return math.log1p(-y) if y < 0.5 else math.log(x)


def betainc(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    ``y`` may carry 1 - x computed without cancellation.
    """
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    # one huge parameter: the continued fraction stalls; near x = 1 use the
    # gamma-function expansion, elsewhere the power series
    if a > 1e4 and b <= 1.0 and y < 0.3:
        return _beta_large_a(a, b, x, y)
    if b > 1e4 and a <= 1.0 and x < 0.3:
        return 1.0 - _beta_large_a(b, a, y, x)
    if b > 1e4 and a <= 1e4 and (a + b) * x < 500.0:
        return _beta_series(a, b, x, y)
    if a > 1e4 and b <= 1e4 and (a + b) * y < 500.0:
        return 1.0 - _beta_series(b, a, y, x)
    log_front = a * _log_of(x, y) + b * _log_of(y, x) - log_beta(a, b)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t."""
    t2 = t * t
    x, y = df / (df + t2), t2 / (df + t2)
    tail = 0.5 * betainc(df / 2.0, 0.5, x, y)
    return tail if t >= 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    return t_sf(-t, df)


def t_pdf(t: float, df: float) -> float:
    logc = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(logc - (df + 1) / 2 * math.log1p(t * t / df))


def t_quantile(p: float, df: float) -> float:
    """Inverse CDF of Student's t with ``df`` degrees of freedom.

    Solves P(T > t) = q on the upper half-line, q = min(p, 1 - p), by
    safeguarded Newton iteration against the incomplete-beta tail, then
    applies the sign. q is exact in floating point either way (1 - p is
    exact for p >= 0.5), so small lower-tail p lose nothing.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    if df <= 0:
        raise ValueError("df must be positive")
    if p == 0.5:
        return 0.0
    sign, q = (-1.0, p) if p < 0.5 else (1.0, 1.0 - p)
    return sign * _t_upper(q, df)


def _t_upper(q: float, df: float) -> float:
    lo, hi = 0.0, 1.0
    while t_sf(hi, df) > q:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            return math.inf
    t = 0.5 * (lo + hi)
    for _ in range(200):
        f = t_sf(t, df) - q
        if f > 0:
            lo = t
        else:
            hi = t
        dens = t_pdf(t, df)
        new = t + f / dens if dens > 0 else 0.5 * (lo + hi)
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        if abs(new - t) <= 1e-14 * max(1.0, abs(t)):
            return new
        t = new
    return t


@dataclass(frozen=True)
class PolyRegModel:
    """Fitted quadratic K = b0 + b1*x + b2*x^2.

    ``normal_matrix_inverse`` is (X'X)^-1 in the raw (1, x, x^2) basis.
    ``center`` and ``centered_inverse`` hold the same information in the
    centred basis used internally for well-conditioned predictions.
    """

    b0: float
    b1: float
    b2: float
    n: int
    residual_sd: float
    normal_matrix_inverse: np.ndarray
    center: float = 0.0
    centered_coef: tuple[float, float, float] | None = None
    centered_inverse: np.ndarray | None = None

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return (self.b0, self.b1, self.b2)

    @property
    def df(self) -> int:
        return self.n - 3

    def as_dict(self) -> dict:
        return {"coefficients": list(self.coefficients), "n": self.n, "df": self.df,
                "residual_sd": self.residual_sd,
                "normal_matrix_inverse": np.asarray(self.normal_matrix_inverse).tolist()}


def _basis(x, center: float = 0.0) -> np.ndarray:
    z = np.asarray(x, dtype=float) - center
    return np.column_stack([np.ones_like(z), z, z * z])


def fit_poly2(data: Iterable[tuple[float, float]]) -> PolyRegModel:
    """Least-squares quadratic of K on PMI; needs n >= 4 and three distinct PMIs."""
    pts = np.asarray(list(data), dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 4:
        raise WardStatsError(f"need at least 4 observations, got {n}")
    x, y = pts[:, 0], pts[:, 1]
    if len(np.unique(x)) < 3:
        raise WardStatsError("need at least 3 distinct PMI values for a quadratic")
    m = float(x.mean())
    Xc = _basis(x, m)
    Q, R = np.linalg.qr(Xc)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-13 * diag.max():
        raise WardStatsError("design matrix is rank deficient")
    beta_c = np.linalg.solve(R, Q.T @ y)
    resid = y - Xc @ beta_c
    s = math.sqrt(float(resid @ resid) / (n - 3))
    Rinv = np.linalg.solve(R, np.eye(3))
    inv_c = Rinv @ Rinv.T
    inv_c = 0.5 * (inv_c + inv_c.T)
    # raw basis: z = T @ (1, x, x^2)
    T = np.array([[1.0, 0.0, 0.0], [-m, 1.0, 0.0], [m * m, -2.0 * m, 1.0]])
    beta = T.T @ beta_c
    inv_raw = T.T @ inv_c @ T
    return PolyRegModel(float(beta[0]), float(beta[1]), float(beta[2]), n, s, 0.5 * (inv_raw + inv_raw.T),
                        m, tuple(float(v) for v in beta_c), inv_c)


def from_coefficients(b0: float, b1: float, b2: float) -> PolyRegModel:
    """A model holding only coefficients (no data, no interval support)."""
    return PolyRegModel(b0, b1, b2, 0, math.nan, np.full((3, 3), np.nan))


def evaluate_poly(model: PolyRegModel | Sequence[float], x0: float) -> float:
    if not isinstance(model, PolyRegModel):
        b0, b1, b2 = model
        return b0 + b1 * x0 + b2 * x0 * x0
    if model.centered_coef is not None:
        z = x0 - model.center
        c0, c1, c2 = model.centered_coef
        return c0 + c1 * z + c2 * z * z
    return model.b0 + model.b1 * x0 + model.b2 * x0 * x0


@dataclass(frozen=True)
class PredictionInterval:
    x0: float
    level: float
    point: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def as_dict(self) -> dict:
        return {"x0": self.x0, "level": self.level, "point": self.point,
                "lower": self.lower, "upper": self.upper}


def leverage(model: PolyRegModel, x0: float) -> float:
    """x0' (X'X)^-1 x0 for the basis vector at x0."""
    if model.centered_inverse is not None:
        v = _basis([x0], model.center)[0]
        return float(v @ model.centered_inverse @ v)
    v = _basis([x0])[0]
    return float(v @ model.normal_matrix_inverse @ v)


def predict_interval(model: PolyRegModel, x0: float, level: float = 0.95) -> PredictionInterval:
    """Prediction interval for a new observation at PMI ``x0``:
    point +/- t_{(1+level)/2, n-3} * s * sqrt(1 + leverage)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    if model.df < 1:
        raise WardStatsError("model has no residual degrees of freedom")
    point = evaluate_poly(model, x0)
    half = t_quantile((1.0 + level) / 2.0, model.df) * model.residual_sd * math.sqrt(1.0 + leverage(model, x0))
    return PredictionInterval(x0, level, point, point - half, point + half)


def prediction_band(model: PolyRegModel, xs: Iterable[float], level: float = 0.95) -> list[PredictionInterval]:
    return [predict_interval(model, float(x), level) for x in xs]


def simulate_k_data(n: int, rng: np.random.Generator, coefficients=(6.0, 0.2, -0.0005),
                    noise_sd: float = 2.0, pmi_range=(2.0, 110.0)) -> np.ndarray:
    """Synthetic (pmi, k) pairs from a known quadratic with Gaussian noise."""
    x = rng.uniform(*pmi_range, size=n)
    b0, b1, b2 = coefficients
    y = b0 + b1 * x + b2 * x * x + rng.normal(0.0, noise_sd, size=n)
    return np.column_stack([x, y])


def format_intervals(intervals: Sequence[PredictionInterval], digits: int = 2) -> str:
    """Table with one row per confidence level."""
    lines = ["Level  Point Estimate  Lower bound  Upper bound"]
    for pi in intervals:
        lines.append(f"{pi.level * 100:4.0f}%  {pi.point:14.{digits}f}  {pi.lower:11.{digits}f}  "
                     f"{pi.upper:11.{digits}f}")
    return "\n".join(lines) + "\n"
