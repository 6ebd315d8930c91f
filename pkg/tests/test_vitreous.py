import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from wardstats import vitreous as vt
from wardstats.core import WardStatsError


def test_interpolating_parabola():
    m = vt.fit_poly2([(x, 1 + 2 * x - 0.5 * x * x) for x in (0.0, 1.0, 2.0, 4.0)])
    assert np.allclose(m.coefficients, (1, 2, -0.5), atol=1e-12)
    assert m.residual_sd < 1e-12 and m.df == 1 and m.n == 4
    pi = vt.predict_interval(m, 56.0, 0.99)
    assert pi.width < 1e-8 and math.isclose(pi.point, 1 + 112 - 0.5 * 56 ** 2)


def test_constant_data():
    m = vt.fit_poly2([(x, 4.2) for x in (1.0, 5.0, 9.0, 20.0, 33.0)])
    assert np.allclose(m.coefficients, (4.2, 0, 0), atol=1e-12)


def test_fit_preconditions():
    with pytest.raises(WardStatsError):
        vt.fit_poly2([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(WardStatsError):
        vt.fit_poly2([(1, 1), (1, 2), (2, 3), (2, 4), (1, 5)])


def test_evaluate_poly():
    assert vt.evaluate_poly((6.173, 0.0127, -0.0005), 0) == 6.173
    assert math.isclose(vt.evaluate_poly((6.173, 0.0127, -0.0005), 56), 5.3162, abs_tol=5e-5)
    assert vt.evaluate_poly(vt.from_coefficients(0, 1, 0), 7) == 7
    with pytest.raises(Exception):
        vt.predict_interval(vt.from_coefficients(0, 1, 0), 7)


def test_t_quantile_closed_forms():
    assert math.isclose(vt.t_quantile(0.975, 1), 12.706204736174698, abs_tol=1e-9)
    assert math.isclose(vt.t_quantile(0.975, 2), 4.302652729749464, abs_tol=1e-10)
    assert abs(vt.t_quantile(0.975, 10 ** 6) - 1.959966) < 1e-4
    for df in (1, 2, 3, 7, 30, 1000):
        assert vt.t_quantile(0.5, df) == 0.0
    with pytest.raises(ValueError):
        vt.t_quantile(1.0, 3)
    with pytest.raises(ValueError):
        vt.t_quantile(0.5, 0)


def _t_lower_mp(t, df):
    t, df = mp.mpf(t), mp.mpf(df)
    tail = mp.betainc(df / 2, mp.mpf(1) / 2, 0, df / (df + t * t), regularized=True) / 2
    return tail if t < 0 else 1 - tail


# scipy's ppf drifts by up to ~1e-8 in the far tails at small df, so the
# reference is a 40-digit root of the exact CDF
@pytest.mark.parametrize("df", [1, 2, 3, 4, 5, 10, 30, 100, 1000, 10 ** 5, 10 ** 7])
def test_t_quantile_against_reference(df):
    mp.mp.dps = 40
    for p in (1e-6, 1e-4, 0.001, 0.01, 0.025, 0.05, 0.1, 0.3, 0.45, 0.55, 0.7, 0.9, 0.95, 0.975, 0.99, 0.995,
              0.999, 0.9999, 1 - 1e-6):
        got = vt.t_quantile(p, df)
        ref = mp.findroot(lambda t: _t_lower_mp(t, df) - p, mp.mpf(got))
        assert abs(got - ref) <= max(1e-10, 1e-14 * abs(ref)), (p, df, got, ref)


def test_betainc_against_mpmath():
    mp.mp.dps = 40
    for a, b, x in [(0.5, 0.5, 0.3), (2.0, 3.0, 0.9), (15.0, 0.5, 0.99), (0.5, 5e5, 1e-6), (1e4, 0.5, 0.9999),
                    (500.0, 500.0, 0.5), (3.0, 1e7, 2e-7), (5e6, 0.5, 1 - 2.26e-6), (0.5, 5e6, 2.26e-6)]:
        ref = float(mp.betainc(a, b, 0, x, regularized=True))
        assert math.isclose(vt.betainc(a, b, x), ref, rel_tol=1e-12, abs_tol=1e-300), (a, b, x)


def test_t_cdf_and_pdf():
    for df in (1, 4, 50):
        for t in (-8.0, -1.3, 0.0, 0.4, 3.0):
            assert math.isclose(vt.t_cdf(t, df), stats.t.cdf(t, df), rel_tol=1e-12)
            assert math.isclose(vt.t_pdf(t, df), stats.t.pdf(t, df), rel_tol=1e-12)


def _oracle_coefficients(data):
    mp.mp.dps = 50
    X = mp.matrix([[1, mp.mpf(x), mp.mpf(x) ** 2] for x, _ in data])
    y = mp.matrix([mp.mpf(k) for _, k in data])
    return [float(v) for v in mp.lu_solve(X.T * X, X.T * y)]


@pytest.mark.parametrize("lo, hi", [(0, 1), (2, 110), (50, 60), (100, 110), (0, 1e4)])
def test_ols_against_extended_precision(lo, hi):
    rng = np.random.default_rng(int(hi))
    x = rng.uniform(lo, hi, 33)
    data = np.column_stack([x, 6 + 0.2 * x - 0.0005 * x * x + rng.normal(0, 2, 33)])
    assert np.linalg.cond(np.column_stack([np.ones(33), x, x * x])) < 1e8 * 1.5
    got = vt.fit_poly2(data).coefficients
    for g, o in zip(got, _oracle_coefficients(data)):
        assert abs(g - o) <= 1e-9 * abs(o)


def test_interval_formula():
    rng = np.random.default_rng(21)
    data = vt.simulate_k_data(33, rng)
    m = vt.fit_poly2(data)
    X = np.column_stack([np.ones(33), data[:, 0], data[:, 0] ** 2])
    beta, *_ = np.linalg.lstsq(X, data[:, 1], rcond=None)
    s = math.sqrt(np.sum((data[:, 1] - X @ beta) ** 2) / 30)
    v = np.array([1, 56.0, 56.0 ** 2])
    half = stats.t.ppf(0.975, 30) * s * math.sqrt(1 + v @ np.linalg.inv(X.T @ X) @ v)
    pi = vt.predict_interval(m, 56.0, 0.95)
    assert math.isclose(pi.point, v @ beta, rel_tol=1e-10)
    assert math.isclose(pi.upper - pi.point, half, rel_tol=1e-8)
    assert math.isclose(pi.point - pi.lower, half, rel_tol=1e-8)
    assert math.isclose(m.residual_sd, s, rel_tol=1e-10)
    with pytest.raises(ValueError):
        vt.predict_interval(m, 56.0, 1.0)


def test_reference_rendering():
    text = vt.format_intervals([vt.PredictionInterval(56.0, 0.95, 15.75, 9.67, 21.83),
                                vt.PredictionInterval(56.0, 0.99, 15.75, 7.57, 23.94)])
    assert text == ("Level  Point Estimate  Lower bound  Upper bound\n"
                    "  95%           15.75         9.67        21.83\n"
                    "  99%           15.75         7.57        23.94\n")


def test_coefficients_within_three_se_over_seeds():
    truth = np.array([6.0, 0.2, -0.0005])
    outside = 0
    for seed in range(200):
        data = vt.simulate_k_data(33, np.random.default_rng(1000 + seed), tuple(truth))
        m = vt.fit_poly2(data)
        se = m.residual_sd * np.sqrt(np.diag(m.normal_matrix_inverse))
        outside += np.any(np.abs(np.array(m.coefficients) - truth) > 3 * se)
    # each coefficient escapes 3 SE with probability < 1%, so rarely more than a handful
    assert outside <= 8


def test_width_smallest_near_centroid():
    rng = np.random.default_rng(22)
    m = vt.fit_poly2(vt.simulate_k_data(40, rng))
    xs = np.linspace(-50, 200, 501)
    widths = np.array([pi.width for pi in vt.prediction_band(m, xs)])
    i = int(np.argmin(widths))
    assert 2 < xs[i] < 110
    assert np.all(np.diff(widths[xs > 110]) > 0) and np.all(np.diff(widths[xs < 2]) < 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-20, 150))
def test_nested_intervals_and_orthogonality(seed, x0):
    rng = np.random.default_rng(seed)
    data = vt.simulate_k_data(12, rng)
    m = vt.fit_poly2(data)
    p95, p99 = vt.predict_interval(m, x0, 0.95), vt.predict_interval(m, x0, 0.99)
    assert p99.lower < p95.lower <= p95.point <= p95.upper < p99.upper
    X = np.column_stack([np.ones(12), data[:, 0], data[:, 0] ** 2])
    r = data[:, 1] - X @ np.array(m.coefficients)
    scale = np.abs(X).max(axis=0) * np.abs(data[:, 1]).max() * 12
    assert np.all(np.abs(X.T @ r) < 1e-9 * scale)
    inv = m.normal_matrix_inverse
    assert np.allclose(inv, inv.T) and np.all(np.linalg.eigvalsh(inv) > 0)


# for p >= 0.5 the complement 1 - p is exact in floating point
@given(st.floats(0.5, 1 - 1e-9), st.integers(1, 500))
def test_t_quantile_symmetry(p, df):
    assert vt.t_quantile(1 - p, df) == -vt.t_quantile(p, df)
