import datetime as dt
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wardstats import glm
from wardstats.core import AdmissionRecord

from conftest import death, shift

D = dt.date


def target_shifts():
    return [shift("t", "A", "2013-01-06T21:00", "2013-01-07T07:10"),
            shift("t", "A", "2013-01-08T07:00", "2013-01-08T14:10"),
            shift("t", "A", "2013-01-09T07:00", "2013-01-09T14:10"),
            shift("t", "A", "2013-01-12T14:00", "2013-01-12T21:10"),
            shift("t", "B", "2013-01-10T07:00", "2013-01-10T14:10"),
            shift("t", "A", "2013-01-17T07:00", "2013-01-17T14:10"),
            shift("other", "C", "2013-01-08T07:00", "2013-01-08T14:10")]


def admissions():
    return [AdmissionRecord("p1", "A", D(2013, 1, 7), D(2013, 1, 16), 80, False),
            AdmissionRecord("p2", "C", D(2013, 1, 7), D(2013, 1, 16), 70, False),
            AdmissionRecord("p3", "B", D(2013, 1, 10), D(2013, 1, 10), 90, True),
            AdmissionRecord("p4", "D", D(2013, 1, 8), D(2013, 1, 8), 88, True),
            AdmissionRecord("p5", "A", D(2013, 1, 10), D(2013, 1, 10), 85, True)]


DEATHS = [death("p3", "B", "2013-01-10T09:00"), death("p4", "D", "2013-01-08T10:00"),
          death("p5", "A", "2013-01-10T10:00")]


def test_design_hand_enumeration():
    rows = {r.patient_id: r for r in glm.build_design(admissions(), target_shifts(), "t", "m1", DEATHS)}
    assert rows["p1"] == glm.DesignRow(0, 0, 0, 0, 4, 80.0, 0)
    assert rows["p2"] == glm.DesignRow(0, 0, 1, 0, 0, 70.0, 0)
    assert rows["p3"] == glm.DesignRow(1, 1, 0, 0, 1, 90.0, 1)
    assert rows["p4"] == glm.DesignRow(1, 0, 0, 1, 0, 88.0, 0)  # nurse on duty, opposite zone
    assert rows["p5"] == glm.DesignRow(1, 0, 0, 0, 0, 85.0, 1)  # same zone, other sector
    m2 = glm.build_design(admissions(), target_shifts(), "t", "m2", DEATHS)
    assert [r.patient_id for r in m2] == ["p1", "p3"]
    # without registration times nobody counts as present
    assert all(r.present == 0 for r in glm.build_design(admissions(), target_shifts(), "t"))
    with pytest.raises(ValueError):
        glm.build_design(admissions(), target_shifts(), "t", "m3")


def test_ten_day_stay_four_shifts():
    a = AdmissionRecord("p", "A", D(2013, 1, 7), D(2013, 1, 16), 80, False)
    assert glm.count_times(a, [s for s in target_shifts() if s.nurse_id == "t"]) == 4


def test_m2_rows_are_subset_of_m1(small_ward):
    roster, adms, deaths = small_ward
    m1 = glm.build_design(adms, roster, "FT", "m1", deaths)
    m2 = glm.build_design(adms, roster, "FT", "m2", deaths)
    by_id = {r.patient_id: r for r in m1}
    assert 0 < len(m2) < len(m1)
    assert all(by_id[r.patient_id] == r for r in m2)
    assert all(sum((r.sector_b, r.sector_c, r.sector_d)) <= 1 and r.times >= 0 for r in m1)


def grouped(k0, n0, k1, n1):
    x = np.r_[np.zeros(n0), np.ones(n1)]
    y = np.r_[np.ones(k0), np.zeros(n0 - k0), np.ones(k1), np.zeros(n1 - k1)]
    return np.column_stack([np.ones_like(x), x]), y


def test_grouped_closed_form():
    X, y = grouped(1, 4, 3, 4)
    fit = glm.fit_logistic(X, y, ["intercept", "x"])
    assert fit.converged
    assert abs(fit.coefficients[0] - math.log(1 / 3)) < 1e-6
    assert abs(fit.coefficients[1] - math.log(9)) < 1e-6
    # closed-form Wald SEs for a 2x2 table
    se0 = math.sqrt(1 / 1 + 1 / 3)
    assert math.isclose(fit.std_errors[0], se0, rel_tol=1e-6)
    assert math.isclose(fit.std_errors[1], math.sqrt(2 * (1 + 1 / 3)), rel_tol=1e-6)


def test_intercept_only():
    fit = glm.fit_logistic(np.ones((10, 1)), np.r_[np.ones(5), np.zeros(5)], ["intercept"])
    assert abs(fit.coefficients[0]) < 1e-12
    assert math.isclose(fit.log_likelihood, 10 * math.log(0.5))
    assert fit.pseudo_r2 == 0.0 and fit.separation_flags == {}


def _golden(f, a, b, tol=1e-10):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (a + b) / 2


def test_matches_golden_section_search():
    rng = np.random.default_rng(12)
    x = rng.normal(size=60)
    y = (rng.uniform(size=60) < 1 / (1 + np.exp(-(0.4 + 1.2 * x)))).astype(float)
    X = np.column_stack([np.ones_like(x), x])
    fit = glm.fit_logistic(X, y)

    def neg(b0, b1):
        return -glm.log_likelihood(np.array([b0, b1]), X, y)

    def profile(b1):
        return neg(_golden(lambda b0: neg(b0, b1), -5, 5), b1)

    b1 = _golden(profile, -5, 5, 1e-8)
    b0 = _golden(lambda v: neg(v, b1), -5, 5)
    assert abs(fit.coefficients[1] - b1) < 1e-4 and abs(fit.coefficients[0] - b0) < 1e-4


def test_fit_statistics():
    rng = np.random.default_rng(13)
    X = np.column_stack([np.ones(200), rng.normal(size=200), rng.integers(0, 2, 200)])
    y = (rng.uniform(size=200) < 0.3 + 0.3 * X[:, 2]).astype(float)
    fit = glm.fit_logistic(X, y, ["intercept", "a", "b"])
    assert math.isclose(fit.aic, 2 * 3 - 2 * fit.log_likelihood)
    assert math.isclose(fit.pseudo_r2, 1 - fit.log_likelihood / fit.null_log_likelihood)
    assert 0 <= fit.pseudo_r2 <= 1
    assert np.allclose(fit.z_scores, fit.coefficients / fit.std_errors)
    assert np.allclose(fit.p_values, [math.erfc(abs(z) / math.sqrt(2)) for z in fit.z_scores])
    assert not any(fit.separation_flags.values())
    assert fit.coef("b") == fit.coefficients[2] and fit.se("a") == fit.std_errors[1]
    d = fit.as_dict()
    assert set(d["terms"]) == {"intercept", "a", "b"} and d["n_obs"] == 200


def test_age_shift_moves_only_intercept(small_ward):
    roster, adms, deaths = small_ward
    rows = glm.build_design(adms, roster, "FT", "m1", deaths)
    cov = ("sector_b", "sector_c", "sector_d", "times", "age")
    X, y, names = glm.design_matrix(rows, cov)
    base = glm.fit_logistic(X, y, names)
    Xs = X.copy()
    Xs[:, names.index("age")] += 10.0
    moved = glm.fit_logistic(Xs, y, names)
    j = names.index("age")
    assert abs(moved.coefficients[0] - (base.coefficients[0] - 10.0 * base.coefficients[j])) < 1e-8
    assert np.max(np.abs(moved.coefficients[1:] - base.coefficients[1:])) < 1e-8


def test_perfect_separation():
    x = np.arange(-5, 5, dtype=float)
    y = (x > 0).astype(float)
    fit = glm.fit_logistic(np.column_stack([np.ones_like(x), x]), y, ["intercept", "x"])
    assert fit.separation_flags["x"]
    assert abs(fit.coefficients[1]) > 15 or fit.std_errors[1] > 100


def test_quasi_separated_present_column():
    # present = 1 only ever among deaths: the huge-coefficient, huge-SE pattern
    rng = np.random.default_rng(14)
    age = rng.uniform(60, 100, 400)
    dead = rng.uniform(size=400) < 1 / (1 + np.exp(-(-8 + 0.09 * age)))
    present = np.zeros(400)
    present[np.flatnonzero(dead)[::2]] = 1
    X = np.column_stack([np.ones(400), age, present])
    fit = glm.fit_logistic(X, dead.astype(float), ["intercept", "age", "present"])
    assert fit.separation_flags == {"age": False, "present": True}
    assert abs(fit.coef("present")) > 15 and fit.se("present") > 100
    assert glm.stars(fit.p_values[2]) == ""
    assert glm.detect_separation(fit, X) == fit.separation_flags


def test_rank_deficiency_and_constant_columns():
    rng = np.random.default_rng(15)
    a = rng.normal(size=30)
    y = (rng.uniform(size=30) < 0.5).astype(float)
    with pytest.raises(glm.RankDeficientError) as info:
        glm.fit_logistic(np.column_stack([np.ones(30), a, 2 * a]), y, ["intercept", "a", "a2"])
    assert info.value.columns == ["a2"]
    with pytest.warns(UserWarning, match="constant"):
        fit = glm.fit_logistic(np.column_stack([np.ones(30), a, np.zeros(30)]), y, ["intercept", "a", "z"])
    assert fit.names == ["intercept", "a"] and fit.dropped == ["z"]


def test_non_convergence_is_reported():
    x = np.arange(-5, 5, dtype=float)
    fit = glm.fit_logistic(np.column_stack([np.ones_like(x), x]), (x > 0).astype(float), max_iter=2)
    assert not fit.converged and fit.n_iter == 2


def test_stars():
    assert [glm.stars(p) for p in (0.04, 0.5, 0.009, 0.09, 0.1, 0.01, 0.05)] == ["**", "", "***", "*", "", "**", "*"]


def test_summary_table(small_ward):
    roster, adms, deaths = small_ward
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m1 = glm.fit_design(glm.build_design(adms, roster, "FT", "m1", deaths))
        m2 = glm.fit_design(glm.build_design(adms, roster, "FT", "m2", deaths))
    text = glm.summarize(m1, m2, titles=["Model M1", "Model M2"])
    lines = text.splitlines()
    for label in ("Sector B", "Times", "Age", "Present", "Intercept", "N. observations", "Log Likelihood",
                  "Pseudo-R2", "Akaike Inf. Crit."):
        assert any(line.startswith(label) for line in lines)
    assert lines[-1].endswith("*p<0.1; **p<0.05; ***p<0.01")
    assert len({len(line) for line in lines if "|" in line and not line.startswith("Note")}) == 1


# --- properties ------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_score_zero_and_se_match_hessian(seed):
    rng = np.random.default_rng(seed)
    n = 150
    X = np.column_stack([np.ones(n), rng.normal(size=n), rng.integers(0, 2, n)])
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-(X @ np.array([-0.5, 0.8, 0.5]))))).astype(float)
    fit = glm.fit_logistic(X, y)
    if any(fit.separation_flags.values()):
        return
    assert np.max(np.abs(glm.score(fit.coefficients, X, y))) < 1e-6
    h = 1e-4
    k = X.shape[1]
    H = np.empty((k, k))
    f = lambda b: glm.log_likelihood(b, X, y)  # noqa: E731
    for i in range(k):
        for j in range(k):
            ei, ej = np.eye(k)[i] * h, np.eye(k)[j] * h
            b = fit.coefficients
            H[i, j] = (f(b + ei + ej) - f(b + ei - ej) - f(b - ei + ej) + f(b - ei - ej)) / (4 * h * h)
    se_fd = np.sqrt(np.diag(np.linalg.inv(-H)))
    assert np.max(np.abs(fit.std_errors / se_fd - 1)) < 1e-3
