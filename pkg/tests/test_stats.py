import math

import numpy as np
import pytest
from scipy.integrate import quad

from compbench.errors import DegenerateInputError, RangeError, UsageError
from compbench.stats import (
    apply_bh,
    bh_correct,
    box_summary,
    ols_fit,
    paired_t,
)


def t_density(x, df):
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def two_sided_p_by_quadrature(t, df):
    tail, _ = quad(t_density, abs(t), np.inf, args=(df,))
    return 2.0 * tail


def test_paired_t_identical_scores():
    r = paired_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert r.degenerate and r.p_two_sided == 1.0
    assert math.isnan(r.t)


def test_paired_t_exact_shift():
    r = paired_t([2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 3.0, 4.0])  # d = [1,1,1,1]
    assert r.degenerate and r.p_two_sided == 0.0


def test_paired_t_quadrature_oracle():
    a = np.array([1.0, -1.0, 2.0, 0.0])
    b = np.zeros(4)
    r = paired_t(a, b)
    assert not r.degenerate
    assert r.df == 3
    assert r.t == pytest.approx(0.5 / (np.std(a, ddof=1) / 2.0), abs=1e-10)
    assert r.t == pytest.approx(0.7746, abs=1e-4)
    assert r.p_two_sided == pytest.approx(two_sided_p_by_quadrature(r.t, 3), abs=1e-8)
    assert r.p_two_sided == pytest.approx(0.495, abs=1e-3)


def test_paired_t_antisymmetric(rng):
    a = rng.standard_normal(30)
    b = rng.standard_normal(30)
    r_ab = paired_t(a, b)
    r_ba = paired_t(b, a)
    assert r_ab.t == pytest.approx(-r_ba.t, abs=1e-12)
    assert r_ab.p_two_sided == pytest.approx(r_ba.p_two_sided, abs=1e-12)


def test_paired_t_input_validation():
    with pytest.raises(UsageError):
        paired_t([1.0], [2.0])
    with pytest.raises(UsageError):
        paired_t([1.0, 2.0], [1.0, 2.0, 3.0])


def brute_force_bh(p):
    """Direct transcription of the BH definition: adj_i = min_{j>=i} m*p_(j)/j."""
    p = np.asarray(p, dtype=np.float64)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    for rank, idx in enumerate(order, start=1):
        candidates = [
            m * p[order[j - 1]] / j for j in range(rank, m + 1)
        ]
        adjusted[idx] = min(1.0, min(candidates))
    return adjusted


def test_bh_four_value_example():
    adjusted = bh_correct([0.01, 0.04, 0.03, 0.005])
    assert np.allclose(adjusted, [0.02, 0.04, 0.04, 0.02], atol=1e-12)


def test_bh_single_and_constant():
    assert bh_correct([0.37]).tolist() == [0.37]
    assert np.allclose(bh_correct([0.2, 0.2, 0.2]), 0.2)


def test_bh_matches_brute_force(rng):
    for _ in range(1_000):
        p = rng.random(int(rng.integers(1, 12)))
        assert np.array_equal(bh_correct(p), brute_force_bh(p))


def test_bh_order_invariant(rng):
    p = rng.random(9)
    perm = rng.permutation(9)
    assert np.allclose(bh_correct(p)[perm], bh_correct(p[perm]), atol=1e-15)


def test_bh_rejects_out_of_range():
    with pytest.raises(RangeError):
        bh_correct([0.5, 1.2])
    with pytest.raises(RangeError):
        bh_correct([-0.1])


def test_apply_bh_flags_significance():
    results = [
        paired_t([1.0, 2.0, 3.0, 4.0], [0.0, 0.5, 1.0, 1.5], "a", "b"),
        paired_t([1.0, -1.0, 2.0, 0.0], [0.0, 0.0, 0.0, 0.0], "a", "c"),
    ]
    adjusted = apply_bh(results, q=0.05)
    raw = [r.p_two_sided for r in results]
    assert np.array_equal([r.p_bh_adjusted for r in adjusted], bh_correct(raw))
    for r in adjusted:
        assert r.p_bh_adjusted >= r.p_two_sided - 1e-15
        assert r.significant == (r.p_bh_adjusted <= 0.05)


def test_ols_perfect_fit():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    fit = ols_fit(x, 2.0 * x)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.slope_ci_high - fit.slope_ci_low == pytest.approx(0.0, abs=1e-9)


def test_ols_closed_form_example():
    fit = ols_fit([0.0, 1.0, 2.0], [0.0, 1.0, 1.0])
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(1 / 6, abs=1e-12)
    assert fit.n == 3


def test_ols_scale_equivariance(rng):
    x = rng.random(25)
    y = rng.random(25)
    f1 = ols_fit(x, y)
    f3 = ols_fit(x, 3.0 * y)
    assert f3.slope == pytest.approx(3.0 * f1.slope, rel=1e-12)
    assert f3.slope_ci_low == pytest.approx(3.0 * f1.slope_ci_low, rel=1e-10)
    assert f3.slope_ci_high == pytest.approx(3.0 * f1.slope_ci_high, rel=1e-10)


def test_ols_ci_coverage():
    # y independent of x: the 95% slope CI should contain 0 ~95% of the time
    hits = 0
    for trial in range(100):
        rng = np.random.default_rng(trial)
        x = rng.random(20)
        y = rng.standard_normal(20)
        fit = ols_fit(x, y)
        hits += fit.slope_ci_low <= 0.0 <= fit.slope_ci_high
    assert hits >= 93


def test_ols_rejects_degenerate():
    with pytest.raises(DegenerateInputError):
        ols_fit([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(UsageError):
        ols_fit([0.0, 1.0], [0.0, 1.0])


def test_box_inclusive_quartiles():
    s = box_summary([1.0, 2.0, 3.0, 4.0, 5.0])
    assert (s.median, s.q1, s.q3) == (3.0, 2.0, 4.0)
    assert s.notch_low == pytest.approx(3.0 - 1.57 * 2.0 / math.sqrt(5))
    assert s.notch_high == pytest.approx(3.0 + 1.57 * 2.0 / math.sqrt(5))
    assert (s.whisker_low, s.whisker_high) == (1.0, 5.0)


def test_box_constant_scores():
    s = box_summary([2.0] * 8)
    assert s.q1 == s.median == s.q3 == 2.0
    assert s.notch_low == s.notch_high == 2.0
    assert s.whisker_low == s.whisker_high == 2.0


def test_box_single_score():
    s = box_summary([4.2])
    assert all(
        getattr(s, f) == 4.2
        for f in ("median", "q1", "q3", "notch_low", "notch_high", "whisker_low", "whisker_high")
    )
    assert s.n == 1


def test_box_whiskers_exclude_outliers():
    scores = list(np.linspace(0.0, 1.0, 20)) + [50.0]
    s = box_summary(scores)
    assert s.whisker_high <= 1.0
    with pytest.raises(UsageError):
        box_summary([])
