import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from snetfdr.distributions import Gaussian, Uniform
from snetfdr.metrics import (
    ConfusionCounts,
    TrialOutcome,
    fano_bound,
    fano_bound_monte_carlo,
    fdp,
    ks_statistic,
    monte_carlo_estimate,
    order_stat_cdf,
    order_stat_cdf_quadrature,
    power,
    regularized_incomplete_beta,
    tally,
    uniform_cdf,
)
from snetfdr.procedures import bayes_oracle_select, bh_select


def test_tally_examples():
    # sensors 1..4 in one-based numbering are ids 0..3 here
    c = tally([False, True, True, False], {0, 1})
    assert (c.V, c.S, c.T, c.U, c.R) == (1, 1, 1, 1, 2)
    c = tally([False, True, True], [])
    assert c.V == c.S == c.R == 0
    c = tally([True] * 5, range(5))
    assert c.V == 0 and c.S == 5 and fdp(c) == 0.0
    with pytest.raises(ValueError):
        tally([True, False], [2])


def test_fdp_examples():
    assert fdp(ConfusionCounts(U=0, V=1, T=0, S=1)) == 0.5
    assert fdp(ConfusionCounts(U=3, V=0, T=2, S=0)) == 0.0
    assert fdp(ConfusionCounts(U=0, V=0, T=0, S=5)) == 0.0
    assert math.isnan(power(ConfusionCounts(3, 0, 0, 0)))
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


@given(st.lists(st.booleans(), min_size=1, max_size=50), st.data())
def test_table_identities(truth, data):
    sel = data.draw(st.sets(st.integers(0, len(truth) - 1)))
    c = tally(truth, sel)
    assert c.R == c.V + c.S == len(sel)
    assert c.m1 == sum(truth) and c.m0 == len(truth) - sum(truth)
    assert c.m == len(truth) and c.U + c.V + c.T + c.S == c.m


def _all_null_bh(rng):
    p = rng.random(100)
    return tally(np.zeros(100, bool), bh_select(p, 0.1).selected)


def _never_select(rng):
    rng.random(10)
    return TrialOutcome(tally(np.zeros(10, bool), []), 0)


def _oracle_disjoint(rng):
    h1 = rng.random(50) < 0.3
    y = np.where(h1, rng.uniform(2, 3, 50), rng.uniform(0, 1, 50))
    return tally(h1, bayes_oracle_select(y, Uniform(0, 1), Uniform(2, 3), 0.3).selected)


def test_monte_carlo_all_null():
    s = monte_carlo_estimate(_all_null_bh, 10_000, master_seed=1)
    assert abs(s.mean_fdp - 0.1) <= 3 * s.stderr_fdp


def test_monte_carlo_trivial_cases():
    assert monte_carlo_estimate(_never_select, 50).mean_fdp == 0.0
    assert monte_carlo_estimate(_oracle_disjoint, 50).mean_power == 1.0
    with pytest.raises(ValueError):
        monte_carlo_estimate(_never_select, 1)


def test_monte_carlo_deterministic_and_parallel():
    a = monte_carlo_estimate(_all_null_bh, 200, master_seed=5, keep_outcomes=True)
    b = monte_carlo_estimate(_all_null_bh, 200, master_seed=5, keep_outcomes=True)
    c = monte_carlo_estimate(_all_null_bh, 200, master_seed=5, jobs=2, keep_outcomes=True)
    assert a.outcomes == b.outcomes == c.outcomes
    for f in ("mean_fdp", "stderr_fdp", "mean_power", "mean_detections", "mean_errors", "mean_messages"):
        np.testing.assert_equal(getattr(a, f), getattr(c, f))


def test_order_stat_examples():
    assert order_stat_cdf(0.5, 2, 2) == pytest.approx(0.25, abs=1e-14)
    assert order_stat_cdf(0.5, 3, 1) == pytest.approx(0.875, abs=1e-14)
    assert order_stat_cdf(0.3, 10, 4) == pytest.approx(order_stat_cdf_quadrature(0.3, 10, 4), abs=1e-8)
    for bad in ((0.5, 3, 0), (0.5, 3, 4), (1.2, 3, 1)):
        with pytest.raises(ValueError):
            order_stat_cdf(*bad)


def test_incomplete_beta_against_frozen_values():
    # frozen from scipy.special.betainc
    cases = [(4.0, 7.0, 0.3, 0.3503893), (1.0, 1.0, 0.42, 0.42), (50.0, 51.0, 0.5, 0.5397946)]
    for a, b, x, v in cases:
        assert regularized_incomplete_beta(a, b, x) == pytest.approx(v, abs=1e-7)
        assert regularized_incomplete_beta(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)


def test_order_stat_grid_vs_quadrature():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 60))
        i = int(rng.integers(1, n + 1))
        u = float(rng.random())
        worst = max(worst, abs(order_stat_cdf(u, n, i) - order_stat_cdf_quadrature(u, n, i)))
    assert worst < 1e-8


def test_order_stat_empirical(rng):
    n, sims = 20, 10_000
    s = np.sort(rng.random((sims, n)), axis=1)
    grid = np.linspace(0, 1, 201)
    for i in range(1, n + 1):
        emp = np.searchsorted(np.sort(s[:, i - 1]), grid, side="right") / sims
        theo = np.array([order_stat_cdf(u, n, i) for u in grid])
        assert np.max(np.abs(emp - theo)) < 0.02


def test_dominance_transfer():
    grid = np.linspace(0, 1, 101)
    fx = grid ** 0.5  # X stochastically smaller
    fy = grid ** 2
    assert np.all(fx >= fy)
    for n in (1, 5, 20):
        for i in range(1, n + 1):
            a = np.array([order_stat_cdf(u, n, i) for u in fx])
            b = np.array([order_stat_cdf(u, n, i) for u in fy])
            assert np.all(a >= b - 1e-14)


@given(st.integers(1, 40), st.data())
def test_order_stat_monotone(n, data):
    i = data.draw(st.integers(1, n))
    u1, u2 = sorted((data.draw(st.floats(0, 1)), data.draw(st.floats(0, 1))))
    assert order_stat_cdf(u1, n, i) <= order_stat_cdf(u2, n, i) + 1e-14
    if i < n:
        assert order_stat_cdf(u1, n, i) >= order_stat_cdf(u1, n, i + 1) - 1e-14
    assert order_stat_cdf(1.0, n, i) == 1.0


def test_ks_examples(rng):
    assert ks_statistic(np.full(10, 0.5), uniform_cdf) == pytest.approx(0.5)
    n = 1000
    q = (np.arange(1, n + 1) - 0.5) / n
    assert ks_statistic(q, uniform_cdf) <= 1 / (2 * n) + 1e-12
    assert ks_statistic(rng.random(100_000), uniform_cdf) < 0.01
    with pytest.raises(ValueError):
        ks_statistic([], uniform_cdf)


def test_fano_examples():
    assert fano_bound(Gaussian(0, 1), Gaussian(0, 1), 0.5) == pytest.approx(1.0, abs=1e-8)
    assert fano_bound(Uniform(0, 1), Uniform(2, 3), 0.5) == pytest.approx(0.0, abs=1e-12)
    v = fano_bound(Gaussian(0, 1), Gaussian(0, 3), 0.5)
    assert 0 < v < 1
    mc = fano_bound_monte_carlo(Gaussian(0, 1), Gaussian(0, 3), 0.5, 1_000_000, np.random.default_rng(4))
    assert abs(v - mc) < 0.01
