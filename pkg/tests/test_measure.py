import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from exclspread.dynamics import SimParams, WindowPlan, simulate_eprs
from exclspread.kernels import JumpKernel, RateField
from exclspread.lattice import ExclusionConfig, SpreadConfig
from exclspread.measure import (
    EnsembleStats,
    HydroReport,
    TestFunction,
    empirical_pair,
    hydro_error,
    pair_snapshots,
    sample_bernoulli_profile,
    wlln_statistic,
    wlln_target,
)
from exclspread.pde import GridSpec, solve_convdiff

NN = JumpKernel.nearest_neighbor()


class Linear:
    name = "linear"

    def __call__(self, u, t=0.0):
        return np.asarray(u, dtype=float)

    def support(self, t=0.0):
        return -1.0, 1.0


@pytest.mark.parametrize("family", ["raised_cosine", "spline"])
def test_test_function_integral_and_support(family):
    G = TestFunction(family, c=0.3, w=0.7)
    assert G(0.3) == pytest.approx(1.0)
    assert G(0.3 + 0.71) == 0.0 and G(0.3 - 0.71) == 0.0
    val = integrate.quad(G, -0.4, 1.0, limit=200)[0]
    assert val == pytest.approx(G.integral(), rel=1e-9)
    assert G.support() == pytest.approx((-0.4, 1.0))


@given(st.sampled_from(["raised_cosine", "spline"]), st.floats(-0.95, 0.95))
def test_test_function_derivatives(family, x):
    G = TestFunction(family, c=0.1, w=0.5, velocity=0.4)
    u = 0.1 + 0.5 * x
    e = 1e-5
    assert G.d1(u) == pytest.approx((G(u + e) - G(u - e)) / (2 * e), abs=1e-6)
    assert G.d2(u) == pytest.approx((G.d1(u + e) - G.d1(u - e)) / (2 * e), abs=1e-5)
    assert G.ds(u, 0.2) == pytest.approx((G(u, 0.2 + e) - G(u, 0.2 - e)) / (2 * e), abs=1e-6)


def test_test_function_validation():
    with pytest.raises(ValueError):
        TestFunction("box")
    with pytest.raises(ValueError):
        TestFunction(w=0.0)
    G = TestFunction(c=0.0, w=0.5, velocity=1.0)
    assert G.support_over(1.0) == pytest.approx((-0.5, 1.5))


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.integers(1, 29))
def test_stats_merge_matches_single_pass(xs, cut):
    cut = min(cut, len(xs) - 1)
    samples = [np.array([[x, 2 * x]]) for x in xs]
    full = EnsembleStats.from_samples([0.0], ["a", "b"], samples)
    left = EnsembleStats.from_samples([0.0], ["a", "b"], samples[:cut])
    right = EnsembleStats.from_samples([0.0], ["a", "b"], samples[cut:])
    merged = left.merge(right)
    assert merged.count == len(xs)
    assert np.allclose(merged.mean, full.mean, atol=1e-12)
    assert np.allclose(merged.variance, full.variance, atol=1e-9)
    assert np.allclose(full.mean[0, 0], np.mean(xs), atol=1e-12)
    assert np.allclose(full.variance[0, 0], np.var(xs, ddof=1), atol=1e-9)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=20))
def test_stats_merge_associative(xs):
    parts = [EnsembleStats.from_samples([0.0], ["a"], [np.array([[x]])]) for x in xs]
    a = parts[0].merge(parts[1]).merge(parts[2])
    b = parts[0].merge(parts[1].merge(parts[2]))
    assert np.allclose(a.mean, b.mean) and np.allclose(a.m2, b.m2)
    empty = EnsembleStats([0.0], ["a"])
    assert np.array_equal(empty.merge(a).mean, a.mean)


def test_stats_layout_mismatch():
    with pytest.raises(ValueError):
        EnsembleStats([0.0], ["a"]).merge(EnsembleStats([1.0], ["a"]))


def test_bernoulli_extremes():
    w = WindowPlan(-10, 21, 1.0, 0.0)
    ones = sample_bernoulli_profile(lambda u: np.ones_like(u), 8, w, 1)
    zeros = sample_bernoulli_profile(lambda u: np.zeros_like(u), 8, w, 1)
    assert ones.cells.all() and not zeros.cells.any() and ones.window_left == -10
    with pytest.raises(ValueError):
        sample_bernoulli_profile(lambda u: 1.5 + 0 * u, 8, w, 1)


def test_bernoulli_pairing_binomial_variance():
    N = 64
    w = (-2 * N, 4 * N + 1)
    G = TestFunction(c=0.0, w=1.0)
    vals = np.array([empirical_pair(sample_bernoulli_profile(lambda u: 0.5 + 0 * u, N, w, s),
                                    G, N) for s in range(1000)])
    z = np.arange(w[0], w[0] + w[1]) / N
    var = 0.25 * np.sum(G(z) ** 2) / N**2
    assert abs(vals.mean() - 0.5 * G.integral()) < 3 * math.sqrt(var / vals.size)
    assert vals.var(ddof=1) == pytest.approx(var, rel=0.15)


def test_pair_examples():
    xi = ExclusionConfig(-4, np.isin(np.arange(-4, 5), [0, 1, 3]).astype(int))
    assert empirical_pair(xi, Linear(), 4) == pytest.approx(0.25)
    assert empirical_pair(ExclusionConfig(-4, np.zeros(9)), Linear(), 4) == 0.0
    with pytest.raises(ValueError):
        empirical_pair(ExclusionConfig(-2, np.zeros(5)), Linear(), 4)


def test_pair_uses_half_integer_sites():
    eta = SpreadConfig(np.array([1, 0, 1, 0, 0, 1]), -5, 2)  # sites -2.5, -1.5, ..., 2.5
    assert empirical_pair(eta, Linear(), 2) == pytest.approx((-2.5 - 0.5 + 2.5) / 2 / 2)


def test_pair_riemann_sum_converges():
    G = TestFunction(c=0.0, w=1.0)
    errs = []
    for N in (16, 32, 64):
        xi = ExclusionConfig(-2 * N, np.ones(4 * N + 1))
        errs.append(abs(empirical_pair(xi, G, N) - 1.0))
        assert errs[-1] <= 1.0 / N
    assert errs == sorted(errs, reverse=True) or max(errs) < 1e-12


def _short_run(rate, T=0.5, times=(0.1, 0.3, 0.5), N=8):
    plan = WindowPlan(-40, 81, 1.0, 4.0)
    init = sample_bernoulli_profile(lambda u: 0.5 + 0 * u, N, plan, 2)
    return simulate_eprs(SimParams(N, T, NN, rate, plan, 2, times), init)


def test_wlln_statistic_zero_rate():
    rec = _short_run(RateField.zero(horizon=0.5))
    assert wlln_statistic(rec) == 0.0
    assert wlln_target(RateField.zero(), 0.5) == 0.0


def test_wlln_statistic_monotone_and_target():
    from exclspread.kernels import b_from_h

    h = RateField.double_exp(1.0, 1.0, horizon=1.0)
    assert wlln_target(h, 1.0) == pytest.approx(2.0, abs=1e-9)
    rec = _short_run(b_from_h(RateField.double_exp(1.0, 1.0, horizon=0.5)))
    vals = [wlln_statistic(rec, t=t) for t in (0.1, 0.3, 0.5)]
    assert vals == sorted(vals)
    with pytest.raises(KeyError):
        wlln_statistic(rec, t=0.2)


def test_hydro_error_at_time_zero_is_sampling_error():
    N = 32
    tests = [TestFunction(c=c, w=0.5) for c in (-0.5, 0.0, 0.5)]
    plan = WindowPlan(-48, 97, 1.5, 0.0)
    samples = []
    for s in range(200):
        xi = sample_bernoulli_profile(lambda u: 0.4 + 0 * u, N, plan, s)
        samples.append([[empirical_pair(xi, G, N) for G in tests]])
    stats = EnsembleStats.from_samples([0.0], [G.name for G in tests], samples, {"N": N})
    g = GridSpec(-4.0, 4.0, 0.01, 0.1, (0.0,))
    pde = solve_convdiff(0.5, init=lambda u: 0.4 + 0 * u, grid=g)
    rep = hydro_error(stats, pde, tests)
    assert isinstance(rep, HydroReport) and len(rep.rows) == 3
    for r in rep.rows:
        assert r["abs_error"] < 3 * r["stderr"] + 1e-3  # Riemann-sum bias is O(1/N^2)
    assert rep.as_rows()[0][0] == N


def test_hydro_error_rejects_mismatch():
    tests = [TestFunction()]
    stats = EnsembleStats([0.0], ["other"], meta={"descriptor": {"T": 1.0}})
    g = GridSpec(-2.0, 2.0, 0.1, 0.1, (0.0,))
    pde = solve_convdiff(0.5, init=np.zeros(41), grid=g)
    with pytest.raises(ValueError):
        hydro_error(stats, pde, tests)
    pde.meta["descriptor"] = {"T": 2.0}
    stats.names = (tests[0].name,)
    with pytest.raises(ValueError):
        hydro_error(stats, pde, tests)


def test_pair_snapshots_shape():
    rec = _short_run(RateField.zero(horizon=0.5))
    tests = [TestFunction(c=0.0), TestFunction(c=0.5)]
    out = pair_snapshots(rec, tests)
    assert out.shape == (3, 2)
    assert out[0, 0] == empirical_pair(rec.snapshot(0), tests[0], rec.N)
