import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from exclspread.coupling import (
    CoupledState,
    CouplingError,
    auxiliary_to_exclusion,
    build_auxiliary,
    coupled_step,
    rank_pairs,
    relabel_case3,
    simulate_coupled,
)
from exclspread.dynamics import SimParams, plan_window, simulate_epcs
from exclspread.kernels import JumpKernel, RateField
from exclspread.lattice import ExclusionConfig
from exclspread.measure import sample_bernoulli_profile
from exclspread.pde import smoothed_step

NN = JumpKernel.nearest_neighbor()
H = Fraction(1, 2)


def test_auxiliary_without_shifts():
    xi = ExclusionConfig(-2, [1, 0, 0, 1, 1])
    eta = build_auxiliary(xi, 0)
    assert eta.to_mapping() == {Fraction(x): 1 - c for x, c in xi.to_mapping().items()}
    assert eta.mass_n == 1


def test_auxiliary_of_all_ones():
    eta = build_auxiliary(ExclusionConfig(-3, np.ones(7)), 5)
    assert not eta.cells.any() and eta.anchor_pos == -11 and eta.parity == "G2"


def test_auxiliary_single_particle_shifted():
    xi = ExclusionConfig(-3, np.isin(np.arange(-3, 4), [0]).astype(int))
    eta = build_auxiliary(xi, 2)
    m = eta.to_mapping()
    assert [x for x, c in m.items() if c == 0] == [-1]
    assert all(x.denominator == 1 for x in m)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.integers(-20, 20),
       st.integers(0, 9))
def test_auxiliary_roundtrip(cells, left, s):
    xi = ExclusionConfig(left, cells)
    back = auxiliary_to_exclusion(build_auxiliary(xi, s))
    assert back == xi
    with pytest.raises(ValueError):
        build_auxiliary(xi, -1)


def test_relabel_never_increases_distance():
    """All layouts of <= 4 labelled pairs in a width-10 window, every birth site."""
    checked = 0
    for k in range(5):
        for zs in itertools.combinations(range(10), k):
            for ws in itertools.combinations(range(10), k):
                for dl in (0.0, 0.5):
                    pairs = [(float(z), w + dl) for z, w in zip(zs, ws)]
                    d0 = max((abs(z - w) for z, w in pairs), default=0.0)
                    for x in range(11):
                        new = relabel_case3(pairs, float(x), x + dl, 0.5)
                        assert max(abs(z - w) for z, w in new) <= max(d0, dl)
                        checked += 1
    assert checked == 2 * 11 * sum(len(list(itertools.combinations(range(10), k))) ** 2
                                   for k in range(5))


@given(st.data())
def test_relabel_equals_rank_pairing(data):
    k = data.draw(st.integers(0, 5))
    zs = sorted(data.draw(st.sets(st.integers(0, 12), min_size=k, max_size=k)))
    ws = sorted(data.draw(st.sets(st.integers(0, 12), min_size=k, max_size=k)))
    dl = data.draw(st.sampled_from([Fraction(0), H]))
    x = data.draw(st.integers(0, 13))
    pairs = [(Fraction(z), Fraction(w) + dl) for z, w in zip(zs, ws)]
    assert relabel_case3(pairs, x, x + dl) == rank_pairs(pairs, x, x + dl)


def test_relabel_example():
    # pair (0, 2) straddles the birth at 1: the new particles re-pair in order
    pairs = [(Fraction(0), Fraction(2))]
    out = relabel_case3(pairs, 1, 1)
    assert out == [(Fraction(-1, 2), H), (H, Fraction(5, 2))]


def test_case1_birth():
    st0 = CoupledState.from_positions([0, 1, 3])
    s1 = coupled_step(st0, ("birth", 1, 2))
    assert (s1.J, s1.n, s1.n_hat) == (1, 2, 1)
    assert s1.second_e == [Fraction(3, 2)]
    assert [z for z, _ in s1.pairs] == [Fraction(-1, 2), H, Fraction(7, 2)]
    assert [w for _, w in s1.pairs] == [0, 1, 3]
    assert not s1.same_lattice and s1.x_prime(0) == H


def test_case2_birth_and_case3():
    st0 = CoupledState.from_positions([0, 2])
    s2 = coupled_step(st0, ("birth", 2, 1))
    assert (s2.J, s2.n, s2.n_hat) == (1, 1, 2) and s2.second_a == [H]
    s3 = coupled_step(st0, ("birth", 3, 1))
    assert (s3.J, s3.n, s3.n_hat) == (0, 2, 2) and len(s3.pairs) == 3


def test_paired_jump_and_exclusion():
    st0 = CoupledState.from_positions([0, 1])
    s = coupled_step(st0, ("paired", 0, 1))  # blocked by label 1 in both marginals
    assert s.pairs == st0.pairs
    s = coupled_step(st0, ("paired", 1, 1))
    assert s.pairs[1] == (2, 2)


def test_first_class_swaps_with_second_class():
    st0 = coupled_step(CoupledState.from_positions([0, 4]), ("birth", 1, 2))
    # first marginal: labels at -1/2, 9/2 and a second-class particle at 3/2
    st1 = coupled_step(st0, ("second", "e", 0, -1))
    assert st1.second_e == [H]
    st2 = coupled_step(st1, ("paired", 0, 1))
    assert st2.pairs[0][0] == H and st2.second_e == [Fraction(-1, 2)]


def test_second_class_blocked_by_first():
    # labels at -1/2 and 1/2, second-class particle at 3/2
    st0 = coupled_step(CoupledState.from_positions([0, 1]), ("birth", 1, 2))
    s = coupled_step(st0, ("second", "e", 0, -1))
    assert s.second_e == [Fraction(3, 2)]
    s = coupled_step(st0, ("second", "e", 0, 1))
    assert s.second_e == [Fraction(5, 2)]


@pytest.mark.parametrize("event", [
    (), ("jump",), ("paired", 5, 1), ("paired", 0, 2), ("second", "x", 0, 1),
    ("second", "e", 0, 1), ("birth", 4, 0), ("birth", 1, Fraction(1, 3)),
])
def test_malformed_events(event):
    with pytest.raises(ValueError):
        coupled_step(CoupledState.from_positions([0, 1]), event)


def test_state_check_catches_bad_states():
    with pytest.raises(CouplingError):
        CoupledState([(1, 0), (0, 1)]).check()
    with pytest.raises(CouplingError):
        CoupledState([(0, 0)], n=3, n_hat=1, J=0).check()


def _run(N, seed, r, T=0.5, h=None, **kw):
    h = h or RateField.double_exp(1.0, 1.0, horizon=T)
    plan = plan_window(N, T, NN, h, 1.5, process="epcs")
    init = sample_bernoulli_profile(smoothed_step, N, plan, seed, r)
    p = SimParams(N, T, NN, h, plan, seed, (0.25, T), r)
    return simulate_coupled(p, init, **kw), p, init


def test_zero_rate_keeps_marginals_equal():
    res, _, init = _run(16, 1, 0, h=RateField.zero(horizon=0.5))
    assert res.J_T == 0 and res.counters["second_class_jumps"] == 0
    assert np.array_equal(res.epcs.snap_cells, res.aux.snap_cells)
    assert res.epcs.final == res.aux.final
    assert res.epcs.final.particle_count() == init.particle_count()


@pytest.mark.parametrize("r", range(6))
def test_mass_gap_bounded_by_J(r):
    res, _, _ = _run(16, 2, r)
    assert np.all(np.abs(res.snap_n - res.snap_n_hat) <= res.snap_J)
    t, J = res.J_path()
    assert np.all(np.diff(t) >= 0) and J[-1] == res.J_T
    assert res.snap_J[-1] == res.J_T
    fe = res.epcs.final
    assert abs(fe.mass_n - res.aux.final.mass_n) <= res.J_T
    classes = fe.extra["classes"]
    assert np.count_nonzero(classes == 2) + np.count_nonzero(res.aux.final.extra["classes"] == 2) \
        <= res.J_T


def test_capacity_restart_is_transparent():
    a, _, _ = _run(8, 3, 1)
    b, _, _ = _run(8, 3, 1, capacity=1)
    assert np.array_equal(a.J_times, b.J_times)
    assert a.epcs.final == b.epcs.final and a.counters == b.counters


def test_rejects_long_range_kernel():
    k = JumpKernel.from_positive({1: 0.25, 2: 0.25})
    h = RateField.double_exp(1.0, 1.0, horizon=0.1)
    p = SimParams(8, 0.1, k, h, plan_window(8, 0.1, k, h, process="epcs"))
    with pytest.raises(ValueError):
        simulate_coupled(p, ExclusionConfig(-20, np.zeros(41)))


def test_epcs_marginal_matches_standalone_mass():
    N = 8
    coupled = [_run(N, 5, r)[0].epcs.final.mass_n for r in range(150)]
    h = RateField.double_exp(1.0, 1.0, horizon=0.5)
    plan = plan_window(N, 0.5, NN, h, 1.5, process="epcs")
    alone = []
    for r in range(150):
        init = sample_bernoulli_profile(smoothed_step, N, plan, 6, r)
        alone.append(simulate_epcs(SimParams(N, 0.5, NN, h, plan, 6, (0.5,), r), init).final.mass_n)
    assert stats.mannwhitneyu(coupled, alone).pvalue > 0.01
