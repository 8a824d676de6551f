from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exclspread.lattice import (
    ExclusionConfig,
    SpreadConfig,
    exchange,
    from_text,
    particle_count,
    tau_shift,
    tau_tilde_spread,
    to_text,
)

cells_st = st.lists(st.integers(0, 1), min_size=1, max_size=40)


def test_exchange_examples():
    xi = ExclusionConfig(0, [1, 0])
    assert list(exchange(xi, 0, 1).cells) == [0, 1]
    xi = ExclusionConfig(0, [1, 1])
    assert list(exchange(xi, 0, 1).cells) == [1, 1]


@given(cells_st, st.data())
def test_exchange_is_involution(cells, data):
    xi = ExclusionConfig(-3, cells)
    x = data.draw(st.integers(-3, -3 + len(cells) - 1))
    y = data.draw(st.integers(-3, -3 + len(cells) - 1))
    assert exchange(exchange(xi, x, y), x, y) == xi
    assert particle_count(exchange(xi, x, y)) == particle_count(xi)


def test_shift_example():
    xi = ExclusionConfig(-2, [1, 1, 0, 1, 1])
    out = tau_shift(xi, 0)
    assert list(out.cells) == [1, 1, 0, 0, 1]
    assert out.out_right == 1 and out.out_right_particles == 1


def test_shift_at_left_edge():
    xi = ExclusionConfig(-2, [0, 1, 0, 1, 1])
    out = tau_shift(xi, -2)
    assert list(out.cells) == [0, 0, 1, 0, 1]


@given(st.integers(1, 30), st.data())
def test_shift_fixes_empty(n, data):
    xi = ExclusionConfig(0, np.zeros(n))
    z = data.draw(st.integers(0, n - 1))
    assert not tau_shift(xi, z).cells.any()


@given(cells_st, st.data())
def test_shift_definition(cells, data):
    xi = ExclusionConfig(0, cells)
    z = data.draw(st.integers(0, len(cells) - 1))
    out = tau_shift(xi, z)
    c = np.array(cells)
    expect = np.concatenate([c[:z], [0], c[z:-1]]) if z < len(c) else c
    assert list(out.cells) == list(expect[: len(c)])
    assert particle_count(out) + out.out_right_particles == particle_count(xi)


def test_spread_example():
    eta = SpreadConfig.from_exclusion(ExclusionConfig(-1, [1, 1, 0]))
    out = tau_tilde_spread(eta, 0)
    m = out.to_mapping()
    half = Fraction(1, 2)
    assert m == {-3 * half: 1, -half: 1, half: 1}
    assert out.parity == "G2" and out.mass_n == 2
    assert out.lost_particles == 0  # the cell pushed past 3/2 was empty
    with pytest.raises(ValueError):
        out.index_of(0)


@given(cells_st, st.data())
def test_spread_adds_one_particle(cells, data):
    eta = SpreadConfig(np.array(cells + [0]), 0, 1)
    x = data.draw(st.integers(0, len(cells)))
    out = tau_tilde_spread(eta, x)
    assert particle_count(out) == particle_count(eta) + 1


@given(cells_st, st.data())
def test_two_spreads_restore_parity(cells, data):
    eta = SpreadConfig(np.array(cells + [0, 0]), 4, 1)
    pos = eta.positions()
    x = data.draw(st.sampled_from(list(pos)))
    once = tau_tilde_spread(eta, Fraction(x))
    y = data.draw(st.sampled_from(list(once.positions())))
    twice = tau_tilde_spread(once, Fraction(y))
    assert once.parity == "G2" and twice.parity == "G1"
    assert twice.anchor_pos % 2 == 0


def test_particle_count_examples():
    assert particle_count(ExclusionConfig(0, [1, 0, 1, 1])) == 3
    assert particle_count(ExclusionConfig(0, [])) == 0


def test_spread_config_validation():
    with pytest.raises(ValueError):
        SpreadConfig(np.zeros(3), 1, 1)  # odd anchor needs an even mass
    with pytest.raises(ValueError):
        SpreadConfig(np.zeros(3), 0, 0)
    with pytest.raises(ValueError):
        ExclusionConfig(0, [0, 2])
    with pytest.raises(IndexError):
        ExclusionConfig(0, [0, 1]).index_of(2)


def test_mapping_roundtrip():
    eta = SpreadConfig(np.array([1, 0, 1]), -3, 2)
    assert SpreadConfig.from_mapping(eta.to_mapping(), 2) == eta
    with pytest.raises(ValueError):
        SpreadConfig.from_mapping({0: 1, 2: 1})


@given(cells_st, st.integers(-50, 50), st.integers(0, 5))
def test_text_roundtrip(cells, left, out):
    xi = ExclusionConfig(left, cells, out, 0)
    back = from_text(to_text(xi))
    assert back == xi and back.out_right == out
    eta = SpreadConfig(np.array(cells), 2 * left + 1, 2)
    assert from_text(to_text(eta)) == eta


def test_text_example():
    assert to_text(ExclusionConfig(-2, [0, 0, 1, 1, 1, 0])) == "xi left=-2 out=0 lost=0 : 0x2 1x3 0x1"
    with pytest.raises(ValueError):
        from_text("xi left=0 : 2x3")
