import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from exclspread.kernels import (
    JumpKernel,
    RateField,
    TimeModulation,
    D_of_t,
    a_field,
    b_from_h,
    gamma_field,
    macro_coefficients,
    sigma_sq,
    total_mass,
)

LN2 = math.log(2.0)


@pytest.mark.parametrize("half,expected", [
    ({1: 0.5}, 0.5),
    ({1: 0.25, 2: 0.25}, 1.25),
    ({3: 0.5}, 4.5),
])
def test_sigma_sq_examples(half, expected):
    assert sigma_sq(JumpKernel.from_positive(half)) == pytest.approx(expected, abs=1e-15)


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5))
def test_sigma_sq_matches_definition(weights):
    total = 2 * sum(weights)
    half = {z + 1: w / total for z, w in enumerate(weights)}
    k = JumpKernel.from_positive(half)
    expect = sum(z * z * p for z, p in half.items())  # 1/2 * 2 * sum over z > 0
    assert sigma_sq(k) == pytest.approx(expect, rel=1e-12)
    assert k.range == max(half)
    zs, ps = k.positive_arrays()
    assert list(zs) == sorted(half) and ps.sum() == pytest.approx(0.5)


@pytest.mark.parametrize("probs", [
    {1: 0.5, -1: 0.4},
    {1: 0.6, -1: 0.6},
    {0: 0.5, 1: 0.25, -1: 0.25},
    {1: -0.5, -1: -0.5, 2: 1.0, -2: 1.0},
    {},
])
def test_kernel_rejects_invalid(probs):
    with pytest.raises(ValueError):
        JumpKernel(probs)


def test_from_positive_rejects_nonpositive_keys():
    with pytest.raises(ValueError):
        JumpKernel.from_positive({0: 0.5})


@pytest.mark.parametrize("h,expected", [
    (RateField.double_exp(1.0, 1.0), 2.0),
    (RateField.gaussian(1.0, 1.0), 1.7724539),
    (RateField.double_exp(0.0, 1.0), 0.0),
])
def test_total_mass_examples(h, expected):
    assert total_mass(h, 0.3) == pytest.approx(expected, abs=1e-7)
    assert h.mass(0.3) == pytest.approx(expected, abs=1e-7)


def test_tabulated_mass_against_quad():
    vals = np.array([0.0, 0.5, 1.0, 0.25])
    h = RateField.tabulated(-1.0, 0.5, vals, decay_left=2.0, decay_right=3.0)
    expect = integrate.quad(lambda u: h(0.0, u), -30, 30, points=[-1, -0.5, 0, 0.5],
                            limit=200)[0]
    assert total_mass(h, 0.0) == pytest.approx(expect, rel=1e-8)
    assert h.cumulative(0.0, 40.0) == pytest.approx(expect, rel=1e-8)


def test_b_examples_double_exp():
    h = RateField.double_exp(1.0, 1.0, horizon=2.0)
    b = b_from_h(h)
    assert b(1.0, 1.0) == pytest.approx(1.0, abs=1e-9)
    u = np.linspace(-3, 3, 13)
    assert np.allclose(b(0.0, u), np.exp(-np.abs(u)), atol=1e-15)
    assert D_of_t(h, 1.0) == pytest.approx(1.0, abs=1e-9)


def test_b_example_gaussian():
    h = RateField.gaussian(1.0, 1.0, horizon=2.0)
    b = b_from_h(h)
    assert b(2.0, math.sqrt(math.pi)) == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.0, 1.0), st.floats(-4.0, 4.0))
def test_b_is_h_shifted(t, u):
    h = RateField.gaussian(0.7, 1.3, 0.2, modulation=TimeModulation("sine", 0.5, 3.0))
    b = b_from_h(h)
    assert b(t, u) == pytest.approx(h(t, u - D_of_t(h, t)), abs=1e-12)


def test_D_of_t_is_half_integrated_mass():
    mod = TimeModulation("exp_decay", kappa=1.5)
    h = RateField.double_exp(1.0, 1.0, modulation=mod)
    expect = 0.5 * 2.0 * (1.0 - math.exp(-1.5)) / 1.5
    assert D_of_t(h, 1.0) == pytest.approx(expect, rel=1e-6)


def test_a_field_examples():
    b = b_from_h(RateField.double_exp(1.0, 1.0, horizon=2.0))
    assert a_field(b, 0.7, 0.7) == pytest.approx(1.0, abs=1e-8)
    assert a_field(b, 0.7, -np.inf) == 0.0
    b0 = RateField.double_exp(1.0, 1.0)
    assert a_field(b0, 0.3, LN2) == pytest.approx(1.5, abs=1e-8)


def test_gamma_field_examples():
    h = RateField.double_exp(1.0, 1.0)
    assert gamma_field(h, 0.5, 0.0) == pytest.approx(0.0, abs=1e-9)
    assert gamma_field(h, 0.5, LN2) == pytest.approx(1.0, abs=1e-8)
    assert gamma_field(h, 0.5, np.inf) == pytest.approx(2.0, abs=1e-9)


@given(st.floats(-6.0, 6.0))
def test_closed_forms_agree_with_quadrature(u):
    h = RateField.double_exp(0.8, 1.5, 0.3)
    mc = macro_coefficients(JumpKernel.nearest_neighbor(), h)
    assert mc.gamma_field(0.4, u) == pytest.approx(gamma_field(h, 0.4, u), abs=1e-8)
    assert mc.a_field(0.4, u) == pytest.approx(a_field(mc.b, 0.4, u), abs=1e-8)


def test_envelope_bounds_field():
    h = RateField.gaussian(1.0, 0.8, 0.5, modulation=TimeModulation("sine", 0.3, 2.0))
    b = b_from_h(h)
    ts = np.linspace(0, 1, 21)[:, None]
    us = np.linspace(-10, 10, 401)[None, :]
    for f in (h, b):
        assert np.all(f(ts, us) <= f.envelope_C * np.exp(-f.envelope_beta * np.abs(us)) + 1e-12)
        assert np.all(f(ts, us) <= f.sup + 1e-12)


def test_modulation_validation():
    with pytest.raises(ValueError):
        TimeModulation("wobble")
    with pytest.raises(ValueError):
        RateField.double_exp(-1.0)
    with pytest.raises(ValueError):
        b_from_h(b_from_h(RateField.double_exp()))


def test_shift_beyond_horizon_raises():
    b = b_from_h(RateField.double_exp(horizon=0.5))
    with pytest.raises(ValueError):
        b.shift(0.6)
