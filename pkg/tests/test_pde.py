import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exclspread.kernels import RateField, b_from_h
from exclspread.pde import (
    BoundViolation,
    CFLError,
    GridFunction,
    GridSpec,
    heat_gaussian,
    l2_diff,
    richardson,
    smoothed_step,
    solve_convdiff,
    solve_epcs_pde,
    solve_eprs_pde,
    transform_solution,
)

FIXTURE = Path(__file__).parent / "fixtures" / "eprs_reference.csv"


def test_heat_oracle():
    g = GridSpec(-8.0, 8.0, 0.01, 1.0)
    sol = solve_convdiff(0.5, init=lambda u: heat_gaussian(u, 0.0), grid=g)
    exact = heat_gaussian(sol.u, 1.0)
    assert np.max(np.abs(sol.values[-1] - exact)) < 1e-3
    assert sol.interp(1.0, 0.0) == pytest.approx(1 / math.sqrt(4 * math.pi), abs=1e-3)


def test_heat_second_order_in_space():
    g = GridSpec(-8.0, 8.0, 0.02, 1.0)
    e = [np.max(np.abs(s.values[-1] - heat_gaussian(s.u, 1.0)))
         for s in (solve_convdiff(0.5, init=lambda u: heat_gaussian(u, 0.0), grid=gg)
                   for gg in (g, g.refined(2)))]
    assert e[0] / e[1] > 3.5


def test_source_mass_balance():
    h = RateField.double_exp(0.5, 1.0, horizon=0.5)
    g = GridSpec(-12.0, 12.0, 0.02, 0.5, (0.25, 0.5))
    sol = solve_convdiff(0.5, source=lambda t, u: h(t, u), init=np.zeros(g.n), grid=g)
    for t in (0.25, 0.5):
        mass = np.trapezoid(sol.at(t), sol.u)
        assert mass == pytest.approx(1.0 * t, rel=1e-3)  # C = 1


def test_drift_conserves_mass():
    b = b_from_h(RateField.double_exp(1.0, 1.0, horizon=0.5))
    g = GridSpec(-10.0, 10.0, 0.02, 0.5, tuple(np.linspace(0.05, 0.5, 10)))
    init = smoothed_step(g.u)
    sol = solve_convdiff(0.5, drift=lambda t, u: b.cumulative(t, u), init=init, grid=g)
    masses = sol.values.sum(axis=1) * g.du
    assert np.max(np.abs(masses - init.sum() * g.du)) < 1e-6 * sol.meta["steps"]


def test_eprs_zero_rate_is_heat():
    g = GridSpec(-6.0, 6.0, 0.02, 0.5)
    heat = solve_convdiff(0.5, init=smoothed_step, grid=g)
    eprs = solve_eprs_pde(RateField.zero(horizon=0.5), smoothed_step, g)
    epcs = solve_epcs_pde(RateField.zero(horizon=0.5), smoothed_step, g)
    assert np.array_equal(heat.values, eprs.values)
    assert np.array_equal(heat.values, epcs.values)


def test_eprs_centroid_moves_right():
    h = RateField.double_exp(1.0, 1.0, horizon=1.0)
    g = GridSpec(-8.0, 8.0, 0.02, 1.0, tuple(np.linspace(0.1, 1.0, 10)))
    sol = solve_eprs_pde(h, lambda u: smoothed_step(u, 0.5, -1, 0), g)
    cent = (sol.values * sol.u).sum(axis=1) / sol.values.sum(axis=1)
    assert np.all(np.diff(cent) > 0) and cent[0] > -0.5


def test_epcs_symmetry():
    h = RateField.double_exp(1.0, 1.0, horizon=0.5)
    g = GridSpec(-8.0, 8.0, 0.02, 0.5)
    sol = solve_epcs_pde(h, smoothed_step, g)
    v = sol.values[-1]
    assert np.max(np.abs(v - v[::-1])) < 1e-10


def test_epcs_mass_growth():
    h = RateField.double_exp(1.0, 1.0, horizon=0.1)
    g = GridSpec(-12.0, 12.0, 0.02, 0.1, (0.05, 0.1))
    sol = solve_epcs_pde(h, lambda u: np.zeros_like(u), g)
    assert sol.values.min() >= 0.0
    masses = np.trapezoid(sol.values, sol.u, axis=1)
    assert masses[1] - masses[0] == pytest.approx(0.05 * 2.0, rel=2e-3)


def test_epcs_keeps_one():
    h = RateField.gaussian(1.0, 0.7, horizon=0.3)
    g = GridSpec(-6.0, 6.0, 0.05, 0.3)
    sol = solve_epcs_pde(h, lambda u: np.ones_like(u), g)
    assert np.max(np.abs(sol.values - 1.0)) < 1e-12


def test_transform_arithmetic():
    u = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    zeta = GridFunction(0.0, 0.5, 0.1, [1.0], [[0.9, 0.8, 0.5, 0.3, 0.2]])
    rho = transform_solution(zeta, lambda t: 1.0)
    assert rho.values[0, 1] == pytest.approx(0.7)
    assert rho.meta["valid_u_max"] == pytest.approx(1.0)
    same = transform_solution(zeta, lambda t: 0.0)
    assert np.array_equal(same.values, 1.0 - zeta.values)
    assert np.allclose(same.u, u)
    with pytest.raises(ValueError):
        transform_solution(zeta, lambda t: 5.0)


def test_transformation_identity():
    h = RateField.double_exp(1.0, 1.0, horizon=0.5)
    b = b_from_h(h)
    g = GridSpec(-8.0, 8.0, 0.04, 0.5)
    rho0 = smoothed_step
    _, Ee, se = richardson(lambda gg: solve_eprs_pde(h, lambda u: 1 - rho0(u), gg), g)
    _, Ec, sc = richardson(lambda gg: solve_epcs_pde(h, rho0, gg), g)
    rho = transform_solution(se[0], b.shift)
    mask = rho.u <= rho.meta["valid_u_max"]
    assert l2_diff(rho.values[-1], sc[0].values[-1], g.du, mask) <= 3 * max(Ee, Ec)


def test_regression_fixture():
    h = RateField.double_exp(1.0, 1.0, horizon=0.5)
    sol = solve_eprs_pde(h, smoothed_step, GridSpec(-8.0, 8.0, 0.02, 0.5, (0.25, 0.5)))
    with open(FIXTURE) as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        t, u, z = float(r["t"]), float(r["u"]), float(r["zeta"])
        i = int(round((u - sol.u_min) / sol.du))
        assert sol.at(t)[i] == pytest.approx(z, abs=1e-12)


def test_cfl_violation():
    g = GridSpec(-1.0, 1.0, 0.01, 0.1, dt=0.01)
    with pytest.raises(CFLError):
        solve_convdiff(0.5, init=np.zeros(g.n), grid=g)


def test_bound_violation():
    g = GridSpec(-1.0, 1.0, 0.1, 0.1)
    with pytest.raises(BoundViolation):
        solve_convdiff(0.5, source=lambda t, u: 100.0 + 0 * u, init=np.zeros(g.n), grid=g)


@pytest.mark.parametrize("kw", [
    dict(du=0.0), dict(u_max=-9.0), dict(du=0.03), dict(save_times=(0.5, 0.2)),
])
def test_grid_validation(kw):
    args = dict(u_min=-1.0, u_max=1.0, du=0.1, T=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        GridSpec(**args)


@given(st.floats(0.0, 0.5), st.floats(0.05, 0.3))
def test_maximum_principle(level, eps):
    h = RateField.double_exp(0.5, 1.0, horizon=0.2)
    g = GridSpec(-4.0, 4.0, 0.05, 0.2)
    init = lambda u: smoothed_step(u, level, -1, 1, eps)  # noqa: E731
    sol = solve_eprs_pde(h, init, g)
    assert sol.values.min() >= -1e-12 and sol.values.max() <= level + 1e-12


def test_refined_grid_nests():
    g = GridSpec(-1.0, 1.0, 0.1, 1.0)
    f = g.refined(2)
    assert np.allclose(f.u[::2], g.u)


def test_to_csv(tmp_path):
    sol = GridFunction(0.0, 0.5, 0.1, [0.5, 1.0], [[0.1, 0.2], [0.3, 0.4]])
    sol.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == "t,0.0,0.5\n0.5,0.1,0.2\n1.0,0.3,0.4\n"
