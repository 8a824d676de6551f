"""Explicit finite-difference solvers for the two convective-diffusion equations.

The grid is vertex centred, ``u_i = u_min + i du``, so halving ``du`` nests
the coarse grid inside the fine one.  Each step is forward Euler on

    dz/dt = s2 (z[i+1] - 2 z[i] + z[i-1]) / du^2 - (F[i+1/2] - F[i-1/2]) / du + q[i]

with the upwind flux ``F = v+ z[i] + v- z[i+1]`` and the drift ``v`` taken on
the cell faces.  Ghost cells copy the boundary value: no diffusive flux
through the edges, and the advective flux ``v z_edge`` carries mass out.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import b_from_h, sigma_sq as _sigma_sq

__all__ = [
    "GridSpec",
    "GridFunction",
    "CFLError",
    "BoundViolation",
    "solve_convdiff",
    "solve_eprs_pde",
    "solve_epcs_pde",
    "transform_solution",
    "heat_gaussian",
    "smoothed_step",
    "richardson",
    "l2_diff",
]

CFL_SAFETY = 0.9
BOUND_TOL = 1e-6


class CFLError(ValueError):
    pass


class BoundViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    u_min: float
    u_max: float
    du: float
    T: float
    save_times: tuple = ()
    dt: float | None = None

    def __post_init__(self):
        if not (self.du > 0 and self.u_max > self.u_min and self.T > 0):
            raise ValueError("grid needs du > 0, u_max > u_min and T > 0")
        n = (self.u_max - self.u_min) / self.du
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("(u_max - u_min) must be a multiple of du")
        times = tuple(float(t) for t in (self.save_times or (self.T,)))
        if any(b < a for a, b in zip(times, times[1:])) or times[0] < 0 or times[-1] > self.T:
            raise ValueError("save_times must be sorted inside [0, T]")
        object.__setattr__(self, "save_times", times)

    @property
    def n(self):
        return int(round((self.u_max - self.u_min) / self.du)) + 1

    @property
    def u(self):
        return self.u_min + self.du * np.arange(self.n)

    @property
    def faces(self):
        """Faces ``u_{i+1/2}`` for i = -1 .. n-1 (n + 1 values)."""
        return self.u_min + self.du * (np.arange(self.n + 1) - 0.5)

    def refined(self, k=2):
        return GridSpec(self.u_min, self.u_max, self.du / k, self.T, self.save_times,
                        None if self.dt is None else self.dt / (k * k))


@dataclass
class GridFunction:
    """Solution values ``values[k, i]`` at ``times[k]`` and ``u_min + i du``."""

    u_min: float
    du: float
    dt: float
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise BoundViolation("non-finite values in grid function")

    @property
    def u(self):
        return self.u_min + self.du * np.arange(self.values.shape[1])

    @property
    def u_max(self):
        return self.u_min + self.du * (self.values.shape[1] - 1)

    def index_of_time(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not saved")
        return k

    def at(self, t):
        return self.values[self.index_of_time(t)]

    def interp(self, t, u):
        return np.interp(u, self.u, self.at(t))

    def restrict(self, k):
        """Every k-th grid point (the coarse grid of a k-times refined run)."""
        return GridFunction(self.u_min, self.du * k, self.dt, self.times,
                            self.values[:, ::k], dict(self.meta))

    def pair(self, G, t):
        """``int G(u) f(t, u) du`` by the trapezoid rule."""
        return float(np.trapezoid(G(self.u) * self.at(t), self.u))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [repr(float(x)) for x in self.u])
            for t, row in zip(self.times, self.values):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


# --------------------------------------------------------------------------
# the generic solver


def _drift_bound(drift, grid, samples=101):
    faces = grid.faces
    vmax = 0.0
    for t in np.linspace(0.0, grid.T, samples):
        vmax = max(vmax, float(np.max(np.abs(drift(t, faces)))))
    return vmax


def solve_convdiff(sigma_sq, drift=None, source=None, init=None, grid=None,
                   check_bounds=True, lower=-BOUND_TOL, upper=1.0 + BOUND_TOL):
    """Solve ``z_t = s2 z_uu - (v z)_u + q`` on ``grid``.

    ``drift(t, u)`` is evaluated on the faces and ``source(t, u)`` on the
    grid points.  ``init`` is an array on the grid or a callable of ``u``.
    """
    if grid is None:
        raise ValueError("grid required")
    u = grid.u
    z = np.array(init(u) if callable(init) else init, dtype=float)
    if z.shape != u.shape:
        raise ValueError("initial data does not match the grid")
    du = grid.du
    vmax = _drift_bound(drift, grid) if drift is not None else 0.0
    limit = CFL_SAFETY * min(du * du / (2.0 * sigma_sq) if sigma_sq > 0 else math.inf,
                             du / vmax if vmax > 0 else math.inf)
    if grid.dt is not None:
        if grid.dt > limit:
            raise CFLError(f"dt={grid.dt:.3g} exceeds the CFL bound {limit:.3g}")
        dt_max = grid.dt
    else:
        dt_max = CFL_SAFETY / (2.0 * sigma_sq / du**2 + vmax / du)
    faces = grid.faces
    out = []
    times = []
    t = 0.0
    steps = 0
    for target in grid.save_times:
        span = target - t
        nsteps = int(math.ceil(span / dt_max - 1e-12)) if span > 0 else 0
        dt = span / nsteps if nsteps else 0.0
        for _ in range(nsteps):
            lap = np.empty_like(z)
            lap[1:-1] = z[2:] - 2.0 * z[1:-1] + z[:-2]
            lap[0] = z[1] - z[0]
            lap[-1] = z[-2] - z[-1]
            rhs = (sigma_sq / du**2) * lap
            if drift is not None:
                v = drift(t, faces)
                left = np.concatenate(([z[0]], z))
                right = np.concatenate((z, [z[-1]]))
                F = np.maximum(v, 0.0) * left + np.minimum(v, 0.0) * right
                rhs -= (F[1:] - F[:-1]) / du
            if source is not None:
                rhs += source(t, u)
            z = z + dt * rhs
            t += dt
            steps += 1
            if check_bounds and (z.max() > upper or z.min() < lower):
                raise BoundViolation(
                    f"solution left [{lower}, {upper}] at t={t:.6g}: "
                    f"min {z.min():.3g}, max {z.max():.3g}")
        t = target
        times.append(target)
        out.append(z.copy())
    return GridFunction(grid.u_min, du, dt_max, np.array(times), np.array(out),
                        {"steps": steps, "sigma_sq": sigma_sq, "vmax": vmax})


# --------------------------------------------------------------------------
# the two hydrodynamic equations


def solve_eprs_pde(h, zeta0, grid, kernel=None, sigma_sq=None):
    """``z_t = s2 z_uu - (a z)_u`` with ``a(t, u) = int_{-inf}^u b(t, v) dv``."""
    s2 = _resolve_sigma(kernel, sigma_sq)
    b = b_from_h(h)
    drift = None if h.is_zero else (lambda t, x: b.cumulative(t, x))
    return solve_convdiff(s2, drift, None, zeta0, grid)


def solve_epcs_pde(h, rho0, grid, kernel=None, sigma_sq=None):
    """``r_t = s2 r_uu - (g r / 2)_u + h`` with ``g = 2 int_{-inf}^u h - C``.

    The source is the cell average of ``h``, i.e. the discrete divergence of
    ``g / 2``, so ``r = 1`` is an exact discrete solution.
    """
    s2 = _resolve_sigma(kernel, sigma_sq)
    if h.is_zero:
        return solve_convdiff(s2, None, None, rho0, grid)
    faces = grid.faces

    def drift(t, x):
        return h.cumulative(t, x) - 0.5 * h.mass(t)

    def source(t, x):
        A = h.cumulative(t, faces)
        return (A[1:] - A[:-1]) / grid.du

    return solve_convdiff(s2, drift, source, rho0, grid)


def _resolve_sigma(kernel, sigma_sq):
    if sigma_sq is not None:
        return float(sigma_sq)
    if kernel is None:
        return 0.5
    return _sigma_sq(kernel)


def transform_solution(zeta, D_of_t, max_shift=None):
    """``rho(t, u) = 1 - zeta(t, u + D(t))`` on the grid of ``zeta``.

    Points whose shifted argument falls beyond the right edge take the edge
    value; ``meta["valid_u_max"]`` marks where the result is exact.  Shifts
    larger than ``max_shift`` (default: half the grid width) are rejected.
    """
    width = zeta.u_max - zeta.u_min
    limit = 0.5 * width if max_shift is None else max_shift
    u = zeta.u
    rows = []
    dmax = 0.0
    for t, row in zip(zeta.times, zeta.values):
        d = float(D_of_t(t))
        if d < 0 or d > limit:
            raise ValueError(f"shift D({t})={d:.3g} outside [0, {limit:.3g}]")
        dmax = max(dmax, d)
        rows.append(1.0 - np.interp(u + d, u, row))
    meta = dict(zeta.meta)
    meta["valid_u_max"] = zeta.u_max - dmax
    return GridFunction(zeta.u_min, zeta.du, zeta.dt, zeta.times, np.array(rows), meta)


# --------------------------------------------------------------------------
# oracles and error estimates


def heat_gaussian(u, t, sigma_sq=0.5, var0=1.0):
    """Exact heat solution from a centred Gaussian density of variance ``var0``."""
    var = var0 + 2.0 * sigma_sq * t
    return np.exp(-np.asarray(u) ** 2 / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def smoothed_step(u, level=0.5, a=-1.0, b=1.0, eps=0.1):
    """``level * 1_[a,b]`` smoothed by error functions of width ``eps``."""
    from scipy.special import erf

    u = np.asarray(u, dtype=float)
    return 0.5 * level * (erf((u - a) / eps) - erf((u - b) / eps))


def l2_diff(f, g, du, mask=None):
    d = np.asarray(f) - np.asarray(g)
    if mask is not None:
        d = d[mask]
    return float(math.sqrt(du * np.sum(d * d)))


def richardson(solve, grid, levels=3, norm=None):
    """Observed order and error estimate of ``solve(grid)`` by grid halving.

    Runs ``solve`` on ``grid`` and its 2x and 4x refinements, compares them
    on the coarse points, and returns ``(order, error_estimate, solutions)``
    where the estimate is ``|u_h - u_h/2| 2^p / (2^p - 1)`` at the final
    saved time.
    """
    if levels != 3:
        raise ValueError("three levels are needed for an observed order")
    norm = norm or (lambda d, du: math.sqrt(du * float(np.sum(d * d))))
    sols = [solve(grid), solve(grid.refined(2)), solve(grid.refined(4))]
    c0 = sols[0].values[-1]
    c1 = sols[1].values[-1][::2]
    c2 = sols[2].values[-1][::4]
    e1 = norm(c0 - c1, grid.du)
    e2 = norm(c1 - c2, grid.du)
    p = math.log2(e1 / e2) if e2 > 0 and e1 > 0 else float("nan")
    q = 2.0**p if math.isfinite(p) else 2.0
    est = e1 * q / (q - 1.0) if q > 1.0 else float("inf")
    return p, est, sols
