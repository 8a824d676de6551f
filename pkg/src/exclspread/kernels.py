"""Jump kernel, space-time rate fields and the macroscopic coefficients.

Rate fields have the form ``value(t, u) = m(t) * shape(u - shift(t))`` with a
time-independent shape (double exponential, Gaussian bump, or a tabulated
profile), a bounded time modulation ``m`` and an optional drift ``shift``
(zero for a birth field ``h``; ``D(t)`` for the field ``b`` derived from it).
Scalar integrals go through adaptive quadrature with envelope-truncated
tails; the vectorised ``cumulative`` method (closed forms) feeds the PDE
solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

__all__ = [
    "JumpKernel",
    "TimeModulation",
    "RateField",
    "MacroCoefficients",
    "QuadratureError",
    "sigma_sq",
    "total_mass",
    "b_from_h",
    "a_field",
    "gamma_field",
    "macro_coefficients",
]

QUAD_RTOL = 1e-8
TAIL_TOL = 1e-13
D_GRID_POINTS = 2001

FAMILY_CODES = {"double_exp": 0, "gaussian": 1, "tabulated": 2}
MODULATION_CODES = {"constant": 0, "sine": 1, "exp_decay": 2}


class QuadratureError(RuntimeError):
    """Raised when a tail-truncated quadrature cannot meet its tolerance."""


# --------------------------------------------------------------------------
# jump kernel


@dataclass(frozen=True)
class JumpKernel:
    """Finite-range symmetric transition probability ``p(z)`` on Z."""

    probs: dict

    def __post_init__(self):
        probs = {int(z): float(p) for z, p in dict(self.probs).items() if p != 0.0}
        if not probs:
            raise ValueError("empty jump kernel")
        if 0 in probs:
            raise ValueError("p(0) must be zero")
        for z, p in probs.items():
            if p < 0.0:
                raise ValueError(f"negative probability p({z})={p}")
            if abs(probs.get(-z, 0.0) - p) > 1e-15:
                raise ValueError(f"kernel not symmetric at z={z}")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"kernel sums to {total!r}, not 1")
        object.__setattr__(self, "probs", dict(sorted(probs.items())))

    @classmethod
    def nearest_neighbor(cls):
        return cls({1: 0.5, -1: 0.5})

    @classmethod
    def from_positive(cls, half):
        """Build from ``{z: p(z)}`` over z > 0; mirrored to negative z."""
        probs = {}
        for z, p in half.items():
            z = int(z)
            if z <= 0:
                raise ValueError("keys must be positive displacements")
            probs[z] = float(p)
            probs[-z] = float(p)
        return cls(probs)

    @property
    def range(self):
        return max(abs(z) for z in self.probs)

    def __call__(self, z):
        return self.probs.get(int(z), 0.0)

    def positive_arrays(self):
        """``(z, p(z))`` over z > 0 as arrays, for the simulation kernels."""
        zs = np.array([z for z in self.probs if z > 0], dtype=np.int64)
        ps = np.array([self.probs[int(z)] for z in zs], dtype=np.float64)
        return zs, ps

    def dilate(self, k):
        return JumpKernel({k * z: p for z, p in self.probs.items()})

    def to_json(self):
        return {str(z): p for z, p in self.probs.items() if z > 0}


def sigma_sq(kernel):
    """Diffusivity ``sum_z z^2 p(z) / 2``."""
    return 0.5 * math.fsum(z * z * p for z, p in kernel.probs.items())


# --------------------------------------------------------------------------
# rate fields


@dataclass(frozen=True)
class TimeModulation:
    """Bounded smooth multiplier ``m(t)``.

    ``constant``: 1.  ``sine``: ``1 + eps*sin(omega*t + phase)`` with
    ``|eps| <= 1``.  ``exp_decay``: ``exp(-kappa*t)`` with ``kappa >= 0``.
    """

    kind: str = "constant"
    eps: float = 0.0
    omega: float = 0.0
    phase: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in MODULATION_CODES:
            raise ValueError(f"unknown modulation {self.kind!r}")
        if self.kind == "sine" and abs(self.eps) > 1.0:
            raise ValueError("sine modulation needs |eps| <= 1 to stay nonnegative")
        if self.kind == "exp_decay" and self.kappa < 0.0:
            raise ValueError("kappa must be nonnegative")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.ones_like(t)
        elif self.kind == "sine":
            out = 1.0 + self.eps * np.sin(self.omega * t + self.phase)
        else:
            out = np.exp(-self.kappa * t)
        return out if out.ndim else float(out)

    def max_on(self, T):
        if self.kind == "constant":
            return 1.0
        if self.kind == "sine":
            return 1.0 + abs(self.eps)
        return 1.0

    def params(self):
        return np.array([self.eps, self.omega, self.phase, self.kappa], dtype=np.float64)

    def to_json(self):
        return {"kind": self.kind, "eps": self.eps, "omega": self.omega,
                "phase": self.phase, "kappa": self.kappa}


@dataclass(frozen=True, eq=False)
class RateField:
    """Nonnegative space-time rate with an exponential envelope.

    Parameters
    ----------
    family : {"double_exp", "gaussian", "tabulated"}
    amplitude, center, scale :
        ``A exp(-scale |u - center|)`` or ``A exp(-((u - center)/scale)^2)``.
    table_u0, table_du, table :
        Tabulated shape, linear inside the grid.
    decay_left, decay_right :
        Exponential rates of the tabulated shape's tails.
    modulation : TimeModulation
    horizon : float
        Time horizon T the field is declared on.
    shift_table : array, optional
        ``D`` sampled on ``linspace(0, horizon, len(shift_table))``; the field
        is evaluated at ``u - D(t)`` (linear interpolation in t).
    envelope_C, envelope_beta :
        Declared bound ``value(t,u) <= C exp(-beta |u|)``; computed when omitted.
    """

    family: str = "double_exp"
    amplitude: float = 1.0
    center: float = 0.0
    scale: float = 1.0
    table_u0: float = 0.0
    table_du: float = 1.0
    table: np.ndarray = field(default_factory=lambda: np.zeros(0))
    decay_left: float = 1.0
    decay_right: float = 1.0
    modulation: TimeModulation = field(default_factory=TimeModulation)
    horizon: float = 1.0
    shift_table: np.ndarray = field(default_factory=lambda: np.zeros(0))
    envelope_C: float | None = None
    envelope_beta: float | None = None

    def __post_init__(self):
        if self.family not in FAMILY_CODES:
            raise ValueError(f"unknown rate family {self.family!r}")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be nonnegative")
        if self.family != "tabulated" and self.scale <= 0.0:
            raise ValueError("scale must be positive")
        table = np.asarray(self.table, dtype=np.float64)
        object.__setattr__(self, "table", table)
        if self.family == "tabulated":
            if table.size < 2 or np.any(table < 0.0) or self.table_du <= 0.0:
                raise ValueError("tabulated field needs >= 2 nonnegative values and du > 0")
            if self.decay_left <= 0.0 or self.decay_right <= 0.0:
                raise ValueError("tabulated tails need positive decay rates")
        object.__setattr__(self, "shift_table", np.asarray(self.shift_table, dtype=np.float64))
        if self.envelope_C is None or self.envelope_beta is None:
            C, beta = self._auto_envelope()
            object.__setattr__(self, "envelope_C", C)
            object.__setattr__(self, "envelope_beta", beta)

    # -- constructors -----------------------------------------------------

    @classmethod
    def double_exp(cls, amplitude=1.0, beta=1.0, center=0.0, **kw):
        return cls(family="double_exp", amplitude=amplitude, scale=beta, center=center, **kw)

    @classmethod
    def gaussian(cls, amplitude=1.0, width=1.0, center=0.0, **kw):
        return cls(family="gaussian", amplitude=amplitude, scale=width, center=center, **kw)

    @classmethod
    def tabulated(cls, u0, du, values, decay_left=1.0, decay_right=1.0, **kw):
        return cls(family="tabulated", table_u0=u0, table_du=du,
                   table=np.asarray(values, dtype=float),
                   decay_left=decay_left, decay_right=decay_right, **kw)

    @classmethod
    def zero(cls, horizon=1.0):
        return cls(family="double_exp", amplitude=0.0, horizon=horizon)

    # -- evaluation -------------------------------------------------------

    @property
    def max_shift(self):
        return float(self.shift_table.max()) if self.shift_table.size else 0.0

    def shift(self, t):
        if np.any(np.asarray(t) > self.horizon * (1 + 1e-12)):
            raise ValueError(f"time beyond the field's horizon {self.horizon}")
        if not self.shift_table.size:
            return np.zeros_like(np.asarray(t, dtype=float)) + 0.0
        grid = np.linspace(0.0, self.horizon, self.shift_table.size)
        return np.interp(t, grid, self.shift_table)

    def shape(self, u):
        """Time-independent spatial profile."""
        u = np.asarray(u, dtype=float)
        A, mu, s = self.amplitude, self.center, self.scale
        if self.family == "double_exp":
            return A * np.exp(-s * np.abs(u - mu))
        if self.family == "gaussian":
            return A * np.exp(-(((u - mu) / s) ** 2))
        return _tab_eval(u, self.table_u0, self.table_du, self.table,
                         self.decay_left, self.decay_right)

    def __call__(self, t, u):
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        out = self.modulation(t) * self.shape(u - self.shift(t))
        return out if np.ndim(out) else float(out)

    value = __call__

    def shape_cumulative(self, u):
        """Closed-form ``int_{-inf}^u shape(v) dv`` (vectorised)."""
        u = np.asarray(u, dtype=float)
        A, mu, s = self.amplitude, self.center, self.scale
        if self.family == "double_exp":
            x = u - mu
            half = A / s
            return np.where(x < 0.0, half * np.exp(-s * np.abs(x)),
                            2.0 * half - half * np.exp(-s * np.abs(x)))
        if self.family == "gaussian":
            return 0.5 * A * s * math.sqrt(math.pi) * (1.0 + special.erf((u - mu) / s))
        return _tab_cumulative(u, self.table_u0, self.table_du, self.table,
                               self.decay_left, self.decay_right)

    @cached_property
    def shape_mass(self):
        """Total mass of the shape, by tail-truncated adaptive quadrature."""
        return _quad_line(self.shape, self.envelope_C / self.modulation.max_on(self.horizon)
                          if self.modulation.max_on(self.horizon) > 0 else self.envelope_C,
                          self.envelope_beta, self._breakpoints(0.0))

    def cumulative(self, t, u):
        """``int_{-inf}^u value(t, v) dv`` from the closed form (vectorised)."""
        return self.modulation(t) * self.shape_cumulative(np.asarray(u, dtype=float) - self.shift(t))

    def mass(self, t):
        """``C(t)`` from the quadrature shape mass."""
        return self.modulation(t) * self.shape_mass

    @property
    def sup(self):
        """``sup_{t <= T, u} value(t, u)``: the per-site thinning envelope."""
        if self.family == "tabulated":
            peak = float(self.table.max())
        else:
            peak = self.amplitude
        return peak * self.modulation.max_on(self.horizon)

    @property
    def is_zero(self):
        return self.sup == 0.0

    def _breakpoints(self, t):
        d = float(self.shift(t))
        if self.family == "double_exp":
            return [self.center + d]
        if self.family == "tabulated":
            return [self.table_u0 + d, self.table_u0 + d + self.table_du * (self.table.size - 1)]
        return [self.center + d]

    def _auto_envelope(self):
        mmax = self.modulation.max_on(self.horizon)
        dmax = float(np.max(np.abs(self.shift_table))) if self.shift_table.size else 0.0
        if self.family == "double_exp":
            beta = self.scale
            C = self.amplitude * mmax * math.exp(beta * (abs(self.center) + dmax))
        elif self.family == "gaussian":
            beta = 1.0 / self.scale
            C = self.amplitude * mmax * math.exp(beta * (abs(self.center) + dmax) + 0.25)
        else:
            beta = min(self.decay_left, self.decay_right)
            u_lo = self.table_u0
            u_hi = self.table_u0 + self.table_du * (self.table.size - 1)
            # value * exp(beta|u|) is maximal on the table or at its ends,
            # since the tails decay at least as fast as exp(-beta|u|)
            grid = np.linspace(u_lo, u_hi, 8 * self.table.size + 1)
            vals = self.shape(grid) * np.exp(beta * (np.abs(grid) + self.table_du))
            ends = np.abs([u_lo, u_hi])
            C = max(float(vals.max()), float(self.table.max()) * math.exp(beta * float(ends.max())))
            C *= mmax * math.exp(beta * dmax)
        if C == 0.0:
            C = 0.0
        return float(C), float(beta)

    def check_envelope(self, ts=None, us=None):
        """Spot-check ``value <= C exp(-beta|u|)`` on a dense grid."""
        ts = np.linspace(0.0, self.horizon, 41) if ts is None else np.asarray(ts)
        us = np.linspace(-30.0, 30.0, 6001) if us is None else np.asarray(us)
        tt, uu = np.meshgrid(ts, us, indexing="ij")
        v = self(tt, uu)
        bound = self.envelope_C * np.exp(-self.envelope_beta * np.abs(uu))
        return bool(np.all(v >= 0.0) and np.all(v <= bound * (1 + 1e-12) + 1e-300))

    # -- packing for the simulation kernels --------------------------------

    def pack(self):
        """Flat arrays describing the field for the compiled kernels."""
        fam = FAMILY_CODES[self.family]
        spar = np.array([self.amplitude, self.center, self.scale, self.table_u0,
                         self.table_du, self.decay_left, self.decay_right], dtype=np.float64)
        tab = self.table if self.family == "tabulated" else np.zeros(1)
        mod = MODULATION_CODES[self.modulation.kind]
        dvals = self.shift_table if self.shift_table.size else np.zeros(0)
        ddt = self.horizon / (dvals.size - 1) if dvals.size > 1 else 1.0
        return (fam, spar, np.ascontiguousarray(tab, dtype=np.float64), mod,
                self.modulation.params(), np.ascontiguousarray(dvals, dtype=np.float64), ddt)

    def to_json(self):
        d = {"family": self.family, "modulation": self.modulation.to_json(),
             "horizon": self.horizon}
        if self.family == "tabulated":
            d.update(u0=self.table_u0, du=self.table_du, values=self.table.tolist(),
                     decay_left=self.decay_left, decay_right=self.decay_right)
        else:
            d.update(amplitude=self.amplitude, center=self.center, scale=self.scale)
        return d


def _tab_eval(u, u0, du, vals, dl, dr):
    n = vals.size
    u_hi = u0 + du * (n - 1)
    grid = u0 + du * np.arange(n)
    inside = np.interp(u, grid, vals)
    left = vals[0] * np.exp(-dl * (u0 - u))
    right = vals[-1] * np.exp(-dr * (u - u_hi))
    return np.where(u < u0, left, np.where(u > u_hi, right, inside))


def _tab_cumulative(u, u0, du, vals, dl, dr):
    n = vals.size
    u_hi = u0 + du * (n - 1)
    left_mass = vals[0] / dl
    seg = 0.5 * du * (vals[:-1] + vals[1:])
    cum = left_mass + np.concatenate([[0.0], np.cumsum(seg)])
    out = np.empty_like(u)
    lo = u < u0
    hi = u > u_hi
    mid = ~(lo | hi)
    out[lo] = vals[0] * np.exp(-dl * (u0 - u[lo])) / dl
    out[hi] = cum[-1] + vals[-1] * (1.0 - np.exp(-dr * (u[hi] - u_hi))) / dr
    um = u[mid]
    k = np.clip(((um - u0) // du).astype(int), 0, n - 2)
    x = um - (u0 + k * du)
    slope = (vals[k + 1] - vals[k]) / du
    out[mid] = cum[k] + vals[k] * x + 0.5 * slope * x * x
    return out


def _tail_cut(C, beta, tol=TAIL_TOL):
    """U such that the envelope mass beyond |u| > U is below ``tol``."""
    if C <= 0.0:
        return 1.0
    # 2 * C exp(-beta U) / beta < tol
    return max(1.0, math.log(2.0 * C / (beta * tol)) / beta)


def _quad_line(func, C, beta, breaks, lo=None, hi=None):
    """Integrate ``func`` over ``[lo, hi]`` (default: the real line)."""
    U = _tail_cut(C, beta)
    a = -U if lo is None else max(lo, -U)
    b = U if hi is None else min(hi, U)
    if b <= a:
        return 0.0
    tail = 0.0
    if lo is None:
        tail += C * math.exp(-beta * U) / beta
    if hi is None:
        tail += C * math.exp(-beta * U) / beta
    pts = sorted(p for p in breaks if a < p < b)
    edges = [a, *pts, b]
    total = 0.0
    err = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(lambda x: float(func(x)), x0, x1,
                                epsabs=1e-14, epsrel=QUAD_RTOL * 0.1, limit=200)
        total += val
        err += e
    scale = max(abs(total), 1e-300)
    if tail > QUAD_RTOL * scale and tail > 1e-12:
        raise QuadratureError(f"tail bound {tail:.3g} exceeds tolerance for integral {total:.3g}")
    if err > QUAD_RTOL * scale and err > 1e-13:
        raise QuadratureError(f"quadrature error estimate {err:.3g} too large")
    return total


def total_mass(field, t):
    """``C(t) = int value(t, u) du`` by adaptive quadrature."""
    return _quad_line(lambda u: field(t, u), field.envelope_C, field.envelope_beta,
                      field._breakpoints(t))


def b_from_h(h):
    """The shifted field ``b(t,u) = h(t, u - D(t))``, ``D(t) = int_0^t C/2``.

    ``D`` is a cumulative trapezoid of ``C`` on a uniform grid of
    ``D_GRID_POINTS`` times.
    """
    if h.shift_table.size:
        raise ValueError("field is already shifted")
    ts = np.linspace(0.0, h.horizon, D_GRID_POINTS)
    C = h.modulation(ts) * h.shape_mass if not h.is_zero else np.zeros_like(ts)
    D = integrate.cumulative_trapezoid(0.5 * C, ts, initial=0.0)
    dmax = float(D[-1])
    env_C = h.envelope_C * math.exp(h.envelope_beta * dmax)
    return RateField(family=h.family, amplitude=h.amplitude, center=h.center, scale=h.scale,
                     table_u0=h.table_u0, table_du=h.table_du, table=h.table,
                     decay_left=h.decay_left, decay_right=h.decay_right,
                     modulation=h.modulation, horizon=h.horizon, shift_table=D,
                     envelope_C=env_C, envelope_beta=h.envelope_beta)


def D_of_t(h, t):
    """Half the mass delivered by ``h`` up to time ``t`` (tabulated trapezoid)."""
    return b_from_h(h).shift(t) if not h.shift_table.size else h.shift(t)


def a_field(b, t, u):
    """``a(t,u) = int_{-inf}^u b(t,v) dv`` by tail-truncated quadrature."""
    if u == -np.inf:
        return 0.0
    if u == np.inf:
        return total_mass(b, t)
    return _quad_line(lambda v: b(t, v), b.envelope_C, b.envelope_beta, b._breakpoints(t), hi=u)


def gamma_field(h, t, u):
    """``int_{-inf}^u h - int_u^{inf} h`` (both halves by quadrature)."""
    if u == np.inf:
        return total_mass(h, t)
    if u == -np.inf:
        return -total_mass(h, t)
    brk = h._breakpoints(t)
    left = _quad_line(lambda v: h(t, v), h.envelope_C, h.envelope_beta, brk, hi=u)
    right = _quad_line(lambda v: h(t, v), h.envelope_C, h.envelope_beta, brk, lo=u)
    return left - right


@dataclass(frozen=True)
class MacroCoefficients:
    """Coefficients of the two hydrodynamic equations for one (kernel, h)."""

    sigma_sq: float
    h: RateField
    b: RateField

    def C_of_t(self, t):
        return self.h.mass(t)

    def D_of_t(self, t):
        return self.b.shift(t)

    def a_field(self, t, u):
        """Drift of the right-shift equation, closed form on arrays."""
        return self.b.cumulative(t, u)

    def gamma_field(self, t, u):
        return 2.0 * self.h.cumulative(t, u) - self.h.mass(t)


def macro_coefficients(kernel, h):
    return MacroCoefficients(sigma_sq=sigma_sq(kernel), h=h, b=b_from_h(h))
