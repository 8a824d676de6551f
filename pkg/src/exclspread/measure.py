"""Empirical measures, ensemble statistics and martingale diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _replay
from ._jit import kernel_context
from .dynamics import TrajectoryRecord, WindowPlan
from .kernels import D_of_t
from .lattice import ExclusionConfig, SpreadConfig
from .rng import STREAM_INIT, Stream

__all__ = [
    "TestFunction",
    "EnsembleStats",
    "HydroReport",
    "MartingaleTables",
    "DynkinPath",
    "sample_bernoulli_profile",
    "empirical_pair",
    "pair_snapshots",
    "wlln_statistic",
    "wlln_target",
    "martingale_tables",
    "dynkin_replay",
    "martingale_path",
    "quadratic_variation_path",
    "hydro_error",
]

# tail of the exterior rate sum dropped below this
_EXT_SUM_TOL = 1e-13


# --------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported bump centred at ``c + velocity * t``, half width ``w``.

    ``raised_cosine`` is ``(1 + cos(pi x)) / 2`` and ``spline`` is the
    polynomial ``(1 - x^2)^3``, both in ``x = (u - c(t)) / w`` on ``|x| <= 1``.
    """

    __test__ = False  # not a pytest class

    family: str = "raised_cosine"
    c: float = 0.0
    w: float = 0.5
    velocity: float = 0.0
    amplitude: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.family not in ("raised_cosine", "spline"):
            raise ValueError(f"unknown test function family {self.family!r}")
        if not self.w > 0:
            raise ValueError("half width must be positive")
        if not self.name:
            object.__setattr__(self, "name", f"{self.family}(c={self.c:g},w={self.w:g})")

    def center(self, t=0.0):
        return self.c + self.velocity * t

    def _x(self, u, t):
        return (np.asarray(u, dtype=float) - self.center(t)) / self.w

    def _profile(self, x, order):
        inside = np.abs(x) <= 1.0
        if self.family == "raised_cosine":
            px = math.pi * x
            if order == 0:
                v = 0.5 * (1.0 + np.cos(px))
            elif order == 1:
                v = -0.5 * math.pi * np.sin(px)
            else:
                v = -0.5 * math.pi**2 * np.cos(px)
        else:
            q = 1.0 - x * x
            if order == 0:
                v = q**3
            elif order == 1:
                v = -6.0 * x * q**2
            else:
                v = -6.0 * q**2 + 24.0 * x * x * q
        return self.amplitude * np.where(inside, v, 0.0)

    def __call__(self, u, t=0.0):
        return self._profile(self._x(u, t), 0)

    def d1(self, u, t=0.0):
        return self._profile(self._x(u, t), 1) / self.w

    def d2(self, u, t=0.0):
        return self._profile(self._x(u, t), 2) / self.w**2

    def ds(self, u, t=0.0):
        """Time derivative ``-velocity * G'``."""
        return -self.velocity * self.d1(u, t)

    def support(self, t=0.0):
        c = self.center(t)
        return c - self.w, c + self.w

    def support_over(self, T):
        a0, b0 = self.support(0.0)
        a1, b1 = self.support(T)
        return min(a0, a1), max(b0, b1)

    def integral(self):
        """``int G du``."""
        unit = 1.0 if self.family == "raised_cosine" else 32.0 / 35.0
        return self.amplitude * self.w * unit

    def to_json(self):
        return {"family": self.family, "c": self.c, "w": self.w,
                "velocity": self.velocity, "amplitude": self.amplitude}


# --------------------------------------------------------------------------
# ensemble statistics


@dataclass
class EnsembleStats:
    """Running mean and sum of squared deviations of an array-valued sample.

    ``mean[k, g]`` is the sample mean at time ``times[k]`` for test function
    ``g``.  Two statistics merge exactly (pairwise update), so a reduction in
    any grouping gives the same numbers up to rounding.
    """

    times: np.ndarray
    names: tuple
    count: int = 0
    mean: np.ndarray | None = None
    m2: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.names = tuple(self.names)
        shape = (self.times.size, len(self.names))
        if self.mean is None:
            self.mean = np.zeros(shape)
        if self.m2 is None:
            self.m2 = np.zeros(shape)

    def add(self, sample):
        sample = np.asarray(sample, dtype=float).reshape(self.mean.shape)
        self.count += 1
        delta = sample - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (sample - self.mean)
        return self

    def merge(self, other):
        if self.mean.shape != other.mean.shape or not np.array_equal(self.times, other.times):
            raise ValueError("statistics over different layouts")
        if other.count == 0:
            return EnsembleStats(self.times, self.names, self.count, self.mean.copy(),
                                 self.m2.copy(), dict(self.meta))
        if self.count == 0:
            return EnsembleStats(other.times, other.names, other.count, other.mean.copy(),
                                 other.m2.copy(), dict(other.meta))
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / n)
        return EnsembleStats(self.times, self.names, n, mean, m2, dict(self.meta))

    @classmethod
    def from_samples(cls, times, names, samples, meta=None):
        st = cls(times, names, meta=dict(meta or {}))
        for s in samples:
            st.add(s)
        return st

    @property
    def variance(self):
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.maximum(self.m2 / (self.count - 1), 0.0)

    @property
    def std(self):
        return np.sqrt(self.variance)

    @property
    def stderr(self):
        return self.std / math.sqrt(max(self.count, 1))


# --------------------------------------------------------------------------
# initial data and pairings


def sample_bernoulli_profile(rho0, N, window, seed, replica=0):
    """Product measure with cell ``x`` occupied with probability ``rho0(x/N)``.

    ``window`` is a :class:`WindowPlan` or ``(left, length)`` in sites.
    """
    if isinstance(window, WindowPlan):
        left, length = window.left, window.length
    else:
        left, length = (int(v) for v in window)
    u = (left + np.arange(length)) / N
    p = np.broadcast_to(np.asarray(rho0(u), dtype=float), u.shape)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("profile values must lie in [0, 1]")
    draws = Stream(seed, replica, STREAM_INIT).random(length)
    return ExclusionConfig(left, (draws < p).astype(np.uint8))


def _positions(config):
    if isinstance(config, SpreadConfig):
        return config.positions()
    return config.sites().astype(float)


def _check_support(G, lo_pos, hi_pos, N, t=0.0):
    a, b = G.support(t)
    if a * N < lo_pos or b * N > hi_pos:
        raise ValueError(f"support [{a:g}, {b:g}] of {G.name} leaves the window "
                         f"[{lo_pos / N:g}, {hi_pos / N:g}]")


def empirical_pair(config, G, N, t=0.0):
    """``<pi^N, G> = (1/N) sum_z G(z/N) occupancy(z)`` (half-integer z for spreads)."""
    pos = _positions(config)
    if pos.size == 0:
        return 0.0
    _check_support(G, pos[0], pos[-1], N, t)
    return float(np.dot(G(pos / N, t), config.cells)) / N


def pair_snapshots(record, tests):
    """``<pi_t, G>`` for every snapshot ``t`` and test function; shape ``(n_t, n_G)``."""
    out = np.zeros((len(record.snapshot_times), len(tests)))
    for k, t in enumerate(record.snapshot_times):
        cfg = record.snapshot(k)
        for g, G in enumerate(tests):
            out[k, g] = empirical_pair(cfg, G, record.N, t)
    return out


def _snapshot_index(record, t):
    times = np.asarray(record.snapshot_times)
    k = int(np.argmin(np.abs(times - t))) if times.size else -1
    if k < 0 or abs(times[k] - t) > 1e-12 * max(1.0, abs(t)):
        raise KeyError(f"no snapshot at t={t}")
    return k


def wlln_statistic(record, N=None, t=None):
    """``(1/N) sum_x W_t^{x,N}``: rescaled number of shifts up to time ``t``."""
    N = record.N if N is None else N
    if t is None:
        t = record.T
    if t > record.T * (1 + 1e-12):
        raise ValueError("t beyond the trajectory horizon")
    k = _snapshot_index(record, t)
    return float(record.shift_totals()[k]) / N


def wlln_target(h, t):
    """``int_0^t C(s) ds``."""
    if h.is_zero:
        return 0.0
    return float(2.0 * D_of_t(h, t))


# --------------------------------------------------------------------------
# hydrodynamic comparison


@dataclass
class HydroReport:
    """Per-(t, G) comparison rows and the summary score.

    ``score = |mean - pde| + sd`` where ``sd`` is the ensemble standard
    deviation of ``<pi_t, G>``; ``max_score`` is its maximum over all rows.
    """

    N: int
    rows: list
    max_score: float
    max_abs_error: float

    HEADER = ("N", "t", "G", "mean", "stderr", "sd", "pde_value", "abs_error", "score")

    def as_rows(self):
        return [tuple(r[k] for k in self.HEADER) for r in self.rows]


def hydro_error(stats, pde, tests, times=None, N=None):
    """Compare ensemble means of ``<pi_t, G>`` with ``int G(u) f(t, u) du``."""
    d_stats = stats.meta.get("descriptor")
    d_pde = pde.meta.get("descriptor")
    if d_stats is not None and d_pde is not None:
        common = set(d_stats) & set(d_pde)
        bad = sorted(k for k in common if d_stats[k] != d_pde[k])
        if bad:
            raise ValueError(f"experiment descriptors differ in {bad}")
    times = stats.times if times is None else np.asarray(times, dtype=float)
    names = [G.name for G in tests]
    if names != list(stats.names):
        raise ValueError("test functions do not match the statistics")
    N = stats.meta.get("N", 0) if N is None else N
    rows = []
    for t in times:
        k = int(np.argmin(np.abs(stats.times - t)))
        if abs(stats.times[k] - t) > 1e-12:
            raise KeyError(f"time {t} not in the statistics")
        for g, G in enumerate(tests):
            pv = pde.pair(lambda u, G=G, t=t: G(u, t), t)
            m = float(stats.mean[k, g])
            sd = float(stats.std[k, g])
            err = abs(m - pv)
            rows.append({"N": int(N), "t": float(t), "G": G.name, "mean": m,
                         "stderr": float(stats.stderr[k, g]), "sd": sd,
                         "pde_value": pv, "abs_error": err, "score": err + sd})
    return HydroReport(int(N), rows, max(r["score"] for r in rows),
                       max(r["abs_error"] for r in rows))


# --------------------------------------------------------------------------
# Dynkin martingale and its quadratic variation


@dataclass
class MartingaleTables:
    """Coefficient tables on the active block ``[k0, k1)`` of a window."""

    N: int
    T: float
    left: int
    length: int
    k0: int
    k1: int
    zs: np.ndarray
    ps: np.ndarray
    tg: np.ndarray
    Htab: np.ndarray
    dHtab: np.ndarray
    btab: np.ndarray
    bltab: np.ndarray


def _exterior_rate(b, N, left, tg):
    """``sum_{x < left} b(t, x/N)`` for each time of ``tg``."""
    C, beta = b.envelope_C, b.envelope_beta
    total = np.zeros(tg.size)
    x = left - 1
    chunk = max(256, 4 * N)
    while True:
        xs = x - np.arange(chunk)
        total += b(tg[:, None], xs[None, :] / N).sum(axis=1)
        x -= chunk
        # remaining envelope mass beyond x (x < 0 here once far enough left)
        if x < 0:
            tail = C * math.exp(-beta * abs(x) / N) / (1.0 - math.exp(-beta / N))
            if tail < _EXT_SUM_TOL:
                return total


def martingale_tables(params, H, window=None, n_grid=1001):
    """Tables for :func:`dynkin_replay` shared by all replicas of one experiment.

    The block covers the support of ``H`` over ``[0, T]`` padded by the
    kernel range, so ``H`` and all its kernel neighbours vanish outside.
    """
    N, T = params.N, params.T
    plan = params.window_plan() if window is None else window
    left, length = plan.left, plan.length
    R = params.kernel.range
    lo, hi = H.support_over(T)
    k0 = int(math.floor(lo * N)) - left - R - 1
    k1 = int(math.ceil(hi * N)) - left + R + 2
    if k0 < 0 or k1 > length:
        raise ValueError("test function support too close to the window edge")
    zs, ps = params.kernel.positive_arrays()
    tg = np.linspace(0.0, T, int(n_grid))
    u = (left + np.arange(k0, k1)) / N
    Htab = np.ascontiguousarray(np.array([H(u, t) for t in tg]))
    dHtab = np.ascontiguousarray(np.array([H.ds(u, t) for t in tg]))
    b = params.rate
    if b.is_zero:
        btab = np.zeros_like(Htab)
        bltab = np.zeros(tg.size)
    else:
        btab = np.ascontiguousarray(b(tg[:, None], u[None, :]))
        inner = (left + np.arange(k0)) / N
        bl = b(tg[:, None], inner[None, :]).sum(axis=1) if k0 else np.zeros(tg.size)
        bltab = np.ascontiguousarray(bl + _exterior_rate(b, N, left, tg))
    return MartingaleTables(N, T, left, length, k0, k1, np.asarray(zs, dtype=np.int64),
                            np.asarray(ps, dtype=float), tg, Htab, dHtab, btab, bltab)


@dataclass
class DynkinPath:
    """``F = <pi_t, H_t>``, its compensator, ``M = F - F_0 - compensator``,
    the carre-du-champ quadratic variation, and the fourth line of the printed
    variation formula, all at ``times``."""

    times: np.ndarray
    F: np.ndarray
    compensator: np.ndarray
    M: np.ndarray
    qv: np.ndarray
    line4: np.ndarray

    @property
    def qv_printed(self):
        """The printed formula: the carre du champ plus its extra fourth line."""
        return self.qv + self.line4


def dynkin_replay(record, H, params, eval_times=None, tables=None, n_grid=1001):
    """Replay the event log of a right-shift run against the test function ``H``."""
    if not isinstance(record, TrajectoryRecord) or record.event_log is None:
        raise ValueError("an event log is required (run with event_log=True)")
    if record.process != "eprs":
        raise ValueError("martingale replay is implemented for the right-shift process")
    init = record.initial
    if tables is None:
        tables = martingale_tables(params, H, WindowPlan(init.window_left, len(init), 0.0, 0.0),
                                   n_grid)
    if tables.left != init.window_left or tables.length != len(init) or tables.N != record.N:
        raise ValueError("tables built for a different window")
    T = record.T
    et = np.asarray(record.snapshot_times if eval_times is None else eval_times, dtype=float)
    if et.size == 0:
        et = np.array([0.0, T])
    if np.any(np.diff(et) < 0) or et[0] < 0 or et[-1] > T:
        raise ValueError("eval_times must be sorted inside [0, T]")
    log = record.event_log
    cells = init.cells.copy()
    tb = tables
    with kernel_context():
        F, comp, qv, l4 = _replay.replay(
            cells, log.t, log.kind, log.a, log.b, tb.N, tb.k0, tb.k1, tb.zs, tb.ps,
            tb.tg, tb.Htab, tb.bltab, tb.dHtab, tb.btab, et, float(T))
    if not np.array_equal(cells, record.final.cells):
        raise RuntimeError("event log replay does not reproduce the final configuration")
    with kernel_context():
        F0 = _replay.pair_at(init.cells, tb.k0, tb.Htab[0], tb.N)
    M = F - F0 - comp
    return DynkinPath(et, F, comp, M, qv, l4)


def martingale_path(record, H, params, eval_times=None, tables=None):
    """``(times, M_t)`` of the Dynkin martingale of ``<pi_t, H_t>``."""
    p = dynkin_replay(record, H, params, eval_times, tables)
    return p.times, p.M


def quadratic_variation_path(record, H, params, eval_times=None, tables=None, mode="carre"):
    """``(times, <M>_t)``; ``mode="printed"`` adds the printed formula's fourth line."""
    p = dynkin_replay(record, H, params, eval_times, tables)
    if mode == "carre":
        return p.times, p.qv
    if mode == "printed":
        return p.times, p.qv_printed
    raise ValueError("mode must be 'carre' or 'printed'")
