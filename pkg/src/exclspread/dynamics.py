"""Exact continuous-time simulation of the right-shift and centered-spread processes.

Both processes are SSEP with exchange rate ``N^2 p(z)`` per unordered pair
``(x, x+z)`` plus an insertion mechanism driven by a space-time Poisson field:
right shifts at rate ``b(s, x/N)`` per site, or centered spreads at rate
``h(s, x/N)`` per site of the active sublattice.  The simulation window is
finite; see :func:`plan_window` for how it is sized.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _engine as E
from ._jit import kernel_context
from .kernels import JumpKernel, RateField, b_from_h, sigma_sq
from .lattice import ExclusionConfig, SpreadConfig
from .rng import STREAM_DYNAMICS, Stream, make_state, next_double, next_exp

logger = logging.getLogger(__name__)

__all__ = [
    "SimParams",
    "EventLog",
    "TrajectoryRecord",
    "WindowPlan",
    "Clock",
    "KMCEvent",
    "SimulationError",
    "EnvelopeViolation",
    "WindowOverflowError",
    "plan_window",
    "expected_ext_left",
    "sample_nhpp",
    "kmc_step",
    "simulate_eprs",
    "simulate_epcs",
    "run_ensemble",
]

EXT_LEFT_BUDGET = 0.1


class SimulationError(RuntimeError):
    pass


class EnvelopeViolation(SimulationError):
    """The rate field exceeded its declared bound at some sampled point."""


class WindowOverflowError(SimulationError):
    """Too many shifts expected left of the window for the fill rule to be harmless."""


@dataclass(frozen=True)
class WindowPlan:
    """Simulation window in lattice sites: ``[left, left + length)``."""

    left: int
    length: int
    observe: float
    margin: float

    @property
    def right(self):
        return self.left + self.length - 1


@dataclass
class SimParams:
    """Parameters of one trajectory.

    ``rate`` is the field the simulator uses directly: ``b`` for the
    right-shift process, ``h`` for the centered-spread process.
    ``window`` is ``(W, M)`` in macroscopic units, or a :class:`WindowPlan`.
    """

    N: int
    T: float
    kernel: JumpKernel
    rate: RateField
    window: tuple | WindowPlan = (1.5, 4.0)
    seed: int = 0
    snapshot_times: tuple = ()
    replica: int = 0
    event_log: bool = False

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        self.N = int(self.N)
        if not self.T > 0:
            raise ValueError("T must be positive")
        times = np.asarray(self.snapshot_times, dtype=float)
        if times.size and (np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > self.T):
            raise ValueError("snapshot_times must be sorted inside [0, T]")
        self.snapshot_times = tuple(float(x) for x in times)
        if self.rate.horizon < self.T * (1 - 1e-12):
            raise ValueError("rate field horizon shorter than T")

    def window_plan(self):
        if isinstance(self.window, WindowPlan):
            return self.window
        W, M = self.window[:2]
        right = int(math.ceil((W + M) * self.N))
        return WindowPlan(-right, 2 * right + 1, float(W), float(M))


@dataclass
class EventLog:
    """State-changing events: time, kind, and two integer arguments.

    kind 0: exchange of cells ``a`` and ``b``; 1: interior shift/spread at
    cell ``a``; 2/3: exterior event left/right of the window (``b`` is the
    site in half steps).
    """

    t: np.ndarray
    kind: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __len__(self):
        return self.t.size


@dataclass
class TrajectoryRecord:
    process: str
    N: int
    T: float
    snapshot_times: np.ndarray
    snap_cells: np.ndarray
    snap_meta: np.ndarray
    snap_W: np.ndarray
    initial: object
    final: object
    W: np.ndarray
    counters: dict
    event_log: EventLog | None = None
    expected_ext_left: float = 0.0
    extra: dict = field(default_factory=dict)

    def snapshot(self, i):
        """Configuration at ``snapshot_times[i]``."""
        meta = self.snap_meta[i]
        cells = self.snap_cells[i].copy()
        if self.process == "eprs":
            return ExclusionConfig(self.initial.window_left, cells)
        return SpreadConfig(cells, int(meta[E.M_ANCHOR]), int(meta[E.M_MASS]))

    def shift_totals(self):
        """Total number of shift (or spread) events up to each snapshot time."""
        m = self.snap_meta
        return m[:, E.M_INTERIOR] + m[:, E.M_EXT_LEFT] + m[:, E.M_EXT_RIGHT]

    @property
    def shift_counts(self):
        """Per-site shift counts at each snapshot, shape ``(n_snap, L)``."""
        return self.snap_W

    def mass(self):
        return self.snap_meta[:, E.M_MASS]


# --------------------------------------------------------------------------
# windows


def expected_ext_left(b, N, left, T, n_t=401):
    """Expected number of shifts at sites left of ``left`` during ``[0, T]``."""
    ts = np.linspace(0.0, T, n_t)
    a = b.cumulative(ts, np.full_like(ts, (left - 0.5) / N))
    return float(N * np.trapezoid(a, ts))


def plan_window(N, T, kernel, h, observe=1.5, process="eprs", ext_budget=EXT_LEFT_BUDGET):
    """Window covering ``[-observe, observe]`` plus a margin.

    The margin is ``4 sqrt(2 sigma^2 T) + D(T) + int_0^T C``, so neither
    diffusion nor the drift and total displacement caused by the insertions
    bring boundary effects into the observed region.  For the right-shift
    process the left edge is moved further out until the expected number of
    shifts left of the window is below half the abort budget.
    """
    s2 = sigma_sq(kernel)
    b = b_from_h(h)
    D_T = float(b.shift(T))
    margin = 4.0 * math.sqrt(2.0 * s2 * T) + D_T + 2.0 * D_T
    right = int(math.ceil((observe + margin) * N))
    left = -right
    if process == "eprs" and not h.is_zero:
        step = max(1, N // 8)
        while expected_ext_left(b, N, left, T) > 0.5 * ext_budget:
            left -= step
    return WindowPlan(left, right - left + 1, float(observe), float(margin))


# --------------------------------------------------------------------------
# Poisson field at one site and the generic clock step


def site_sup(rate, u, T):
    """``sup_{s <= T} rate(s, u)``, exact for the parametric families."""
    mmax = rate.modulation.max_on(T)
    if rate.family == "tabulated":
        return rate.sup
    dmax = rate.max_shift
    d = min(max(u - rate.center, 0.0), dmax) if rate.shift_table.size else 0.0
    return float(mmax * rate.shape(u - d))


def sample_nhpp(rate, x, N, T, seed, replica=0):
    """Event times on ``[0, T]`` of a Poisson process of intensity ``rate(s, x/N)``.

    Lewis-Shedler thinning against the constant bound ``sup_s rate(s, x/N)``.
    """
    u = x / N
    lam = site_sup(rate, u, T)
    if lam <= 0.0:
        return np.zeros(0)
    st = make_state(seed, replica, STREAM_DYNAMICS)
    out = []
    t = 0.0
    with kernel_context():
        while True:
            t += next_exp(st, lam)
            if t > T:
                break
            if next_double(st) * lam < rate(t, u):
                out.append(t)
    return np.array(out)


@dataclass(frozen=True)
class Clock:
    """A time-dependent clock: ``rate(t) <= bound`` on the horizon."""

    rate: object
    bound: float


@dataclass(frozen=True)
class KMCEvent:
    kind: str  # "event", "rejected" or "horizon"
    clock: int
    time: float


def kmc_step(state, clocks, now, horizon):
    """One step of the competing-clocks sampler with thinning.

    ``state`` is an rng state array.  Draws the next candidate from the sum
    of the bounds, picks a clock proportionally to its bound and accepts it
    with probability ``rate(t) / bound``.  A rejected candidate still
    advances time.
    """
    bounds = np.array([c.bound for c in clocks], dtype=float)
    R = float(bounds.sum())
    if R <= 0.0:
        return KMCEvent("horizon", -1, horizon)
    with kernel_context():
        t = now + next_exp(state, R)
        if t > horizon:
            return KMCEvent("horizon", -1, horizon)
        v = next_double(state) * R
        i = min(int(np.searchsorted(np.cumsum(bounds), v, side="right")), len(clocks) - 1)
        c = clocks[i]
        r = c.rate(t) if callable(c.rate) else float(c.rate)
        if r > c.bound * (1 + E.ENVELOPE_SLACK):
            raise EnvelopeViolation(f"clock {i} rate {r} above bound {c.bound}")
        if next_double(state) * c.bound < r:
            return KMCEvent("event", i, t)
    return KMCEvent("rejected", i, t)


# --------------------------------------------------------------------------
# simulators


def _kernel_arrays(kernel):
    zs, ps = kernel.positive_arrays()
    cum = np.cumsum(2.0 * ps)
    cum[-1] = 1.0
    return zs, cum


def _run(mode, params, cells, anchor, n):
    N, T = params.N, params.T
    L = cells.size
    zs, cum = _kernel_arrays(params.kernel)
    rate = params.rate
    lam = rate.sup
    snaps = np.asarray(params.snapshot_times, dtype=np.float64)
    ns = snaps.size
    snap_cells = np.zeros((ns, L), dtype=np.uint8)
    snap_meta = np.zeros((ns, E.N_META), dtype=np.int64)
    snap_W = np.zeros((ns, L if mode == E.MODE_EPRS else 0), dtype=np.int32)
    W = np.zeros(L, dtype=np.int32)
    counters = np.zeros(E.N_COUNTERS, dtype=np.int64)
    st = make_state(params.seed, params.replica, STREAM_DYNAMICS)
    log_on = bool(params.event_log)
    cap = 1 << 16 if log_on else 0
    log = [np.empty(cap, np.float64), np.empty(cap, np.int8),
           np.empty(cap, np.int32), np.empty(cap, np.int32)]
    istate = np.array([0, anchor, n, 0, 0], dtype=np.int64)
    fstate = np.zeros(1, dtype=np.float64)
    pack = rate.pack()
    with kernel_context():
        while True:
            status = E.run_kmc(
                mode, cells, N, float(T), zs, cum, pack, float(lam),
                float(rate.envelope_C), float(rate.envelope_beta),
                snaps, snap_cells, snap_meta, snap_W, W, counters, st,
                log_on, log[0], log[1], log[2], log[3], istate, fstate)
            if status != E.OK or istate[E.I_DONE]:
                break
            log = [np.concatenate([a, np.empty_like(a)]) for a in log]
    if status == E.ENVELOPE_VIOLATION:
        raise EnvelopeViolation("rate field exceeded its envelope during the run")
    anchor, n = int(istate[E.I_ANCHOR]), int(istate[E.I_MASS])
    nlog = int(istate[E.I_NLOG])
    events = None
    if log_on:
        events = EventLog(*(a[:nlog].copy() for a in log))
    names = ["events", "exchange_attempts", "exchange_moves", "exchange_blocked_edge",
             "interior_candidates", "interior_accepted", "ext_left_candidates",
             "ext_left_accepted", "ext_right_candidates", "ext_right_accepted",
             "out_cells", "out_particles"]
    cdict = {k: int(v) for k, v in zip(names, counters)}
    return (snaps, snap_cells, snap_meta, snap_W, W, cdict, events, anchor, n)


def simulate_eprs(params, init):
    """Right-shift process from ``init``; returns a :class:`TrajectoryRecord`."""
    plan_left = init.window_left
    ext = 0.0
    if not params.rate.is_zero:
        ext = expected_ext_left(params.rate, params.N, plan_left, params.T)
        if ext > EXT_LEFT_BUDGET:
            raise WindowOverflowError(
                f"expected {ext:.3g} shifts left of the window (budget {EXT_LEFT_BUDGET}); "
                "widen the left margin")
    cells = init.cells.copy()
    snaps, sc, sm, sw, W, cdict, log, _, _ = _run(E.MODE_EPRS, params, cells, 2 * plan_left, 1)
    final = ExclusionConfig(plan_left, cells, init.out_right + cdict["out_cells"],
                            init.out_right_particles + cdict["out_particles"])
    return TrajectoryRecord("eprs", params.N, params.T, snaps, sc, sm, sw, init.copy(), final,
                            W, cdict, log, ext)


def simulate_epcs(params, init):
    """Centered-spread process from ``(1, eta)``; returns a :class:`TrajectoryRecord`."""
    if isinstance(init, ExclusionConfig):
        init = SpreadConfig.from_exclusion(init)
    if init.mass_n != 1 or init.parity != "G1":
        raise ValueError("the centered-spread process starts from mass 1 on Z")
    cells = init.cells.copy()
    snaps, sc, sm, sw, W, cdict, log, anchor, n = _run(
        E.MODE_EPCS, params, cells, init.anchor_pos, init.mass_n)
    final = SpreadConfig(cells, anchor, n, init.out_right + cdict["out_cells"],
                         init.lost_particles + cdict["out_particles"])
    final.extra["lost_left"] = cdict["ext_left_accepted"]
    return TrajectoryRecord("epcs", params.N, params.T, snaps, sc, sm, sw, init.copy(), final,
                            W, cdict, log, 0.0)


# --------------------------------------------------------------------------
# ensembles


def run_ensemble(task, replicas, threads=1):
    """Evaluate ``task(replica)`` for every replica index.

    Results come back in replica order whatever the scheduling, so any
    reduction over them is deterministic.  The compiled kernels release the
    GIL, so threads give real parallelism.
    """
    replicas = int(replicas)
    if threads <= 1 or replicas <= 1:
        return [task(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(task, range(replicas)))


def bernoulli_stream(seed, replica):
    from .rng import STREAM_INIT

    return Stream(seed, replica, STREAM_INIT)
