"""Coupling of the centered-spread process with the auxiliary process.

The auxiliary process is the right-shift process seen from half its number
of shifts, with particles and holes exchanged:

    eta^(x) = 1 - xi(x + n^/2)        (x + n^/2 in Z)

Both marginals start from the same configuration.  First-class particles
carry labels in left-to-right order and jump together; second-class
particles are born whenever only one marginal receives a particle and move
on their own, yielding to first-class particles.  ``J`` counts them.

Here the mass of the auxiliary marginal is ``n^ = 1 + number of shifts`` so
that both marginals start at mass one; the paper's ``n^`` is the shift count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _coupled_engine as CE
from . import _engine as E
from ._jit import kernel_context
from .dynamics import SimParams, TrajectoryRecord
from .kernels import b_from_h
from .lattice import ExclusionConfig, SpreadConfig
from .rng import STREAM_COUPLED, make_state

__all__ = [
    "CoupledState",
    "CoupledResult",
    "CouplingError",
    "build_auxiliary",
    "auxiliary_to_exclusion",
    "coupled_step",
    "relabel_case3",
    "rank_pairs",
    "simulate_coupled",
]

HALF = Fraction(1, 2)


class CouplingError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# the transformation


def build_auxiliary(xi, shift_total):
    """``eta^(x) = 1 - xi(x + s/2)`` on the lattice shifted by ``s/2``."""
    s = int(shift_total)
    if s < 0:
        raise ValueError("shift_total must be nonnegative")
    cells = (1 - xi.cells).astype(np.uint8)
    return SpreadConfig(cells, 2 * xi.window_left - s, s + 1)


def auxiliary_to_exclusion(eta_hat):
    """Inverse of :func:`build_auxiliary`."""
    s = eta_hat.mass_n - 1
    left2 = eta_hat.anchor_pos + s
    return ExclusionConfig(left2 // 2, (1 - eta_hat.cells).astype(np.uint8))


# --------------------------------------------------------------------------
# a small exact model of the coupled state (reference for the kernel)


@dataclass
class CoupledState:
    """Positions of labeled first-class pairs and of second-class particles.

    ``pairs[k] = (X_k, X^_k)`` for label ``k``; positions are exact
    fractions.  ``second_e`` / ``second_a`` list the second-class particles
    of each marginal.  The window is unbounded.
    """

    pairs: list
    second_e: list = field(default_factory=list)
    second_a: list = field(default_factory=list)
    n: int = 1
    n_hat: int = 1
    J: int = 0

    @classmethod
    def from_positions(cls, positions):
        ps = sorted(Fraction(p) for p in positions)
        return cls([(p, p) for p in ps])

    @property
    def same_lattice(self):
        return (self.n - self.n_hat) % 2 == 0

    def x_prime(self, x):
        return Fraction(x) + (0 if self.same_lattice else HALF)

    def occupied_e(self):
        return {z for z, _ in self.pairs} | set(self.second_e)

    def occupied_a(self):
        return {w for _, w in self.pairs} | set(self.second_a)

    def check(self):
        zs = [z for z, _ in self.pairs]
        ws = [w for _, w in self.pairs]
        if zs != sorted(zs) or ws != sorted(ws) or len(set(zs)) < len(zs) or len(set(ws)) < len(ws):
            raise CouplingError("labels out of order")
        if len(self.occupied_e()) != len(zs) + len(self.second_e):
            raise CouplingError("exclusion violated in the first marginal")
        if len(self.occupied_a()) != len(ws) + len(self.second_a):
            raise CouplingError("exclusion violated in the second marginal")
        if self.J != len(self.second_e) + len(self.second_a):
            raise CouplingError("J does not count the second-class particles")
        if abs(self.n - self.n_hat) > self.J:
            raise CouplingError("|n - n^| > J")

    def max_displacement(self):
        return max((abs(z - w) for z, w in self.pairs), default=Fraction(0))


def _spread_positions(points, x, half=HALF):
    return [p - half if p < x else p + half for p in points]


def relabel_case3(pairs, x, xp, half=HALF):
    """New first-class pairs after a simultaneous birth at ``x`` / ``xp``.

    Pairs on the same side of the birth sites follow their particles.  The
    mismatched pairs (one particle left of its birth site, the partner right
    of it) are re-paired in one left-to-right sweep that hands the new
    particle of one marginal to the first of them and shifts the partners
    along.  Positions are fractions, or floats with ``half=0.5``.
    """
    if half is HALF:
        x, xp = Fraction(x), Fraction(xp)
    mis_left = [(z, w) for z, w in pairs if z < x and w >= xp]
    mis_right = [(z, w) for z, w in pairs if z >= x and w < xp]
    if mis_left and mis_right:
        raise CouplingError("labels were not ordered")
    out = []
    for z, w in pairs:
        if z < x and w < xp:
            out.append((z - half, w - half))
        elif z >= x and w >= xp:
            out.append((z + half, w + half))
    if mis_left:
        zs = [z for z, _ in mis_left]
        ws = [w for _, w in mis_left]
        new = [(zs[0] - half, xp - half)]
        new += [(zs[j] - half, ws[j - 1] + half) for j in range(1, len(zs))]
        new.append((x - half, ws[-1] + half))
    elif mis_right:
        zs = [z for z, _ in mis_right]
        ws = [w for _, w in mis_right]
        new = [(x - half, ws[0] - half)]
        new += [(zs[j - 1] + half, ws[j] - half) for j in range(1, len(zs))]
        new.append((zs[-1] + half, xp - half))
    else:
        new = [(x - half, xp - half)]
    out.extend(new)
    out.sort()
    return out


def rank_pairs(pairs, x, xp, half=HALF):
    """Pairing by rank after inserting the two new particles (kernel rule)."""
    zs = sorted(_spread_positions([z for z, _ in pairs], x, half) + [x - half])
    ws = sorted(_spread_positions([w for _, w in pairs], xp, half) + [xp - half])
    return list(zip(zs, ws))


def coupled_step(state, event):
    """Apply one coupled event and return the new state.

    Events:

    ``("paired", k, d)``
        first-class label ``k`` attempts a step ``d = +-1`` in both marginals;
    ``("second", side, i, d)``
        second-class particle ``i`` of marginal ``side`` ("e" or "a") steps;
    ``("birth", case, x)``
        birth at ``x`` (first marginal's lattice; the partner site is ``x'``),
        ``case`` 1 (first marginal only), 2 (second only) or 3 (both).
    """
    if not isinstance(event, tuple) or not event:
        raise ValueError(f"malformed event {event!r}")
    st = CoupledState(list(state.pairs), list(state.second_e), list(state.second_a),
                      state.n, state.n_hat, state.J)
    kind = event[0]
    if kind == "paired":
        _, k, d = event
        if d not in (1, -1) or not 0 <= k < len(st.pairs):
            raise ValueError(f"malformed event {event!r}")
        z, w = st.pairs[k]
        z2 = _first_move(z, d, st.pairs, 0, st.second_e)
        w2 = _first_move(w, d, st.pairs, 1, st.second_a)
        st.pairs[k] = (z2, w2)
    elif kind == "second":
        _, side, i, d = event
        lst = st.second_e if side == "e" else st.second_a if side == "a" else None
        if lst is None or d not in (1, -1) or not 0 <= i < len(lst):
            raise ValueError(f"malformed event {event!r}")
        occ = st.occupied_e() if side == "e" else st.occupied_a()
        if lst[i] + d not in occ:
            lst[i] = lst[i] + d
    elif kind == "birth":
        _, case, x = event
        x = Fraction(x)
        if case not in (1, 2, 3) or (2 * x).denominator != 1:
            raise ValueError(f"malformed event {event!r}")
        xp = st.x_prime(x)
        if case == 3:
            st.pairs = relabel_case3(st.pairs, x, xp)
            st.second_e = _spread_positions(st.second_e, x)
            st.second_a = _spread_positions(st.second_a, xp)
            st.n += 1
            st.n_hat += 1
        elif case == 1:
            st.pairs = [(z - HALF if z < x else z + HALF, w) for z, w in st.pairs]
            st.second_e = _spread_positions(st.second_e, x) + [x - HALF]
            st.n += 1
            st.J += 1
        else:
            st.pairs = [(z, w - HALF if w < xp else w + HALF) for z, w in st.pairs]
            st.second_a = _spread_positions(st.second_a, xp) + [xp - HALF]
            st.n_hat += 1
            st.J += 1
    else:
        raise ValueError(f"malformed event {event!r}")
    st.check()
    return st


def _first_move(p, d, pairs, col, seconds):
    target = p + d
    if any(q[col] == target for q in pairs):
        return p
    if target in seconds:
        seconds[seconds.index(target)] = p
    return target


# --------------------------------------------------------------------------
# simulation


@dataclass
class CoupledResult:
    """Both marginals as trajectory records, the J path and diagnostics."""

    epcs: TrajectoryRecord
    aux: TrajectoryRecord
    J_times: np.ndarray
    counters: dict
    snap_J: np.ndarray
    snap_n: np.ndarray
    snap_n_hat: np.ndarray

    @property
    def J_T(self):
        return int(self.J_times.size)

    def J_path(self):
        """``(times, J)`` at each increment, starting from ``(0, 0)``."""
        t = np.concatenate([[0.0], self.J_times])
        return t, np.arange(t.size)


def _marginal_record(N, T, snaps, snap_cells, anchors, masses, lengths, init, final, extra):
    meta = np.zeros((snaps.size, E.N_META), dtype=np.int64)
    meta[:, E.M_ANCHOR] = anchors
    meta[:, E.M_MASS] = masses
    cells = (snap_cells > 0).astype(np.uint8)
    rec = TrajectoryRecord("epcs", N, T, snaps, cells, meta,
                           np.zeros((snaps.size, 0), dtype=np.int32), init, final,
                           np.zeros(0, dtype=np.int32), {}, None, 0.0, extra)
    rec.extra["lengths"] = lengths
    rec.extra["classes"] = snap_cells
    return rec


def simulate_coupled(params, init, capacity=None):
    """Coupled run from ``(1, eta)`` in both marginals.

    ``params.rate`` is ``h``; the auxiliary marginal uses ``b = b_from_h(h)``
    recentred by half its shift count.  Only the nearest-neighbour kernel is
    supported.
    """
    if not isinstance(params, SimParams):
        raise TypeError("params must be SimParams")
    k = params.kernel
    if k.range != 1:
        raise ValueError("the coupling is implemented for the nearest-neighbour kernel")
    if isinstance(init, ExclusionConfig):
        init = SpreadConfig.from_exclusion(init)
    if init.mass_n != 1:
        raise ValueError("the coupled process starts from mass 1")
    h = params.rate
    N, T = params.N, params.T
    L = len(init)
    if h.is_zero:
        dvals, ddt, dmax = np.zeros(1), 1.0, 0.0
    else:
        b = b_from_h(h)
        dvals = b.shift_table
        ddt = b.horizon / (dvals.size - 1)
        dmax = float(dvals.max())
    expected = 2.0 * N * dmax
    extra = int(capacity) if capacity is not None else int(8 * expected + 8 * math.sqrt(expected + 1) + 64)
    snaps = np.asarray(params.snapshot_times, dtype=np.float64)
    pack = h.pack()
    while True:
        cap = L + extra
        cE = np.zeros(cap, dtype=np.uint8)
        cE[:L] = init.cells
        cA = cE.copy()
        pos = np.flatnonzero(cE == 1).astype(np.int64)
        F = pos.size
        posE = np.zeros(cap, dtype=np.int64)
        posE[:F] = pos
        posA = posE.copy()
        scE = np.zeros(cap, dtype=np.int64)
        scA = np.zeros(cap, dtype=np.int64)
        q = np.zeros(CE.N_QSTATE, dtype=np.int64)
        q[CE.Q_ANCHOR_E] = q[CE.Q_ANCHOR_A] = init.anchor_pos
        q[CE.Q_LEN_E] = q[CE.Q_LEN_A] = L
        q[CE.Q_N] = q[CE.Q_NHAT] = 1
        q[CE.Q_F] = F
        snap_cE = np.zeros((snaps.size, cap), dtype=np.uint8)
        snap_cA = np.zeros((snaps.size, cap), dtype=np.uint8)
        snap_meta = np.zeros((snaps.size, CE.N_SMETA), dtype=np.int64)
        jlog = np.zeros(extra, dtype=np.float64)
        counters = np.zeros(CE.N_KCOUNTERS, dtype=np.int64)
        counters[CE.K_MAX_EXCESS] = -(1 << 40)
        st = make_state(params.seed, params.replica, STREAM_COUPLED)
        with kernel_context():
            status = CE.run_coupled(
                cE, cA, posE, posA, scE, scA, q, N, float(T), pack, dvals, float(ddt),
                float(h.sup), float(h.envelope_C), float(h.envelope_beta), dmax,
                snaps, snap_cE, snap_cA, snap_meta, jlog, counters, st)
        if status == CE.CAPACITY:
            extra *= 2
            continue
        break
    if status == CE.ENVELOPE_VIOLATION:
        raise CouplingError("rate field exceeded its envelope during the coupled run")
    if status == CE.INVARIANT_BROKEN:
        raise CouplingError("coupling invariant broken (label order or |n - n^| <= J)")
    names = ["events", "paired_jumps", "second_class_jumps", "case1", "case2", "case3",
             "relabels", "uncoupled_epcs", "uncoupled_aux", "max_excess"]
    cdict = {k: int(v) for k, v in zip(names, counters)}
    lE, lA = int(q[CE.Q_LEN_E]), int(q[CE.Q_LEN_A])
    n, nh, J = int(q[CE.Q_N]), int(q[CE.Q_NHAT]), int(q[CE.Q_J])
    fin_e = SpreadConfig((cE[:lE] > 0).astype(np.uint8), int(q[CE.Q_ANCHOR_E]), n)
    fin_a = SpreadConfig((cA[:lA] > 0).astype(np.uint8), int(q[CE.Q_ANCHOR_A]), nh)
    fin_e.extra["classes"] = cE[:lE].copy()
    fin_a.extra["classes"] = cA[:lA].copy()
    sm = snap_meta
    rec_e = _marginal_record(N, T, snaps, snap_cE, sm[:, CE.S_ANCHOR_E], sm[:, CE.S_N],
                             sm[:, CE.S_LEN_E], init.copy(), fin_e, {})
    rec_a = _marginal_record(N, T, snaps, snap_cA, sm[:, CE.S_ANCHOR_A], sm[:, CE.S_NHAT],
                             sm[:, CE.S_LEN_A], init.copy(), fin_a, {})
    return CoupledResult(rec_e, rec_a, jlog[:J].copy(), cdict,
                         sm[:, CE.S_J].copy(), sm[:, CE.S_N].copy(), sm[:, CE.S_NHAT].copy())
