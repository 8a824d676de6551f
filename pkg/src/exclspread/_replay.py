"""Replay of a right-shift event log for the Dynkin martingale of ``F = <pi, H>``.

Only cells in the active block ``[k0, k1)`` carry weight: the test function
and its neighbours within the kernel range vanish outside it.  The integrands
of the compensator and the quadratic variation depend on the configuration
through that block alone, so time is integrated piecewise between the events
that touch it.  Coefficient tables (``H``, ``dH/ds``, ``b`` on the block, and
the rate ``bleft`` of all sites left of it) are linear in time inside each
cell of the time grid, which makes every integrand a polynomial of degree at
most three there: Simpson's rule on each piece is exact for the tables.
"""

import numpy as np

from ._jit import njit
from .lattice import exchange_inplace, shift_inplace, window_shift_inplace

EV_EXCHANGE = 0
EV_INTERIOR = 1
EV_EXT_LEFT = 2


@njit
def _interp_row(tab, j, w, out):
    a = tab[j]
    b = tab[j + 1]
    for i in range(out.shape[0]):
        out[i] = (1.0 - w) * a[i] + w * b[i]


@njit
def integrands(xi, k0, N, zs, ps, H, dH, b, bleft, g, Bc):
    """``(generator term, carre du champ, printed fourth line)`` at one time.

    ``xi`` is the full window; ``H, dH, b`` are rows on the block.
    ``g`` and ``Bc`` are scratch arrays of the block length.
    """
    nA = H.shape[0]
    nz = zs.shape[0]
    acc = bleft
    for i in range(nA):
        nxt = H[i + 1] if i + 1 < nA else 0.0
        g[i] = nxt - H[i]
        acc += b[i]
        Bc[i] = acc
    comp = 0.0
    qv_ex = 0.0
    for i in range(nA):
        occ = xi[k0 + i]
        lap = 0.0
        for m in range(nz):
            z = zs[m]
            hp = H[i + z] if i + z < nA else 0.0
            hm = H[i - z] if i - z >= 0 else 0.0
            lap += ps[m] * (hp + hm - 2.0 * H[i])
            if i + z < nA and xi[k0 + i + z] != occ:
                d = hp - H[i]
                qv_ex += ps[m] * d * d
        if occ:
            comp += dH[i] / N + N * lap + g[i] * Bc[i] / N
    # shift part: sum_x b(x) S_x^2 with S_x = sum_{z >= x} xi(z) g(z)
    S = 0.0
    qv_sh = 0.0
    for i in range(nA - 1, -1, -1):
        if xi[k0 + i]:
            S += g[i]
        qv_sh += b[i] * S * S
    qv_sh += bleft * S * S
    qv_sh /= N * N
    # fourth printed line
    P1 = 0.0
    P2 = 0.0
    line4 = 0.0
    for i in range(nA):
        if xi[k0 + i]:
            Bprev = Bc[i - 1] if i > 0 else bleft
            line4 += H[i] * (Bprev * P1 - P2)
            P1 += g[i]
            P2 += g[i] * Bc[i]
    line4 *= -2.0 / (N * N)
    return comp, qv_ex + qv_sh, line4


@njit
def pair_at(xi, k0, H, N):
    """``<pi, H>`` with ``H`` given on the block starting at ``k0``."""
    s = 0.0
    for i in range(H.shape[0]):
        if xi[k0 + i]:
            s += H[i]
    return s / N


@njit
def _integrate(xi, k0, N, zs, ps, tg, Htab, dHtab, btab, bltab, ta, tb, out, H, dH, b, g, Bc):
    """Add ``int_ta^tb`` of the three integrands to ``out``."""
    dt = tg[1] - tg[0]
    last = tg.shape[0] - 2
    while ta < tb:
        j = int(ta / dt)
        if j > last:
            j = last
        if j < last and tg[j + 1] <= ta:
            j += 1
        node = tg[j + 1]
        te = tb if (tb < node or j == last) else node
        # the three Simpson nodes stay inside grid cell j
        f0 = _eval_cell(xi, k0, N, zs, ps, tg, Htab, dHtab, btab, bltab, j, ta, H, dH, b, g, Bc)
        fm = _eval_cell(xi, k0, N, zs, ps, tg, Htab, dHtab, btab, bltab, j, 0.5 * (ta + te),
                        H, dH, b, g, Bc)
        f1 = _eval_cell(xi, k0, N, zs, ps, tg, Htab, dHtab, btab, bltab, j, te, H, dH, b, g, Bc)
        h6 = (te - ta) / 6.0
        for q in range(3):
            out[q] += h6 * (f0[q] + 4.0 * fm[q] + f1[q])
        ta = te


@njit
def _eval_cell(xi, k0, N, zs, ps, tg, Htab, dHtab, btab, bltab, j, s, H, dH, b, g, Bc):
    dt = tg[1] - tg[0]
    w = (s - tg[j]) / dt
    _interp_row(Htab, j, w, H)
    _interp_row(dHtab, j, w, dH)
    _interp_row(btab, j, w, b)
    bl = (1.0 - w) * bltab[j] + w * bltab[j + 1]
    c, q, l4 = integrands(xi, k0, N, zs, ps, H, dH, b, bl, g, Bc)
    return (c, q, l4)


@njit
def replay(cells, log_t, log_k, log_a, log_b, N, k0, k1, zs, ps,
           tg, Htab, bltab, dHtab, btab, eval_times, T):
    """Replay the log; returns ``(F, compensator, qv, line4)`` at ``eval_times``.

    ``cells`` is modified in place and ends as the final configuration.
    """
    nA = k1 - k0
    ne = eval_times.shape[0]
    F = np.zeros(ne)
    comp = np.zeros(ne)
    qv = np.zeros(ne)
    l4 = np.zeros(ne)
    H = np.empty(nA)
    dH = np.empty(nA)
    b = np.empty(nA)
    g = np.empty(nA)
    Bc = np.empty(nA)
    out = np.zeros(3)
    t = 0.0
    ei = 0
    nev = log_t.shape[0]
    for e in range(nev + 1):
        if e < nev:
            te = log_t[e]
            kind = log_k[e]
            a = log_a[e]
            bb = log_b[e]
            touches = True
            if kind == EV_EXCHANGE:
                touches = (k0 <= a < k1) or (k0 <= bb < k1)
            elif kind == EV_INTERIOR:
                touches = a < k1
            elif kind != EV_EXT_LEFT:
                touches = False
        else:
            te = T
            kind = -1
            touches = True
        if touches:
            while ei < ne and eval_times[ei] <= te:
                _integrate(cells, k0, N, zs, ps, tg, Htab, dHtab, btab, bltab, t,
                           eval_times[ei], out, H, dH, b, g, Bc)
                t = eval_times[ei]
                dtg = tg[1] - tg[0]
                j = int(t / dtg)
                if j >= tg.shape[0] - 1:
                    j = tg.shape[0] - 2
                _interp_row(Htab, j, (t - tg[j]) / dtg, H)
                F[ei] = pair_at(cells, k0, H, N)
                comp[ei] = out[0]
                qv[ei] = out[1]
                l4[ei] = out[2]
                ei += 1
            if e < nev:
                _integrate(cells, k0, N, zs, ps, tg, Htab, dHtab, btab, bltab, t, te,
                           out, H, dH, b, g, Bc)
                t = te
        if e < nev:
            if kind == EV_EXCHANGE:
                exchange_inplace(cells, a, bb)
            elif kind == EV_INTERIOR:
                shift_inplace(cells, a)
            elif kind == EV_EXT_LEFT:
                window_shift_inplace(cells)
    return F, comp, qv, l4
