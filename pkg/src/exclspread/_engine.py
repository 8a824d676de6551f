"""Event loop for the right-shift (mode 0) and centered-spread (mode 1) processes.

One exponential clock of total rate

    R = N^2 L / 2           exchange attempts, uniform site then z ~ 2 p(z)
      + L * lam             interior shift/spread candidates, thinned
      + envL + envR         exterior candidates, thinned

drives the whole window.  ``lam`` bounds the rate field everywhere, the
exterior envelopes are sums of ``min(lam, C exp(-beta |x/N|))`` over the
sites beyond the window edges.  In mode 1 those sums depend on the anchor,
so they are recomputed after each accepted spread; the total rate is still
a valid dominating rate for the next event, which keeps the sampler exact.

Positions are handled in half steps: cell ``i`` sits at ``(anchor + 2 i) / 2``.
"""

import numpy as np

from ._jit import njit
from .lattice import exchange_inplace, shift_inplace, spread_inplace, window_shift_inplace
from .rng import next_double, next_exp

MODE_EPRS = 0
MODE_EPCS = 1

# event log kinds
EV_EXCHANGE = 0
EV_INTERIOR = 1
EV_EXT_LEFT = 2
EV_EXT_RIGHT = 3

# status codes
OK = 0
ENVELOPE_VIOLATION = 1

# counters
C_EVENTS = 0
C_EX_ATTEMPTS = 1
C_EX_MOVES = 2
C_EX_BLOCKED_EDGE = 3
C_IN_CANDIDATES = 4
C_IN_ACCEPTED = 5
C_EL_CANDIDATES = 6
C_EL_ACCEPTED = 7
C_ER_CANDIDATES = 8
C_ER_ACCEPTED = 9
C_OUT_CELLS = 10
C_OUT_PARTICLES = 11
N_COUNTERS = 12

# snapshot metadata columns
M_ANCHOR = 0
M_MASS = 1
M_EXT_LEFT = 2
M_EXT_RIGHT = 3
M_INTERIOR = 4
M_OUT_PARTICLES = 5
M_EVENTS = 6
N_META = 7

ENVELOPE_SLACK = 1e-9


# --------------------------------------------------------------------------
# rate field evaluation (mirrors kernels.RateField)


@njit
def modulation_at(mod, mpar, t):
    if mod == 0:
        return 1.0
    if mod == 1:
        return 1.0 + mpar[0] * np.sin(mpar[1] * t + mpar[2])
    return np.exp(-mpar[3] * t)


@njit
def shift_at(dvals, ddt, t):
    n = dvals.shape[0]
    if n == 0:
        return 0.0
    x = t / ddt
    j = int(x)
    if j >= n - 1:
        return dvals[n - 1]
    if j < 0:
        return dvals[0]
    f = x - j
    return dvals[j] * (1.0 - f) + dvals[j + 1] * f


@njit
def shape_at(fam, spar, tab, x):
    if fam == 0:
        return spar[0] * np.exp(-spar[2] * abs(x - spar[1]))
    if fam == 1:
        d = (x - spar[1]) / spar[2]
        return spar[0] * np.exp(-d * d)
    u0 = spar[3]
    du = spar[4]
    n = tab.shape[0]
    y = (x - u0) / du
    if y < 0.0:
        return tab[0] * np.exp(-spar[5] * (u0 - x))
    if y > n - 1:
        return tab[n - 1] * np.exp(-spar[6] * (x - (u0 + du * (n - 1))))
    j = int(y)
    if j >= n - 1:
        j = n - 2
    f = y - j
    return tab[j] * (1.0 - f) + tab[j + 1] * f


@njit
def rate_at(rate, t, u):
    fam, spar, tab, mod, mpar, dvals, ddt = rate
    return modulation_at(mod, mpar, t) * shape_at(fam, spar, tab, u - shift_at(dvals, ddt, t))


# --------------------------------------------------------------------------
# exterior envelopes


@njit
def ext_envelope(q2_first, dirn, N, C, beta, lam):
    """Envelope mass of the sites ``q2_first/2 + dirn*j``, j >= 0.

    Returns ``(total, near, m0, q2_far)``: the mass of the sites before the
    walk passes the origin, the number of capped sites after it, and the
    half-step position of the first site past the origin.
    """
    if C <= 0.0 or lam <= 0.0:
        return 0.0, 0.0, 0, q2_first
    near = 0.0
    q2 = q2_first
    while q2 * dirn < 0:
        near += min(lam, C * np.exp(-beta * abs(q2) / (2.0 * N)))
        q2 += 2 * dirn
    qa = abs(q2) / 2.0
    m0 = 0
    if C > lam:
        x = (N / beta) * np.log(C / lam) - qa
        if x > 0.0:
            m0 = int(np.ceil(x))
    r = np.exp(-beta / N)
    geo = C * np.exp(-beta * (qa + m0) / N) / (1.0 - r)
    return near + lam * m0 + geo, near, m0, q2


@njit
def ext_pick(s, q2_first, dirn, N, C, beta, lam, total, near, m0, q2_far):
    """Draw an exterior site from the envelope; returns ``(q2, envelope)``."""
    u = next_double(s) * total
    if u < near:
        q2 = q2_first
        while q2 * dirn < 0:
            e = min(lam, C * np.exp(-beta * abs(q2) / (2.0 * N)))
            if u < e:
                return q2, e
            u -= e
            q2 += 2 * dirn
        u = 0.0
    else:
        u -= near
    if u < lam * m0:
        m = int(u / lam)
        if m >= m0:
            m = m0 - 1
        return q2_far + 2 * dirn * m, lam
    r = np.exp(-beta / N)
    v = 1.0 - next_double(s)
    m = m0 + int(np.floor(np.log(v) / np.log(r)))
    qa = abs(q2_far) / 2.0 + m
    return q2_far + 2 * dirn * m, min(lam, C * np.exp(-beta * qa / N))


# --------------------------------------------------------------------------
# event loop


@njit
def _record(si, cells, anchor, n, W, snap_cells, snap_meta, snap_W, counters, mode):
    snap_cells[si, :] = cells
    snap_meta[si, M_ANCHOR] = anchor
    snap_meta[si, M_MASS] = n
    snap_meta[si, M_EXT_LEFT] = counters[C_EL_ACCEPTED]
    snap_meta[si, M_EXT_RIGHT] = counters[C_ER_ACCEPTED]
    snap_meta[si, M_INTERIOR] = counters[C_IN_ACCEPTED]
    snap_meta[si, M_OUT_PARTICLES] = counters[C_OUT_PARTICLES]
    snap_meta[si, M_EVENTS] = counters[C_EVENTS]
    if mode == MODE_EPRS:
        snap_W[si, :] = W


# resumable state: istate = [si, anchor, n, nlog, done], fstate = [t]
I_SNAP = 0
I_ANCHOR = 1
I_MASS = 2
I_NLOG = 3
I_DONE = 4


@njit
def run_kmc(mode, cells, N, T, zs, cum2p, rate, lam, envC, envB,
            snap_times, snap_cells, snap_meta, snap_W, W, counters, s,
            log_on, log_t, log_k, log_a, log_b, istate, fstate):
    """Simulate on ``[0, T]`` in place, resuming from ``istate``/``fstate``.

    Returns early (``istate[I_DONE] == 0``) when the event log is full; the
    caller enlarges the log and calls again.  The check happens before any
    random draw, so the trajectory does not depend on the log capacity.
    Returns the status code.
    """
    L = cells.shape[0]
    nz = zs.shape[0]
    si = istate[I_SNAP]
    anchor = istate[I_ANCHOR]
    n = istate[I_MASS]
    nlog = istate[I_NLOG]
    t = fstate[0]
    cap = log_t.shape[0]
    Rex = 0.5 * N * N * L
    Rin = lam * L
    eL, nearL, m0L, farL = ext_envelope(anchor - 2, -1, N, envC, envB, lam)
    eR, nearR, m0R, farR = ext_envelope(anchor + 2 * L, 1, N, envC, envB, lam)
    nsnap = snap_times.shape[0]
    status = OK
    done = 1
    while True:
        if log_on and nlog == cap:
            done = 0
            break
        R = Rex + Rin + eL + eR
        tn = t + next_exp(s, R)
        while si < nsnap and snap_times[si] < tn:
            _record(si, cells, anchor, n, W, snap_cells, snap_meta, snap_W, counters, mode)
            si += 1
        if tn > T:
            break
        t = tn
        counters[C_EVENTS] += 1
        v = next_double(s) * R
        kind = -1
        a = 0
        b = 0
        if v < Rex:
            counters[C_EX_ATTEMPTS] += 1
            slot = v / Rex * L
            i = int(slot)
            if i >= L:
                i = L - 1
            f = slot - i
            k = 0
            while k < nz - 1 and f >= cum2p[k]:
                k += 1
            j = i + zs[k]
            if j >= L:
                counters[C_EX_BLOCKED_EDGE] += 1
            elif exchange_inplace(cells, i, j):
                counters[C_EX_MOVES] += 1
                kind = EV_EXCHANGE
                a = i
                b = j
        elif v < Rex + Rin:
            counters[C_IN_CANDIDATES] += 1
            k = int((v - Rex) / lam)
            if k >= L:
                k = L - 1
            r = rate_at(rate, t, (anchor + 2 * k) / (2.0 * N))
            if r > lam * (1.0 + ENVELOPE_SLACK):
                status = ENVELOPE_VIOLATION
                break
            if next_double(s) * lam < r:
                counters[C_IN_ACCEPTED] += 1
                counters[C_OUT_CELLS] += 1
                if mode == MODE_EPRS:
                    counters[C_OUT_PARTICLES] += shift_inplace(cells, k)
                    W[k] += 1
                else:
                    counters[C_OUT_PARTICLES] += spread_inplace(cells, k)
                    anchor -= 1
                    n += 1
                kind = EV_INTERIOR
                a = k
        else:
            left = v < Rex + Rin + eL
            if left:
                counters[C_EL_CANDIDATES] += 1
                q2, env = ext_pick(s, anchor - 2, -1, N, envC, envB, lam, eL, nearL, m0L, farL)
            else:
                counters[C_ER_CANDIDATES] += 1
                q2, env = ext_pick(s, anchor + 2 * L, 1, N, envC, envB, lam, eR, nearR, m0R, farR)
            r = rate_at(rate, t, q2 / (2.0 * N))
            if r > env * (1.0 + ENVELOPE_SLACK):
                status = ENVELOPE_VIOLATION
                break
            if next_double(s) * env < r:
                if left:
                    counters[C_EL_ACCEPTED] += 1
                    kind = EV_EXT_LEFT
                    if mode == MODE_EPRS:
                        counters[C_OUT_CELLS] += 1
                        counters[C_OUT_PARTICLES] += window_shift_inplace(cells)
                    else:
                        anchor += 1
                        n += 1
                else:
                    counters[C_ER_ACCEPTED] += 1
                    kind = EV_EXT_RIGHT
                    if mode == MODE_EPCS:
                        anchor -= 1
                        n += 1
                b = q2
        if kind >= 0:
            if mode == MODE_EPCS and kind != EV_EXCHANGE:
                eL, nearL, m0L, farL = ext_envelope(anchor - 2, -1, N, envC, envB, lam)
                eR, nearR, m0R, farR = ext_envelope(anchor + 2 * L, 1, N, envC, envB, lam)
            if log_on:
                log_t[nlog] = t
                log_k[nlog] = kind
                log_a[nlog] = a
                log_b[nlog] = b
                nlog += 1
    if done == 1:
        while si < nsnap:
            _record(si, cells, anchor, n, W, snap_cells, snap_meta, snap_W, counters, mode)
            si += 1
    istate[I_SNAP] = si
    istate[I_ANCHOR] = anchor
    istate[I_MASS] = n
    istate[I_NLOG] = nlog
    istate[I_DONE] = done
    fstate[0] = t
    return status
