"""Event loop of the coupled centered-spread / auxiliary pair.

Each marginal is a growable cell sequence (0 empty, 1 first class, 2 second
class) with a half-step anchor.  First-class particles are labeled by rank,
so ``posE[k]`` and ``posA[k]`` are the cells of the two particles carrying
label ``k``.  Births insert a cell and never discard one; the sequences grow
into preallocated capacity and the caller restarts with more room when it
runs out (the trajectory does not depend on the capacity).

Nearest-neighbour kernel only: with longer jumps first-class particles could
overtake one another and rank labels would no longer be preserved by the
paired jumps.
"""

import numpy as np

from ._engine import ext_envelope, ext_pick, rate_at, shift_at
from ._jit import njit
from .rng import next_double, next_exp

OK = 0
ENVELOPE_VIOLATION = 1
CAPACITY = 2
INVARIANT_BROKEN = 3

EMPTY = 0
FIRST = 1
SECOND = 2

# counters
K_EVENTS = 0
K_PAIRED = 1
K_SECOND = 2
K_CASE1 = 3
K_CASE2 = 4
K_CASE3 = 5
K_RELABEL = 6
K_UNCOUPLED_E = 7
K_UNCOUPLED_A = 8
K_MAX_EXCESS = 9
N_KCOUNTERS = 10

# snapshot meta columns
S_ANCHOR_E = 0
S_ANCHOR_A = 1
S_LEN_E = 2
S_LEN_A = 3
S_N = 4
S_NHAT = 5
S_J = 6
N_SMETA = 7

# istate
Q_ANCHOR_E = 0
Q_ANCHOR_A = 1
Q_LEN_E = 2
Q_LEN_A = 3
Q_N = 4
Q_NHAT = 5
Q_F = 6
Q_M = 7
Q_L = 8
Q_J = 9
N_QSTATE = 10


@njit
def _insert(cells, length, pos, F, sc, nsc, i, value):
    """Insert ``value`` before cell ``i``; shifts stored indices >= i."""
    for r in range(length, i, -1):
        cells[r] = cells[r - 1]
    cells[i] = value
    rank = 0
    for k in range(F):
        if pos[k] >= i:
            pos[k] += 1
        else:
            rank += 1
    for k in range(nsc):
        if sc[k] >= i:
            sc[k] += 1
    return rank


@njit
def _insert_rank(pos, F, rank, i):
    for k in range(F, rank, -1):
        pos[k] = pos[k - 1]
    pos[rank] = i


@njit
def _ordered(cells, pos, F):
    for k in range(F):
        if cells[pos[k]] != FIRST:
            return False
        if k > 0 and pos[k] <= pos[k - 1]:
            return False
    return True


@njit
def _excess(pos_e, pos_a, F, anchor_e, anchor_a, J):
    """``max_k |X_k - X^_k| - J`` in lattice units (half steps / 2)."""
    worst = 0.0
    for k in range(F):
        d = abs((anchor_e + 2 * pos_e[k]) - (anchor_a + 2 * pos_a[k])) / 2.0
        if d > worst:
            worst = d
    return worst - J


@njit
def _jump(cells, length, pos, k, sc, nsc, dirn):
    """First-class particle of rank ``k`` attempts one step."""
    i = pos[k]
    j = i + dirn
    if j < 0 or j >= length:
        return
    c = cells[j]
    if c == EMPTY:
        cells[j] = FIRST
        cells[i] = EMPTY
        pos[k] = j
    elif c == SECOND:
        cells[j] = FIRST
        cells[i] = SECOND
        pos[k] = j
        for q in range(nsc):
            if sc[q] == j:
                sc[q] = i
                break


@njit
def _jump_second(cells, length, sc, q, dirn):
    i = sc[q]
    j = i + dirn
    if j < 0 or j >= length:
        return
    if cells[j] == EMPTY:
        cells[j] = SECOND
        cells[i] = EMPTY
        sc[q] = j


@njit
def aux_rate(hpack, dvals, ddt, t, u, ntrans, N):
    """``b(t, u + ntrans / (2N))`` with ``b(t, v) = h(t, v - D(t))``."""
    return rate_at(hpack, t, u + ntrans / (2.0 * N) - shift_at(dvals, ddt, t))


@njit
def _record(si, cE, cA, q, snap_cE, snap_cA, snap_meta):
    snap_cE[si, :] = cE
    snap_cA[si, :] = cA
    snap_meta[si, S_ANCHOR_E] = q[Q_ANCHOR_E]
    snap_meta[si, S_ANCHOR_A] = q[Q_ANCHOR_A]
    snap_meta[si, S_LEN_E] = q[Q_LEN_E]
    snap_meta[si, S_LEN_A] = q[Q_LEN_A]
    snap_meta[si, S_N] = q[Q_N]
    snap_meta[si, S_NHAT] = q[Q_NHAT]
    snap_meta[si, S_J] = q[Q_J]


@njit
def run_coupled(cE, cA, posE, posA, scE, scA, q, N, T, hpack, dvals, ddt, lam,
                envC, envB, dmax, snap_times, snap_cE, snap_cA, snap_meta,
                jlog, counters, s):
    """Simulate the coupled pair on ``[0, T]`` in place; returns a status code.

    ``q`` holds anchors, lengths, masses and class counts (see ``Q_*``).
    ``jlog`` receives the time of every increment of J.
    """
    cap = cE.shape[0]
    capJ = jlog.shape[0]
    nsnap = snap_times.shape[0]
    N2 = float(N) * float(N)
    aE = q[Q_ANCHOR_E]
    aA = q[Q_ANCHOR_A]
    lE = q[Q_LEN_E]
    lA = q[Q_LEN_A]
    n = q[Q_N]
    nh = q[Q_NHAT]
    F = q[Q_F]
    m = q[Q_M]
    l = q[Q_L]
    J = q[Q_J]
    t = 0.0
    si = 0
    status = OK
    recompute = True
    # envelope state
    iX0 = 0
    iX1 = 0
    delta = 0
    off = 0
    eEL = 0.0
    eER = 0.0
    eAL = 0.0
    eAR = 0.0
    nEL = 0.0
    nER = 0.0
    nAL = 0.0
    nAR = 0.0
    mEL = 0
    mER = 0
    mAL = 0
    mAR = 0
    fEL = 0
    fER = 0
    fAL = 0
    fAR = 0
    qEL = 0
    qER = 0
    qAL = 0
    qAR = 0
    envCA = envC
    while True:
        if recompute:
            # pairing of sites: x' = x, or x + 1/2 when the lattices differ
            delta = (n - nh) % 2
            off = (aE + delta - aA) // 2
            iX0 = max(0, -off)
            iX1 = min(lE, lA - off)
            if iX1 < iX0:
                iX1 = iX0
            # shift of the auxiliary field relative to h is in [-dmax, 0] + (nh-1)/2N
            c0 = (nh - 1) / (2.0 * N)
            cm = max(abs(c0), abs(c0 - dmax))
            envCA = envC * np.exp(envB * cm)
            qEL = aE + 2 * (iX0 - 1)
            qER = aE + 2 * iX1
            qAL = aA + 2 * (iX0 + off - 1)
            qAR = aA + 2 * (iX1 + off)
            eEL, nEL, mEL, fEL = ext_envelope(qEL, -1, N, envC, envB, lam)
            eER, nER, mER, fER = ext_envelope(qER, 1, N, envC, envB, lam)
            eAL, nAL, mAL, fAL = ext_envelope(qAL, -1, N, envCA, envB, lam)
            eAR, nAR, mAR, fAR = ext_envelope(qAR, 1, N, envCA, envB, lam)
            recompute = False
        Rp = N2 * F
        Rs = N2 * (m + l)
        Rx = lam * (iX1 - iX0)
        R = Rp + Rs + Rx + eEL + eER + eAL + eAR
        if R <= 0.0:
            break
        tn = t + next_exp(s, R)
        while si < nsnap and snap_times[si] < tn:
            q[Q_ANCHOR_E] = aE
            q[Q_ANCHOR_A] = aA
            q[Q_LEN_E] = lE
            q[Q_LEN_A] = lA
            q[Q_N] = n
            q[Q_NHAT] = nh
            q[Q_J] = J
            _record(si, cE, cA, q, snap_cE, snap_cA, snap_meta)
            ex = _excess(posE, posA, F, aE, aA, J)
            if ex > counters[K_MAX_EXCESS]:
                counters[K_MAX_EXCESS] = int(np.ceil(ex))
            si += 1
        if tn > T:
            break
        t = tn
        counters[K_EVENTS] += 1
        v = next_double(s) * R
        if v < Rp:
            counters[K_PAIRED] += 1
            x = v / N2
            k = int(x)
            if k >= F:
                k = F - 1
            dirn = 1 if x - k < 0.5 else -1
            _jump(cE, lE, posE, k, scE, m, dirn)
            _jump(cA, lA, posA, k, scA, l, dirn)
            continue
        v -= Rp
        if v < Rs:
            counters[K_SECOND] += 1
            x = v / N2
            k = int(x)
            if k >= m + l:
                k = m + l - 1
            dirn = 1 if x - k < 0.5 else -1
            if k < m:
                _jump_second(cE, lE, scE, k, dirn)
            else:
                _jump_second(cA, lA, scA, k - m, dirn)
            continue
        v -= Rs
        birthE = -2  # cell index of an EPCS birth, -1 exterior left, lE exterior right
        birthA = -2
        kindE = SECOND
        kindA = SECOND
        if v < Rx:
            i = iX0 + int(v / lam)
            if i >= iX1:
                i = iX1 - 1
            qe = aE + 2 * i
            r1 = rate_at(hpack, t, qe / (2.0 * N))
            r2 = aux_rate(hpack, dvals, ddt, t, (qe + delta) / (2.0 * N), nh - 1, N)
            if r1 > lam * (1.0 + 1e-9) or r2 > lam * (1.0 + 1e-9):
                status = ENVELOPE_VIOLATION
                break
            w = next_double(s) * lam
            lo = min(r1, r2)
            hi = max(r1, r2)
            if w < lo:
                counters[K_CASE3] += 1
                birthE = i
                birthA = i + off
                kindE = FIRST
                kindA = FIRST
            elif w < hi:
                if r1 > r2:
                    counters[K_CASE1] += 1
                    birthE = i
                else:
                    counters[K_CASE2] += 1
                    birthA = i + off
            else:
                continue
        else:
            v -= Rx
            side = 0
            if v < eEL:
                q2, env = ext_pick(s, qEL, -1, N, envC, envB, lam, eEL, nEL, mEL, fEL)
                r = rate_at(hpack, t, q2 / (2.0 * N))
            elif v < eEL + eER:
                q2, env = ext_pick(s, qER, 1, N, envC, envB, lam, eER, nER, mER, fER)
                r = rate_at(hpack, t, q2 / (2.0 * N))
            elif v < eEL + eER + eAL:
                side = 1
                q2, env = ext_pick(s, qAL, -1, N, envCA, envB, lam, eAL, nAL, mAL, fAL)
                r = aux_rate(hpack, dvals, ddt, t, q2 / (2.0 * N), nh - 1, N)
            else:
                side = 1
                q2, env = ext_pick(s, qAR, 1, N, envCA, envB, lam, eAR, nAR, mAR, fAR)
                r = aux_rate(hpack, dvals, ddt, t, q2 / (2.0 * N), nh - 1, N)
            if r > env * (1.0 + 1e-9):
                status = ENVELOPE_VIOLATION
                break
            if next_double(s) * env >= r:
                continue
            if side == 0:
                counters[K_UNCOUPLED_E] += 1
                i = (q2 - aE) // 2
                birthE = -1 if i < 0 else (lE if i >= lE else i)
            else:
                counters[K_UNCOUPLED_A] += 1
                i = (q2 - aA) // 2
                birthA = -1 if i < 0 else (lA if i >= lA else i)
        # apply the births
        if (birthE >= 0 and birthE < lE and lE >= cap) or (birthA >= 0 and birthA < lA and lA >= cap):
            status = CAPACITY
            break
        rankE = -1
        rankA = -1
        if birthE != -2:
            n += 1
            if birthE < 0:
                aE += 1
            elif birthE >= lE:
                aE -= 1
            else:
                rankE = _insert(cE, lE, posE, F, scE, m, birthE, kindE)
                lE += 1
                aE -= 1
                if kindE == SECOND:
                    scE[m] = birthE
                    m += 1
            if kindE == SECOND:
                J += 1
        if birthA != -2:
            nh += 1
            if birthA < 0:
                aA += 1
            elif birthA >= lA:
                aA -= 1
            else:
                rankA = _insert(cA, lA, posA, F, scA, l, birthA, kindA)
                lA += 1
                aA -= 1
                if kindA == SECOND:
                    scA[l] = birthA
                    l += 1
            if kindA == SECOND:
                J += 1
        if kindE == SECOND and birthE != -2 or kindA == SECOND and birthA != -2:
            # cases 1 and 2 touch one marginal only: J grows by exactly one
            if J > capJ:
                status = CAPACITY
                break
            jlog[J - 1] = t
        if kindE == FIRST:
            # new first-class pair; rank labels realise the relabeling sweep
            if rankE != rankA:
                counters[K_RELABEL] += 1
            _insert_rank(posE, F, rankE, birthE)
            _insert_rank(posA, F, rankA, birthA)
            F += 1
            if not (_ordered(cE, posE, F) and _ordered(cA, posA, F)):
                status = INVARIANT_BROKEN
                break
        if abs(n - nh) > J:
            status = INVARIANT_BROKEN
            break
        ex = _excess(posE, posA, F, aE, aA, J)
        if ex > counters[K_MAX_EXCESS]:
            counters[K_MAX_EXCESS] = int(np.ceil(ex))
        recompute = True
    if status == OK:
        q[Q_ANCHOR_E] = aE
        q[Q_ANCHOR_A] = aA
        q[Q_LEN_E] = lE
        q[Q_LEN_A] = lA
        q[Q_N] = n
        q[Q_NHAT] = nh
        q[Q_J] = J
        while si < nsnap:
            _record(si, cE, cA, q, snap_cE, snap_cA, snap_meta)
            si += 1
    q[Q_F] = F
    q[Q_M] = m
    q[Q_L] = l
    q[Q_J] = J
    return status
