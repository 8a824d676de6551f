"""Small deterministic workloads, shared by the benchmark and the fallback test.

``python probe.py digest`` prints a JSON digest of the results;
``python probe.py time N REPLICAS`` prints timing of the right-shift kernel.
Set EXCLSPREAD_DISABLE_NUMBA=1 to run the interpreter path.
"""

import hashlib
import json
import sys
import time

import numpy as np

from exclspread import (
    JumpKernel,
    RateField,
    SimParams,
    TestFunction,
    b_from_h,
    dynkin_replay,
    plan_window,
    simulate_coupled,
    simulate_epcs,
    simulate_eprs,
)
from exclspread._jit import backend_name
from exclspread.measure import sample_bernoulli_profile
from exclspread.pde import smoothed_step

NN = JumpKernel.nearest_neighbor()


def _digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def digest(N=8, T=0.2):
    h = RateField.double_exp(1.0, 1.0, horizon=T)
    b = b_from_h(h)
    plan = plan_window(N, T, NN, h, 1.0)
    init = sample_bernoulli_profile(smoothed_step, N, plan, 5)
    p = SimParams(N, T, NN, b, plan, 5, (0.1, T), 0, True)
    rec = simulate_eprs(p, init)
    mart = dynkin_replay(rec, TestFunction(c=0.0, w=0.5), p, np.array([0.1, T]), n_grid=101)
    cplan = plan_window(N, T, NN, h, 1.0, process="epcs")
    cinit = sample_bernoulli_profile(smoothed_step, N, cplan, 5)
    cp = SimParams(N, T, NN, h, cplan, 5, (0.1, T))
    epcs = simulate_epcs(cp, cinit)
    coup = simulate_coupled(cp, cinit)
    return {
        "backend": backend_name(),
        "eprs": _digest(rec.snap_cells, rec.snap_meta, rec.W, rec.event_log.t),
        "martingale": _digest(mart.F, mart.compensator, mart.qv, mart.line4),
        "epcs": _digest(epcs.snap_cells, epcs.snap_meta),
        "coupled": _digest(coup.J_times, coup.epcs.snap_cells, coup.aux.snap_cells,
                           np.array(list(coup.counters.values()))),
    }


def timing(N, replicas, T=0.5):
    h = RateField.double_exp(0.5, 1.0, horizon=T)
    b = b_from_h(h)
    plan = plan_window(N, T, NN, h, 1.5)
    init = sample_bernoulli_profile(smoothed_step, N, plan, 1)
    simulate_eprs(SimParams(N, min(T, 0.01), NN, b, plan, 1, ()), init)  # compile or warm up
    events = 0
    t0 = time.perf_counter()
    for r in range(replicas):
        rec = simulate_eprs(SimParams(N, T, NN, b, plan, 1, (T,), r), init)
        events += rec.counters["events"]
    dt = time.perf_counter() - t0
    return {"backend": backend_name(), "N": N, "replicas": replicas, "events": events,
            "seconds": dt, "ns_per_event": 1e9 * dt / max(events, 1)}


if __name__ == "__main__":
    if sys.argv[1] == "digest":
        print(json.dumps(digest()))
    else:
        print(json.dumps(timing(int(sys.argv[2]), int(sys.argv[3]))))
