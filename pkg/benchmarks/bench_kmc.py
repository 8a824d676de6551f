"""Compiled kernels against the interpreter fallback on the same workload.

    python benchmarks/bench_kmc.py [--N 32] [--replicas 4]

Each backend runs in its own process because the switch is read at import.
"""

import argparse
import json
import os
import subprocess
import sys
from pathlib import Path

PROBE = Path(__file__).with_name("probe.py")


def run(mode, N, replicas):
    env = dict(os.environ)
    env.pop("EXCLSPREAD_DISABLE_NUMBA", None)
    if mode == "python":
        env["EXCLSPREAD_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, str(PROBE), "time", str(N), str(replicas)],
                         env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--replicas", type=int, default=4)
    args = ap.parse_args(argv)
    res = {m: run(m, args.N, args.replicas) for m in ("numba", "python")}
    for m, r in res.items():
        print(f"{m:>7}: {r['events']} events in {r['seconds']:.3f}s "
              f"({r['ns_per_event']:.0f} ns/event)")
    print(f"speedup: {res['python']['seconds'] / res['numba']['seconds']:.0f}x")


if __name__ == "__main__":
    main()
