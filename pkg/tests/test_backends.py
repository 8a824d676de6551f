"""The interpreter fallback runs the same kernel source, bit for bit."""

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

PROBE = Path(__file__).resolve().parents[1] / "benchmarks" / "probe.py"


def _digest(disable):
    env = dict(os.environ)
    env.pop("EXCLSPREAD_DISABLE_NUMBA", None)
    if disable:
        env["EXCLSPREAD_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, str(PROBE), "digest"], env=env, check=True,
                         capture_output=True, text=True, timeout=900).stdout
    return json.loads(out)


@pytest.fixture(scope="module")
def digests():
    return _digest(False), _digest(True)


def test_backends_selected(digests):
    compiled, interp = digests
    assert interp["backend"] == "python"
    pytest.importorskip("numba")
    assert compiled["backend"] == "numba"


@pytest.mark.parametrize("key", ["eprs", "martingale", "epcs", "coupled"])
def test_fallback_is_bitwise_equal(digests, key):
    compiled, interp = digests
    assert compiled[key] == interp[key]


def test_benchmark_runs():
    out = subprocess.run([sys.executable, str(PROBE.with_name("bench_kmc.py")), "--N", "8",
                          "--replicas", "1"], check=True, capture_output=True, text=True,
                         timeout=900).stdout
    assert "speedup" in out
