"""Experiment configurations and the verification pipelines behind the CLI.

A configuration is a JSON object validated against ``configs/schema.json``
and then checked semantically.  Each pipeline returns a :class:`Result`:
named checks with their numbers, and tables that the CLI writes as CSV.
Wall-clock times are reported alongside the checks but never written to
files, so artifacts depend on the configuration and seed only.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .coupling import simulate_coupled
from .dynamics import SimParams, SimulationError, plan_window, run_ensemble, simulate_epcs, simulate_eprs
from .kernels import JumpKernel, RateField, TimeModulation, b_from_h, sigma_sq
from .lattice import to_text
from .measure import (
    EnsembleStats,
    TestFunction,
    dynkin_replay,
    empirical_pair,
    hydro_error,
    martingale_tables,
    pair_snapshots,
    sample_bernoulli_profile,
    wlln_statistic,
    wlln_target,
)
from .pde import (
    GridSpec,
    heat_gaussian,
    l2_diff,
    richardson,
    smoothed_step,
    solve_convdiff,
    solve_epcs_pde,
    solve_eprs_pde,
    transform_solution,
)

logger = logging.getLogger(__name__)

__all__ = ["ConfigError", "ExperimentConfig", "Check", "Result", "load_schema", "load_config",
           "default_config", "parse_config", "run_experiment", "derive_seed"]

PIPELINES = ("heat", "transform", "wlln", "hydro", "martingale", "coupling", "simulate", "pde")
PROCESSES = ("eprs", "epcs", "coupled", "ssep")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# --------------------------------------------------------------------------
# configuration


def load_schema():
    return json.loads(resources.files("exclspread").joinpath("configs/schema.json").read_text())


def default_config(name):
    """A packaged configuration by name (``configs/<name>.json``)."""
    res = resources.files("exclspread").joinpath(f"configs/{name}.json")
    if not res.is_file():
        raise ConfigError("", f"no packaged configuration {name!r}")
    return json.loads(res.read_text())


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from exc


def _validate_schema(raw):
    import jsonschema

    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(path, e.message)


def kernel_from_spec(spec):
    if spec.get("type", "nearest_neighbor") == "nearest_neighbor":
        return JumpKernel.nearest_neighbor()
    return JumpKernel.from_positive({int(k): v for k, v in spec["probs"].items()})


def rate_from_spec(spec, T):
    mod = TimeModulation(**spec.get("modulation", {"kind": "constant"}))
    fam = spec.get("family", "double_exp")
    amp = float(spec.get("amplitude", 1.0))
    if fam == "zero" or amp == 0.0:
        return RateField.zero(horizon=T)
    if fam == "double_exp":
        return RateField.double_exp(amp, float(spec.get("beta", 1.0)),
                                    float(spec.get("center", 0.0)), modulation=mod, horizon=T)
    if fam == "gaussian":
        return RateField.gaussian(amp, float(spec.get("width", 1.0)),
                                  float(spec.get("center", 0.0)), modulation=mod, horizon=T)
    return RateField.tabulated(float(spec["u0"]), float(spec["du"]),
                               amp * np.asarray(spec["values"], dtype=float),
                               float(spec.get("decay_left", 1.0)),
                               float(spec.get("decay_right", 1.0)), modulation=mod, horizon=T)


def profile_from_spec(spec):
    kind = spec.get("type", "constant")
    if kind == "constant":
        v = float(spec.get("value", 0.5))
        return lambda u: np.full_like(np.asarray(u, dtype=float), v)
    if kind == "smoothed_step":
        lv, a, b, eps = (float(spec.get(k, d)) for k, d in
                         (("level", 0.5), ("a", -1.0), ("b", 1.0), ("eps", 0.1)))
        return lambda u: smoothed_step(u, lv, a, b, eps)
    if kind == "gaussian":
        var = float(spec.get("variance", 1.0))
        return lambda u: heat_gaussian(u, 0.0, 0.5, var)
    raise ConfigError("initial/type", f"unknown profile {kind!r}")


def tests_from_spec(specs):
    return [TestFunction(family=s.get("family", "raised_cosine"), c=float(s.get("c", 0.0)),
                         w=float(s.get("w", 0.5)), velocity=float(s.get("velocity", 0.0)))
            for s in specs]


@dataclass
class ExperimentConfig:
    raw: dict
    name: str
    pipeline: str
    process: str
    kernel: JumpKernel
    h: RateField
    rho0: object
    N_list: list
    replicas: int
    T: float
    snapshot_times: tuple
    observe: float
    grid: dict
    tests: list
    seed: int
    threads: int
    thresholds: dict
    options: dict = field(default_factory=dict)


def parse_config(raw, overrides=None):
    """Validate ``raw`` (schema, then semantics) and build the objects."""
    raw = json.loads(json.dumps(raw))
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    _validate_schema(raw)
    N_list = [int(n) for n in raw.get("N", [32])]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ConfigError("N", "N-list must be strictly increasing")
    T = float(raw["T"])
    times = tuple(float(t) for t in raw.get("snapshot_times", [T]))
    if any(b < a for a, b in zip(times, times[1:])) or (times and (times[0] < 0 or times[-1] > T)):
        raise ConfigError("snapshot_times", "must be sorted inside [0, T]")
    try:
        kernel = kernel_from_spec(raw.get("kernel", {}))
    except ValueError as exc:
        raise ConfigError("kernel", str(exc)) from exc
    try:
        h = rate_from_spec(raw.get("rate", {"family": "zero"}), T)
    except (ValueError, KeyError) as exc:
        raise ConfigError("rate", str(exc)) from exc
    process = raw.get("process", "eprs")
    if process == "ssep" and not h.is_zero:
        raise ConfigError("rate", "process 'ssep' needs a zero rate field")
    try:
        tests = tests_from_spec(raw.get("test_functions", [{"c": 0.0, "w": 0.5}]))
    except ValueError as exc:
        raise ConfigError("test_functions", str(exc)) from exc
    return ExperimentConfig(
        raw=raw, name=raw.get("name", raw["pipeline"]), pipeline=raw["pipeline"],
        process=process, kernel=kernel, h=h, rho0=profile_from_spec(raw.get("initial", {})),
        N_list=N_list, replicas=int(raw.get("replicas", 1)), T=T, snapshot_times=times,
        observe=float(raw.get("window", {}).get("observe", 1.5)), grid=raw.get("grid", {}),
        tests=tests, seed=int(raw.get("seed", 0)), threads=int(raw.get("threads", 1)),
        thresholds=raw.get("thresholds", {}), options=raw.get("options", {}))


def derive_seed(seed, *parts):
    """64-bit seed for a sub-experiment, a pure function of its labels."""
    text = ":".join(str(p) for p in (seed, *parts))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


# --------------------------------------------------------------------------
# results


@dataclass
class Check:
    criterion: str
    passed: bool
    numbers: dict
    seconds: float | None = None

    def line(self):
        nums = ", ".join(f"{k}={_fmt(v)}" for k, v in self.numbers.items())
        t = f" [{self.seconds:.1f}s]" if self.seconds is not None else ""
        return f"{'PASS' if self.passed else 'FAIL'} {self.criterion}: {nums}{t}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


@dataclass
class Result:
    name: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    texts: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    failed_replicas: int = 0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary_json(self):
        out = dict(self.summary)
        out["name"] = self.name
        out["failed_replicas"] = self.failed_replicas
        out["checks"] = [{"criterion": c.criterion, "passed": bool(c.passed), "numbers": c.numbers}
                         for c in self.checks]
        out["passed"] = bool(self.passed)
        return out


def _decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def _grid(cfg, T=None, save_times=None):
    g = cfg.grid
    return GridSpec(float(g.get("u_min", -8.0)), float(g.get("u_max", 8.0)),
                    float(g.get("du", 0.01)), cfg.T if T is None else T,
                    tuple(save_times if save_times is not None else cfg.snapshot_times))


def _ensemble(task, cfg, result):
    """Run ``task(r)`` for every replica; failed replicas are counted and dropped."""

    def safe(r):
        try:
            return task(r)
        except SimulationError as exc:
            logger.warning("replica %d failed: %s", r, exc)
            return None

    out = run_ensemble(safe, cfg.replicas, cfg.threads)
    ok = [o for o in out if o is not None]
    result.failed_replicas += len(out) - len(ok)
    if not ok:
        raise SimulationError("every replica failed")
    return ok


# --------------------------------------------------------------------------
# pipelines


def run_heat(cfg, result):
    s2 = sigma_sq(cfg.kernel)
    var0 = float(cfg.raw.get("initial", {}).get("variance", 1.0))
    grid = _grid(cfg, save_times=(cfg.T,))
    errs = []
    rows = []
    times = []
    sols = []
    for k in (1, 2):
        g = grid if k == 1 else grid.refined(2)
        t0 = time.perf_counter()
        sol = solve_convdiff(s2, init=lambda u: heat_gaussian(u, 0.0, s2, var0), grid=g)
        times.append(time.perf_counter() - t0)
        err = float(np.max(np.abs(sol.values[-1] - heat_gaussian(sol.u, cfg.T, s2, var0))))
        errs.append(err)
        rows.append((g.du, sol.meta["steps"], err))
        sols.append(sol)
    tol = float(cfg.thresholds.get("max_error", 1e-3))
    budget = float(cfg.thresholds.get("seconds", 10.0))
    result.checks.append(Check("1 heat oracle", errs[0] < tol and times[0] < budget,
                               {"du": grid.du, "max_error": errs[0], "tolerance": tol},
                               times[0]))
    ratio = errs[0] / errs[1]
    need = float(cfg.thresholds.get("order_ratio", 3.5))
    result.checks.append(Check("2 order under du halving", ratio >= need,
                               {"error_du": errs[0], "error_du_half": errs[1], "ratio": ratio,
                                "required": need}))
    result.tables["heat_errors"] = (("du", "steps", "max_error"), rows)
    result.tables["solution"] = _grid_table(sols[0])
    result.summary.update({"max_error": errs[0], "ratio": ratio})


def _grid_table(gf):
    header = ("t",) + tuple(repr(float(u)) for u in gf.u)
    rows = [(float(t),) + tuple(float(v) for v in row) for t, row in zip(gf.times, gf.values)]
    return header, rows


def run_transform(cfg, result):
    h = cfg.h
    b = b_from_h(h)
    grid = _grid(cfg, save_times=(cfg.T,))
    rho0 = cfg.rho0
    t0 = time.perf_counter()
    pe, Ee, se = richardson(lambda g: solve_eprs_pde(h, lambda u: 1.0 - rho0(u), g, cfg.kernel), grid)
    pc, Ec, sc = richardson(lambda g: solve_epcs_pde(h, rho0, g, cfg.kernel), grid)
    rho = transform_solution(se[0], b.shift)
    mask = rho.u <= rho.meta["valid_u_max"]
    diff = l2_diff(rho.values[-1], sc[0].values[-1], grid.du, mask)
    secs = time.perf_counter() - t0
    budget = 3.0 * max(Ee, Ec)
    limit = float(cfg.thresholds.get("seconds", 60.0))
    result.checks.append(Check("3 transformation identity", diff <= budget and secs < limit,
                               {"l2_difference": diff, "richardson_eprs": Ee,
                                "richardson_epcs": Ec, "order_eprs": pe, "order_epcs": pc,
                                "budget": budget}, secs))
    u = rho.u
    rows = [(float(x), float(a), float(c)) for x, a, c, m in
            zip(u, rho.values[-1], sc[0].values[-1], mask) if m]
    result.tables["transform"] = (("u", "rho_from_zeta", "rho_direct"), rows)
    result.summary.update({"l2_difference": diff, "budget": budget})


def run_wlln(cfg, result):
    h = cfg.h
    b = b_from_h(h)
    target = wlln_target(h, cfg.T)
    rows = []
    sds = []
    ok = True
    t0 = time.perf_counter()
    for N in cfg.N_list:
        seed = derive_seed(cfg.seed, "wlln", N)
        result.seeds[f"N={N}"] = seed
        plan = plan_window(N, cfg.T, cfg.kernel, h, cfg.observe)

        def task(r, N=N, plan=plan, seed=seed):
            init = sample_bernoulli_profile(cfg.rho0, N, plan, seed, r)
            p = SimParams(N, cfg.T, cfg.kernel, b, plan, seed, (cfg.T,), r)
            return wlln_statistic(simulate_eprs(p, init), N, cfg.T)

        vals = np.array(_ensemble(task, cfg, result))
        m, sd = float(vals.mean()), float(vals.std(ddof=1))
        se = sd / math.sqrt(vals.size)
        z = (m - target) / se if se > 0 else 0.0
        ok &= abs(m - target) < 3.0 * se
        sds.append(sd)
        rows.append((N, vals.size, m, sd, se, target, z))
    secs = time.perf_counter() - t0
    dec = _decreasing(sds)
    limit = float(cfg.thresholds.get("seconds", 120.0))
    result.checks.append(Check("4 shift-count law of large numbers", ok and dec and secs < limit,
                               {"target": target, "means": [r[2] for r in rows],
                                "z_scores": [r[6] for r in rows], "sds": sds,
                                "sd_decreasing": dec}, secs))
    result.tables["wlln"] = (("N", "replicas", "mean", "sd", "stderr", "target", "z"), rows)


def _solve_hydro_pde(cfg, process, grid):
    if process in ("eprs", "ssep"):
        h = cfg.h if process == "eprs" else RateField.zero(horizon=cfg.T)
        return solve_eprs_pde(h, cfg.rho0, grid, cfg.kernel)
    return solve_epcs_pde(cfg.h, cfg.rho0, grid, cfg.kernel)


def run_hydro(cfg, result):
    process = cfg.process
    if process == "coupled":
        raise ConfigError("process", "hydro pipeline runs eprs, epcs or ssep")
    descriptor = {"process": process, "T": cfg.T, "rate": cfg.raw.get("rate"),
                  "initial": cfg.raw.get("initial")}
    times = cfg.snapshot_times
    grid = _grid(cfg)
    pde = _solve_hydro_pde(cfg, process, grid)
    pde.meta["descriptor"] = descriptor
    h = cfg.h
    rate = h if process == "epcs" else (b_from_h(h) if not h.is_zero else h)
    names = [G.name for G in cfg.tests]
    scores = []
    rows = []
    t0 = time.perf_counter()
    for N in cfg.N_list:
        seed = derive_seed(cfg.seed, "hydro", process, N)
        result.seeds[f"N={N}"] = seed
        plan = plan_window(N, cfg.T, cfg.kernel, h, cfg.observe,
                           process="epcs" if process == "epcs" else "eprs")

        def task(r, N=N, plan=plan, seed=seed):
            init = sample_bernoulli_profile(cfg.rho0, N, plan, seed, r)
            p = SimParams(N, cfg.T, cfg.kernel, rate, plan, seed, times, r)
            rec = simulate_epcs(p, init) if process == "epcs" else simulate_eprs(p, init)
            return pair_snapshots(rec, cfg.tests)

        samples = _ensemble(task, cfg, result)
        stats = EnsembleStats.from_samples(times, names, samples,
                                           {"N": N, "descriptor": descriptor})
        rep = hydro_error(stats, pde, cfg.tests)
        scores.append(rep.max_score)
        rows.extend(rep.as_rows())
    secs = time.perf_counter() - t0
    label = {"ssep": "5 SSEP hydrodynamics", "eprs": "6 right-shift hydrodynamic limit",
             "epcs": "7 centered-spread hydrodynamic limit"}[process]
    thr = float(cfg.thresholds.get("hydro_error", 0.05))
    limit = float(cfg.thresholds.get("seconds", 900.0))
    dec = _decreasing(scores)
    result.checks.append(Check(label, dec and scores[-1] < thr and secs < limit,
                               {"N": cfg.N_list, "hydro_error": scores, "threshold": thr,
                                "decreasing": dec}, secs))
    result.tables["hydro"] = (("N", "t", "G", "mean", "stderr", "sd", "pde_value",
                               "abs_error", "score"), rows)
    result.tables["pde"] = _grid_table(pde)
    result.summary["hydro_error"] = dict(zip(map(str, cfg.N_list), scores))


def run_martingale(cfg, result):
    G = cfg.tests[0]
    procs = cfg.options.get("processes", ["ssep", "eprs"])
    lo, hi = cfg.thresholds.get("ratio_range", [1.3, 2.7])
    rows = []
    all_ok = True
    numbers = {}
    t0 = time.perf_counter()
    for proc in procs:
        h = cfg.h if proc == "eprs" else RateField.zero(horizon=cfg.T)
        rate = b_from_h(h) if not h.is_zero else h
        em2 = []
        eqv = []
        ok = True
        for N in cfg.N_list:
            seed = derive_seed(cfg.seed, "martingale", proc, N)
            result.seeds[f"{proc}/N={N}"] = seed
            plan = plan_window(N, cfg.T, cfg.kernel, h, cfg.observe)
            p0 = SimParams(N, cfg.T, cfg.kernel, rate, plan, seed, (cfg.T,), 0, True)
            tables = martingale_tables(p0, G, plan)

            def task(r, N=N, plan=plan, seed=seed, tables=tables):
                init = sample_bernoulli_profile(cfg.rho0, N, plan, seed, r)
                p = SimParams(N, cfg.T, cfg.kernel, rate, plan, seed, (cfg.T,), r, True)
                d = dynkin_replay(simulate_eprs(p, init), G, p, np.array([0.0, cfg.T]), tables)
                return d.M[-1], d.qv[-1], d.line4[-1], d.M[0]

            out = np.array(_ensemble(task, cfg, result))
            M, Q, L4, M0 = out.T
            n = M.size
            mM, seM = M.mean(), M.std(ddof=1) / math.sqrt(n)
            dd = M * M - Q
            mD, seD = dd.mean(), dd.std(ddof=1) / math.sqrt(n)
            ok_mean = abs(mM) < 3.0 * seM
            ok_qv = abs(mD) < 3.0 * seD
            ok_zero = bool(np.all(M0 == 0.0))
            em2.append(float((M * M).mean()))
            eqv.append(float(Q.mean()))
            max_l4 = float(np.max(np.abs(L4)))
            if proc == "ssep":
                ok &= max_l4 <= 1e-10
            ok &= ok_mean and ok_qv and ok_zero
            rows.append((proc, N, n, float(mM), float(seM), em2[-1], eqv[-1], float(mD),
                         float(seD), max_l4))
        ratios_m2 = [a / b for a, b in zip(em2, em2[1:])]
        ratios_qv = [a / b for a, b in zip(eqv, eqv[1:])]
        ok &= all(lo <= r <= hi for r in ratios_m2 + ratios_qv)
        numbers[f"{proc}_ratio_M2"] = ratios_m2
        numbers[f"{proc}_ratio_QV"] = ratios_qv
        numbers[f"{proc}_zM"] = [r[3] / r[4] for r in rows if r[0] == proc]
        numbers[f"{proc}_zM2_vs_QV"] = [r[7] / r[8] for r in rows if r[0] == proc]
        all_ok &= ok
    secs = time.perf_counter() - t0
    result.checks.append(Check("8 martingale diagnostics", all_ok, numbers, secs))
    result.tables["martingale"] = (("process", "N", "replicas", "mean_M", "stderr_M", "E_M2",
                                    "E_QV", "mean_M2_minus_QV", "stderr_M2_minus_QV",
                                    "max_abs_printed_line4"), rows)


def run_coupling(cfg, result):
    from scipy import stats as sps

    h = cfg.h
    G = cfg.tests[0]
    alpha = float(cfg.thresholds.get("alpha", 0.01))
    rows = []
    jrows = []
    means = []
    pvals = []
    bound_ok = True
    t0 = time.perf_counter()
    for N in cfg.N_list:
        seed = derive_seed(cfg.seed, "coupling", N)
        seed_ref = derive_seed(cfg.seed, "coupling-reference", N)
        result.seeds[f"N={N}"] = seed
        result.seeds[f"N={N}/reference"] = seed_ref
        plan = plan_window(N, cfg.T, cfg.kernel, h, cfg.observe, process="epcs")

        def task(r, N=N, plan=plan, seed=seed):
            init = sample_bernoulli_profile(cfg.rho0, N, plan, seed, r)
            p = SimParams(N, cfg.T, cfg.kernel, h, plan, seed, cfg.snapshot_times, r)
            res = simulate_coupled(p, init)
            ok = bool(np.all(np.abs(res.snap_n - res.snap_n_hat) <= res.snap_J))
            pair = empirical_pair(res.epcs.snapshot(len(cfg.snapshot_times) - 1), G, N)
            return res.J_T, ok, pair, res.counters["max_excess"], res.J_times

        def ref(r, N=N, plan=plan, seed=seed_ref):
            init = sample_bernoulli_profile(cfg.rho0, N, plan, seed, r)
            p = SimParams(N, cfg.T, cfg.kernel, h, plan, seed, (cfg.T,), r)
            return empirical_pair(simulate_epcs(p, init).snapshot(0), G, N)

        out = _ensemble(task, cfg, result)
        refs = np.array(_ensemble(ref, cfg, result))
        J = np.array([o[0] for o in out], dtype=float)
        bound_ok &= all(o[1] for o in out)
        pairs = np.array([o[2] for o in out])
        welch = float(sps.ttest_ind(pairs, refs, equal_var=False).pvalue)
        ks = float(sps.ks_2samp(pairs, refs).pvalue)
        means.append(float(J.mean() / N))
        pvals.append(welch)
        rows.append((N, len(out), means[-1], float(J.std(ddof=1) / N / math.sqrt(len(out))),
                     int(max(o[3] for o in out)), float(pairs.mean()), float(refs.mean()),
                     welch, ks))
        for r, o in enumerate(out):
            jrows.append((N, r, 0.0, 0))
            jrows.extend((N, r, float(t), j + 1) for j, t in enumerate(o[4]))
    secs = time.perf_counter() - t0
    dec = _decreasing(means)
    marg = all(p > alpha for p in pvals)
    result.checks.append(Check("9 coupling", bound_ok and dec and marg,
                               {"N": cfg.N_list, "mean_J_over_N": means,
                                "J_decreasing": dec, "n_minus_nhat_bounded": bound_ok,
                                "welch_p": pvals, "alpha": alpha}, secs))
    result.tables["coupling"] = (("N", "replicas", "mean_J_over_N", "stderr", "max_excess",
                                  "mean_pair_coupled", "mean_pair_standalone", "welch_p",
                                  "ks_p"), rows)
    result.tables["jpaths"] = (("N", "replica", "t", "J"), jrows)


def run_simulate(cfg, result, emit_event_log=False):
    """Plain simulation: pairings at the snapshot times, counters, final states."""
    process = cfg.process
    h = cfg.h
    names = [G.name for G in cfg.tests]
    prow = []
    crow = []
    texts = []
    events = []
    jrows = []
    header_counters = None
    for N in cfg.N_list:
        seed = derive_seed(cfg.seed, "simulate", process, N)
        result.seeds[f"N={N}"] = seed
        kind = "eprs" if process in ("eprs", "ssep") else "epcs"
        plan = plan_window(N, cfg.T, cfg.kernel, h, cfg.observe, process=kind)
        rate = b_from_h(h) if kind == "eprs" and not h.is_zero else h

        def task(r, N=N, plan=plan, seed=seed):
            init = sample_bernoulli_profile(cfg.rho0, N, plan, seed, r)
            p = SimParams(N, cfg.T, cfg.kernel, rate, plan, seed, cfg.snapshot_times, r,
                          emit_event_log and process != "coupled")
            if process == "coupled":
                return simulate_coupled(p, init)
            return simulate_epcs(p, init) if kind == "epcs" else simulate_eprs(p, init)

        for r, rec in enumerate(_ensemble(task, cfg, result)):
            if process == "coupled":
                jrows.append((N, r, 0.0, 0))
                jrows.extend((N, r, float(t), j + 1) for j, t in enumerate(rec.J_times))
                counters = dict(rec.counters, J_T=rec.J_T)
                rec = rec.epcs
            else:
                counters = dict(rec.counters)
            vals = pair_snapshots(rec, cfg.tests)
            for k, t in enumerate(rec.snapshot_times):
                for g, name in enumerate(names):
                    prow.append((N, r, float(t), name, float(vals[k, g])))
            header_counters = tuple(counters)
            crow.append((N, r) + tuple(counters.values()))
            texts.append(f"N={N} replica={r} {to_text(rec.final)}")
            if rec.event_log is not None:
                lg = rec.event_log
                events.extend((N, r, float(t), int(k), int(a), int(b))
                              for t, k, a, b in zip(lg.t, lg.kind, lg.a, lg.b))
    result.tables["pairings"] = (("N", "replica", "t", "G", "value"), prow)
    result.tables["counters"] = (("N", "replica") + (header_counters or ()), crow)
    if jrows:
        result.tables["jpaths"] = (("N", "replica", "t", "J"), jrows)
    if emit_event_log and events:
        result.tables["events"] = (("N", "replica", "t", "kind", "a", "b"), events)
    result.texts["final_configurations.txt"] = "\n".join(texts) + "\n"


def run_pde(cfg, result):
    grid = _grid(cfg)
    process = "eprs" if cfg.process == "coupled" else cfg.process
    sol = _solve_hydro_pde(cfg, process, grid)
    result.tables["solution"] = _grid_table(sol)
    result.summary.update({"process": process, "steps": sol.meta["steps"], "dt": sol.dt})


def run_experiment(cfg, emit_event_log=False):
    result = Result(cfg.name)
    p = cfg.pipeline
    if p == "heat":
        run_heat(cfg, result)
    elif p == "transform":
        run_transform(cfg, result)
    elif p == "wlln":
        run_wlln(cfg, result)
    elif p == "hydro":
        run_hydro(cfg, result)
    elif p == "martingale":
        run_martingale(cfg, result)
    elif p == "coupling":
        run_coupling(cfg, result)
    elif p == "simulate":
        run_simulate(cfg, result, emit_event_log)
    elif p == "pde":
        run_pde(cfg, result)
    else:  # pragma: no cover - the schema rejects this
        raise ConfigError("pipeline", f"unknown pipeline {p!r}")
    return result
