"""Command line entry point.

``exclspread run --config FILE`` executes whatever pipeline the file names;
the other subcommands fix the pipeline and fall back to a packaged default
configuration.  Exit status is 0 when every check passes, 1 when a check
fails and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .artifacts import write_csv, write_json, write_manifest
from .dynamics import SimulationError
from .experiments import ConfigError, default_config, load_config, parse_config, run_experiment

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

# subcommand -> (default config, forced fields)
COMMANDS = {
    "run": (None, {}),
    "sim-eprs": ("simulate", {"pipeline": "simulate", "process": "eprs"}),
    "sim-epcs": ("simulate", {"pipeline": "simulate", "process": "epcs"}),
    "sim-coupled": ("simulate", {"pipeline": "simulate", "process": "coupled"}),
    "solve-pde": ("heat", {}),
    "verify-hydro": ("hydro_eprs", {"pipeline": "hydro"}),
    "verify-wlln": ("wlln", {"pipeline": "wlln"}),
    "verify-martingale": ("martingale", {"pipeline": "martingale"}),
    "verify-transform": ("transform", {"pipeline": "transform"}),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="exclspread", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (default, _) in COMMANDS.items():
        p = sub.add_parser(name, help=f"default config: {default}" if default else
                           "run the pipeline named in the config")
        p.add_argument("--config", required=default is None,
                       help="JSON configuration (a path, or the name of a packaged config)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--replicas", type=int, help="override the number of replicas")
        p.add_argument("--out", type=Path, help="directory for CSV/JSON artifacts")
        p.add_argument("--threads", type=int, help="worker threads for replicas")
        p.add_argument("--emit-event-log", action="store_true",
                       help="write the full event log of simulate runs")
    return parser


def _resolve(arg, default):
    if arg is None:
        return default_config(default)
    path = Path(arg)
    if path.suffix != ".json" and not path.exists():
        return default_config(arg)
    return load_config(path)


def _write_artifacts(out, cfg, result):
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, (header, rows) in result.tables.items():
        files.append(write_csv(out / f"{name}.csv", header, rows))
    for name, text in result.texts.items():
        p = out / name
        p.write_text(text, encoding="utf-8", newline="\n")
        files.append(p)
    files.append(write_json(out / "summary.json", result.summary_json()))
    # the thread count changes scheduling only, never the numbers
    recorded = {k: v for k, v in cfg.raw.items() if k != "threads"}
    write_manifest(out, recorded, result.seeds, files)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    default, forced = COMMANDS[args.command]
    try:
        raw = _resolve(args.config, default)
        if args.command == "solve-pde" and raw.get("pipeline") not in ("heat", "pde"):
            forced = {"pipeline": "pde"}
        raw.update(forced)
        cfg = parse_config(raw, {"seed": args.seed, "replicas": args.replicas,
                                 "threads": args.threads})
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        result = run_experiment(cfg, emit_event_log=args.emit_event_log)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"FAIL {cfg.name}: {exc}")
        return EXIT_FAIL
    for c in result.checks:
        print(c.line())
    if result.failed_replicas:
        print(f"excluded {result.failed_replicas} failed replicas")
    if args.out is not None:
        _write_artifacts(args.out, cfg, result)
        print(f"artifacts in {args.out}")
    print(f"{cfg.name}: {'PASS' if result.passed else 'FAIL'} "
          f"({time.perf_counter() - t0:.1f}s)")
    return EXIT_PASS if result.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
