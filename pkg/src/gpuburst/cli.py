"""Command line entry points: validate, run, sweep, photon.

Exit codes: 0 success, 1 validation/config error, 2 runtime fault.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .engine import SimulationError
from .market import ConfigError
from .photon.config import load_setup
from .photon.geometry import DomArray
from .photon.transport import BatchResult, propagate, run_batch
from .reports import write_outputs
from .rng import RngStream
from .run import run_scenario
from .scenario import build_scenario, read_raw, resolve_path, validate_raw


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gpuburst",
        description="Simulate preemptible multi-cloud GPU bursts feeding a "
                    "high-throughput job pool.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario file")
    p_validate.add_argument("--config", required=True,
                            help="scenario file, or bundled name like paper-feb-run")

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None,
                       help="root seed (default: scenario's)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--scale", type=float, default=1.0,
                       help="instance-count multiplier for desk-scale runs")
    p_run.add_argument("--event-log", action="store_true",
                       help="also write events.csv")

    p_sweep = sub.add_parser("sweep", help="run a scenario over parameter values")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True,
                         help="dotted path into the scenario, e.g. "
                              "market_defaults.preemption_rate_per_hour")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")
    p_sweep.add_argument("--seeds", default=None,
                         help="comma-separated seeds (default: scenario seed)")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--scale", type=float, default=1.0)

    p_photon = sub.add_parser("photon", help="standalone photon-propagation batch")
    p_photon.add_argument("--config", required=True,
                          help="ice/geometry file, or bundled name demo-ice")
    p_photon.add_argument("--photons", type=int, default=10000)
    p_photon.add_argument("--seed", type=int, default=1)
    p_photon.add_argument("--workers", type=int, default=1)
    p_photon.add_argument("--paths-csv", default=None,
                          help="write per-photon path vertices for debugging")

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "photon":
            return _cmd_photon(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SimulationError, OSError) as exc:
        print(f"fault: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_validate(args) -> int:
    diags = validate_raw(read_raw(args.config))
    if diags:
        for diag in diags:
            print(diag)
        return 1
    print(f"{args.config}: ok")
    return 0


def _cmd_run(args) -> int:
    raw = read_raw(args.config)
    diags = validate_raw(raw)
    if diags:
        for diag in diags:
            print(diag, file=sys.stderr)
        return 1
    scenario = build_scenario(raw, scale=args.scale)
    result = run_scenario(scenario, seed=args.seed,
                          collect_event_log=args.event_log)
    paths = write_outputs(result, args.out, event_log=args.event_log)
    sys.stdout.write(open(paths["summary_txt"]).read())
    print(f"outputs in {Path(args.out).resolve()}  ({result.wall_s:.1f}s)")
    return 0


def _cmd_sweep(args) -> int:
    raw = read_raw(args.config)
    diags = validate_raw(raw)
    if diags:
        for diag in diags:
            print(diag, file=sys.stderr)
        return 1
    node, key = resolve_path(raw, args.param)  # fail before any run
    values = [float(v) for v in args.values.split(",")]
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        seeds = [raw.get("seed", 0)]
    out_root = Path(args.out)
    slug = args.param.rsplit(".", 1)[-1]
    rows = []
    for value in values:
        node[key] = value
        scenario = build_scenario(raw, scale=args.scale)
        for seed in seeds:
            result = run_scenario(scenario, seed=seed)
            run_dir = out_root / f"{slug}={value:g}_seed={seed}"
            write_outputs(result, run_dir)
            s = result.summary
            rows.append({
                "param": args.param,
                "value": value,
                "seed": seed,
                "completed_jobs": s.completed_jobs,
                "total_cost": round(s.total_cost, 2),
                "total_pflop_hours": s.total_pflop_hours,
                "waste_fraction": s.waste_fraction,
                "plateau_pflops": s.plateau_pflops,
            })
            print(f"{args.param}={value:g} seed={seed}: "
                  f"jobs={s.completed_jobs} waste={s.waste_fraction:.4f}")
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return 0


def _cmd_photon(args) -> int:
    ice, doms, source = load_setup(args.config)
    if args.paths_csv:
        dom_array = DomArray(doms)
        base = RngStream(args.seed, "photon")
        result_rows = []
        result = BatchResult()
        for i in range(args.photons):
            rng = base.substream(i)
            photon = source.emit(rng)
            path: list[tuple[float, float, float]] = []
            propagate(photon, ice, dom_array, rng, path=path)
            result.add_photon(photon)
            for step, (x, y, z) in enumerate(path):
                result_rows.append([i, step, x, y, z, photon.status.value])
        with open(args.paths_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["photon", "vertex", "x", "y", "z", "status"])
            writer.writerows(result_rows)
    else:
        result = run_batch(args.photons, source, ice, doms,
                           seed=args.seed, workers=args.workers)
    print(f"emitted:  {result.n_emitted}")
    print(f"detected: {result.n_detected}")
    print(f"absorbed: {result.n_absorbed}")
    print(f"escaped:  {result.n_escaped}")
    print(f"steps:    {result.total_steps}")
    if result.dom_hits:
        top = sorted(result.dom_hits.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
        print("top DOMs: " + ", ".join(f"#{d}:{n}" for d, n in top))
    return 0


if __name__ == "__main__":
    sys.exit(main())
