"""Output files for a finished run.

All files are written atomically and are byte-stable for a given
(scenario, seed): row order follows deterministic simulation state, floats
are written with repr so a re-run reproduces the files exactly. Seconds and
dollars keep full precision in the CSVs; the human summary rounds money to
the cent and compute to three significant figures.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from .accounting import RunSummary
from .run import RunResult

TIMESERIES = "timeseries.csv"
JOBS = "jobs.csv"
INSTANCES = "instances.csv"
SUMMARY_TXT = "summary.txt"
SUMMARY_JSON = "summary.json"
EVENTS = "events.csv"


def _atomic_write(path: Path, write_fn) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        write_fn(fh)
    os.replace(tmp, path)


def _num(x: float) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return repr(x)


def write_outputs(result: RunResult, out_dir: str | Path,
                  event_log: bool = False) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "timeseries": out / TIMESERIES,
        "jobs": out / JOBS,
        "instances": out / INSTANCES,
        "summary_txt": out / SUMMARY_TXT,
        "summary_json": out / SUMMARY_JSON,
    }
    _atomic_write(paths["timeseries"], lambda fh: _write_timeseries(fh, result))
    _atomic_write(paths["jobs"], lambda fh: _write_jobs(fh, result))
    _atomic_write(paths["instances"], lambda fh: _write_instances(fh, result))
    _atomic_write(paths["summary_txt"],
                  lambda fh: fh.write(render_summary(result.summary)))
    _atomic_write(paths["summary_json"],
                  lambda fh: fh.write(summary_json(result.summary)))
    if event_log and result.event_log is not None:
        paths["events"] = out / EVENTS
        _atomic_write(paths["events"], lambda fh: _write_events(fh, result))
    return paths


def _write_timeseries(fh, result: RunResult) -> None:
    w = csv.writer(fh)
    w.writerow([
        "t_sec", "gpu_model", "provider", "geo_group",
        "n_instances", "pflops32", "active_fetches", "queue_depth",
    ])
    m = result.metrics
    for i, t in enumerate(m.times):
        for key in m.group_keys:
            model, provider, geo = key
            n = m.counts[key][i]
            pf = n * m.peak_tflops[model] / 1000.0
            w.writerow([
                _num(t), model, provider, geo, n, _num(pf),
                m.active_fetches[i], m.queue_depth[i],
            ])


def _write_jobs(fh, result: RunResult) -> None:
    w = csv.writer(fh)
    w.writerow([
        "job_id", "gpu_model", "provider", "region", "submit_s", "fetch_s",
        "runtime_s", "n_attempts", "wasted_s", "outcome",
    ])
    for job_id in sorted(result.pool.jobs):
        job = result.pool.jobs[job_id]
        last = job.attempts[-1] if job.attempts else None
        w.writerow([
            job.job_id,
            last.gpu_model if last else "",
            last.provider.value if last else "",
            last.region_id if last else "",
            _num(job.submit_time),
            _num(last.fetch_s) if last else 0,
            _num(last.runtime_s) if last else 0,
            len(job.attempts),
            _num(job.wasted_s),
            job.state.value,
        ])


def _write_instances(fh, result: RunResult) -> None:
    w = csv.writer(fh)
    w.writerow([
        "instance_id", "fleet", "instance_type", "gpu_model", "provider",
        "region", "geo_group", "gpus", "launch_s", "end_s", "price_hr", "cost",
    ])
    for rec in result.ledger.records:
        w.writerow([
            rec.instance_id, rec.fleet_key, rec.instance_type, rec.gpu_model,
            rec.provider.value, rec.region_id, rec.geo_group.value, rec.gpus,
            _num(rec.t_start), _num(rec.t_end), _num(rec.price_hr), repr(rec.cost),
        ])


def _write_events(fh, result: RunResult) -> None:
    w = csv.writer(fh)
    w.writerow(["t_sec", "seq", "event"])
    for t, seq, desc in result.event_log:
        w.writerow([_num(t), seq, desc])


def _sig3(x: float) -> str:
    return f"{x:.3g}"


def render_summary(s: RunSummary) -> str:
    lines = []
    lines.append(f"scenario: {s.scenario_name}  seed={s.seed}  scale={s.scale:g}")
    lines.append(
        f"horizon: {s.horizon_s / 3600.0:g} h   completed jobs: {s.completed_jobs}"
    )
    lines.append(
        f"plateau: {_sig3(s.plateau_pflops)} PFLOP32s sustained "
        f"{s.plateau_duration_s / 3600.0:.2f} h"
    )
    lines.append(
        f"integrated compute: {_sig3(s.total_pflop_hours)} PFLOP32-hours"
    )
    lines.append(f"total cost: ${s.total_cost:,.2f}")
    lines.append(
        f"billed GPU-hours: {s.total_billed_gpu_hours:.1f}  "
        f"(useful {s.useful_gpu_hours:.1f}, wasted {s.wasted_gpu_hours:.1f}, "
        f"idle {s.idle_gpu_hours:.1f})"
    )
    lines.append(f"waste fraction: {s.waste_fraction:.4f}")
    lines.append("")
    lines.append(
        f"{'model':<12}{'PF-h':>10}{'cost $':>14}{'jobs':>9}"
        f"{'compute%':>10}{'cost%':>8}{'effect.':>9}{'$/PF-h':>10}"
    )
    for name, ms in s.per_model.items():
        eff = f"{ms.effectiveness:.2f}" if ms.effectiveness is not None else "-"
        dpf = f"{ms.dollars_per_pfh:.2f}" if ms.dollars_per_pfh is not None else "-"
        lines.append(
            f"{name:<12}{_sig3(ms.pflop_hours):>10}{ms.cost:>14,.2f}"
            f"{ms.completed_jobs:>9}{100 * ms.compute_share:>9.1f}%"
            f"{100 * ms.cost_share:>7.1f}%{eff:>9}{dpf:>10}"
        )
    lines.append("")
    return "\n".join(lines)


def summary_json(s: RunSummary) -> str:
    payload = {
        "scenario": s.scenario_name,
        "seed": s.seed,
        "scale": s.scale,
        "horizon_s": s.horizon_s,
        "completed_jobs": s.completed_jobs,
        "plateau_pflops": s.plateau_pflops,
        "plateau_duration_s": s.plateau_duration_s,
        "total_pflop_hours": s.total_pflop_hours,
        "total_cost": s.total_cost,
        "total_billed_gpu_hours": s.total_billed_gpu_hours,
        "useful_gpu_hours": s.useful_gpu_hours,
        "wasted_gpu_hours": s.wasted_gpu_hours,
        "idle_gpu_hours": s.idle_gpu_hours,
        "waste_fraction": s.waste_fraction,
        "per_model": {
            name: {
                "pflop_hours": ms.pflop_hours,
                "cost": ms.cost,
                "billed_gpu_hours": ms.billed_gpu_hours,
                "completed_jobs": ms.completed_jobs,
                "wasted_gpu_hours": ms.wasted_gpu_hours,
                "compute_share": ms.compute_share,
                "cost_share": ms.cost_share,
                "effectiveness": ms.effectiveness,
                "dollars_per_pfh": ms.dollars_per_pfh,
            }
            for name, ms in s.per_model.items()
        },
    }
    return json.dumps(payload, indent=2) + "\n"
