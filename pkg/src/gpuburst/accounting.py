"""Billing ledger, sampled metrics, waste and cost-effectiveness summaries.

Billing is pro-rata to the second from launch to termination; FLOP32
accounting multiplies instance counts by vendor peak fp32 specs, never by
measured utilization. Idle slot time counts as waste: it is billed but
produces nothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .market import GpuModel, InstanceType, Provider, GeoGroup
from .pool import Outcome, Pool

logger = logging.getLogger(__name__)


class LedgerError(ValueError):
    pass


@dataclass(frozen=True)
class BillingRecord:
    instance_id: int
    fleet_key: str
    instance_type: str
    gpu_model: str
    provider: Provider
    region_id: str
    geo_group: GeoGroup
    gpus: int
    price_hr: float
    t_start: float
    t_end: float

    @property
    def cost(self) -> float:
        return self.price_hr * (self.t_end - self.t_start) / 3600.0

    @property
    def gpu_seconds(self) -> float:
        return (self.t_end - self.t_start) * self.gpus


@dataclass
class _OpenBill:
    instance_id: int
    fleet_key: str
    instance_type: str
    gpu_model: str
    provider: Provider
    region_id: str
    geo_group: GeoGroup
    gpus: int
    price_hr: float
    t_start: float


class CostLedger:
    def __init__(self):
        self._open: dict[int, _OpenBill] = {}
        self.records: list[BillingRecord] = []

    def open_billing(
        self,
        instance_id: int,
        fleet_key: str,
        it: InstanceType,
        region_id: str,
        geo_group: GeoGroup,
        price_hr: float,
        t_start: float,
    ) -> None:
        if instance_id in self._open:
            raise LedgerError(f"instance {instance_id} already has an open record")
        self._open[instance_id] = _OpenBill(
            instance_id,
            fleet_key,
            it.name,
            it.gpu_model.name,
            it.provider,
            region_id,
            geo_group,
            it.gpus_per_instance,
            price_hr,
            t_start,
        )

    def close_billing(self, instance_id: int, t_end: float) -> BillingRecord:
        bill = self._open.pop(instance_id, None)
        if bill is None:
            raise LedgerError(f"instance {instance_id} has no open record")
        if t_end < bill.t_start:
            raise LedgerError(f"instance {instance_id}: t_end before t_start")
        rec = BillingRecord(
            bill.instance_id,
            bill.fleet_key,
            bill.instance_type,
            bill.gpu_model,
            bill.provider,
            bill.region_id,
            bill.geo_group,
            bill.gpus,
            bill.price_hr,
            bill.t_start,
            t_end,
        )
        self.records.append(rec)
        return rec

    def close_all(self, t_end: float) -> None:
        for instance_id in sorted(self._open):
            self.close_billing(instance_id, t_end)


GroupKey = tuple[str, str, str]  # (gpu_model, provider, geo_group)


class MetricsSeries:
    """Fixed-grid samples of instance counts per (model, provider, geo),
    plus pool-wide fetch and queue gauges."""

    def __init__(self, period_s: float, group_keys: list[GroupKey],
                 peak_tflops: dict[str, float]):
        self.period_s = period_s
        self.group_keys = list(group_keys)
        self.peak_tflops = peak_tflops
        self.times: list[float] = []
        self.counts: dict[GroupKey, list[int]] = {k: [] for k in self.group_keys}
        self.active_fetches: list[int] = []
        self.queue_depth: list[int] = []

    def record(
        self,
        t: float,
        counts_now: dict[GroupKey, int],
        active_fetches: int,
        queue_depth: int,
    ) -> None:
        self.times.append(t)
        for key in self.group_keys:
            self.counts[key].append(counts_now.get(key, 0))
        self.active_fetches.append(active_fetches)
        self.queue_depth.append(queue_depth)

    def model_count_series(self, gpu_model: str) -> list[tuple[float, float]]:
        out = []
        keys = [k for k in self.group_keys if k[0] == gpu_model]
        for i, t in enumerate(self.times):
            out.append((t, float(sum(self.counts[k][i] for k in keys))))
        return out

    def pflops_series(self, gpu_model: str | None = None) -> list[tuple[float, float]]:
        keys = [
            k for k in self.group_keys if gpu_model is None or k[0] == gpu_model
        ]
        out = []
        for i, t in enumerate(self.times):
            pf = sum(
                self.counts[k][i] * self.peak_tflops[k[0]] for k in keys
            ) / 1000.0
            out.append((t, pf))
        return out


def integrated_pflops(series: list[tuple[float, float]]) -> float:
    """Trapezoidal integral of a PFLOP32s series, in PFLOP32-hours."""
    total = 0.0
    for (t0, v0), (t1, v1) in zip(series, series[1:]):
        total += 0.5 * (v0 + v1) * (t1 - t0) / 3600.0
    return total


def plateau_stats(series: list[tuple[float, float]], rel_band: float = 0.10
                  ) -> tuple[float, float]:
    """(level, duration_s) of the longest contiguous span that stays within
    rel_band of the series peak; level is the time-mean over that span."""
    if not series:
        return 0.0, 0.0
    peak = max(v for _, v in series)
    if peak <= 0.0:
        return 0.0, 0.0
    lo = peak * (1.0 - rel_band)
    best: tuple[float, float, list[float]] = (0.0, 0.0, [])
    run_start = None
    run_vals: list[float] = []
    prev_t = None
    for t, v in series + [(series[-1][0] + 1.0, -1.0)]:  # sentinel closes last run
        if v >= lo:
            if run_start is None:
                run_start = t
                run_vals = []
            run_vals.append(v)
            prev_t = t
        elif run_start is not None:
            duration = prev_t - run_start
            if duration > best[1]:
                best = (run_start, duration, run_vals)
            run_start = None
    if not best[2]:
        return peak, 0.0
    level = sum(best[2]) / len(best[2])
    return level, best[1]


@dataclass
class ModelSummary:
    gpu_model: str
    pflop_hours: float = 0.0
    cost: float = 0.0
    billed_gpu_hours: float = 0.0
    completed_jobs: int = 0
    wasted_gpu_hours: float = 0.0
    compute_share: float = 0.0
    cost_share: float = 0.0
    effectiveness: float | None = None
    dollars_per_pfh: float | None = None


@dataclass
class RunSummary:
    per_model: dict[str, ModelSummary]
    total_pflop_hours: float
    total_cost: float
    total_billed_gpu_hours: float
    completed_jobs: int
    wasted_gpu_hours: float
    idle_gpu_hours: float
    useful_gpu_hours: float
    waste_fraction: float
    plateau_pflops: float
    plateau_duration_s: float
    horizon_s: float
    seed: int
    scale: float
    scenario_name: str


def waste_fraction(wasted_s: float, idle_s: float, billed_gpu_s: float) -> float:
    """(non-success attempt time + idle time) / billed GPU time."""
    if billed_gpu_s <= 0.0:
        logger.warning("waste_fraction undefined: zero billed GPU-seconds")
        return 0.0
    return (wasted_s + idle_s) / billed_gpu_s


def cost_effectiveness(summary: RunSummary) -> None:
    """Fill pool-relative compute/cost shares and effectiveness in place."""
    for ms in summary.per_model.values():
        ms.compute_share = (
            ms.pflop_hours / summary.total_pflop_hours
            if summary.total_pflop_hours > 0
            else 0.0
        )
        ms.cost_share = (
            ms.cost / summary.total_cost if summary.total_cost > 0 else 0.0
        )
        if ms.cost_share > 0.0:
            ms.effectiveness = ms.compute_share / ms.cost_share
        elif ms.cost > 0.0:
            logger.warning("billed model %s has zero cost share; effectiveness "
                           "omitted", ms.gpu_model)
        if ms.pflop_hours > 0.0:
            ms.dollars_per_pfh = ms.cost / ms.pflop_hours


def summarize(
    pool: Pool,
    ledger: CostLedger,
    metrics: MetricsSeries,
    gpu_models: dict[str, GpuModel],
    horizon_s: float,
    seed: int,
    scale: float,
    scenario_name: str,
) -> RunSummary:
    per_model = {name: ModelSummary(name) for name in gpu_models}

    for rec in ledger.records:
        ms = per_model[rec.gpu_model]
        ms.cost += rec.cost
        ms.billed_gpu_hours += rec.gpu_seconds / 3600.0

    wasted_s = 0.0
    useful_s = 0.0
    for job in pool.jobs.values():
        for attempt in job.attempts:
            if attempt.outcome is Outcome.SUCCESS:
                useful_s += attempt.busy_s
                per_model[attempt.gpu_model].completed_jobs += 1
            elif attempt.outcome is not None:
                wasted_s += attempt.busy_s
                per_model[attempt.gpu_model].wasted_gpu_hours += attempt.busy_s / 3600.0
    idle_s = sum(slot.idle_s for slot in pool.slots.values())

    for name in per_model:
        per_model[name].pflop_hours = integrated_pflops(metrics.pflops_series(name))

    total_series = metrics.pflops_series()
    plateau_pf, plateau_dur = plateau_stats(total_series)
    total_cost = sum(ms.cost for ms in per_model.values())
    billed_gpu_s = sum(rec.gpu_seconds for rec in ledger.records)

    summary = RunSummary(
        per_model=per_model,
        total_pflop_hours=sum(ms.pflop_hours for ms in per_model.values()),
        total_cost=total_cost,
        total_billed_gpu_hours=billed_gpu_s / 3600.0,
        completed_jobs=pool.n_completed,
        wasted_gpu_hours=wasted_s / 3600.0,
        idle_gpu_hours=idle_s / 3600.0,
        useful_gpu_hours=useful_s / 3600.0,
        waste_fraction=waste_fraction(wasted_s, idle_s, billed_gpu_s),
        plateau_pflops=plateau_pf,
        plateau_duration_s=plateau_dur,
        horizon_s=horizon_s,
        seed=seed,
        scale=scale,
        scenario_name=scenario_name,
    )
    cost_effectiveness(summary)
    return summary
