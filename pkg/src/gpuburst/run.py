"""Wires one scenario into the event engine and executes it end to end.

Handlers keep no hidden clock state: every stochastic choice draws from a
named counter-based stream, and stale events (for slots or attempts that no
longer exist) are detected by identity checks and dropped, so a run is a
pure function of (scenario, seed).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .accounting import CostLedger, MetricsSeries, RunSummary, summarize
from .engine import (
    InstanceDeprovisioned,
    InstanceLaunched,
    InstancePreempted,
    JobCompleted,
    JobFetchDone,
    MetricsSample,
    RampdownStart,
    Simulator,
    StageTrigger,
)
from .market import InstanceType, RegionMarket, spot_price
from .pool import Job, Outcome, Pool, Slot, SlotState
from .provisioner import LaunchOrder, PlanRunner, RampdownPolicy
from .rng import RngStream
from .scenario import Scenario
from .workload import sample_fetch_time


@dataclass
class InstanceRec:
    instance_id: int
    fleet_key: str
    itype: InstanceType
    region: RegionMarket
    launched_at: float
    slot_ids: list[int] = field(default_factory=list)
    alive: bool = True


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    summary: RunSummary
    pool: Pool
    ledger: CostLedger
    metrics: MetricsSeries
    event_log: list | None
    wall_s: float


class ScenarioRun:
    def __init__(self, scenario: Scenario, seed: int | None = None,
                 collect_event_log: bool = False):
        self.sc = scenario
        self.seed = scenario.seed if seed is None else seed
        self.sim = Simulator()
        if collect_event_log:
            self.sim.event_log = []
        self.pool = Pool()
        self.ledger = CostLedger()
        self.runner = PlanRunner(
            scenario.plan,
            scenario.regions,
            scenario.instance_types,
            retry_interval_s=scenario.retry_interval_s,
            baseline_fleets=scenario.baseline_fleets,
        )
        self.metrics = MetricsSeries(
            scenario.metric_period_s,
            group_keys=self._group_keys(),
            peak_tflops={m.name: m.peak_tflops32 for m in scenario.gpu_models.values()},
        )
        self.instances: dict[int, InstanceRec] = {}
        self.counts: dict[tuple[str, str, str], int] = {}
        self._instance_seq = 0
        self._slot_seq = 0
        self._provision_streams: dict[str, RngStream] = {}
        self._preempt_streams: dict[str, RngStream] = {}
        self._runtime_streams: dict[str, RngStream] = {}
        self._plateau_models = [
            st.plateau.gpu_model for st in scenario.plan.stages if st.plateau
        ]

        sim = self.sim
        sim.on(StageTrigger, self._on_stage_trigger)
        sim.on(MetricsSample, self._on_metrics_sample)
        sim.on(RampdownStart, self._on_rampdown)
        sim.on(InstanceLaunched, self._on_launched)
        sim.on(InstancePreempted, self._on_preempted)
        sim.on(InstanceDeprovisioned, self._on_deprovisioned)
        sim.on(JobFetchDone, self._on_fetch_done)
        sim.on(JobCompleted, self._on_completed)

    def _group_keys(self) -> list[tuple[str, str, str]]:
        keys: list[tuple[str, str, str]] = []
        seen = set()
        for region in self.sc.regions.values():
            for tname in region.capacity_cap:
                it = self.sc.instance_types[tname]
                key = (it.gpu_model.name, it.provider.value, region.geo_group.value)
                if key not in seen:
                    seen.add(key)
                    keys.append(key)
        return keys

    def _stream(self, cache: dict[str, RngStream], kind: str, name: str) -> RngStream:
        stream = cache.get(name)
        if stream is None:
            stream = RngStream(self.seed, f"{kind}/{name}")
            cache[name] = stream
        return stream

    # -- setup ------------------------------------------------------------

    def _setup(self) -> None:
        sc = self.sc
        if sc.horizon_s <= 0:
            return
        n_periods = int(sc.horizon_s // sc.metric_period_s)
        sample_times = [i * sc.metric_period_s for i in range(n_periods + 1)]
        if sample_times[-1] < sc.horizon_s:
            sample_times.append(sc.horizon_s)
        for t in sample_times:
            self.sim.schedule(t, MetricsSample())
        for index, at_s in self.runner.timed_stages():
            self.sim.schedule(at_s, StageTrigger(index))
        if sc.plan.rampdown_at <= sc.horizon_s:
            self.sim.schedule(sc.plan.rampdown_at, RampdownStart())
        self._place_orders(self.runner.request_baselines(0.0))
        self.pool.submit(
            [Job(job_id=i + 1, submit_time=0.0) for i in range(sc.n_jobs)]
        )

    # -- provisioning -------------------------------------------------------

    def _place_orders(self, orders: list[LaunchOrder]) -> None:
        now = self.sim.now
        for order in orders:
            region = self.sc.regions[order.region_id]
            stream = self._stream(self._provision_streams, "provision", order.region_id)
            for _ in range(order.count):
                self._instance_seq += 1
                delay = region.provision_delay.sample(stream)
                self.sim.schedule(
                    now + delay,
                    InstanceLaunched(
                        instance_id=self._instance_seq,
                        fleet_key=order.fleet_key,
                        region_id=order.region_id,
                        instance_type=order.instance_type,
                    ),
                )

    def _on_stage_trigger(self, p: StageTrigger) -> None:
        self._place_orders(self.runner.fire_stage(p.stage_index, self.sim.now))

    def _on_launched(self, p: InstanceLaunched) -> None:
        now = self.sim.now
        if self.runner.rampdown_started and not self.runner.is_baseline(p.fleet_key):
            self.runner.on_launch_voided(p.fleet_key, p.region_id)
            return
        region = self.sc.regions[p.region_id]
        it = self.sc.instance_types[p.instance_type]
        rec = InstanceRec(p.instance_id, p.fleet_key, it, region, now)
        self.instances[p.instance_id] = rec
        self.runner.on_launched(p.fleet_key, p.region_id)
        self.ledger.open_billing(
            p.instance_id, p.fleet_key, it, p.region_id, region.geo_group,
            spot_price(it), now,
        )
        key = (it.gpu_model.name, it.provider.value, region.geo_group.value)
        self.counts[key] = self.counts.get(key, 0) + 1

        stream = self._stream(self._preempt_streams, "preempt", p.region_id)
        tau = -math.log(stream.uniform_open())
        delay_s = region.preemption_rate.time_to_preemption(now, tau)
        if delay_s != math.inf:
            self.sim.schedule(now + delay_s, InstancePreempted(p.instance_id))

        for _ in range(it.gpus_per_instance):
            self._slot_seq += 1
            self.pool.add_slot(
                Slot(
                    slot_id=self._slot_seq,
                    instance_id=p.instance_id,
                    instance_type=it.name,
                    gpu_model=it.gpu_model.name,
                    provider=it.provider,
                    region_id=p.region_id,
                    created_at=now,
                    idle_since=now,
                )
            )
            rec.slot_ids.append(self._slot_seq)
        self._match()

    def _terminate_instance(self, rec: InstanceRec, t: float, outcome: Outcome) -> None:
        if not rec.alive:
            return
        rec.alive = False
        for slot_id in rec.slot_ids:
            self.pool.on_preempt(self.pool.slots[slot_id], t, outcome=outcome)
        self.ledger.close_billing(rec.instance_id, t)
        key = (rec.itype.gpu_model.name, rec.itype.provider.value,
               rec.region.geo_group.value)
        self.counts[key] -= 1
        self.runner.on_terminated(rec.fleet_key, rec.region.region_id)

    def _on_preempted(self, p: InstancePreempted) -> None:
        rec = self.instances.get(p.instance_id)
        if rec is None or not rec.alive:
            return
        self._terminate_instance(rec, self.sim.now, Outcome.PREEMPTED)
        self._match()

    def _on_deprovisioned(self, p: InstanceDeprovisioned) -> None:
        rec = self.instances.get(p.instance_id)
        if rec is None or not rec.alive:
            return
        # only fires once every slot is already terminated (drain completion)
        self.ledger.close_billing(rec.instance_id, self.sim.now)
        rec.alive = False
        key = (rec.itype.gpu_model.name, rec.itype.provider.value,
               rec.region.geo_group.value)
        self.counts[key] -= 1
        self.runner.on_terminated(rec.fleet_key, rec.region.region_id)

    def _on_rampdown(self, _: RampdownStart) -> None:
        now = self.sim.now
        self.runner.start_rampdown()
        policy = self.sc.plan.rampdown_policy
        for rec in list(self.instances.values()):
            if not rec.alive or self.runner.is_baseline(rec.fleet_key):
                continue
            if policy is RampdownPolicy.IMMEDIATE_KILL:
                self._terminate_instance(rec, now, Outcome.KILLED_RAMPDOWN)
            else:
                for slot_id in rec.slot_ids:
                    self.pool.drain_slot(self.pool.slots[slot_id], now)
                self._maybe_finish_drain(rec)
        self._match()

    def _maybe_finish_drain(self, rec: InstanceRec) -> None:
        if rec.alive and all(
            self.pool.slots[s].state is SlotState.TERMINATED for s in rec.slot_ids
        ):
            self.sim.schedule(self.sim.now, InstanceDeprovisioned(rec.instance_id))

    # -- pool lifecycle -----------------------------------------------------

    def _match(self) -> None:
        now = self.sim.now
        assignments = self.pool.match(now)
        for slot, job in assignments:
            fetch_s = sample_fetch_time(self.pool.n_fetching, self.sc.fetch_model)
            attempt = job.current_attempt
            self.sim.schedule(
                now + fetch_s, JobFetchDone(job.job_id, attempt.seq)
            )

    def _on_fetch_done(self, p: JobFetchDone) -> None:
        job = self.pool.jobs[p.job_id]
        attempt = job.current_attempt
        if attempt is None or attempt.seq != p.attempt_seq:
            return  # attempt was preempted while fetching
        stream = self._stream(self._runtime_streams, "runtime", attempt.gpu_model)
        runtime_s = self.sc.runtime_model.sample_runtime(attempt.gpu_model, stream)
        self.pool.on_fetch_done(job, self.sim.now, runtime_s)
        self.sim.schedule(
            self.sim.now + runtime_s + self.sc.epilogue_s,
            JobCompleted(job.job_id, attempt.seq),
        )

    def _on_completed(self, p: JobCompleted) -> None:
        job = self.pool.jobs[p.job_id]
        attempt = job.current_attempt
        if attempt is None or attempt.seq != p.attempt_seq:
            return  # slot was preempted or killed mid-run
        slot = self.pool.slots[attempt.slot_id]
        self.pool.on_complete(slot, job, self.sim.now)
        if slot.state is SlotState.TERMINATED:
            self._maybe_finish_drain(self.instances[slot.instance_id])
        else:
            self._match()

    # -- metrics ------------------------------------------------------------

    def _on_metrics_sample(self, _: MetricsSample) -> None:
        now = self.sim.now
        self.metrics.record(
            now, self.counts, self.pool.n_fetching, self.pool.queue_depth
        )
        series = {
            m: self.metrics.model_count_series(m) for m in self._plateau_models
        }
        self._place_orders(self.runner.on_metrics_sample(now, series))

    # -- main ---------------------------------------------------------------

    def execute(self) -> RunResult:
        t0 = time.perf_counter()
        self._setup()
        self.sim.run_until(self.sc.horizon_s)
        self._finalize()
        summary = summarize(
            self.pool,
            self.ledger,
            self.metrics,
            self.sc.gpu_models,
            self.sc.horizon_s,
            self.seed,
            self.sc.scale,
            self.sc.name,
        )
        return RunResult(
            scenario=self.sc,
            seed=self.seed,
            summary=summary,
            pool=self.pool,
            ledger=self.ledger,
            metrics=self.metrics,
            event_log=self.sim.event_log,
            wall_s=time.perf_counter() - t0,
        )

    def _finalize(self) -> None:
        """Close whatever is still open at the horizon; cut jobs count as waste."""
        horizon = self.sc.horizon_s
        for rec in self.instances.values():
            if rec.alive:
                self._terminate_instance(rec, horizon, Outcome.KILLED_RAMPDOWN)


def run_scenario(scenario: Scenario, seed: int | None = None,
                 collect_event_log: bool = False) -> RunResult:
    return ScenarioRun(scenario, seed, collect_event_log).execute()
