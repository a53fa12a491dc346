"""Run-level invariants on the bundled scenario at desk scale."""

import csv

import pytest

from gpuburst.run import run_scenario
from gpuburst.scenario import load_scenario


def test_pool_never_starves_before_rampdown(paper_run):
    result, _ = paper_run
    rampdown = result.scenario.plan.rampdown_at
    for t, depth in zip(result.metrics.times, result.metrics.queue_depth):
        if t < rampdown:
            assert depth > 0, f"queue empty at t={t}"


def test_after_rampdown_only_baseline_remains(paper_run):
    result, _ = paper_run
    rampdown = result.scenario.plan.rampdown_at
    baseline = sum(f.target_size for f in result.scenario.baseline_fleets)
    for i, t in enumerate(result.metrics.times):
        if rampdown < t < result.scenario.horizon_s:
            total = sum(counts[i] for counts in result.metrics.counts.values())
            assert total == baseline


def test_no_idle_time_on_bundled_run(paper_run):
    result, _ = paper_run
    assert result.summary.idle_gpu_hours == 0.0


def test_timeseries_covers_horizon_on_grid(paper_run):
    result, paths = paper_run
    with open(paths["timeseries"]) as fh:
        times = sorted({float(r["t_sec"]) for r in csv.DictReader(fh)})
    period = result.scenario.metric_period_s
    assert times[0] == 0.0
    assert times[-1] == result.scenario.horizon_s
    assert all(b - a == period for a, b in zip(times, times[1:]))


def test_instance_counts_respect_capacity(paper_run):
    result, _ = paper_run
    caps = {}
    for region in result.scenario.regions.values():
        for tname, cap in region.capacity_cap.items():
            model = result.scenario.instance_types[tname].gpu_model.name
            caps[model] = caps.get(model, 0) + cap
    for model, cap in caps.items():
        per_sample = [
            sum(result.metrics.counts[k][i]
                for k in result.metrics.group_keys if k[0] == model)
            for i in range(len(result.metrics.times))
        ]
        assert max(per_sample) <= cap


def test_outputs_scale_linearly():
    r05 = run_scenario(load_scenario("paper-feb-run", scale=0.05))
    r10 = run_scenario(load_scenario("paper-feb-run", scale=0.1))
    for name in ("total_pflop_hours", "total_cost", "completed_jobs"):
        ratio = getattr(r10.summary, name) / getattr(r05.summary, name)
        assert ratio == pytest.approx(2.0, rel=0.03), name


def test_every_preempted_job_is_requeued_or_done(paper_run):
    result, _ = paper_run
    from gpuburst.pool import JobState, Outcome

    for job in result.pool.jobs.values():
        preempted = [a for a in job.attempts if a.outcome is Outcome.PREEMPTED]
        if preempted:
            assert job.state in (
                JobState.COMPLETED, JobState.QUEUED, JobState.FETCHING,
                JobState.RUNNING,
            )
        if job.state is JobState.COMPLETED:
            assert sum(a.outcome is Outcome.SUCCESS for a in job.attempts) == 1
