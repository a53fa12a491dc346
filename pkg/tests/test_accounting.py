import math

import pytest

from gpuburst.accounting import (
    CostLedger,
    LedgerError,
    cost_effectiveness,
    integrated_pflops,
    plateau_stats,
    waste_fraction,
)
from gpuburst.market import GeoGroup, GpuModel, InstanceType, Provider
from gpuburst.run import run_scenario
from gpuburst.scenario import read_raw, build_scenario

T4 = GpuModel("T4", 8.1, 2560)
AWS_T4 = InstanceType("aws-t4", Provider.AWS, T4, 0.66, 1 / 3)
ONPREM = InstanceType("onprem-misc", Provider.ONPREM, GpuModel("OnPremMisc", 5.0, 2048), 0.0, 1.0)


def open_one(ledger, instance_id=1, it=AWS_T4, price=1.0, t0=0.0):
    ledger.open_billing(instance_id, "f", it, "r", GeoGroup.EUROPE, price, t0)


class TestBilling:
    def test_two_hours_at_one_dollar(self):
        ledger = CostLedger()
        open_one(ledger, price=1.0, t0=0.0)
        rec = ledger.close_billing(1, 7200.0)
        assert rec.cost == pytest.approx(2.0)

    def test_preempted_billed_for_uptime_only(self):
        ledger = CostLedger()
        open_one(ledger, price=1.0, t0=0.0)
        rec = ledger.close_billing(1, 1800.0)
        assert rec.cost == pytest.approx(0.5)

    def test_onprem_costs_nothing(self):
        ledger = CostLedger()
        open_one(ledger, it=ONPREM, price=0.0)
        rec = ledger.close_billing(1, 123456.0)
        assert rec.cost == 0.0

    def test_double_close_raises(self):
        ledger = CostLedger()
        open_one(ledger)
        ledger.close_billing(1, 10.0)
        with pytest.raises(LedgerError):
            ledger.close_billing(1, 20.0)

    def test_double_open_raises(self):
        ledger = CostLedger()
        open_one(ledger)
        with pytest.raises(LedgerError):
            open_one(ledger)


class TestWasteFraction:
    def test_zero_when_clean(self):
        assert waste_fraction(0.0, 0.0, 1000.0) == 0.0

    def test_zero_billed_reports_zero_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            assert waste_fraction(10.0, 0.0, 0.0) == 0.0
        assert "undefined" in caplog.text

    def test_renewal_oracle_closed_form(self):
        # memoryless preemption against fixed runtime R: the long-run waste
        # fraction is 1 - lam*R / (e^(lam*R) - 1)
        from gpuburst.market import sample_preemption_delay
        from gpuburst.rng import RngStream

        lam_r = 0.21
        runtime_h = 1.0
        rng = RngStream(7, "preempt/waste")
        wasted = useful = 0.0
        for _ in range(100_000):
            while True:
                ttl = sample_preemption_delay(lam_r / runtime_h, rng)
                if ttl >= runtime_h:
                    useful += runtime_h
                    break
                wasted += ttl
        simulated = wasted / (wasted + useful)
        oracle = 1.0 - lam_r / (math.exp(lam_r) - 1.0)
        assert simulated == pytest.approx(oracle, abs=0.01)


class TestIntegratedPflops:
    def test_constant_hour(self):
        series = [(i * 60.0, 44.55) for i in range(61)]  # 1 h at 5500 T4
        assert integrated_pflops(series) == pytest.approx(5500 * 8.1 / 1000.0)

    def test_empty_pool(self):
        assert integrated_pflops([]) == 0.0
        assert integrated_pflops([(0.0, 0.0), (3600.0, 0.0)]) == 0.0

    def test_triangle(self):
        series = [(0.0, 0.0), (3600.0, 10.0)]
        assert integrated_pflops(series) == pytest.approx(5.0)


class TestPlateauStats:
    def test_flat_with_ramp(self):
        series = [(t * 60.0, min(t * 2.0, 100.0)) for t in range(200)]
        level, duration = plateau_stats(series)
        # band is [90, 100]: entered at t=45, so the span averages the five
        # in-band ramp samples (90..98) with 150 flat samples at 100
        expected_level = (90 + 92 + 94 + 96 + 98 + 150 * 100) / 155
        assert level == pytest.approx(expected_level)
        assert duration == pytest.approx((199 - 45) * 60.0)

    def test_empty(self):
        assert plateau_stats([]) == (0.0, 0.0)


class TestEffectiveness:
    def test_share_ratio(self):
        from gpuburst.accounting import ModelSummary, RunSummary

        per_model = {
            "T4": ModelSummary("T4", pflop_hours=30.0, cost=15.0),
            "V100": ModelSummary("V100", pflop_hours=70.0, cost=85.0),
        }
        summary = RunSummary(
            per_model=per_model, total_pflop_hours=100.0, total_cost=100.0,
            total_billed_gpu_hours=0.0, completed_jobs=0, wasted_gpu_hours=0.0,
            idle_gpu_hours=0.0, useful_gpu_hours=0.0, waste_fraction=0.0,
            plateau_pflops=0.0, plateau_duration_s=0.0, horizon_s=0.0,
            seed=0, scale=1.0, scenario_name="x",
        )
        cost_effectiveness(summary)
        assert per_model["T4"].effectiveness == pytest.approx(30.0 / 15.0 * 1.0)
        assert per_model["T4"].compute_share == pytest.approx(0.30)
        assert per_model["T4"].cost_share == pytest.approx(0.15)

    def test_single_model_pool_is_one(self):
        from gpuburst.accounting import ModelSummary, RunSummary

        per_model = {"T4": ModelSummary("T4", pflop_hours=10.0, cost=42.0)}
        summary = RunSummary(
            per_model=per_model, total_pflop_hours=10.0, total_cost=42.0,
            total_billed_gpu_hours=0.0, completed_jobs=0, wasted_gpu_hours=0.0,
            idle_gpu_hours=0.0, useful_gpu_hours=0.0, waste_fraction=0.0,
            plateau_pflops=0.0, plateau_duration_s=0.0, horizon_s=0.0,
            seed=0, scale=1.0, scenario_name="x",
        )
        cost_effectiveness(summary)
        assert per_model["T4"].effectiveness == pytest.approx(1.0)


class TestRunConservation:
    def test_billed_equals_useful_plus_wasted_plus_idle(self, paper_run):
        result, _ = paper_run
        s = result.summary
        assert s.total_billed_gpu_hours == pytest.approx(
            s.useful_gpu_hours + s.wasted_gpu_hours + s.idle_gpu_hours, rel=1e-9
        )

    def test_per_model_costs_sum_to_total(self, paper_run):
        result, _ = paper_run
        s = result.summary
        assert sum(ms.cost for ms in s.per_model.values()) == pytest.approx(
            s.total_cost, abs=0.005
        )

    def test_shares_sum_to_one(self, paper_run):
        result, _ = paper_run
        s = result.summary
        assert sum(ms.compute_share for ms in s.per_model.values()) == pytest.approx(1.0)
        assert sum(ms.cost_share for ms in s.per_model.values()) == pytest.approx(1.0)


def test_resampling_refinement_changes_integral_little():
    raw = read_raw("paper-feb-run")
    raw["metric_period_s"] = 60
    r60 = run_scenario(build_scenario(raw, scale=0.05))
    raw["metric_period_s"] = 10
    r10 = run_scenario(build_scenario(raw, scale=0.05))
    a = r60.summary.total_pflop_hours
    b = r10.summary.total_pflop_hours
    assert abs(a - b) / a < 0.005
