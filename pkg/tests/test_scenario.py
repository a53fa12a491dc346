import json

import pytest

from gpuburst.market import ConfigError
from gpuburst.scenario import (
    apply_scale,
    build_scenario,
    load_scenario,
    read_raw,
    resolve_path,
    validate_raw,
)


@pytest.fixture()
def raw():
    return read_raw("paper-feb-run")


class TestValidate:
    def test_bundled_scenario_clean(self, raw):
        assert validate_raw(raw) == []

    def test_unknown_region_named_in_diagnostic(self, raw):
        fleet = raw["plan"]["stages"][0]["fleets"][0]
        fleet["region_weights"]["aws-atlantis-1"] = 0.0
        diags = validate_raw(raw)
        assert len(diags) == 1
        assert "aws-atlantis-1" in diags[0]

    def test_spot_fraction_range_violation(self, raw):
        raw["instance_types"]["aws-t4"]["spot_fraction"] = 1.5
        diags = validate_raw(raw)
        assert any("spot_fraction" in d and "aws-t4" in d for d in diags)

    def test_weights_must_sum_to_one(self, raw):
        fleet = raw["plan"]["stages"][0]["fleets"][0]
        first = next(iter(fleet["region_weights"]))
        fleet["region_weights"][first] += 0.25
        assert any("sum" in d for d in validate_raw(raw))

    def test_missing_runtime_model(self, raw):
        del raw["workload"]["runtime"]["P40"]
        assert any("P40" in d for d in validate_raw(raw))

    def test_onprem_price_must_be_zero(self, raw):
        raw["instance_types"]["onprem-misc"]["ondemand_price_hr"] = 0.5
        assert any("on-prem" in d for d in validate_raw(raw))

    def test_negative_preemption_rate(self, raw):
        raw["regions"]["aws-us-east-1"]["preemption_rate_per_hour"] = -0.1
        assert any("preemption" in d for d in validate_raw(raw))

    def test_stage_after_rampdown_rejected(self, raw):
        raw["plan"]["stages"][0]["trigger"] = {"at_s": 28_000}
        assert any("rampdown" in d for d in validate_raw(raw))

    def test_unknown_plateau_model(self, raw):
        raw["plan"]["stages"][1]["trigger"]["plateau"]["gpu_model"] = "H100"
        assert any("H100" in d for d in validate_raw(raw))

    def test_collects_multiple_diagnostics(self, raw):
        raw["instance_types"]["aws-t4"]["spot_fraction"] = 0.0
        raw["workload"]["n_jobs"] = -1
        assert len(validate_raw(raw)) >= 2

    def test_build_refuses_invalid(self, raw):
        raw["instance_types"]["aws-t4"]["spot_fraction"] = 2.0
        with pytest.raises(ConfigError):
            build_scenario(raw)


class TestParseErrors:
    def test_parse_error_has_position(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"name": "x",\n  broken\n}')
        with pytest.raises(ConfigError) as err:
            read_raw(bad)
        assert "line 2" in str(err.value)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_raw(tmp_path / "nope.json")


class TestScale:
    def test_caps_targets_jobs_scaled(self, raw):
        scaled = apply_scale(raw, 0.1)
        assert scaled["regions"]["aws-us-east-1"]["capacity"]["aws-t4"] == 60
        assert scaled["plan"]["stages"][0]["fleets"][0]["target"] == 330
        assert scaled["onprem_baseline"]["target"] == 35
        assert scaled["workload"]["n_jobs"] == 20000

    def test_scale_one_is_identity(self, raw):
        assert apply_scale(raw, 1.0) is raw

    def test_original_not_mutated(self, raw):
        before = json.dumps(raw, sort_keys=True)
        apply_scale(raw, 0.5)
        assert json.dumps(raw, sort_keys=True) == before

    def test_nonpositive_scale_rejected(self, raw):
        with pytest.raises(ConfigError):
            apply_scale(raw, 0.0)


class TestBuild:
    def test_bundled_loads(self):
        sc = load_scenario("paper-feb-run", scale=0.1)
        assert sc.name == "paper-feb-run"
        assert len(sc.regions) == 45  # 25 cloud + 20 on-prem
        assert len(sc.plan.stages) == 2
        assert sc.baseline_fleets[0].target_size == 35
        assert sc.horizon_s == 28800

    def test_total_capacity_matches_plateau_targets(self):
        sc = load_scenario("paper-feb-run")
        caps: dict[str, int] = {}
        for region in sc.regions.values():
            for tname, cap in region.capacity_cap.items():
                model = sc.instance_types[tname].gpu_model.name
                caps[model] = caps.get(model, 0) + cap
        assert caps["T4"] == 5500
        assert caps["V100"] == 3000
        assert caps["P40"] == 7000
        assert caps["OnPremMisc"] == 350

    def test_fleet_targets_exceed_caps_for_plateau(self):
        # targets are deliberately above capacity so counts cap out
        sc = load_scenario("paper-feb-run")
        t4_target = sum(
            f.target_size
            for st in sc.plan.stages
            for f in st.fleets
            if sc.instance_types[f.instance_type].gpu_model.name == "T4"
        )
        assert t4_target > 5500


class TestResolvePath:
    def test_scalar_path(self, raw):
        node, key = resolve_path(raw, "market_defaults.preemption_rate_per_hour")
        assert node[key] == 0.03

    def test_missing_path(self, raw):
        with pytest.raises(ConfigError):
            resolve_path(raw, "market_defaults.nope")

    def test_non_scalar_rejected(self, raw):
        with pytest.raises(ConfigError):
            resolve_path(raw, "workload.runtime")
