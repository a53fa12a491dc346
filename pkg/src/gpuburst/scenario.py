"""Scenario files: schema, validation, desk-scale scaling, construction.

A scenario is one JSON object describing the catalog (GPU models, instance
types, region markets), the provisioning plan, the on-prem baseline, and the
workload. `validate_raw` collects every violation instead of stopping at the
first; `build_scenario` constructs typed objects only from clean input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .market import (
    ConfigError,
    DelaySpec,
    GeoGroup,
    GpuModel,
    InstanceType,
    PreemptionRate,
    Provider,
    RegionMarket,
)
from .provisioner import (
    FleetSpec,
    Plan,
    PlateauTrigger,
    RampdownPolicy,
    Stage,
)
from .workload import FetchModel, RuntimeModel, RuntimeSpec

BUNDLED = {"paper-feb-run": "paper_feb_run.json"}


@dataclass
class Scenario:
    name: str
    seed: int
    horizon_s: float
    metric_period_s: float
    gpu_models: dict[str, GpuModel]
    instance_types: dict[str, InstanceType]
    regions: dict[str, RegionMarket]
    plan: Plan
    baseline_fleets: tuple[FleetSpec, ...]
    runtime_model: RuntimeModel
    fetch_model: FetchModel
    epilogue_s: float
    n_jobs: int
    retry_interval_s: float
    scale: float = 1.0


def read_raw(path_or_name: str | Path) -> dict:
    """Load a scenario file; bare bundled names resolve to packaged data."""
    path = Path(path_or_name)
    if not path.exists() and str(path_or_name) in BUNDLED:
        ref = resources.files("gpuburst.data") / BUNDLED[str(path_or_name)]
        text = ref.read_text()
    else:
        text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path_or_name}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc


def validate_raw(raw: dict) -> list[str]:
    """Return all schema/reference violations found (empty list means valid)."""
    diags: list[str] = []

    def need(section: str) -> dict:
        value = raw.get(section)
        if not isinstance(value, dict):
            diags.append(f"missing or malformed section {section!r}")
            return {}
        return value

    models = need("gpu_models")
    types = need("instance_types")
    regions = need("regions")
    plan = need("plan")
    work = need("workload")

    providers = {p.value for p in Provider}
    geos = {g.value for g in GeoGroup}

    for name, spec in models.items():
        if spec.get("peak_tflops32", 0) <= 0:
            diags.append(f"gpu model {name}: peak_tflops32 must be > 0")
        if spec.get("cores", 0) <= 0:
            diags.append(f"gpu model {name}: cores must be > 0")

    for name, spec in types.items():
        if spec.get("provider") not in providers:
            diags.append(f"instance type {name}: unknown provider {spec.get('provider')!r}")
        if spec.get("gpu_model") not in models:
            diags.append(f"instance type {name}: unknown gpu model {spec.get('gpu_model')!r}")
        sf = spec.get("spot_fraction", 0)
        if not (0 < sf <= 1):
            diags.append(f"instance type {name}: spot_fraction {sf} outside (0, 1]")
        if spec.get("ondemand_price_hr", 0) < 0:
            diags.append(f"instance type {name}: negative on-demand price")
        if spec.get("provider") == "onprem" and spec.get("ondemand_price_hr", 0) != 0:
            diags.append(f"instance type {name}: on-prem price must be 0")

    for rid, spec in regions.items():
        if spec.get("provider") not in providers:
            diags.append(f"region {rid}: unknown provider {spec.get('provider')!r}")
        if spec.get("geo_group") not in geos:
            diags.append(f"region {rid}: unknown geo group {spec.get('geo_group')!r}")
        for tname, cap in spec.get("capacity", {}).items():
            if tname not in types:
                diags.append(f"region {rid}: capacity for unknown type {tname!r}")
            if cap < 0:
                diags.append(f"region {rid}: negative capacity for {tname}")
        rate = spec.get("preemption_rate_per_hour")
        if rate is not None and _min_rate(rate) < 0:
            diags.append(f"region {rid}: negative preemption rate")

    def check_fleet(where: str, fl: dict) -> None:
        if fl.get("instance_type") not in types:
            diags.append(f"{where}: unknown instance type {fl.get('instance_type')!r}")
        if fl.get("target", 0) < 0:
            diags.append(f"{where}: negative target")
        weights = fl.get("region_weights", {})
        for rid in weights:
            if rid not in regions:
                diags.append(f"{where}: unknown region {rid!r}")
        if weights:
            total = sum(weights.values())
            if abs(total - 1.0) > 1e-6:
                diags.append(f"{where}: region weights sum to {total:.9g}, not 1")
        else:
            diags.append(f"{where}: no region weights")

    horizon = raw.get("horizon_s", 0)
    rampdown_at = plan.get("rampdown_at_s")
    if rampdown_at is None:
        diags.append("plan: missing rampdown_at_s")
        rampdown_at = math.inf
    policy = plan.get("rampdown_policy", "immediate_kill")
    if policy not in {p.value for p in RampdownPolicy}:
        diags.append(f"plan: unknown rampdown policy {policy!r}")

    for i, stage in enumerate(plan.get("stages", [])):
        where = f"stage[{i}] {stage.get('name', '?')!r}"
        trig = stage.get("trigger", {})
        has_at = "at_s" in trig
        has_plateau = "plateau" in trig
        if has_at == has_plateau:
            diags.append(f"{where}: trigger needs exactly one of at_s / plateau")
        if has_at:
            if trig["at_s"] >= rampdown_at:
                diags.append(f"{where}: at_s {trig['at_s']} not before rampdown")
            if horizon and trig["at_s"] >= horizon:
                diags.append(f"{where}: at_s {trig['at_s']} not before horizon")
        if has_plateau and trig["plateau"].get("gpu_model") not in models:
            diags.append(
                f"{where}: plateau references unknown gpu model "
                f"{trig['plateau'].get('gpu_model')!r}"
            )
        for fl in stage.get("fleets", []):
            check_fleet(f"{where} fleet {fl.get('instance_type')}", fl)

    onprem = raw.get("onprem_baseline")
    if onprem:
        check_fleet("onprem_baseline", onprem)

    runtime = work.get("runtime", {})
    for mname in models:
        if mname not in runtime:
            diags.append(f"workload: no runtime model for gpu model {mname}")
    for mname, spec in runtime.items():
        if mname not in models:
            diags.append(f"workload runtime: unknown gpu model {mname}")
        if spec.get("median_s", 0) <= 0:
            diags.append(f"workload runtime {mname}: median_s must be > 0")
        cap = spec.get("cap_s", math.inf)
        if cap < spec.get("median_s", 0):
            diags.append(f"workload runtime {mname}: cap_s below median_s")
    if work.get("n_jobs", 0) < 0:
        diags.append("workload: negative n_jobs")
    fetch = work.get("fetch", {})
    for key in ("file_mb", "server_gbps_cap", "per_client_mbps_cap"):
        if key in fetch and fetch[key] <= 0:
            diags.append(f"workload fetch: {key} must be > 0")

    defaults = raw.get("market_defaults", {})
    if _min_rate(defaults.get("preemption_rate_per_hour", 0.0)) < 0:
        diags.append("market_defaults: negative preemption rate")

    return diags


def _min_rate(rate) -> float:
    if isinstance(rate, list):
        return min((step[1] for step in rate), default=0.0)
    return rate


def _rate_of(raw_rate) -> PreemptionRate:
    if isinstance(raw_rate, list):
        return PreemptionRate([(float(t), float(r)) for t, r in raw_rate])
    return PreemptionRate.constant(float(raw_rate))


def apply_scale(raw: dict, scale: float) -> dict:
    """Multiply every instance-count knob (capacities, targets, queue size)."""
    if scale == 1.0:
        return raw
    if scale <= 0:
        raise ConfigError(f"scale must be > 0, got {scale}")
    scaled = json.loads(json.dumps(raw))
    for region in scaled.get("regions", {}).values():
        caps = region.get("capacity", {})
        for key in caps:
            caps[key] = round(caps[key] * scale)
    for stage in scaled.get("plan", {}).get("stages", []):
        for fleet in stage.get("fleets", []):
            fleet["target"] = round(fleet["target"] * scale)
    onprem = scaled.get("onprem_baseline")
    if onprem:
        onprem["target"] = round(onprem["target"] * scale)
    work = scaled.get("workload", {})
    if "n_jobs" in work:
        work["n_jobs"] = round(work["n_jobs"] * scale)
    return scaled


def build_scenario(raw: dict, scale: float = 1.0) -> Scenario:
    diags = validate_raw(raw)
    if diags:
        raise ConfigError("invalid scenario:\n  " + "\n  ".join(diags))
    raw = apply_scale(raw, scale)

    gpu_models = {
        name: GpuModel(name, spec["peak_tflops32"], spec["cores"])
        for name, spec in raw["gpu_models"].items()
    }
    instance_types = {
        name: InstanceType(
            name=name,
            provider=Provider(spec["provider"]),
            gpu_model=gpu_models[spec["gpu_model"]],
            ondemand_price=spec["ondemand_price_hr"],
            spot_fraction=spec["spot_fraction"],
            gpus_per_instance=spec.get("gpus_per_instance", 1),
        )
        for name, spec in raw["instance_types"].items()
    }

    defaults = raw.get("market_defaults", {})
    default_delay = _delay_of(defaults.get("provision_delay", {}))
    default_rate = defaults.get("preemption_rate_per_hour", 0.0)

    regions = {}
    for rid, spec in raw["regions"].items():
        regions[rid] = RegionMarket(
            region_id=rid,
            provider=Provider(spec["provider"]),
            geo_group=GeoGroup(spec["geo_group"]),
            capacity_cap=dict(spec.get("capacity", {})),
            provision_delay=(
                _delay_of(spec["provision_delay"])
                if "provision_delay" in spec
                else default_delay
            ),
            preemption_rate=_rate_of(
                spec.get("preemption_rate_per_hour", default_rate)
            ),
        )

    def fleet_of(fl: dict, key: str, baseline: bool = False) -> FleetSpec:
        return FleetSpec(
            key=key,
            instance_type=fl["instance_type"],
            region_weights=dict(fl["region_weights"]),
            target_size=fl["target"],
            baseline=baseline,
        )

    stages = []
    for i, st in enumerate(raw["plan"].get("stages", [])):
        trig = st["trigger"]
        plateau = None
        if "plateau" in trig:
            p = trig["plateau"]
            plateau = PlateauTrigger(
                gpu_model=p["gpu_model"],
                window_s=p.get("window_s", 1800.0),
                rel_epsilon=p.get("rel_epsilon", 0.02),
            )
        fleets = tuple(
            fleet_of(fl, key=f"{st.get('name', f'stage{i}')}/{fl['instance_type']}")
            for fl in st.get("fleets", [])
        )
        stages.append(
            Stage(
                name=st.get("name", f"stage{i}"),
                at_s=trig.get("at_s"),
                plateau=plateau,
                fleets=fleets,
            )
        )
    plan = Plan(
        stages=tuple(stages),
        rampdown_at=raw["plan"]["rampdown_at_s"],
        rampdown_policy=RampdownPolicy(
            raw["plan"].get("rampdown_policy", "immediate_kill")
        ),
    )

    baseline_fleets = ()
    onprem = raw.get("onprem_baseline")
    if onprem:
        baseline_fleets = (fleet_of(onprem, key="baseline/onprem", baseline=True),)

    work = raw["workload"]
    runtime_specs = {
        name: RuntimeSpec(
            median_s=spec["median_s"],
            sigma_log=spec.get("sigma_log", 0.15),
            cap_s=spec.get("cap_s", math.inf),
        )
        for name, spec in work["runtime"].items()
    }
    photon_work = work.get("photon_work", {})
    runtime_model = RuntimeModel(
        per_model=runtime_specs,
        mode=work.get("mode", "lognormal"),
        photons_per_job=photon_work.get("photons_per_job", 0),
        photons_per_s=photon_work.get("photons_per_s"),
    )
    fetch_raw = work.get("fetch", {})
    fetch_model = FetchModel(
        file_mb=fetch_raw.get("file_mb", 45.0),
        server_gbps_cap=fetch_raw.get("server_gbps_cap", 100.0),
        per_client_mbps_cap=fetch_raw.get("per_client_mbps_cap", 500.0),
        overhead_s=fetch_raw.get("overhead_s", 0.3),
    )

    return Scenario(
        name=raw.get("name", "unnamed"),
        seed=raw.get("seed", 0),
        horizon_s=raw["horizon_s"],
        metric_period_s=raw.get("metric_period_s", 60.0),
        gpu_models=gpu_models,
        instance_types=instance_types,
        regions=regions,
        plan=plan,
        baseline_fleets=baseline_fleets,
        runtime_model=runtime_model,
        fetch_model=fetch_model,
        epilogue_s=work.get("epilogue_s", 5.0),
        n_jobs=work.get("n_jobs", 0),
        retry_interval_s=raw.get("market_defaults", {}).get("retry_interval_s", 300.0),
        scale=scale,
    )


def _delay_of(spec: dict) -> DelaySpec:
    return DelaySpec(
        median_s=spec.get("median_s", 120.0),
        sigma_log=spec.get("sigma_log", 0.5),
    )


def load_scenario(path_or_name: str | Path, scale: float = 1.0) -> Scenario:
    return build_scenario(read_raw(path_or_name), scale=scale)


def resolve_path(raw: dict, dotted: str):
    """Walk a dotted path into the raw scenario dict; returns (parent, key)."""
    parts = dotted.split(".")
    node = raw
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"path {dotted!r}: no element {part!r}")
        node = node[part]
    last = parts[-1]
    if not isinstance(node, dict) or last not in node:
        raise ConfigError(f"path {dotted!r}: no element {last!r}")
    if isinstance(node[last], (dict, list)):
        raise ConfigError(f"path {dotted!r} does not resolve to a scalar")
    return node, last
