"""Staged provisioning: timed or plateau-triggered fleet targets, retries,
and rampdown policy.

The plan's stages fire in order; a plateau-triggered stage becomes eligible
only once its predecessor has fired, then fires on the first metrics sample
whose trailing windows look flat. Capacity-capped fleets retry periodically,
which is what holds counts at the cap ("apparent plateau") and refills
preempted capacity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .market import ConfigError, InstanceType, RegionMarket


class RampdownPolicy(str, enum.Enum):
    IMMEDIATE_KILL = "immediate_kill"
    DRAIN_AT_JOB_BOUNDARY = "drain_at_job_boundary"


@dataclass(frozen=True)
class PlateauTrigger:
    gpu_model: str
    window_s: float = 1800.0
    rel_epsilon: float = 0.02

    def __post_init__(self):
        if self.window_s <= 0 or self.rel_epsilon <= 0:
            raise ConfigError("plateau window_s and rel_epsilon must be > 0")


@dataclass(frozen=True)
class FleetSpec:
    key: str
    instance_type: str
    region_weights: dict[str, float]  # region id -> weight, sums to 1
    target_size: int
    baseline: bool = False  # baseline fleets start at t=0 and survive rampdown

    def __post_init__(self):
        if self.target_size < 0:
            raise ConfigError(f"fleet {self.key}: negative target_size")
        total = sum(self.region_weights.values())
        if self.region_weights and abs(total - 1.0) > 1e-9:
            raise ConfigError(f"fleet {self.key}: region weights sum to {total}")


@dataclass(frozen=True)
class Stage:
    name: str
    at_s: float | None  # exactly one of at_s / plateau is set
    plateau: PlateauTrigger | None
    fleets: tuple[FleetSpec, ...]


@dataclass(frozen=True)
class Plan:
    stages: tuple[Stage, ...]
    rampdown_at: float
    rampdown_policy: RampdownPolicy = RampdownPolicy.IMMEDIATE_KILL

    def __post_init__(self):
        for stage in self.stages:
            if (stage.at_s is None) == (stage.plateau is None):
                raise ConfigError(f"stage {stage.name}: need exactly one trigger")
            if stage.at_s is not None and stage.at_s >= self.rampdown_at:
                raise ConfigError(
                    f"stage {stage.name}: at_s must precede rampdown_at"
                )


def detect_plateau(
    series: list[tuple[float, float]], window_s: float, rel_epsilon: float
) -> bool:
    """Two-window flatness test on a sampled count series.

    True iff the last two windows' means differ by less than rel_epsilon
    relative to the earlier one. Insufficient history is just "not yet".
    """
    if not series:
        return False
    t_end = series[-1][0]
    t_mid = t_end - window_s
    t_lo = t_end - 2.0 * window_s
    if series[0][0] > t_lo:
        return False
    recent = [v for t, v in series if t_mid < t <= t_end]
    previous = [v for t, v in series if t_lo < t <= t_mid]
    if not recent or not previous:
        return False
    mean_recent = sum(recent) / len(recent)
    mean_prev = sum(previous) / len(previous)
    return abs(mean_recent - mean_prev) / max(1.0, mean_prev) < rel_epsilon


def allocate_by_weight(total: int, weights: dict[str, float]) -> dict[str, int]:
    """Deterministic integer split by largest remainder; insertion order breaks ties."""
    floors: dict[str, int] = {}
    remainders: list[tuple[float, int, str]] = []
    assigned = 0
    for order, (key, w) in enumerate(weights.items()):
        exact = total * w
        fl = int(exact)
        floors[key] = fl
        assigned += fl
        remainders.append((-(exact - fl), order, key))
    remainders.sort()
    for _, _, key in remainders[: total - assigned]:
        floors[key] += 1
    return floors


@dataclass
class _FleetState:
    spec: FleetSpec
    desired: dict[str, int]
    live: dict[str, int] = field(default_factory=dict)
    pending: dict[str, int] = field(default_factory=dict)
    active: bool = False
    next_retry_t: float = 0.0


@dataclass(frozen=True)
class LaunchOrder:
    fleet_key: str
    region_id: str
    instance_type: str
    count: int


class PlanRunner:
    """Tracks stage firing and per-fleet deficits; emits launch orders.

    Owns no clock and schedules nothing: the run layer feeds it stage
    triggers and metrics samples and turns orders into launch events.
    """

    def __init__(
        self,
        plan: Plan,
        regions: dict[str, RegionMarket],
        instance_types: dict[str, InstanceType],
        retry_interval_s: float = 300.0,
        baseline_fleets: tuple[FleetSpec, ...] = (),
    ):
        self.plan = plan
        self.regions = regions
        self.instance_types = instance_types
        self.retry_interval_s = retry_interval_s
        self.fired = [False] * len(plan.stages)
        self.rampdown_started = False
        self._fleets: dict[str, _FleetState] = {}
        for spec in baseline_fleets:
            self._add_fleet(spec, active=True)
        for stage in plan.stages:
            for spec in stage.fleets:
                self._add_fleet(spec, active=False)

    def _add_fleet(self, spec: FleetSpec, active: bool) -> None:
        if spec.key in self._fleets:
            raise ConfigError(f"duplicate fleet key {spec.key}")
        if spec.instance_type not in self.instance_types:
            raise ConfigError(f"fleet {spec.key}: unknown type {spec.instance_type}")
        for region_id in spec.region_weights:
            if region_id not in self.regions:
                raise ConfigError(f"fleet {spec.key}: unknown region {region_id}")
        desired = allocate_by_weight(spec.target_size, spec.region_weights)
        self._fleets[spec.key] = _FleetState(spec=spec, desired=desired, active=active)

    # -- stage logic ------------------------------------------------------

    def timed_stages(self) -> list[tuple[int, float]]:
        return [
            (i, s.at_s) for i, s in enumerate(self.plan.stages) if s.at_s is not None
        ]

    def fire_stage(self, index: int, t: float) -> list[LaunchOrder]:
        if self.fired[index] or self.rampdown_started:
            return []
        self.fired[index] = True
        orders: list[LaunchOrder] = []
        for spec in self.plan.stages[index].fleets:
            state = self._fleets[spec.key]
            state.active = True
            orders.extend(self._request(state, t))
        return orders

    def on_metrics_sample(
        self, t: float, series_by_model: dict[str, list[tuple[float, float]]]
    ) -> list[LaunchOrder]:
        orders: list[LaunchOrder] = []
        if not self.rampdown_started:
            for i, stage in enumerate(self.plan.stages):
                if self.fired[i] or stage.plateau is None:
                    continue
                if i > 0 and not self.fired[i - 1]:
                    continue  # eligible only after the prior stage fired
                series = series_by_model.get(stage.plateau.gpu_model, [])
                if detect_plateau(
                    series, stage.plateau.window_s, stage.plateau.rel_epsilon
                ):
                    orders.extend(self.fire_stage(i, t))
        for state in self._fleets.values():
            if state.active and t >= state.next_retry_t:
                orders.extend(self._request(state, t))
        return orders

    def _request(self, state: _FleetState, t: float) -> list[LaunchOrder]:
        state.next_retry_t = t + self.retry_interval_s
        orders: list[LaunchOrder] = []
        it = self.instance_types[state.spec.instance_type]
        for region_id, want_total in state.desired.items():
            have = state.live.get(region_id, 0) + state.pending.get(region_id, 0)
            want = want_total - have
            if want <= 0:
                continue
            granted = self.regions[region_id].grant_capacity(it, want)
            if granted:
                state.pending[region_id] = state.pending.get(region_id, 0) + granted
                orders.append(LaunchOrder(state.spec.key, region_id, it.name, granted))
        return orders

    def request_baselines(self, t: float) -> list[LaunchOrder]:
        orders: list[LaunchOrder] = []
        for state in self._fleets.values():
            if state.spec.baseline:
                orders.extend(self._request(state, t))
        return orders

    # -- instance lifecycle callbacks --------------------------------------

    def on_launched(self, fleet_key: str, region_id: str) -> None:
        state = self._fleets[fleet_key]
        state.pending[region_id] -= 1
        state.live[region_id] = state.live.get(region_id, 0) + 1

    def on_launch_voided(self, fleet_key: str, region_id: str) -> None:
        """A pending launch arrived after rampdown; the grant is returned."""
        state = self._fleets[fleet_key]
        state.pending[region_id] -= 1
        it = self.instance_types[state.spec.instance_type]
        self.regions[region_id].release_capacity(it)

    def on_terminated(self, fleet_key: str, region_id: str) -> None:
        state = self._fleets[fleet_key]
        state.live[region_id] -= 1
        it = self.instance_types[state.spec.instance_type]
        self.regions[region_id].release_capacity(it)

    def start_rampdown(self) -> None:
        """Stop growing plan fleets; baseline fleets keep their targets."""
        self.rampdown_started = True
        for state in self._fleets.values():
            if not state.spec.baseline:
                state.active = False

    def live_count(self, fleet_key: str) -> int:
        return sum(self._fleets[fleet_key].live.values())

    def is_baseline(self, fleet_key: str) -> bool:
        return self._fleets[fleet_key].spec.baseline
