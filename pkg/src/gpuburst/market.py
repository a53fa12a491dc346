"""Catalog and stochastic behavior of purchasable compute.

Providers sell GPU instance types per region with a concurrency cap, a
provisioning delay, flat discounted spot pricing, and a memoryless
preemption hazard (optionally a step function of time).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .rng import RngStream


class ConfigError(ValueError):
    pass


class Provider(str, enum.Enum):
    AWS = "aws"
    AZURE = "azure"
    GCP = "gcp"
    ONPREM = "onprem"


class GeoGroup(str, enum.Enum):
    NORTH_AMERICA = "north-america"
    SOUTH_AMERICA = "south-america"
    EUROPE = "europe"
    ASIA_PACIFIC = "asia-pacific"


@dataclass(frozen=True)
class GpuModel:
    name: str
    peak_tflops32: float  # vendor peak fp32 spec
    cores: int

    def __post_init__(self):
        if self.peak_tflops32 <= 0:
            raise ConfigError(f"{self.name}: peak_tflops32 must be > 0")
        if self.cores <= 0:
            raise ConfigError(f"{self.name}: cores must be > 0")


@dataclass(frozen=True)
class InstanceType:
    name: str
    provider: Provider
    gpu_model: GpuModel
    ondemand_price: float  # $/hour
    spot_fraction: float
    gpus_per_instance: int = 1

    def __post_init__(self):
        if self.ondemand_price < 0:
            raise ConfigError(f"{self.name}: negative on-demand price")
        if not (0.0 < self.spot_fraction <= 1.0):
            raise ConfigError(f"{self.name}: spot_fraction must be in (0, 1]")
        if self.provider is Provider.ONPREM and self.ondemand_price != 0:
            raise ConfigError(f"{self.name}: on-prem instances are not billed")


def spot_price(it: InstanceType) -> float:
    """Discounted $/hour actually paid for the instance."""
    return it.ondemand_price * it.spot_fraction


@dataclass(frozen=True)
class DelaySpec:
    """Lognormal provisioning delay, request to running."""
    median_s: float = 120.0
    sigma_log: float = 0.5

    def sample(self, rng: RngStream) -> float:
        if self.sigma_log == 0.0:
            rng.index += 1
            return self.median_s
        return self.median_s * math.exp(self.sigma_log * rng.normal())


class PreemptionRate:
    """Hazard in events/hour, constant or piecewise-constant in sim time."""

    def __init__(self, steps: list[tuple[float, float]]):
        # steps: (from_t_seconds, rate_per_hour), first entry must start at 0
        if not steps or steps[0][0] != 0.0:
            raise ConfigError("preemption rate steps must start at t=0")
        for _, rate in steps:
            if rate < 0:
                raise ConfigError("preemption rate must be >= 0")
        self.steps = sorted(steps)

    @classmethod
    def constant(cls, rate_per_hour: float) -> "PreemptionRate":
        return cls([(0.0, rate_per_hour)])

    def at(self, t: float) -> float:
        rate = self.steps[0][1]
        for t0, r in self.steps:
            if t0 <= t:
                rate = r
            else:
                break
        return rate

    def time_to_preemption(self, launch_t: float, tau: float) -> float:
        """Seconds from launch until the integrated hazard reaches tau."""
        if tau == math.inf:
            return math.inf
        t = launch_t
        remaining = tau
        for i, (t0, rate) in enumerate(self.steps):
            seg_start = max(t, t0)
            seg_end = self.steps[i + 1][0] if i + 1 < len(self.steps) else math.inf
            if seg_end <= t:
                continue
            if rate == 0.0:
                if seg_end == math.inf:
                    return math.inf
                continue
            span_h = (seg_end - seg_start) / 3600.0
            if remaining <= rate * span_h:
                return seg_start - launch_t + remaining / rate * 3600.0
            remaining -= rate * span_h
        return math.inf


def sample_preemption_delay(rate_per_hour: float, rng: RngStream) -> float:
    """Hours until preemption under a constant memoryless hazard."""
    if rate_per_hour < 0:
        raise ConfigError(f"negative preemption rate {rate_per_hour}")
    return rng.exponential(rate_per_hour)


@dataclass
class RegionMarket:
    region_id: str
    provider: Provider
    geo_group: GeoGroup
    capacity_cap: dict[str, int]  # instance type name -> max concurrent
    provision_delay: DelaySpec = field(default_factory=DelaySpec)
    preemption_rate: PreemptionRate = field(
        default_factory=lambda: PreemptionRate.constant(0.0)
    )
    in_use: dict[str, int] = field(default_factory=dict)

    def cap_for(self, it: InstanceType) -> int:
        return self.capacity_cap.get(it.name, 0)

    def used_for(self, it: InstanceType) -> int:
        return self.in_use.get(it.name, 0)

    def grant_capacity(self, it: InstanceType, requested: int) -> int:
        """Grant up to the remaining headroom; plateau when the cap is hit."""
        if requested < 0:
            raise ConfigError("requested capacity must be >= 0")
        used = self.in_use.get(it.name, 0)
        granted = min(requested, self.cap_for(it) - used)
        granted = max(granted, 0)
        if granted:
            self.in_use[it.name] = used + granted
        return granted

    def release_capacity(self, it: InstanceType, count: int = 1) -> None:
        used = self.in_use.get(it.name, 0)
        if count > used:
            raise ConfigError(
                f"{self.region_id}: releasing {count} > in-use {used} for {it.name}"
            )
        self.in_use[it.name] = used - count
