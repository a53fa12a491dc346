"""Job runtime generation and input-file fetch against a capacity-limited origin.

Runtimes are drawn per GPU model from observed-runtime lognormals, not from
peak-FLOPS scaling: the two deliberately disagree (measured runtime ratios
differ from spec-sheet ratios), and compute accounting stays peak-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .market import ConfigError
from .rng import RngStream


@dataclass(frozen=True)
class RuntimeSpec:
    median_s: float
    sigma_log: float = 0.15
    cap_s: float = math.inf

    def __post_init__(self):
        if self.median_s <= 0:
            raise ConfigError("median_s must be > 0")
        if self.cap_s < self.median_s:
            raise ConfigError("cap_s must be >= median_s")


@dataclass
class RuntimeModel:
    """Per-GPU-model job runtime distributions, plus an optional mode where a
    job is a fixed photon count and runtime follows per-model photon rates."""

    per_model: dict[str, RuntimeSpec]
    mode: str = "lognormal"  # or "photon-count"
    photons_per_job: int = 0
    photons_per_s: dict[str, float] | None = None

    def sample_runtime(self, gpu_model: str, rng: RngStream) -> float:
        spec = self.per_model.get(gpu_model)
        if spec is None:
            raise ConfigError(f"no runtime model for GPU model {gpu_model!r}")
        if self.mode == "photon-count":
            rate = (self.photons_per_s or {}).get(gpu_model)
            if not rate or rate <= 0:
                raise ConfigError(f"no photon rate for GPU model {gpu_model!r}")
            return self.photons_per_job / rate
        if spec.sigma_log == 0.0:
            rng.index += 1
            return min(spec.median_s, spec.cap_s)
        sample = spec.median_s * math.exp(spec.sigma_log * rng.normal())
        return min(sample, spec.cap_s)


def sample_runtime(model: RuntimeModel, gpu_model: str, rng: RngStream) -> float:
    return model.sample_runtime(gpu_model, rng)


@dataclass(frozen=True)
class FetchModel:
    file_mb: float = 45.0
    server_gbps_cap: float = 100.0
    per_client_mbps_cap: float = 500.0
    overhead_s: float = 0.3

    def __post_init__(self):
        for name in ("file_mb", "server_gbps_cap", "per_client_mbps_cap"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.overhead_s < 0:
            raise ConfigError("overhead_s must be >= 0")


def sample_fetch_time(n_active_fetches: int, fm: FetchModel) -> float:
    """Seconds to pull one input file given current fetch concurrency.

    The server fair-shares its capacity across active fetches; each client is
    further limited by its own link. Concurrency is taken at fetch start and
    assumed constant over the (short) transfer.
    """
    if n_active_fetches < 1:
        raise ConfigError("n_active_fetches must be >= 1")
    rate_mbps = min(
        fm.per_client_mbps_cap, fm.server_gbps_cap * 1000.0 / n_active_fetches
    )
    return fm.overhead_s + (fm.file_mb * 8.0) / rate_mbps


def aggregate_input_throughput(n_active_fetches: int, fm: FetchModel) -> float:
    """Instantaneous server-side Gbps with fair sharing; never exceeds the cap."""
    if n_active_fetches <= 0:
        return 0.0
    per_fetch_mbps = min(
        fm.per_client_mbps_cap, fm.server_gbps_cap * 1000.0 / n_active_fetches
    )
    return n_active_fetches * per_fetch_mbps / 1000.0


def steady_state_throughput_gbps(
    instances_per_model: dict[str, int],
    mean_runtime_s: dict[str, float],
    fm: FetchModel,
) -> float:
    """Closed-form steady-state demand: one file per job completion."""
    total_mbps = 0.0
    for model, n in instances_per_model.items():
        r = mean_runtime_s[model]
        total_mbps += n * fm.file_mb * 8.0 / r
    return total_mbps / 1000.0
