"""Photon propagation loop: sample an absorption budget, walk scatter to
scatter through the layers, stop at a detector hit, absorption, or escape.

Path lengths are tracked as dimensionless optical depth consumed through the
local coefficients, which keeps the exponential law exact in inhomogeneous
ice. Every photon owns an indexed substream, so batch results do not depend
on execution order or thread count.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..market import ConfigError
from ..rng import RngStream
from .geometry import Dom, DomArray
from .medium import IceModel

logger = logging.getLogger(__name__)

class PhotonNumericalFault(RuntimeError):
    pass


class Status(enum.Enum):
    IN_FLIGHT = "in_flight"
    ABSORBED = "absorbed"
    DETECTED = "detected"
    ESCAPED = "escaped"


class _SegmentEnd(enum.Enum):
    SCATTER = "scatter"
    ABSORB = "absorb"
    BOUNDARY = "boundary"


@dataclass
class Photon:
    x: float
    y: float
    z: float
    dx: float
    dy: float
    dz: float
    remaining_abs_tau: float
    status: Status = Status.IN_FLIGHT
    steps: int = 0
    path_length: float = 0.0
    dom_hit: int | None = None


def sample_abs_tau(rng: RngStream) -> float:
    """Optical absorption budget: tau = -ln(u), u uniform on (0, 1]."""
    return -math.log(rng.uniform_open())


def sample_scatter_cos(g: float, rng: RngStream) -> float:
    """Henyey-Greenstein polar cosine; g = 0 degenerates to isotropic."""
    if not (-1.0 < g < 1.0):
        raise ConfigError(f"HG parameter g={g} outside (-1, 1)")
    u = rng.uniform()
    if abs(g) < 1e-9:
        return 1.0 - 2.0 * u
    frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
    cos_t = (1.0 + g * g - frac * frac) / (2.0 * g)
    return max(-1.0, min(1.0, cos_t))


def sample_scatter(
    dx: float, dy: float, dz: float, g: float, rng: RngStream
) -> tuple[float, float, float]:
    """New unit direction: HG polar angle around the old one, uniform azimuth."""
    cos_t = sample_scatter_cos(g, rng)
    phi = 2.0 * math.pi * rng.uniform()
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    # orthonormal frame around the incoming direction
    if abs(dz) < 0.99:
        ex, ey, ez = -dy, dx, 0.0  # cross(d, z_hat), up to sign
    else:
        ex, ey, ez = 0.0, dz, -dy  # cross(d, x_hat)
    norm = math.sqrt(ex * ex + ey * ey + ez * ez)
    ex, ey, ez = ex / norm, ey / norm, ez / norm
    fx = dy * ez - dz * ey
    fy = dz * ex - dx * ez
    fz = dx * ey - dy * ex
    a = sin_t * math.cos(phi)
    b = sin_t * math.sin(phi)
    nx = cos_t * dx + a * ex + b * fx
    ny = cos_t * dy + a * ey + b * fy
    nz = cos_t * dz + a * ez + b * fz
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    return nx / norm, ny / norm, nz / norm


def step_to_next_scatter(
    photon: Photon, ice: IceModel, scatter_tau: float
) -> tuple[float, _SegmentEnd]:
    """Advance the photon until it scatters, is absorbed, or leaves the ice.

    Both the scatter depth passed in and the photon's absorption budget are
    consumed through the local (anisotropy-scaled) coefficients layer by
    layer. Returns (segment length, why the segment ended); the photon is
    moved to the segment end.
    """
    z_tilde = photon.z + ice.depth_shift(photon.x, photon.y)
    slope = photon.dz + ice.shift_slope(photon.dx, photon.dy)
    idx = ice.layer_index(z_tilde)
    if idx < 0 or idx >= len(ice.layers):
        photon.status = Status.ESCAPED
        return 0.0, _SegmentEnd.BOUNDARY

    traveled = 0.0
    end = _SegmentEnd.BOUNDARY
    while True:
        layer = ice.layers[idx]
        eff_scat = ice.effective_scat(layer, photon.dx, photon.dy)
        if slope > 0.0:
            dist_exit = (layer.z_top - z_tilde) / slope
        elif slope < 0.0:
            dist_exit = (layer.z_bottom - z_tilde) / slope
        else:
            dist_exit = math.inf
        dist_absorb = photon.remaining_abs_tau / layer.abs_coeff
        dist_scatter = scatter_tau / eff_scat
        dist = min(dist_exit, dist_absorb, dist_scatter)

        traveled += dist
        z_tilde += slope * dist
        scatter_tau -= dist * eff_scat
        photon.remaining_abs_tau = max(
            0.0, photon.remaining_abs_tau - dist * layer.abs_coeff
        )

        if dist == dist_absorb and dist <= dist_scatter:
            end = _SegmentEnd.ABSORB
            break
        if dist == dist_scatter:
            end = _SegmentEnd.SCATTER
            break
        idx += 1 if slope > 0.0 else -1
        if idx < 0 or idx >= len(ice.layers):
            end = _SegmentEnd.BOUNDARY
            break

    photon.x += photon.dx * traveled
    photon.y += photon.dy * traveled
    photon.z += photon.dz * traveled
    photon.path_length += traveled
    return traveled, end


def propagate(
    photon: Photon,
    ice: IceModel,
    doms: DomArray,
    rng: RngStream,
    max_steps: int = 100_000,
    path: list[tuple[float, float, float]] | None = None,
) -> Photon:
    """Run the scatter loop until the photon is absorbed, detected, or gone."""
    if path is not None:
        path.append((photon.x, photon.y, photon.z))
    while photon.status is Status.IN_FLIGHT:
        if photon.steps >= max_steps:
            logger.warning("photon exceeded %d steps; treated as escaped", max_steps)
            photon.status = Status.ESCAPED
            break
        photon.steps += 1
        x0, y0, z0 = photon.x, photon.y, photon.z
        scatter_tau = -math.log(rng.uniform_open())
        length, end = step_to_next_scatter(photon, ice, scatter_tau)
        if not (
            math.isfinite(photon.x)
            and math.isfinite(photon.y)
            and math.isfinite(photon.z)
        ):
            raise PhotonNumericalFault(f"non-finite photon state: {photon!r}")
        hit = doms.first_hit(x0, y0, z0, photon.dx, photon.dy, photon.dz, length)
        if hit is not None:
            s, dom_index = hit
            photon.x = x0 + photon.dx * s
            photon.y = y0 + photon.dy * s
            photon.z = z0 + photon.dz * s
            photon.path_length -= length - s
            photon.status = Status.DETECTED
            photon.dom_hit = dom_index
            if path is not None:
                path.append((photon.x, photon.y, photon.z))
            break
        if path is not None:
            path.append((photon.x, photon.y, photon.z))
        if photon.status is Status.ESCAPED:
            break
        if end is _SegmentEnd.ABSORB:
            photon.status = Status.ABSORBED
            break
        if end is _SegmentEnd.BOUNDARY:
            photon.status = Status.ESCAPED
            break
        photon.dx, photon.dy, photon.dz = sample_scatter(
            photon.dx, photon.dy, photon.dz, ice.g, rng
        )
    return photon


@dataclass(frozen=True)
class PointSource:
    position: tuple[float, float, float]
    direction: tuple[float, float, float] | None = None  # None = isotropic

    def emit(self, rng: RngStream) -> Photon:
        x, y, z = self.position
        dx, dy, dz = _emit_direction(self.direction, rng)
        return Photon(x, y, z, dx, dy, dz, remaining_abs_tau=sample_abs_tau(rng))


@dataclass(frozen=True)
class SegmentSource:
    a: tuple[float, float, float]
    b: tuple[float, float, float]
    direction: tuple[float, float, float] | None = None

    def emit(self, rng: RngStream) -> Photon:
        t = rng.uniform()
        x = self.a[0] + t * (self.b[0] - self.a[0])
        y = self.a[1] + t * (self.b[1] - self.a[1])
        z = self.a[2] + t * (self.b[2] - self.a[2])
        dx, dy, dz = _emit_direction(self.direction, rng)
        return Photon(x, y, z, dx, dy, dz, remaining_abs_tau=sample_abs_tau(rng))


def _emit_direction(
    fixed: tuple[float, float, float] | None, rng: RngStream
) -> tuple[float, float, float]:
    if fixed is not None:
        norm = math.sqrt(sum(c * c for c in fixed))
        return fixed[0] / norm, fixed[1] / norm, fixed[2] / norm
    cos_t = 1.0 - 2.0 * rng.uniform()
    phi = 2.0 * math.pi * rng.uniform()
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    return sin_t * math.cos(phi), sin_t * math.sin(phi), cos_t


@dataclass
class BatchResult:
    n_emitted: int = 0
    n_detected: int = 0
    n_absorbed: int = 0
    n_escaped: int = 0
    dom_hits: dict[int, int] = field(default_factory=dict)
    total_steps: int = 0

    def add_photon(self, photon: Photon) -> None:
        self.n_emitted += 1
        self.total_steps += photon.steps
        if photon.status is Status.DETECTED:
            self.n_detected += 1
            self.dom_hits[photon.dom_hit] = self.dom_hits.get(photon.dom_hit, 0) + 1
        elif photon.status is Status.ABSORBED:
            self.n_absorbed += 1
        else:
            self.n_escaped += 1

    def merge(self, other: "BatchResult") -> None:
        self.n_emitted += other.n_emitted
        self.n_detected += other.n_detected
        self.n_absorbed += other.n_absorbed
        self.n_escaped += other.n_escaped
        self.total_steps += other.total_steps
        for dom, hits in other.dom_hits.items():
            self.dom_hits[dom] = self.dom_hits.get(dom, 0) + hits


def run_batch(
    n_photons: int,
    source,
    ice: IceModel,
    doms: list[Dom] | DomArray,
    seed: int,
    workers: int = 1,
    max_steps: int = 100_000,
) -> BatchResult:
    """Propagate n photons on substream i per photon; order-independent."""
    if n_photons < 1:
        raise ConfigError("n_photons must be >= 1")
    if not isinstance(doms, DomArray):
        doms = DomArray(doms)
    base = RngStream(seed, "photon")

    def run_chunk(lo: int, hi: int) -> BatchResult:
        part = BatchResult()
        for i in range(lo, hi):
            rng = base.substream(i)
            photon = source.emit(rng)
            propagate(photon, ice, doms, rng, max_steps=max_steps)
            part.add_photon(photon)
        return part

    result = BatchResult()
    if workers <= 1:
        result.merge(run_chunk(0, n_photons))
        return result
    chunk = (n_photons + workers - 1) // workers
    bounds = [(lo, min(lo + chunk, n_photons)) for lo in range(0, n_photons, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda b: run_chunk(*b), bounds))
    for part in parts:  # merge in bounds order: deterministic
        result.merge(part)
    return result
