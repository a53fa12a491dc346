"""Layered optical medium with tilted boundaries and anisotropic scattering.

Layer boundaries are horizontal planes shifted by a planar depth gradient:
the boundary depth at (x, y) is nominal + gradient * (x cos a + y sin a).
Looking up a point therefore reduces to a lookup of z - shift(x, y) in the
nominal table, and along a straight ray that shifted depth stays linear, so
layer crossings have closed-form distances. Scattering strength scales with
direction as scat * (1 + k (d.axis)^2); absorption is isotropic.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from ..market import ConfigError


@dataclass(frozen=True)
class Layer:
    z_bottom: float
    z_top: float
    abs_coeff: float  # 1/m
    scat_coeff: float  # 1/m

    def __post_init__(self):
        if self.z_top <= self.z_bottom:
            raise ConfigError("layer z_top must exceed z_bottom")
        if self.abs_coeff <= 0 or self.scat_coeff <= 0:
            raise ConfigError("layer coefficients must be > 0")


@dataclass(frozen=True)
class Tilt:
    azimuth_rad: float = 0.0
    gradient: float = 0.0  # m of depth per m horizontal


@dataclass(frozen=True)
class Anisotropy:
    axis_azimuth_rad: float = 0.0
    strength: float = 0.0

    def __post_init__(self):
        if self.strength < 0:
            raise ConfigError("anisotropy strength must be >= 0")


class IceModel:
    def __init__(
        self,
        layers: list[Layer],
        tilt: Tilt = Tilt(),
        anisotropy: Anisotropy = Anisotropy(),
        g: float = 0.9,
    ):
        if not layers:
            raise ConfigError("need at least one layer")
        layers = sorted(layers, key=lambda l: l.z_bottom)
        for below, above in zip(layers, layers[1:]):
            if not math.isclose(below.z_top, above.z_bottom, rel_tol=0, abs_tol=1e-9):
                raise ConfigError(
                    f"layers must be contiguous: {below.z_top} != {above.z_bottom}"
                )
        if not (-1.0 < g < 1.0):
            raise ConfigError("scattering asymmetry g must be in (-1, 1)")
        self.layers = layers
        self.tilt = tilt
        self.anisotropy = anisotropy
        self.g = g
        self._bottoms = [l.z_bottom for l in layers]
        self.z_min = layers[0].z_bottom
        self.z_max = layers[-1].z_top
        self._tilt_cx = tilt.gradient * math.cos(tilt.azimuth_rad)
        self._tilt_cy = tilt.gradient * math.sin(tilt.azimuth_rad)
        self._axis_x = math.cos(anisotropy.axis_azimuth_rad)
        self._axis_y = math.sin(anisotropy.axis_azimuth_rad)

    def depth_shift(self, x: float, y: float) -> float:
        """Extra boundary depth at (x, y); positive pushes boundaries down."""
        return self._tilt_cx * x + self._tilt_cy * y

    def shift_slope(self, dx: float, dy: float) -> float:
        """Rate of change of the boundary shift along a direction."""
        return self._tilt_cx * dx + self._tilt_cy * dy

    def layer_index(self, z_tilde: float) -> int:
        """Index of the layer containing shifted depth z_tilde, or -1/len outside."""
        if z_tilde < self.z_min:
            return -1
        if z_tilde >= self.z_max:
            return len(self.layers)
        return bisect_right(self._bottoms, z_tilde) - 1

    def layer_index_at(self, x: float, y: float, z: float) -> int:
        # boundaries sit at z_nominal - shift, so the point maps to z + shift
        return self.layer_index(z + self.depth_shift(x, y))

    def effective_scat(self, layer: Layer, dx: float, dy: float) -> float:
        k = self.anisotropy.strength
        if k == 0.0:
            return layer.scat_coeff
        h = dx * self._axis_x + dy * self._axis_y
        return layer.scat_coeff * (1.0 + k * h * h)


def uniform_ice(abs_coeff: float, scat_coeff: float, g: float = 0.9,
                z_min: float = -1e6, z_max: float = 1e6) -> IceModel:
    """Single effectively-unbounded layer, handy for analytic cross-checks."""
    return IceModel([Layer(z_min, z_max, abs_coeff, scat_coeff)], g=g)
