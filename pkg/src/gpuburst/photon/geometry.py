"""Spherical detector modules and segment-sphere intersection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..market import ConfigError


@dataclass(frozen=True)
class Dom:
    x: float
    y: float
    z: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("DOM radius must be > 0")


class DomArray:
    """DOM set with a vectorized path for larger geometries."""

    def __init__(self, doms: list[Dom]):
        self.doms = list(doms)
        self._use_numpy = len(doms) >= 32
        if self._use_numpy:
            self._centers = np.array([[d.x, d.y, d.z] for d in doms])
            self._r2 = np.array([d.radius**2 for d in doms])

    def __len__(self) -> int:
        return len(self.doms)

    def first_hit(
        self,
        x0: float, y0: float, z0: float,
        dx: float, dy: float, dz: float,
        length: float,
    ) -> tuple[float, int] | None:
        """Earliest intersection of the segment start + s*dir, s in [0, length].

        Direction must be unit length; returns (distance, dom index) or None.
        """
        if length <= 0.0 or not self.doms:
            return None
        if self._use_numpy:
            return self._first_hit_np(x0, y0, z0, dx, dy, dz, length)
        best: tuple[float, int] | None = None
        for i, dom in enumerate(self.doms):
            ox = x0 - dom.x
            oy = y0 - dom.y
            oz = z0 - dom.z
            b = ox * dx + oy * dy + oz * dz
            c = ox * ox + oy * oy + oz * oz - dom.radius * dom.radius
            disc = b * b - c
            if disc <= 0.0:
                continue
            s = -b - math.sqrt(disc)  # entry point from outside
            if 0.0 <= s <= length and (best is None or s < best[0]):
                best = (s, i)
        return best

    def _first_hit_np(self, x0, y0, z0, dx, dy, dz, length):
        o = np.array([x0, y0, z0]) - self._centers
        d = np.array([dx, dy, dz])
        b = o @ d
        c = np.einsum("ij,ij->i", o, o) - self._r2
        disc = b * b - c
        ok = disc > 0.0
        if not ok.any():
            return None
        s = np.full(len(self.doms), np.inf)
        s[ok] = -b[ok] - np.sqrt(disc[ok])
        s[(s < 0.0) | (s > length)] = np.inf
        i = int(np.argmin(s))
        if s[i] == np.inf:
            return None
        return float(s[i]), i


def dom_grid(
    nx: int, ny: int, spacing_m: float,
    n_per_string: int, z_top: float, dz: float, radius: float,
) -> list[Dom]:
    """Regular detector: nx*ny vertical strings, n DOMs each, centered on origin."""
    doms = []
    x0 = -(nx - 1) * spacing_m / 2.0
    y0 = -(ny - 1) * spacing_m / 2.0
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(n_per_string):
                doms.append(
                    Dom(x0 + ix * spacing_m, y0 + iy * spacing_m,
                        z_top - iz * dz, radius)
                )
    return doms
