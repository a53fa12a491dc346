"""Ice/geometry/source description files for the standalone photon kernel."""

from __future__ import annotations

import json
import math
from pathlib import Path
from importlib import resources

from ..market import ConfigError
from .geometry import Dom, dom_grid
from .medium import Anisotropy, IceModel, Layer, Tilt
from .transport import PointSource, SegmentSource

BUNDLED = {"demo-ice": "demo_ice.json"}


def read_setup(path_or_name: str | Path) -> dict:
    path = Path(path_or_name)
    if not path.exists() and str(path_or_name) in BUNDLED:
        text = (resources.files("gpuburst.data") / BUNDLED[str(path_or_name)]).read_text()
    else:
        text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path_or_name}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc


def build_ice(raw: dict) -> IceModel:
    layers = [
        Layer(l["z_bottom"], l["z_top"], l["abs_coeff"], l["scat_coeff"])
        for l in raw["layers"]
    ]
    tilt_raw = raw.get("tilt", {})
    tilt = Tilt(
        azimuth_rad=math.radians(tilt_raw.get("azimuth_deg", 0.0)),
        gradient=tilt_raw.get("gradient", 0.0),
    )
    aniso_raw = raw.get("anisotropy", {})
    aniso = Anisotropy(
        axis_azimuth_rad=math.radians(aniso_raw.get("axis_azimuth_deg", 0.0)),
        strength=aniso_raw.get("strength", 0.0),
    )
    return IceModel(layers, tilt=tilt, anisotropy=aniso, g=raw.get("g", 0.9))


def build_doms(raw: dict) -> list[Dom]:
    if "grid" in raw:
        g = raw["grid"]
        return dom_grid(
            g["nx"], g["ny"], g["spacing_m"],
            g["n_per_string"], g["z_top"], g["dz"], g["radius"],
        )
    if "list" in raw:
        return [Dom(x, y, z, r) for x, y, z, r in raw["list"]]
    raise ConfigError("doms section needs either a 'grid' or a 'list'")


def build_source(raw: dict):
    kind = raw.get("type", "point")
    direction = tuple(raw["direction"]) if "direction" in raw else None
    if kind == "point":
        return PointSource(tuple(raw["position"]), direction)
    if kind == "segment":
        return SegmentSource(tuple(raw["a"]), tuple(raw["b"]), direction)
    raise ConfigError(f"unknown source type {kind!r}")


def load_setup(path_or_name: str | Path):
    raw = read_setup(path_or_name)
    return build_ice(raw["ice"]), build_doms(raw["doms"]), build_source(raw["source"])
