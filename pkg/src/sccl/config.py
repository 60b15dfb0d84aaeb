"""Experiment configuration: JSON ingestion and field-level validation.

A config has four blocks::

    {
      "geometry": {"tilt_deg": 45, "dist_so": 45.79, "dist_sd": 194.58,
                   "n_views": 128, "det_rows": 256, "det_cols": 256,
                   "pitch_u": 0.34, "pitch_v": 0.34},
      "phantom":  {"type": "pcb", "nx": 150, "ny": 150, "nz": 40,
                   "voxel_pitch": 0.14, "seed": 0},
      "recon":    {"method": "fdk", "grid": {"nx": 150, "ny": 150, "nz": 40,
                   "voxel_pitch": 0.14}},
      "output":   {"dir": "out", "slices": [{"axis": "z", "index": 20}]}
    }

Angles are given in degrees and converted once, here.  Every problem is
reported with its dotted field path, e.g. ``geometry.tilt_deg``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .geometry import ScanGeometry
from .sirt import SirtOptions
from .volume import Grid

PHANTOM_TYPES = ("pcb", "cylinder", "point", "slab")
METHODS = ("fdk", "sirt")
WINDOWS = ("ram-lak", "shepp-logan", "cosine", "hann")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# field -> (kind, required, default)
_GEOMETRY = {
    "tilt_deg": ("float", True, None),
    "dist_so": ("float", True, None),
    "dist_sd": ("float", True, None),
    "n_views": ("int", True, None),
    "det_rows": ("int", True, None),
    "det_cols": ("int", True, None),
    "pitch_u": ("float", True, None),
    "pitch_v": ("float", True, None),
}
_GRID = {
    "nx": ("int", True, None),
    "ny": ("int", True, None),
    "nz": ("int", True, None),
    "voxel_pitch": ("float", True, None),
    "center": ("vec3", False, [0.0, 0.0, 0.0]),
}
_PHANTOM_COMMON = {
    "type": ("str", True, None),
    "seed": ("int", False, 0),
    "noise_sigma": ("float", False, 0.0),
    "noise_seed": ("int", False, 0),
}
_PHANTOM_EXTRA = {
    "pcb": {
        "layer_zs": ("floats", False, None),
        "trace_attn": ("float", False, 1.0),
        "substrate_attn": ("float", False, 0.05),
        "n_vias": ("int", False, 12),
        "traces_per_layer": ("int", False, 14),
    },
    "cylinder": {
        "radius": ("float", True, None),
        "height": ("float", True, None),
        "value": ("float", False, 1.0),
    },
    "point": {"index": ("ints3", True, None), "value": ("float", False, 1.0)},
    "slab": {"z0": ("float", True, None), "z1": ("float", True, None), "value": ("float", False, 1.0)},
}
_RECON = {
    "method": ("str", True, None),
    "grid": ("block", False, None),
    "window": ("str", False, "ram-lak"),
    "half_width": ("int", False, None),
    "n_iters": ("int", False, 200),
    "relaxation": ("float", False, 1.0),
    "nonnegativity": ("bool", False, True),
}
_OUTPUT = {
    "dir": ("str", False, "."),
    "slices": ("list", False, []),
    "roi_margin": ("int", False, 5),
}


def _coerce(path, kind, value):
    def bad(what):
        return ConfigError(f"{path}: expected {what}, got {value!r}")

    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise bad("a finite number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise bad("true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise bad("a string")
        return value
    if kind == "vec3":
        if not (isinstance(value, list) and len(value) == 3):
            raise bad("a list of three numbers")
        return [_coerce(f"{path}[{i}]", "float", v) for i, v in enumerate(value)]
    if kind == "ints3":
        if not (isinstance(value, list) and len(value) == 3):
            raise bad("a list of three integers")
        return [_coerce(f"{path}[{i}]", "int", v) for i, v in enumerate(value)]
    if kind == "floats":
        if value is None:
            return None
        if not isinstance(value, list):
            raise bad("a list of numbers")
        return [_coerce(f"{path}[{i}]", "float", v) for i, v in enumerate(value)]
    if kind == "list":
        if not isinstance(value, list):
            raise bad("a list")
        return value
    if kind == "block":
        if value is not None and not isinstance(value, dict):
            raise bad("an object")
        return value
    raise AssertionError(kind)


def _block(raw, name, schema) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown field (allowed: {', '.join(schema)})")
    out = {}
    for key, (kind, required, default) in schema.items():
        path = f"{name}.{key}"
        if key not in raw or (raw[key] is None and not required):
            if required:
                raise ConfigError(f"{path}: required field is missing")
            out[key] = copy.deepcopy(default)
            continue
        out[key] = _coerce(path, kind, raw[key])
    return out


def _check(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _grid_from(block: dict, name: str) -> Grid:
    g = _block(block, name, _GRID)
    for k in ("nx", "ny", "nz"):
        _check(g[k] >= 1, f"{name}.{k}", f"must be >= 1, got {g[k]}")
    _check(g["voxel_pitch"] > 0, f"{name}.voxel_pitch", f"must be positive, got {g['voxel_pitch']}")
    return Grid.centered(g["nx"], g["ny"], g["nz"], g["voxel_pitch"], tuple(g["center"]))


@dataclass(frozen=True)
class ReconConfig:
    """Validated experiment configuration.

    ``raw`` keeps the normalized JSON document (defaults filled in) that the
    config hash is computed from.
    """

    geometry: ScanGeometry
    phantom: dict
    phantom_grid: Grid
    recon: dict
    recon_grid: Grid
    output: dict
    raw: dict
    base_dir: Path

    @property
    def sirt_options(self) -> SirtOptions:
        r = self.recon
        return SirtOptions(r["n_iters"], r["relaxation"], r["nonnegativity"])

    @property
    def output_dir(self) -> Path:
        return (self.base_dir / self.output["dir"]).resolve()

    def digest(self) -> str:
        """SHA-256 of the canonical normalized config."""
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_config(doc: dict, base_dir=".") -> ReconConfig:
    """Validate a config document; raises :class:`ConfigError` on the first problem."""
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    allowed = ("geometry", "phantom", "recon", "output")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown block (allowed: {', '.join(allowed)})")
    for name in ("geometry", "recon"):
        if name not in doc:
            raise ConfigError(f"{name}: required block is missing")

    geo = _block(doc["geometry"], "geometry", _GEOMETRY)
    _check(0.0 < geo["tilt_deg"] < 90.0, "geometry.tilt_deg", f"must lie in (0, 90) degrees, got {geo['tilt_deg']}")
    _check(geo["dist_so"] > 0, "geometry.dist_so", f"must be positive, got {geo['dist_so']}")
    _check(
        geo["dist_sd"] > geo["dist_so"],
        "geometry.dist_sd",
        f"must exceed dist_so ({geo['dist_so']}), got {geo['dist_sd']}",
    )
    _check(geo["n_views"] >= 1, "geometry.n_views", f"must be >= 1, got {geo['n_views']}")
    for k in ("det_rows", "det_cols"):
        _check(geo[k] >= 2, f"geometry.{k}", f"must be >= 2, got {geo[k]}")
    for k in ("pitch_u", "pitch_v"):
        _check(geo[k] > 0, f"geometry.{k}", f"must be positive, got {geo[k]}")
    kw = {k: v for k, v in geo.items() if k != "tilt_deg"}
    geometry = ScanGeometry.from_degrees(geo["tilt_deg"], **kw)

    phantom, phantom_grid = {}, None
    if "phantom" in doc:
        raw_ph = doc["phantom"]
        if not isinstance(raw_ph, dict):
            raise ConfigError("phantom: expected an object")
        ptype = raw_ph.get("type")
        if ptype not in PHANTOM_TYPES:
            raise ConfigError(f"phantom.type: must be one of {', '.join(PHANTOM_TYPES)}, got {ptype!r}")
        schema = dict(_PHANTOM_COMMON)
        schema.update(_PHANTOM_EXTRA[ptype])
        schema.update(_GRID)
        phantom = _block(raw_ph, "phantom", schema)
        phantom_grid = _grid_from({k: phantom[k] for k in _GRID}, "phantom")
        _check(phantom["noise_sigma"] >= 0, "phantom.noise_sigma", "must be non-negative")
        for k in ("trace_attn", "substrate_attn", "value"):
            if k in phantom:
                _check(phantom[k] >= 0, f"phantom.{k}", f"must be non-negative, got {phantom[k]}")
        if ptype == "pcb":
            _check(phantom["n_vias"] >= 0, "phantom.n_vias", "must be non-negative")
            _check(phantom["traces_per_layer"] >= 0, "phantom.traces_per_layer", "must be non-negative")
            if phantom["layer_zs"] is not None:
                _check(len(phantom["layer_zs"]) >= 1, "phantom.layer_zs", "needs at least one layer")
                zlo, zhi = phantom_grid.lower_corner[2], phantom_grid.upper_corner[2]
                for i, z in enumerate(phantom["layer_zs"]):
                    _check(zlo < z < zhi, f"phantom.layer_zs[{i}]", f"{z} mm lies outside the slab ({zlo:.4g}, {zhi:.4g})")
        elif ptype == "cylinder":
            _check(phantom["radius"] > 0, "phantom.radius", f"must be positive, got {phantom['radius']}")
            _check(phantom["height"] > 0, "phantom.height", f"must be positive, got {phantom['height']}")
        elif ptype == "point":
            for i, (ix, n) in enumerate(zip(phantom["index"], phantom_grid.shape_xyz)):
                _check(0 <= ix < n, f"phantom.index[{i}]", f"{ix} outside [0, {n})")

    rec = _block(doc["recon"], "recon", _RECON)
    _check(rec["method"] in METHODS, "recon.method", f"must be one of {', '.join(METHODS)}, got {rec['method']!r}")
    _check(rec["window"] in WINDOWS, "recon.window", f"must be one of {', '.join(WINDOWS)}, got {rec['window']!r}")
    if rec["half_width"] is not None:
        _check(rec["half_width"] >= 1, "recon.half_width", f"must be >= 1, got {rec['half_width']}")
    _check(rec["n_iters"] >= 1, "recon.n_iters", f"must be >= 1, got {rec['n_iters']}")
    _check(0.0 < rec["relaxation"] <= 2.0, "recon.relaxation", f"must lie in (0, 2], got {rec['relaxation']}")
    if rec["grid"] is not None:
        recon_grid = _grid_from(rec["grid"], "recon.grid")
        rec["grid"] = _block(rec["grid"], "recon.grid", _GRID)
    elif phantom_grid is not None:
        recon_grid = phantom_grid
    else:
        raise ConfigError("recon.grid: required when the config has no phantom block")

    out = _block(doc.get("output", {}), "output", _OUTPUT)
    _check(out["roi_margin"] >= 0, "output.roi_margin", "must be non-negative")
    for i, s in enumerate(out["slices"]):
        path = f"output.slices[{i}]"
        _check(isinstance(s, dict) and set(s) == {"axis", "index"}, path, "expected {\"axis\": ..., \"index\": ...}")
        _check(s["axis"] in ("x", "y", "z"), f"{path}.axis", f"must be x, y or z, got {s['axis']!r}")
        n = dict(zip("xyz", recon_grid.shape_xyz))[s["axis"]]
        idx = s["index"]
        _check(isinstance(idx, int) and not isinstance(idx, bool) and 0 <= idx < n, f"{path}.index", f"{idx!r} outside [0, {n})")

    raw = {"geometry": geo, "recon": rec, "output": out}
    if phantom:
        raw["phantom"] = phantom
    return ReconConfig(geometry, phantom, phantom_grid, rec, recon_grid, out, raw, Path(base_dir))


def load_config(path) -> ReconConfig:
    """Read and validate a JSON config file; relative output paths resolve against its folder."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc, base_dir=path.parent)


def geometry_summary(geom: ScanGeometry) -> dict:
    """Geometry fields as stored in sidecars (tilt in degrees)."""
    return {
        "tilt_deg": math.degrees(geom.tilt_alpha),
        "dist_so": geom.dist_so,
        "dist_sd": geom.dist_sd,
        "n_views": geom.n_views,
        "det_rows": geom.det_rows,
        "det_cols": geom.det_cols,
        "pitch_u": geom.pitch_u,
        "pitch_v": geom.pitch_v,
    }
