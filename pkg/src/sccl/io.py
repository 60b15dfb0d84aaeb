"""Raw float32 payloads with JSON sidecars for volumes and projection stacks.

A dataset ``name`` is stored as two files: ``name.raw`` holds the samples as
little-endian IEEE-754 float32 in C order with the first listed dimension
varying fastest, and ``name.json`` holds the metadata.  The sidecar is
authoritative: the payload must contain exactly ``prod(dims) * 4`` bytes.

Data are narrowed to float32 on write.  Reading returns float32 arrays, so a
write/read cycle of float32 data is bit-exact.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path

import numpy as np

from .projector import ProjectionStack
from .volume import Grid, Volume

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f4")


class FormatError(ValueError):
    """Sidecar or payload is malformed or inconsistent."""


def dataset_paths(path) -> tuple[Path, Path]:
    """``(payload, sidecar)`` for a dataset path given with or without suffix."""
    p = Path(path)
    if p.suffix in (".raw", ".json"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".raw"), p.with_name(p.name + ".json")


def _write(path, kind: str, data: np.ndarray, meta: dict) -> Path:
    raw, side = dataset_paths(path)
    raw.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(data, dtype=_DTYPE)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"refusing to write non-finite samples to {raw}")
    header = {"format_version": FORMAT_VERSION, "kind": kind, "dtype": "float32", "byte_order": "little"}
    header.update(meta)
    # write the payload first so a readable sidecar always has its data
    tmp = raw.with_name(raw.name + ".part")
    arr.tofile(tmp)
    os.replace(tmp, raw)
    side.write_text(json.dumps(header, indent=2) + "\n")
    return side


def _read(path, kind: str) -> tuple[dict, np.ndarray]:
    raw, side = dataset_paths(path)
    try:
        meta = json.loads(side.read_text())
    except FileNotFoundError:
        raise FileNotFoundError(f"missing sidecar {side}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side}: invalid JSON ({exc})") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{side}: unsupported format_version {meta.get('format_version')!r}")
    if meta.get("kind") != kind:
        raise FormatError(f"{side}: expected a {kind}, found {meta.get('kind')!r}")
    dims = meta.get("dims")
    if not (isinstance(dims, list) and len(dims) == 3 and all(isinstance(d, int) and d > 0 for d in dims)):
        raise FormatError(f"{side}: dims must be three positive integers, got {dims!r}")
    expected = int(np.prod(dims)) * _DTYPE.itemsize
    try:
        size = raw.stat().st_size
    except FileNotFoundError:
        raise FileNotFoundError(f"missing payload {raw}") from None
    if size != expected:
        raise FormatError(f"{raw}: payload has {size} bytes, sidecar dims {dims} need {expected}")
    data = np.fromfile(raw, dtype=_DTYPE).reshape(dims[::-1])
    return meta, data


def write_volume(path, vol: Volume, provenance: dict | None = None) -> Path:
    """Write ``vol``; ``provenance`` is stored verbatim in the sidecar."""
    g = vol.grid
    meta = {
        "dims": [g.nx, g.ny, g.nz],
        "axes": ["x", "y", "z"],
        "voxel_pitch": g.voxel_pitch,
        "origin": list(g.origin),
        "units": {"length": "mm", "value": "1/mm"},
    }
    if provenance:
        meta["provenance"] = provenance
    return _write(path, "volume", vol.data, meta)


def read_volume(path) -> tuple[Volume, dict]:
    """Return the volume and its full sidecar dictionary."""
    meta, data = _read(path, "volume")
    try:
        grid = Grid(*meta["dims"], float(meta["voxel_pitch"]), tuple(meta["origin"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{dataset_paths(path)[1]}: bad grid metadata ({exc})") from None
    return Volume(grid, data), meta


def write_stack(path, stack: ProjectionStack, provenance: dict | None = None) -> Path:
    meta = {
        "dims": [stack.det_cols, stack.det_rows, stack.n_views],
        "axes": ["u", "v", "view"],
        "pitch_u": stack.pitch_u,
        "pitch_v": stack.pitch_v,
        "betas": [float(b) for b in stack.betas],
        "units": {"length": "mm", "angle": "rad", "value": "line integral"},
    }
    if provenance:
        meta["provenance"] = provenance
    return _write(path, "stack", stack.data, meta)


def read_stack(path) -> tuple[ProjectionStack, dict]:
    meta, data = _read(path, "stack")
    try:
        betas = np.asarray(meta["betas"], dtype=float)
        stack = ProjectionStack(betas, data, float(meta["pitch_u"]), float(meta["pitch_v"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{dataset_paths(path)[1]}: bad stack metadata ({exc})") from None
    return stack, meta


def write_pgm(path, image: np.ndarray) -> tuple[float, float]:
    """16-bit binary PGM with linear windowing ``min -> 0``, ``max -> 65535``.

    The window is also written to ``<path stem>.txt``.  A constant image maps
    to all zeros.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D image")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        q = np.rint((img - lo) / (hi - lo) * 65535.0)
    else:
        q = np.zeros_like(img)
    q = q.astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(q.tobytes())
    path.with_suffix(".txt").write_text(f"window_min {lo!r}\nwindow_max {hi!r}\nmaxval 65535\n")
    return lo, hi


def read_pgm(path) -> np.ndarray:
    """Read back a file written by :func:`write_pgm` (16-bit P5 only)."""
    blob = Path(path).read_bytes()
    # exactly one whitespace byte separates the header from the raster
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", blob)
    if m is None or int(m.group(3)) != 65535:
        raise FormatError(f"{path}: not a 16-bit P5 PGM")
    cols, rows = int(m.group(1)), int(m.group(2))
    body = blob[m.end() : m.end() + rows * cols * 2]
    return np.frombuffer(body, dtype=">u2").reshape(rows, cols)
