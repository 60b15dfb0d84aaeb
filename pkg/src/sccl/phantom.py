"""Voxel phantoms: a multilayer PCB-like board and simple analytic shapes."""

from __future__ import annotations

import numpy as np

from .volume import Grid, Volume

COPPER_ATTN = 1.0
SUBSTRATE_ATTN = 0.05


def make_point(grid: Grid, index, value: float) -> Volume:
    """Volume with a single non-zero voxel at ``index = (ix, iy, iz)``."""
    ix, iy, iz = (int(i) for i in index)
    if not (0 <= ix < grid.nx and 0 <= iy < grid.ny and 0 <= iz < grid.nz):
        raise IndexError(f"voxel index {index} outside grid {grid.shape_xyz}")
    data = grid.zeros()
    data[iz, iy, ix] = value
    return Volume(grid, data)


def make_slab(grid: Grid, z0: float, z1: float, value: float) -> Volume:
    """Voxels whose centres satisfy ``z0 <= z < z1`` are set to ``value``."""
    data = grid.zeros()
    z = grid.z()
    data[(z >= z0) & (z < z1)] = value
    return Volume(grid, data)


def make_cylinder(grid: Grid, radius: float, height: float, value: float, center=(0.0, 0.0, 0.0), subsamples: int = 4) -> Volume:
    """Upright cylinder; boundary voxels get their covered fraction of ``value``.

    Coverage is estimated on a ``subsamples**3`` lattice inside each voxel.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if height <= 0:
        raise ValueError(f"height must be positive, got {height}")
    h = grid.voxel_pitch
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    x = grid.x() - center[0]
    y = grid.y() - center[1]
    z = grid.z() - center[2]

    # xy coverage and z coverage are separable for an upright cylinder
    xs = (x[:, None] + h * offs[None, :]).ravel()
    ys = (y[:, None] + h * offs[None, :]).ravel()
    inside = (xs[None, :] ** 2 + ys[:, None] ** 2) <= radius**2
    cover_xy = inside.reshape(grid.ny, subsamples, grid.nx, subsamples).mean(axis=(1, 3))
    zs = z[:, None] + h * offs[None, :]
    cover_z = (np.abs(zs) <= 0.5 * height).mean(axis=1)
    data = value * cover_z[:, None, None] * cover_xy[None, :, :]
    return Volume(grid, data)


def _disk(mask, cx, cy, r):
    ny, nx = mask.shape
    yy, xx = np.ogrid[:ny, :nx]
    mask |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def _trace(mask, x0, y0, length, width, horizontal):
    ny, nx = mask.shape
    half = width // 2
    if horizontal:
        xa, xb = sorted((x0, x0 + length))
        mask[max(y0 - half, 0) : min(y0 - half + width, ny), max(xa, 0) : min(xb + 1, nx)] = True
    else:
        ya, yb = sorted((y0, y0 + length))
        mask[max(ya, 0) : min(yb + 1, ny), max(x0 - half, 0) : min(x0 - half + width, nx)] = True


def make_pcb_phantom(
    nx: int = 300,
    ny: int = 300,
    nz: int = 80,
    voxel_pitch: float = 0.07,
    layer_zs=None,
    trace_attn: float = COPPER_ATTN,
    substrate_attn: float = SUBSTRATE_ATTN,
    seed: int = 0,
    layer_thickness: float | None = None,
    substrate_margin: float | None = None,
    n_vias: int = 12,
    traces_per_layer: int = 14,
    trace_width: float | None = None,
    pad_radius: float | None = None,
) -> Volume:
    """Multilayer circuit-board phantom.

    A substrate slab carries thin copper layers at heights ``layer_zs`` (mm,
    relative to the grid centre).  Each layer holds axis-aligned traces and
    round pads; vertical vias join pads on adjacent layers, and every via
    end is fed by at least one trace so the layers are interconnected.

    Parameters
    ----------
    layer_zs : sequence of float, optional
        Layer heights.  Defaults to three layers spread over the middle half of
        the grid.
    layer_thickness : float, optional
        Copper thickness in mm; defaults to two voxels.
    substrate_margin : float, optional
        Substrate extends this far beyond the outermost layers; defaults to
        three voxels.
    trace_width, pad_radius : float, optional
        In mm; default to 3 and 2.5 voxels.
    seed : int
        Seed for the layout generator; the result is a pure function of all
        arguments.
    """
    if trace_attn < 0 or substrate_attn < 0:
        raise ValueError("attenuation values must be non-negative")
    grid = Grid.centered(nx, ny, nz, voxel_pitch)
    h = voxel_pitch
    if layer_zs is None:
        half = 0.25 * nz * h
        layer_zs = (-half, 0.0, half)
    layer_zs = [float(z) for z in layer_zs]
    if not layer_zs:
        raise ValueError("need at least one layer")
    if layer_thickness is None:
        layer_thickness = 2 * h
    if substrate_margin is None:
        substrate_margin = 3 * h
    width = max(1, int(round((trace_width if trace_width is not None else 3 * h) / h)))
    pad_r = (pad_radius if pad_radius is not None else 2.5 * h) / h

    z = grid.z()
    zlo, zhi = grid.lower_corner[2], grid.upper_corner[2]
    layer_slices = []
    for lz in layer_zs:
        if not (zlo + 0.5 * layer_thickness <= lz <= zhi - 0.5 * layer_thickness):
            raise ValueError(f"layer at z={lz} mm does not fit in slab [{zlo:.4g}, {zhi:.4g}]")
        ks = np.nonzero(np.abs(z - lz) <= 0.5 * layer_thickness + 1e-9)[0]
        if ks.size == 0:
            ks = np.array([int(np.argmin(np.abs(z - lz)))])
        layer_slices.append(ks)

    data = grid.zeros()
    sub = (z >= min(layer_zs) - substrate_margin) & (z <= max(layer_zs) + substrate_margin)
    data[sub] = substrate_attn

    rng = np.random.default_rng(seed)
    masks = [np.zeros((ny, nx), dtype=bool) for _ in layer_zs]
    border = int(np.ceil(pad_r)) + 2
    n_layers = len(layer_zs)
    vias = []
    if n_layers > 1:
        for n in range(n_vias):
            cx = int(rng.integers(border, nx - border))
            cy = int(rng.integers(border, ny - border))
            # cycle through adjacent layer pairs so every pair is connected
            lo = n % (n_layers - 1)
            vias.append((cx, cy, lo, lo + 1))
    for cx, cy, lo, hi in vias:
        for layer in (lo, hi):
            _disk(masks[layer], cx, cy, pad_r)
            length = int(rng.integers(nx // 8, nx // 2)) * (1 if rng.random() < 0.5 else -1)
            _trace(masks[layer], cx, cy, length, width, bool(rng.random() < 0.5))
        vmask = np.zeros((ny, nx), dtype=bool)
        _disk(vmask, cx, cy, max(pad_r - 1.0, 0.75))
        ks = np.arange(layer_slices[lo].min(), layer_slices[hi].max() + 1)
        for k in ks:
            data[k][vmask] = trace_attn

    for layer, mask in enumerate(masks):
        for _ in range(traces_per_layer):
            x0 = int(rng.integers(border, nx - border))
            y0 = int(rng.integers(border, ny - border))
            length = int(rng.integers(nx // 10, nx // 2)) * (1 if rng.random() < 0.5 else -1)
            horizontal = bool(rng.random() < 0.5)
            _trace(mask, x0, y0, length, width, horizontal)
            # terminate traces on pads
            if horizontal:
                _disk(mask, int(np.clip(x0 + length, 0, nx - 1)), y0, pad_r)
            else:
                _disk(mask, x0, int(np.clip(y0 + length, 0, ny - 1)), pad_r)
        for k in layer_slices[layer]:
            data[k][mask] = trace_attn
    return Volume(grid, data)
