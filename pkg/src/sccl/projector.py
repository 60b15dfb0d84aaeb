"""Ray-driven forward projection and voxel-driven backprojection.

The forward projector integrates the voxelised volume exactly along the
segment from the source to each pixel centre (incremental Siddon traversal).
The backprojector visits voxels, projects each centre onto plane E and reads
the view by bilinear interpolation; reads outside the detector are zero.

Every accumulation happens in a fixed order per output element, so results do
not depend on the numba thread count.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .geometry import ScanGeometry, pose_at, project_point
from .volume import Grid, Volume

log = logging.getLogger(__name__)

# numba probes TBB before falling back to OpenMP/workqueue; an old TBB is harmless
warnings.filterwarnings("ignore", message="The TBB threading layer requires", category=numba.NumbaWarning)

WEIGHT_NONE = 0
WEIGHT_FDK = 1
WEIGHT_ADJOINT = 2
# no "ninf"/"nnan": the traversal relies on inf sentinels
_FASTMATH = {"nsz", "arcp", "contract"}

_WEIGHT_MODES = {"none": WEIGHT_NONE, "fdk": WEIGHT_FDK, "adjoint": WEIGHT_ADJOINT}


@dataclass
class ProjectionStack:
    """Line-integral images, one per projection angle.

    ``data`` has shape ``(n_views, det_rows, det_cols)``; row index follows
    ``v`` and column index follows ``u``.  Pixel ``(r, c)`` is centred at
    ``u = (c - (det_cols - 1) / 2) * pitch_u`` and
    ``v = (r - (det_rows - 1) / 2) * pitch_v``.
    """

    betas: np.ndarray
    data: np.ndarray
    pitch_u: float
    pitch_v: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ValueError(f"stack data must be 3-D, got shape {self.data.shape}")
        if self.betas.ndim != 1 or self.betas.size != self.data.shape[0]:
            raise ValueError("need exactly one angle per view")
        if self.betas.size and (np.any(self.betas < 0) or np.any(self.betas >= 2 * np.pi)):
            raise ValueError("projection angles must lie in [0, 2 pi)")
        if np.any(np.diff(self.betas) <= 0):
            raise ValueError("projection angles must be strictly increasing")

    @property
    def n_views(self) -> int:
        return self.data.shape[0]

    @property
    def det_rows(self) -> int:
        return self.data.shape[1]

    @property
    def det_cols(self) -> int:
        return self.data.shape[2]

    @property
    def delta_beta(self) -> float:
        """Angular quadrature step, assuming the views cover a full turn."""
        return 2.0 * np.pi / self.n_views

    def check_matches(self, geom: ScanGeometry):
        if (self.det_rows, self.det_cols) != (geom.det_rows, geom.det_cols):
            raise ValueError(
                f"stack raster {self.det_rows}x{self.det_cols} does not match geometry "
                f"{geom.det_rows}x{geom.det_cols}"
            )
        if not (
            math.isclose(self.pitch_u, geom.pitch_u, rel_tol=1e-9)
            and math.isclose(self.pitch_v, geom.pitch_v, rel_tol=1e-9)
        ):
            raise ValueError("stack pixel pitch does not match geometry")

    def subset(self, mask) -> "ProjectionStack":
        mask = np.asarray(mask)
        return ProjectionStack(self.betas[mask], self.data[mask], self.pitch_u, self.pitch_v, dict(self.meta))


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True, error_model="numpy", fastmath=_FASTMATH)
def _axis_setup(s, d, lo, h, n, amin, amax):
    # start voxel, planes crossed, next crossing alpha, alpha per voxel, index step
    if d > 0.0:
        p0 = (s + amin * d - lo) / h
        p1 = (s + amax * d - lo) / h
        i0 = min(max(int(math.floor(p0)), 0), n - 1)
        i1 = min(max(int(math.ceil(p1)) - 1, 0), n - 1)
        return i0, i1 - i0, (lo + (i0 + 1) * h - s) / d, h / d, 1
    elif d < 0.0:
        p0 = (s + amin * d - lo) / h
        p1 = (s + amax * d - lo) / h
        i0 = min(max(int(math.ceil(p0)) - 1, 0), n - 1)
        i1 = min(max(int(math.floor(p1)), 0), n - 1)
        return i0, i0 - i1, (lo + i0 * h - s) / d, -h / d, -1
    p0 = (s - lo) / h
    i0 = min(max(int(math.floor(p0)), 0), n - 1)
    return i0, 0, np.inf, np.inf, 0


@njit(cache=True, error_model="numpy", fastmath=_FASTMATH)
def _ray_sum(flat, nx, ny, nz, lox, loy, loz, h, sx, sy, sz, ex, ey, ez):
    """Siddon path integral of ``flat`` (x-fastest) along the segment s -> e."""
    dx = ex - sx
    dy = ey - sy
    dz = ez - sz
    amin = 0.0
    amax = 1.0
    if dx != 0.0:
        a0 = (lox - sx) / dx
        a1 = (lox + nx * h - sx) / dx
        amin = max(amin, min(a0, a1))
        amax = min(amax, max(a0, a1))
    elif sx <= lox or sx >= lox + nx * h:
        return 0.0
    if dy != 0.0:
        a0 = (loy - sy) / dy
        a1 = (loy + ny * h - sy) / dy
        amin = max(amin, min(a0, a1))
        amax = min(amax, max(a0, a1))
    elif sy <= loy or sy >= loy + ny * h:
        return 0.0
    if dz != 0.0:
        a0 = (loz - sz) / dz
        a1 = (loz + nz * h - sz) / dz
        amin = max(amin, min(a0, a1))
        amax = min(amax, max(a0, a1))
    elif sz <= loz or sz >= loz + nz * h:
        return 0.0
    if amax <= amin:
        return 0.0

    i, cx, ax, stx, di = _axis_setup(sx, dx, lox, h, nx, amin, amax)
    j, cy, ay, sty, dj = _axis_setup(sy, dy, loy, h, ny, amin, amax)
    k, cz, az, stz, dk = _axis_setup(sz, dz, loz, h, nz, amin, amax)
    idx = (k * ny + j) * nx + i
    step_y = dj * nx
    step_z = dk * nx * ny
    total = 0.0
    acur = amin
    # one plane crossing per iteration; ties cost a zero-length segment
    for _ in range(cx + cy + cz):
        if ax < ay:
            if ax < az:
                total += flat[idx] * (ax - acur)
                acur = ax
                ax += stx
                idx += di
            else:
                total += flat[idx] * (az - acur)
                acur = az
                az += stz
                idx += step_z
        elif ay < az:
            total += flat[idx] * (ay - acur)
            acur = ay
            ay += sty
            idx += step_y
        else:
            total += flat[idx] * (az - acur)
            acur = az
            az += stz
            idx += step_z
    total += flat[idx] * (amax - acur)
    return total * math.sqrt(dx * dx + dy * dy + dz * dz)


@njit(parallel=True, cache=True, error_model="numpy", fastmath=_FASTMATH)
def _forward_kernel(vol, lo, h, src, det, us, vs, out):
    nz, ny, nx = vol.shape
    flat = vol.ravel()
    nv = src.shape[0]
    nr = vs.size
    nc = us.size
    for idx in prange(nv * nr):
        b = idx // nr
        r = idx - b * nr
        sx = src[b, 0]
        sy = src[b, 1]
        sz = src[b, 2]
        ey = det[b, 1] + vs[r]
        ez = det[b, 2]
        for c in range(nc):
            out[b, r, c] = _ray_sum(
                flat, nx, ny, nz, lo[0], lo[1], lo[2], h, sx, sy, sz, det[b, 0] + us[c], ey, ez
            )


@njit(cache=True, inline="always")
def _bilinear(img, fr, fc):
    nr, nc = img.shape
    r0 = math.floor(fr)
    c0 = math.floor(fc)
    if r0 < -1 or r0 > nr - 1 or c0 < -1 or c0 > nc - 1:
        return 0.0
    wr = fr - r0
    wc = fc - c0
    val = 0.0
    if r0 >= 0:
        if c0 >= 0:
            val += (1.0 - wr) * (1.0 - wc) * img[r0, c0]
        if c0 + 1 < nc:
            val += (1.0 - wr) * wc * img[r0, c0 + 1]
    if r0 + 1 < nr:
        if c0 >= 0:
            val += wr * (1.0 - wc) * img[r0 + 1, c0]
        if c0 + 1 < nc:
            val += wr * wc * img[r0 + 1, c0 + 1]
    return val


@njit(parallel=True, cache=True, error_model="numpy")
def _backproject_kernel(padded, sinb, cosb, view_scale, xs, ys, zs, sd, so, sa, ca, pu, pv, mode, adj_const, out):
    # padded: views with a one-pixel zero border, so bilinear reads need no edge tests
    nv = padded.shape[0]
    nr = padded.shape[1] - 2
    nc = padded.shape[2] - 2
    nz = zs.size
    ny = ys.size
    nx = xs.size
    cr = 0.5 * (nr - 1) + 1.0
    cc = 0.5 * (nc - 1) + 1.0
    for k in prange(nz):
        col = np.empty(nx, dtype=np.int64)
        wcol = np.empty(nx)
        t = sd * ca / (zs[k] + so * ca)
        base = (sd - t * so) * sa
        if mode == 1:
            zw = t * t
        elif mode == 2:
            zw = adj_const * t * t
        else:
            zw = 1.0
        for b in range(nv):
            su = base * sinb[b]
            sv = base * cosb[b]
            w = zw * view_scale[b]
            img = padded[b]
            for i in range(nx):
                fc = (su + t * xs[i]) / pu + cc
                c0 = int(math.floor(fc))
                if c0 < 0 or c0 > nc:
                    col[i] = -1
                    wcol[i] = 0.0
                else:
                    col[i] = c0
                    wcol[i] = fc - c0
            for j in range(ny):
                v = sv + t * ys[j]
                fr = v / pv + cr
                r0 = int(math.floor(fr))
                if r0 < 0 or r0 > nr:
                    continue
                wr = fr - r0
                row0 = img[r0]
                row1 = img[r0 + 1]
                for i in range(nx):
                    c0 = col[i]
                    if c0 < 0:
                        continue
                    wc = wcol[i]
                    val = (1.0 - wr) * ((1.0 - wc) * row0[c0] + wc * row0[c0 + 1]) + wr * (
                        (1.0 - wc) * row1[c0] + wc * row1[c0 + 1]
                    )
                    if mode == 2:
                        # ray density grows with the source-pixel distance
                        u = su + t * xs[i]
                        s = u * sinb[b] + v * cosb[b]
                        val *= math.sqrt(sd * sd - 2.0 * sd * sa * s + u * u + v * v)
                    out[k, j, i] += w * val


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _view_arrays(geom: ScanGeometry, betas):
    betas = np.asarray(betas, dtype=float)
    src = np.empty((betas.size, 3))
    det = np.empty((betas.size, 3))
    for n, beta in enumerate(betas):
        pose = pose_at(geom, beta)
        src[n] = pose.source_pos
        det[n] = pose.det_center
    return src, det


def check_grid_placement(geom: ScanGeometry, grid: Grid):
    """Raise if any voxel reaches the source plane or crosses the detector plane."""
    lo, hi = grid.lower_corner[2], grid.upper_corner[2]
    if lo <= geom.source_z or hi >= geom.detector_z:
        raise ValueError(
            f"volume z-extent [{lo:.4g}, {hi:.4g}] mm must lie strictly between the "
            f"source plane {geom.source_z:.4g} and detector plane {geom.detector_z:.4g}"
        )


def box_in_fov(geom: ScanGeometry, lower, upper, betas=None) -> bool:
    """True if the box ``[lower, upper]`` projects inside the detector in every view.

    Projection is a perspective map per z, so the convex hull of the eight
    projected corners bounds the footprint.
    """
    if betas is None:
        betas = geom.betas()
    corners = np.array(
        [[x, y, z] for x in (lower[0], upper[0]) for y in (lower[1], upper[1]) for z in (lower[2], upper[2])]
    )
    hu, hv = geom.half_width_u, geom.half_width_v
    for beta in betas:
        u, v = project_point(geom, beta, corners)
        if np.any(np.abs(u) > hu) or np.any(np.abs(v) > hv):
            return False
    return True


def fov_mask(geom: ScanGeometry, grid: Grid, betas=None) -> np.ndarray:
    """Boolean mask of voxels whose centres project onto the detector in every view."""
    if betas is None:
        betas = geom.betas()
    z, y, x = np.meshgrid(grid.z(), grid.y(), grid.x(), indexing="ij")
    pts = np.stack([x, y, z], axis=-1)
    mask = np.ones(grid.shape, dtype=bool)
    hu = geom.half_width_u - 0.5 * geom.pitch_u
    hv = geom.half_width_v - 0.5 * geom.pitch_v
    for beta in betas:
        u, v = project_point(geom, beta, pts)
        mask &= (np.abs(u) <= hu) & (np.abs(v) <= hv)
    return mask


def forward_project(vol: Volume, geom: ScanGeometry, betas=None, dtype=np.float64) -> ProjectionStack:
    """Exact radiological path integrals from the source to every pixel centre.

    Parameters
    ----------
    vol : Volume
        Attenuation in 1/mm.
    geom : ScanGeometry
    betas : array_like, optional
        Projection angles; defaults to ``geom.betas()``.
    dtype : numpy dtype
        Output precision.  Accumulation is always double precision.

    Returns
    -------
    ProjectionStack
        Line integrals (dimensionless).
    """
    if betas is None:
        betas = geom.betas()
    betas = np.asarray(betas, dtype=float)
    if betas.size == 0:
        raise ValueError("need at least one projection angle")
    check_grid_placement(geom, vol.grid)

    data = np.asarray(vol.data, dtype=np.float64)
    nz_idx = np.nonzero(data)
    if nz_idx[0].size:
        g = vol.grid
        h = g.voxel_pitch
        lower = np.array([g.x()[nz_idx[2].min()], g.y()[nz_idx[1].min()], g.z()[nz_idx[0].min()]]) - 0.5 * h
        upper = np.array([g.x()[nz_idx[2].max()], g.y()[nz_idx[1].max()], g.z()[nz_idx[0].max()]]) + 0.5 * h
        if not box_in_fov(geom, lower, upper, betas):
            warnings.warn(
                "non-zero voxels project outside the detector; projections are truncated",
                stacklevel=2,
            )

    src, det = _view_arrays(geom, betas)
    out = np.empty((betas.size, geom.det_rows, geom.det_cols), dtype=np.float64)
    _forward_kernel(
        np.ascontiguousarray(data),
        vol.grid.lower_corner.astype(np.float64),
        float(vol.grid.voxel_pitch),
        src,
        det,
        geom.u_coords(),
        geom.v_coords(),
        out,
    )
    return ProjectionStack(betas, out.astype(dtype, copy=False), geom.pitch_u, geom.pitch_v)


def back_project(stack: ProjectionStack, geom: ScanGeometry, grid: Grid, weighting="none", view_scale=None) -> Volume:
    """Voxel-driven backprojection of raw detector images.

    Parameters
    ----------
    weighting : {"none", "fdk", "adjoint"}
        ``"none"`` sums bilinear samples as-is.  ``"fdk"`` multiplies by the
        distance weight :func:`sccl.geometry.backproj_weight`.  ``"adjoint"``
        multiplies by the ray density seen by the voxel, which makes this
        operator a close approximation of the transpose of
        :func:`forward_project`.
    view_scale : array_like, optional
        Per-view multiplier; defaults to ones.
    """
    stack.check_matches(geom)
    check_grid_placement(geom, grid)
    try:
        mode = _WEIGHT_MODES[weighting]
    except KeyError:
        raise ValueError(f"unknown weighting {weighting!r}") from None
    if view_scale is None:
        view_scale = np.ones(stack.n_views)
    view_scale = np.asarray(view_scale, dtype=np.float64)
    if view_scale.shape != (stack.n_views,):
        raise ValueError("view_scale needs one entry per view")

    ca = math.cos(geom.tilt_alpha)
    h = grid.voxel_pitch
    adj_const = h**3 / (geom.pitch_u * geom.pitch_v * geom.dist_sd * ca)
    out = grid.zeros()
    padded = np.zeros((stack.n_views, stack.det_rows + 2, stack.det_cols + 2))
    padded[:, 1:-1, 1:-1] = stack.data
    _backproject_kernel(
        padded,
        np.sin(stack.betas),
        np.cos(stack.betas),
        view_scale,
        grid.x(),
        grid.y(),
        grid.z(),
        float(geom.dist_sd),
        float(geom.dist_so),
        math.sin(geom.tilt_alpha),
        ca,
        float(geom.pitch_u),
        float(geom.pitch_v),
        mode,
        adj_const,
        out,
    )
    return Volume(grid, out)


def back_project_weighted(stack: ProjectionStack, geom: ScanGeometry, grid: Grid) -> Volume:
    """Distance-weighted backprojection with the ``delta_beta / 2`` quadrature factor."""
    scale = np.full(stack.n_views, 0.5 * stack.delta_beta)
    return back_project(stack, geom, grid, weighting="fdk", view_scale=scale)


def add_noise(stack: ProjectionStack, sigma: float, seed=None) -> ProjectionStack:
    """Additive white Gaussian noise with standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return ProjectionStack(stack.betas.copy(), stack.data.copy(), stack.pitch_u, stack.pitch_v, dict(stack.meta))
    rng = np.random.default_rng(seed)
    noisy = stack.data + rng.normal(0.0, sigma, size=stack.data.shape)
    return ProjectionStack(stack.betas.copy(), noisy.astype(stack.data.dtype), stack.pitch_u, stack.pitch_v, dict(stack.meta))


def set_threads(n: int) -> int:
    """Set the numba worker count, clamped to what the runtime allows."""
    limit = numba.config.NUMBA_NUM_THREADS
    if n > limit:
        log.warning("requested %d threads, runtime allows %d", n, limit)
    n = max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n
