"""FDK-type analytical reconstruction for SC-CL.

Pipeline per view:

1. multiply the raw view by the per-pixel cosine weight
   (:func:`sccl.geometry.preweight`) and by ``|cos b|`` or ``|sin b|``;
2. resample onto lines of constant ``s = u sin b + v cos b`` and ramp-filter
   each line along ``u`` (views near ``b = 0, pi``) or along ``v`` (views near
   ``b = pi/2, 3 pi/2``), which keeps the shear factor away from zero;
3. backproject with the distance weight (:func:`sccl.geometry.backproj_weight`)
   and the ``delta_b / 2`` quadrature factor.

The ramp is applied in detector units while the reconstruction lives on the
object grid.  ``reconstruct_fdk`` therefore also multiplies by
``|SO| / |SD|``, the same detector-to-isocentre factor that appears in
conventional flat-panel FDK; pass ``normalize=False`` to drop it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.signal
from numba import njit, prange

from .geometry import ScanGeometry, preweight
from .projector import ProjectionStack, box_in_fov, check_grid_placement
from .volume import Grid, Volume

BRANCH_U = "u"
BRANCH_V = "v"

_WINDOWS = ("ram-lak", "shepp-logan", "cosine", "hann")


@dataclass(frozen=True)
class FilterKernel:
    """Symmetric ramp kernel samples ``taps[-half_width..half_width]`` at spacing ``pitch``."""

    taps: np.ndarray
    pitch: float

    @property
    def half_width(self) -> int:
        return (self.taps.size - 1) // 2

    def tap(self, n: int) -> float:
        return float(self.taps[self.half_width + n])


def _ram_lak(half_width: int, pitch: float) -> np.ndarray:
    n = np.arange(-half_width, half_width + 1)
    taps = np.zeros(n.size)
    taps[half_width] = 1.0 / (4.0 * pitch * pitch)
    odd = (n % 2) == 1
    taps[odd] = -1.0 / (np.pi**2 * n[odd].astype(float) ** 2 * pitch * pitch)
    return taps


def ramp_kernel(half_width: int, pitch: float, window: str = "ram-lak") -> FilterKernel:
    """Band-limited ramp filter samples.

    ``taps[0] = 1 / (4 tau^2)``, zero at even offsets and ``-1 / (pi n tau)^2``
    at odd offsets ``n``.  A non-default ``window`` apodises the kernel in the
    frequency domain (``"shepp-logan"``, ``"cosine"`` or ``"hann"``).
    """
    half_width = int(half_width)
    if half_width < 1:
        raise ValueError(f"half_width must be >= 1, got {half_width}")
    if not pitch > 0:
        raise ValueError(f"pitch must be positive, got {pitch}")
    if window not in _WINDOWS:
        raise ValueError(f"unknown window {window!r}; choose from {_WINDOWS}")
    taps = _ram_lak(half_width, pitch)
    if window != "ram-lak":
        size = 1 << int(np.ceil(np.log2(4 * half_width + 2)))
        buf = np.zeros(size)
        buf[: taps.size] = taps
        buf = np.roll(buf, -half_width)
        f = np.fft.rfftfreq(size)  # cycles per sample, 0..0.5
        if window == "shepp-logan":
            win = np.sinc(f)
        elif window == "cosine":
            win = np.cos(np.pi * f)
        else:
            win = 0.5 * (1.0 + np.cos(2.0 * np.pi * f))
        buf = np.fft.irfft(np.fft.rfft(buf) * win, n=size)
        buf = np.roll(buf, half_width)
        taps = buf[: 2 * half_width + 1]
        taps = 0.5 * (taps + taps[::-1])
    return FilterKernel(taps=taps, pitch=float(pitch))


def quadrant_of(beta: float) -> str:
    """Filtration axis for a view: ``"u"`` near b = 0 and pi, else ``"v"``.

    Half-open intervals; ``b = pi/4`` belongs to the ``"v"`` branch.
    """
    b = math.fmod(beta, 2.0 * math.pi)
    if b < 0:
        b += 2.0 * math.pi
    q = math.pi / 4
    if b < q or 3 * q <= b < 5 * q or b >= 7 * q:
        return BRANCH_U
    return BRANCH_V


@dataclass
class FilteredView:
    """Ramp-filtered data on sheared coordinates for one view.

    ``data[j, i]`` is the filtered value on the line ``s = s0 + j * ds`` at
    position ``a0 + i * da`` along the filtration axis (``u`` for the
    ``"u"`` branch, ``v`` for the ``"v"`` branch).
    """

    beta: float
    branch: str
    data: np.ndarray
    s0: float
    ds: float
    a0: float
    da: float

    @property
    def s_grid(self) -> np.ndarray:
        return self.s0 + self.ds * np.arange(self.data.shape[0])

    @property
    def a_grid(self) -> np.ndarray:
        return self.a0 + self.da * np.arange(self.data.shape[1])


def _interp_lines(img, pos):
    """Linear interpolation of ``img[:, i]`` at fractional rows ``pos[:, i]``; zero outside."""
    n = img.shape[0]
    padded = np.zeros((n + 2, img.shape[1]), dtype=np.float64)
    padded[1:-1] = img
    p = pos + 1.0
    r0 = np.floor(p)
    w = p - r0
    r0 = r0.astype(np.int64)
    outside = (r0 < 0) | (r0 > n)
    r0 = np.clip(r0, 0, n)
    lo = np.take_along_axis(padded, r0, axis=0)
    hi = np.take_along_axis(padded, r0 + 1, axis=0)
    out = (1.0 - w) * lo + w * hi
    out[outside] = 0.0
    return out


def s_grid_for(geom: ScanGeometry, beta: float):
    """Uniform ``s`` samples covering the detector's extent along ``(sin b, cos b)``."""
    ds = min(geom.pitch_u, geom.pitch_v)
    s_max = geom.half_width_u * abs(math.sin(beta)) + geom.half_width_v * abs(math.cos(beta))
    n = int(math.ceil(s_max / ds))
    return -n * ds, ds, 2 * n + 1


def convolve_lines(lines: np.ndarray, kernel: FilterKernel, method: str = "fft") -> np.ndarray:
    """Zero-padded linear convolution of every row with the kernel, times its pitch."""
    k = kernel.taps[None, :]
    if method == "fft":
        out = scipy.signal.fftconvolve(lines, k, mode="same", axes=1)
    elif method == "direct":
        out = scipy.signal.convolve(lines, k, mode="same", method="direct")
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    return out * kernel.pitch


def filter_view(view: np.ndarray, beta: float, geom: ScanGeometry, kernel: FilterKernel | None = None, method: str = "fft") -> FilteredView:
    """Preweight, shear-resample and ramp-filter one detector image.

    Parameters
    ----------
    view : ndarray, shape (det_rows, det_cols)
    beta : float
    geom : ScanGeometry
    kernel : FilterKernel, optional
        Must be sampled at the pitch of the filtration axis.  The default is a
        Ram-Lak kernel long enough for exact linear convolution of a full line.
    method : {"fft", "direct"}
    """
    view = np.asarray(view, dtype=np.float64)
    if view.shape != (geom.det_rows, geom.det_cols):
        raise ValueError(f"view shape {view.shape} does not match detector {(geom.det_rows, geom.det_cols)}")
    branch = quadrant_of(beta)
    sb, cb = math.sin(beta), math.cos(beta)
    u = geom.u_coords()
    v = geom.v_coords()
    w = preweight(geom, beta, u[None, :], v[:, None])
    factor = abs(cb) if branch == BRANCH_U else abs(sb)
    assert factor > 1e-6
    weighted = view * w * factor

    s0, ds, ns = s_grid_for(geom, beta)
    s = s0 + ds * np.arange(ns)
    if branch == BRANCH_U:
        # line s = u sin b + v cos b sampled at every detector column
        vv = (s[:, None] - u[None, :] * sb) / cb
        lines = _interp_lines(weighted, vv / geom.pitch_v + 0.5 * (geom.det_rows - 1))
        pitch, a0 = geom.pitch_u, u[0]
    else:
        uu = (s[:, None] - v[None, :] * cb) / sb
        lines = _interp_lines(weighted.T, uu / geom.pitch_u + 0.5 * (geom.det_cols - 1))
        pitch, a0 = geom.pitch_v, v[0]

    if kernel is None:
        kernel = ramp_kernel(lines.shape[1], pitch)
    elif not math.isclose(kernel.pitch, pitch, rel_tol=1e-12):
        raise ValueError(f"kernel pitch {kernel.pitch} does not match {branch}-axis pitch {pitch}")
    filtered = convolve_lines(lines, kernel, method)
    return FilteredView(beta=float(beta), branch=branch, data=filtered, s0=s0, ds=ds, a0=a0, da=pitch)


@njit(parallel=True, cache=True, error_model="numpy")
def _bp_filtered(G, along_u, sinb, cosb, s0, ds, a0, da, xs, ys, zs, sd, so, sa, ca, scale, out):
    ns, na = G.shape
    nz = zs.size
    ny = ys.size
    nx = xs.size
    for k in prange(nz):
        t = sd * ca / (zs[k] + so * ca)
        base = (sd - t * so) * sa
        w = scale * t * t
        su = base * sinb
        sv = base * cosb
        for j in range(ny):
            v = sv + t * ys[j]
            for i in range(nx):
                u = su + t * xs[i]
                # s = u sin b + v cos b along the line through (u*, v*)
                fs = (u * sinb + v * cosb - s0) / ds
                if along_u:
                    fa = (u - a0) / da
                else:
                    fa = (v - a0) / da
                j0 = int(math.floor(fs))
                i0 = int(math.floor(fa))
                if j0 < -1 or j0 > ns - 1 or i0 < -1 or i0 > na - 1:
                    continue
                ws = fs - j0
                wa = fa - i0
                val = 0.0
                if j0 >= 0:
                    if i0 >= 0:
                        val += (1.0 - ws) * (1.0 - wa) * G[j0, i0]
                    if i0 + 1 < na:
                        val += (1.0 - ws) * wa * G[j0, i0 + 1]
                if j0 + 1 < ns:
                    if i0 >= 0:
                        val += ws * (1.0 - wa) * G[j0 + 1, i0]
                    if i0 + 1 < na:
                        val += ws * wa * G[j0 + 1, i0 + 1]
                out[k, j, i] += w * val


def backproject_filtered(fv: FilteredView, geom: ScanGeometry, grid: Grid, scale: float, out: np.ndarray):
    """Accumulate ``scale * backproj_weight(z) * fv`` sampled at every voxel into ``out``."""
    _bp_filtered(
        np.ascontiguousarray(fv.data),
        fv.branch == BRANCH_U,
        math.sin(fv.beta),
        math.cos(fv.beta),
        fv.s0,
        fv.ds,
        fv.a0,
        fv.da,
        grid.x(),
        grid.y(),
        grid.z(),
        float(geom.dist_sd),
        float(geom.dist_so),
        math.sin(geom.tilt_alpha),
        math.cos(geom.tilt_alpha),
        float(scale),
        out,
    )


def reconstruct_fdk(
    stack: ProjectionStack,
    geom: ScanGeometry,
    grid: Grid,
    window: str = "ram-lak",
    half_width: int | None = None,
    method: str = "fft",
    normalize: bool = True,
) -> Volume:
    """CL-FDK reconstruction of a full-turn projection stack.

    Parameters
    ----------
    stack : ProjectionStack
        Views assumed to cover ``[0, 2 pi)`` uniformly; the quadrature step is
        ``2 pi / n_views``.
    geom : ScanGeometry
    grid : Grid
        Reconstruction grid.
    window : str
        Ramp apodisation, see :func:`ramp_kernel`.
    half_width : int, optional
        Kernel half width in samples; defaults to the longest filtration line.
    method : {"fft", "direct"}
        Convolution route.
    normalize : bool
        Apply the ``|SO| / |SD|`` detector-to-object factor.

    Returns
    -------
    Volume
    """
    stack.check_matches(geom)
    check_grid_placement(geom, grid)
    if not box_in_fov(geom, grid.lower_corner, grid.upper_corner, stack.betas):
        warnings.warn(
            "reconstruction grid extends beyond the square field of view; "
            "voxels outside it are reconstructed from truncated data",
            stacklevel=2,
        )
    if half_width is None:
        half_width = max(geom.det_cols, geom.det_rows)
    kernels = {
        BRANCH_U: ramp_kernel(half_width, geom.pitch_u, window),
        BRANCH_V: ramp_kernel(half_width, geom.pitch_v, window),
    }
    scale = 0.5 * stack.delta_beta
    if normalize:
        scale *= geom.dist_so / geom.dist_sd
    out = grid.zeros()
    for beta, view in zip(stack.betas, stack.data):
        fv = filter_view(view, beta, geom, kernels[quadrant_of(beta)], method)
        backproject_filtered(fv, geom, grid, scale, out)
    return Volume(grid, out)


def branch_masks(betas) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks selecting the ``"u"``-branch and ``"v"``-branch views."""
    u = np.array([quadrant_of(b) == BRANCH_U for b in betas])
    return u, ~u
