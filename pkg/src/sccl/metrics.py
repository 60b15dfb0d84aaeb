"""Image-quality metrics: RMSE and mean SSIM against a reference volume."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .volume import Volume

K1 = 0.01
K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # 11x11 support at sigma 1.5


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mssim: float
    roi: tuple

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "mssim": self.mssim, "roi": [list(r) for r in self.roi]}


def default_roi(shape_zyx, margin: int = 5) -> tuple:
    """Whole volume minus ``margin`` voxels on every face, as ``((z0, z1), (y0, y1), (x0, x1))``.

    Axes thinner than ``2 * margin + 1`` keep their full extent.
    """
    roi = []
    for n in shape_zyx:
        roi.append((margin, n - margin) if n > 2 * margin else (0, n))
    return tuple(roi)


def _as_array(v):
    return v.data if isinstance(v, Volume) else np.asarray(v)


def _crop(a, b, roi):
    a = np.asarray(_as_array(a), dtype=np.float64)
    b = np.asarray(_as_array(b), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"raster mismatch: {a.shape} vs {b.shape}")
    if roi is None:
        return a, b, tuple((0, n) for n in a.shape)
    sl = tuple(slice(lo, hi) for lo, hi in roi)
    return a[sl], b[sl], tuple(roi)


def rmse(a, b, roi=None) -> float:
    """Root mean square difference over ``roi`` (default: everything)."""
    a, b, _ = _crop(a, b, roi)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _ssim_map(x, y, data_range, sigma):
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    filt = lambda img: gaussian_filter(img, sigma, truncate=SSIM_TRUNCATE, mode="reflect")
    mx = filt(x)
    my = filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim_slices(a, b, roi=None, sigma: float = SSIM_SIGMA, data_range: float | None = None) -> np.ndarray:
    """Per-z-slice mean SSIM of ``a`` against reference ``b``.

    Statistics use an isotropic Gaussian window (11 x 11 at the default
    sigma).  The dynamic range comes from the reference inside the ROI unless
    given.  As with the usual reference implementations, a border of half the
    window width is excluded from each slice mean.
    """
    x, y, _ = _crop(a, b, roi)
    if data_range is None:
        data_range = float(y.max() - y.min())
    if data_range <= 0:
        raise ValueError("reference has zero dynamic range")
    pad = int(SSIM_TRUNCATE * sigma + 0.5)
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        smap = _ssim_map(x[k], y[k], data_range, sigma)
        if smap.shape[0] > 2 * pad and smap.shape[1] > 2 * pad:
            smap = smap[pad:-pad, pad:-pad]
        out[k] = smap.mean()
    return out


def mssim(a, b, roi=None, sigma: float = SSIM_SIGMA, data_range: float | None = None) -> float:
    """Mean structural similarity of ``a`` against reference ``b``, averaged over z-slices."""
    return float(ssim_slices(a, b, roi, sigma, data_range).mean())


def evaluate(recon, reference, roi=None) -> MetricReport:
    ref = _as_array(reference)
    if roi is None:
        roi = default_roi(ref.shape)
    return MetricReport(rmse=rmse(recon, reference, roi), mssim=mssim(recon, reference, roi), roi=tuple(roi))


def z_profile(vol, column=None, radius: int = 0) -> np.ndarray:
    """Values along z at xy index ``column = (ix, iy)``, defaulting to the centre.

    With ``radius > 0`` the profile is the mean over a square of half-width
    ``radius`` around the column.
    """
    data = _as_array(vol)
    nz, ny, nx = data.shape
    if column is None:
        column = (nx // 2, ny // 2)
    ix, iy = column
    if not (0 <= ix < nx and 0 <= iy < ny):
        raise IndexError(f"column {column} outside the grid")
    sl = data[:, max(iy - radius, 0) : iy + radius + 1, max(ix - radius, 0) : ix + radius + 1]
    return sl.mean(axis=(1, 2))
