"""Scan geometry for square cross-section FOV rotational laminography.

Coordinate conventions
----------------------
Global frame ``O-xyz``: ``z`` is the rotation axis, ``O`` lies on the central
ray.  The source orbits below the object on the plane ``z = -|SO| cos(alpha)``;
the detector lies in the horizontal plane ``E`` at ``z = +|OD| cos(alpha)`` with
``|OD| = |SD| - |SO|``.  The detector never rotates: its ``u`` and ``v`` axes
stay parallel to ``x`` and ``y``.

The projection angle ``beta`` places the unit vector ``e = (sin b, cos b)``
(the direction of the rotating ``v'`` axis, pointing from the detector centre
``D`` toward the rotation axis) in the xy-plane.  With that choice the
fixed/rotating detector frames are related by::

    u' = u cos b - v sin b
    v' = u sin b + v cos b

All angles are radians and all lengths are millimetres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScanGeometry:
    """SC-CL acquisition geometry.

    Parameters
    ----------
    tilt_alpha : float
        Angle between the central ray and the rotation axis, radians.
    dist_so : float
        Source to origin distance ``|SO|`` in mm.
    dist_sd : float
        Source to detector-centre distance ``|SD|`` in mm.
    n_views : int
        Number of projections uniformly covering ``[0, 2 pi)``.
    det_rows, det_cols : int
        Detector raster; rows run along ``v``, columns along ``u``.
    pitch_u, pitch_v : float
        Pixel pitch in mm.
    """

    tilt_alpha: float
    dist_so: float
    dist_sd: float
    n_views: int
    det_rows: int
    det_cols: int
    pitch_u: float
    pitch_v: float

    def __post_init__(self):
        a = self.tilt_alpha
        if not (math.isfinite(a) and 0.0 < a < math.pi / 2):
            raise ValueError(f"tilt_alpha must lie strictly in (0, pi/2), got {a!r}")
        if not (math.isfinite(self.dist_so) and math.isfinite(self.dist_sd)):
            raise ValueError("distances must be finite")
        if not 0.0 < self.dist_so < self.dist_sd:
            raise ValueError(
                f"need 0 < dist_so < dist_sd, got dist_so={self.dist_so}, dist_sd={self.dist_sd}"
            )
        if int(self.n_views) < 1:
            raise ValueError(f"n_views must be >= 1, got {self.n_views}")
        if int(self.det_rows) < 2 or int(self.det_cols) < 2:
            raise ValueError("detector needs at least 2 rows and 2 columns")
        if not (self.pitch_u > 0 and self.pitch_v > 0):
            raise ValueError("pixel pitches must be positive")

    @classmethod
    def from_degrees(cls, tilt_deg: float, **kwargs) -> "ScanGeometry":
        return cls(tilt_alpha=math.radians(tilt_deg), **kwargs)

    @property
    def dist_od(self) -> float:
        """Origin to detector-centre distance ``|OD|``."""
        return self.dist_sd - self.dist_so

    @property
    def source_z(self) -> float:
        return -self.dist_so * math.cos(self.tilt_alpha)

    @property
    def detector_z(self) -> float:
        """Height of the detector plane E."""
        return self.dist_od * math.cos(self.tilt_alpha)

    @property
    def virtual_source_distance(self) -> float:
        """In-plane distance ``|S'D| = |SD| sin(alpha)`` on plane E."""
        return self.dist_sd * math.sin(self.tilt_alpha)

    def betas(self) -> np.ndarray:
        """Uniformly spaced projection angles in ``[0, 2 pi)``."""
        return 2.0 * np.pi * np.arange(self.n_views) / self.n_views

    def u_coords(self) -> np.ndarray:
        """Pixel-centre ``u`` positions, one per detector column."""
        return (np.arange(self.det_cols) - (self.det_cols - 1) / 2.0) * self.pitch_u

    def v_coords(self) -> np.ndarray:
        """Pixel-centre ``v`` positions, one per detector row."""
        return (np.arange(self.det_rows) - (self.det_rows - 1) / 2.0) * self.pitch_v

    @property
    def half_width_u(self) -> float:
        """Distance from ``D`` to the outer edge of the detector along ``u``."""
        return 0.5 * self.det_cols * self.pitch_u

    @property
    def half_width_v(self) -> float:
        return 0.5 * self.det_rows * self.pitch_v


@dataclass(frozen=True)
class Pose:
    """Source and detector placement for one projection angle."""

    beta: float
    source_pos: np.ndarray
    det_center: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray


def _check_beta(beta):
    if not np.all(np.isfinite(beta)):
        raise ValueError(f"projection angle must be finite, got {beta!r}")


def pose_at(geom: ScanGeometry, beta: float) -> Pose:
    """Source position, detector centre and detector axes at angle ``beta``."""
    _check_beta(beta)
    sa, ca = math.sin(geom.tilt_alpha), math.cos(geom.tilt_alpha)
    sb, cb = math.sin(beta), math.cos(beta)
    so, od = geom.dist_so, geom.dist_od
    source = np.array([so * sa * sb, so * sa * cb, -so * ca])
    det = np.array([-od * sa * sb, -od * sa * cb, od * ca])
    return Pose(
        beta=float(beta),
        source_pos=source,
        det_center=det,
        u_axis=np.array([1.0, 0.0, 0.0]),
        v_axis=np.array([0.0, 1.0, 0.0]),
    )


def rotate_coords(beta, u, v):
    """Map fixed detector coordinates ``(u, v)`` to the rotating frame ``(u', v')``."""
    sb, cb = np.sin(beta), np.cos(beta)
    return u * cb - v * sb, u * sb + v * cb


def magnification(geom: ScanGeometry, z):
    """Ray parameter from source to plane E for a point at height ``z``.

    Equals ``|SD| cos(alpha) / (z + |SO| cos(alpha))``, the ratio of the vertical
    source-detector distance to the vertical source-point distance.
    """
    z = np.asarray(z, dtype=float)
    depth = z + geom.dist_so * math.cos(geom.tilt_alpha)
    if np.any(depth <= 0):
        raise ValueError("point lies at or behind the source plane")
    out = geom.dist_sd * math.cos(geom.tilt_alpha) / depth
    return out if out.ndim else float(out)


def project_point(geom: ScanGeometry, beta: float, p) -> tuple[float, float]:
    """Detector coordinates ``(u*, v*)`` where the ray source -> ``p`` meets plane E.

    ``p`` may be a single point or an array of points with trailing dimension 3.
    """
    _check_beta(beta)
    p = np.asarray(p, dtype=float)
    t = magnification(geom, p[..., 2])
    sa = math.sin(geom.tilt_alpha)
    # S_xy + t (p_xy - S_xy) - D_xy simplifies to (|SD| - t |SO|) sin(a) e + t p_xy
    shift = (geom.dist_sd - t * geom.dist_so) * sa
    u = shift * math.sin(beta) + t * p[..., 0]
    v = shift * math.cos(beta) + t * p[..., 1]
    return u, v


def backproj_weight(geom: ScanGeometry, z):
    """Distance weight ``(|SD| cos a / (z + |SO| cos a))**2`` for a voxel at height ``z``."""
    return magnification(geom, z) ** 2


def preweight(geom: ScanGeometry, beta: float, u, v):
    """Per-pixel cosine weight applied to projection data before filtration.

    ``(|SD| sin a - s) / sqrt(|SD|^2 - 2 |SD| sin a s + u^2 + v^2)`` with
    ``s = u sin b + v cos b``.  The denominator is the source to pixel distance.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    sd = geom.dist_sd
    sdsa = sd * math.sin(geom.tilt_alpha)
    s = u * math.sin(beta) + v * math.cos(beta)
    radicand = sd * sd - 2.0 * sdsa * s + u * u + v * v
    if np.any(radicand <= 0):
        raise ValueError("degenerate geometry: non-positive source-pixel distance")
    out = (sdsa - s) / np.sqrt(radicand)
    return out if out.ndim else float(out)


def source_pixel_distance(geom: ScanGeometry, beta: float, u, v):
    sd = geom.dist_sd
    s = u * np.sin(beta) + v * np.cos(beta)
    return np.sqrt(sd * sd - 2.0 * sd * math.sin(geom.tilt_alpha) * s + u * u + v * v)
