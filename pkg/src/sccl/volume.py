"""Voxel grid description and the volume container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Regular isotropic voxel grid.

    ``origin`` is the global position (mm) of the centre of voxel ``(0, 0, 0)``.
    Arrays living on the grid have shape ``(nz, ny, nx)`` so that ``x`` is the
    fastest-varying index in C order.
    """

    nx: int
    ny: int
    nz: int
    voxel_pitch: float
    origin: tuple[float, float, float]

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.shape_xyz}")
        if not self.voxel_pitch > 0:
            raise ValueError(f"voxel_pitch must be positive, got {self.voxel_pitch}")
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))

    @classmethod
    def centered(cls, nx, ny, nz, voxel_pitch, center=(0.0, 0.0, 0.0)) -> "Grid":
        origin = tuple(
            c - voxel_pitch * (n - 1) / 2.0 for c, n in zip(center, (nx, ny, nz))
        )
        return cls(int(nx), int(ny), int(nz), float(voxel_pitch), origin)

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape ``(nz, ny, nx)``."""
        return (self.nz, self.ny, self.nx)

    @property
    def shape_xyz(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    def x(self) -> np.ndarray:
        return self.origin[0] + self.voxel_pitch * np.arange(self.nx)

    def y(self) -> np.ndarray:
        return self.origin[1] + self.voxel_pitch * np.arange(self.ny)

    def z(self) -> np.ndarray:
        return self.origin[2] + self.voxel_pitch * np.arange(self.nz)

    @property
    def lower_corner(self) -> np.ndarray:
        """Outer corner of the grid bounding box (voxel faces, not centres)."""
        return np.asarray(self.origin) - 0.5 * self.voxel_pitch

    @property
    def upper_corner(self) -> np.ndarray:
        return self.lower_corner + self.voxel_pitch * np.array(self.shape_xyz, dtype=float)

    def zeros(self, dtype=np.float64) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)


@dataclass
class Volume:
    """Scalar field (attenuation, 1/mm) sampled on a :class:`Grid`."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match grid shape {self.grid.shape}"
            )

    @property
    def nx(self) -> int:
        return self.grid.nx

    @property
    def ny(self) -> int:
        return self.grid.ny

    @property
    def nz(self) -> int:
        return self.grid.nz

    @property
    def voxel_pitch(self) -> float:
        return self.grid.voxel_pitch

    @property
    def origin_offset(self) -> tuple[float, float, float]:
        return self.grid.origin

    def copy(self) -> "Volume":
        return Volume(self.grid, self.data.copy())
