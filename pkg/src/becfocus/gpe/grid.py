"""Uniform periodic grids for the split-step solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

# complex128 points allowed on one grid; ~270 MB per field
DEFAULT_MAX_POINTS = 2**24


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: float) -> int:
    return 1 << max(0, math.ceil(math.log2(max(n, 1))))


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Cell-centred periodic grid, coordinates ``(i - n // 2) * d`` on each axis.

    A grid with ``ny == 1`` is the effective two-dimensional (x, z) grid: y is
    integrated out and ``Ly`` is fixed to 1 m so that ``dV = dx * dz`` in
    numerical value.
    """

    nx: int
    ny: int
    nz: int
    Lx: float
    Ly: float
    Lz: float
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        for axis, n, L in zip("xyz", self.shape, self.extent):
            if not isinstance(n, (int, np.integer)) or not _is_pow2(int(n)):
                raise ValueError(f"n{axis}={n!r} must be a power of two")
            if not L > 0:
                raise ValueError(f"L{axis}={L!r} must be > 0")
        if self.ny == 1 and self.Ly != 1.0:
            raise ValueError("planar grids (ny == 1) carry Ly = 1")
        if self.size > self.max_points:
            raise MemoryError(f"grid {self.shape} has {self.size} points, budget is {self.max_points}")

    @classmethod
    def planar(cls, nx: int, nz: int, Lx: float, Lz: float, **kwargs) -> "Grid3D":
        return cls(nx, 1, nz, Lx, 1.0, Lz, **kwargs)

    @property
    def is_planar(self) -> bool:
        return self.ny == 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def extent(self) -> tuple[float, float, float]:
        return (self.Lx, self.Ly, self.Lz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def dz(self) -> float:
        return self.Lz / self.nz

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def dV(self) -> float:
        return self.dx * self.dy * self.dz

    def axis(self, i: int) -> np.ndarray:
        n, d = self.shape[i], self.spacing[i]
        if n == 1:
            return np.zeros(1)
        return (np.arange(n) - n // 2) * d

    @property
    def x(self) -> np.ndarray:
        return self.axis(0)

    @property
    def y(self) -> np.ndarray:
        return self.axis(1)

    @property
    def z(self) -> np.ndarray:
        return self.axis(2)

    def kaxis(self, i: int) -> np.ndarray:
        """Angular wavenumbers in FFT ordering [1/m]."""
        return 2.0 * np.pi * np.fft.fftfreq(self.shape[i], self.spacing[i])

    @property
    def kx(self) -> np.ndarray:
        return self.kaxis(0)

    @property
    def ky(self) -> np.ndarray:
        return self.kaxis(1)

    @property
    def kz(self) -> np.ndarray:
        return self.kaxis(2)

    def mesh(self):
        """Sparse broadcastable ``(X, Y, Z)``."""
        return np.meshgrid(self.x, self.y, self.z, indexing="ij", sparse=True)

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = np.meshgrid(self.kx, self.ky, self.kz, indexing="ij", sparse=True)
        return kx**2 + ky**2 + kz**2

    def with_x(self, nx: int, Lx: float) -> "Grid3D":
        return replace(self, nx=nx, Lx=Lx)

    def __eq__(self, other):
        if not isinstance(other, Grid3D):
            return NotImplemented
        return self.shape == other.shape and self.extent == other.extent

    def __hash__(self):
        return hash((self.shape, self.extent))


def auto_grid(radii, *, margin: float = 0.4, points_per_radius: float = 12.0, max_points: int = DEFAULT_MAX_POINTS) -> Grid3D:
    """Grid whose half-extent is ``(1 + margin) * R`` per axis.

    ``radii`` are the cloud radii (Thomas-Fermi or oscillator lengths); counts
    are rounded up to powers of two.
    """
    ext, counts = [], []
    for R in radii:
        L = 2.0 * (1.0 + margin) * R
        ext.append(L)
        counts.append(next_pow2(L / (R / points_per_radius)))
    return Grid3D(counts[0], counts[1], counts[2], ext[0], ext[1], ext[2], max_points=max_points)
