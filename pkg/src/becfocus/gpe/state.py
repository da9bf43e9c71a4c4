"""Condensate parameters and the discretised wavefunction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..physconst import A0, HBAR, Species, kick_velocity, rb87_d2_defaults
from .grid import Grid3D


@dataclass(frozen=True)
class TrapConfig:
    """Harmonic trap angular frequencies [rad/s]."""

    omega_x: float
    omega_y: float
    omega_z: float

    def __post_init__(self):
        for axis, w in zip("xyz", self.omegas):
            if not w >= 0:
                raise ValueError(f"omega_{axis} must be >= 0, got {w!r}")

    @classmethod
    def from_hz(cls, fx: float, fy: float, fz: float) -> "TrapConfig":
        return cls(2 * math.pi * fx, 2 * math.pi * fy, 2 * math.pi * fz)

    @property
    def omegas(self) -> tuple[float, float, float]:
        return (self.omega_x, self.omega_y, self.omega_z)

    @property
    def omega_bar(self) -> float:
        return (self.omega_x * self.omega_y * self.omega_z) ** (1.0 / 3.0)

    def potential(self, grid: Grid3D, mass: float) -> np.ndarray:
        X, Y, Z = grid.mesh()
        wx, wy, wz = self.omegas
        return 0.5 * mass * (wx**2 * X**2 + wy**2 * Y**2 + wz**2 * Z**2)


@dataclass(frozen=True)
class BECConfig:
    """Atom number, s-wave scattering length [m] and release velocity [m/s]."""

    N: float
    a_s: float
    v_kick: float = 0.0
    species: Species = field(default_factory=rb87_d2_defaults)

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError(f"N must be > 0, got {self.N!r}")
        if not self.a_s >= 0:
            raise ValueError(f"a_s must be >= 0 (attractive condensates unsupported), got {self.a_s!r}")

    @classmethod
    def from_units(cls, N: float, a_s_a0: float, *, kick_hbar_k: float | None = None, v_kick: float | None = None, species=None):
        """Build from ``a_s`` in Bohr radii and a kick in ``hbar k_D2`` units or m/s."""
        species = species or rb87_d2_defaults()
        if kick_hbar_k is not None and v_kick is not None:
            raise ValueError("give either kick_hbar_k or v_kick, not both")
        v = kick_velocity(kick_hbar_k, species) if kick_hbar_k is not None else (v_kick or 0.0)
        return cls(N=N, a_s=a_s_a0 * A0, v_kick=v, species=species)

    @property
    def u(self) -> float:
        """Contact coupling 4 pi hbar^2 a_s / m [J m^3]."""
        return 4.0 * math.pi * HBAR**2 * self.a_s / self.species.mass

    def with_(self, **changes) -> "BECConfig":
        return replace(self, **changes)


@dataclass
class Wavefunction:
    """Complex field on ``grid`` normalised to the atom number.

    ``frame_velocity`` is the lab-frame velocity of the computational frame;
    momentum observables add ``m * frame_velocity`` back.
    """

    grid: Grid3D
    psi: np.ndarray
    time: float = 0.0
    frame_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.shape != self.grid.shape:
            raise ValueError(f"field shape {self.psi.shape} does not match grid {self.grid.shape}")

    @property
    def density(self) -> np.ndarray:
        return self.psi.real**2 + self.psi.imag**2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.grid.dV)

    def normalize(self, N: float) -> "Wavefunction":
        self.psi *= math.sqrt(N / self.norm())
        return self

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.psi.copy(), self.time, self.frame_velocity)

    def column_density(self) -> np.ndarray:
        """Density integrated along y, shape ``(nx, nz)`` [1/m^2]."""
        return np.sum(self.density, axis=1) * self.grid.dy

    def center_of_mass(self) -> np.ndarray:
        n = self.density
        tot = n.sum()
        X, Y, Z = self.grid.mesh()
        return np.array([np.sum(n * X), np.sum(n * Y), np.sum(n * Z)]) / tot
