"""Gaussian standing-wave lattice: intensity, dipole potential and lens power.

The lattice intensity is

    I(x, z) = I0 * exp(-2 z^2 / sigma_z^2) * sin^2(k x),   k = 2 pi / lambda

and the dipole potential seen by the atoms is

    U = (hbar * delta / 2) * ln(1 + p),   p = gamma^2 / (gamma^2 + 4 delta^2) * I / I_sat.

The lens strength ``xi = q^2 sigma_z^2`` fixes the focal plane in the paraxial
limit; :func:`power_for_xi` inverts it to the beam power.  The saturation
factor always carries ``4 delta^2`` (a form with ``delta^2`` alone does not
reproduce the tabulated powers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .physconst import HBAR, Species, detuning_angular, rb87_d2_defaults


@dataclass(frozen=True)
class LatticeSpec:
    """Standing-wave lens and its motion relative to the condensate.

    ``z0`` is the initial lattice-centre offset and ``z(t) = g t^2 / 2 + v0 t``
    the distance travelled, so the envelope is centred at ``z0 - z(t)``.
    """

    I0: float
    sigma_z: float
    lam: float
    delta_ang: float
    species: Species = field(default_factory=rb87_d2_defaults)
    z0: float = 20e-6
    g: float = 0.0
    v0: float = 0.0

    def __post_init__(self):
        if not self.I0 >= 0:
            raise ValueError(f"I0 must be >= 0, got {self.I0!r}")
        if not self.sigma_z > 0:
            raise ValueError(f"sigma_z must be > 0, got {self.sigma_z!r}")
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam!r}")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.lam

    @property
    def saturation_factor(self) -> float:
        gam = self.species.gamma
        return gam**2 / (gam**2 + 4.0 * self.delta_ang**2)

    @property
    def p0(self) -> float:
        """Peak saturation parameter at an antinode of the lattice centre."""
        return self.saturation_factor * self.I0 / self.species.I_sat

    @property
    def P0(self) -> float:
        return power_from_peak_intensity(self.I0, self.sigma_z)

    def with_(self, **changes) -> "LatticeSpec":
        return replace(self, **changes)

    @classmethod
    def for_xi(
        cls,
        xi: float,
        v_z: float,
        sigma_z: float,
        lam: float,
        delta_ang: float = detuning_angular(200e9),
        species: Species | None = None,
        **kwargs,
    ) -> "LatticeSpec":
        """Lattice whose paraxial lens strength is ``xi`` for atoms at speed ``v_z``."""
        species = species or rb87_d2_defaults()
        probe = cls(I0=0.0, sigma_z=sigma_z, lam=lam, delta_ang=delta_ang, species=species, **kwargs)
        focus = FocusSpec(xi=xi, E0=0.5 * species.mass * v_z**2)
        P0 = power_for_xi(focus, probe)
        return replace(probe, I0=peak_intensity_from_power(P0, sigma_z))


@dataclass(frozen=True)
class FocusSpec:
    xi: float
    E0: float

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"xi must be > 0, got {self.xi!r}")
        if not self.E0 > 0:
            raise ValueError(f"E0 must be > 0, got {self.E0!r}")


def intensity(spec: LatticeSpec, x, z_rel):
    """Lattice intensity [W/m^2] at transverse ``x`` and ``z_rel`` from the lattice centre."""
    x = np.asarray(x, dtype=float)
    z_rel = np.asarray(z_rel, dtype=float)
    return spec.I0 * np.exp(-2.0 * z_rel**2 / spec.sigma_z**2) * np.sin(spec.k * x) ** 2


def dipole_potential(spec: LatticeSpec, x, z_rel):
    """Dipole potential [J]; sign follows the detuning."""
    p = spec.saturation_factor * intensity(spec, x, z_rel) / spec.species.I_sat
    return 0.5 * HBAR * spec.delta_ang * np.log1p(p)


def dipole_force(spec: LatticeSpec, x, z_rel):
    """Return ``(-dU/dx, -dU/dz)`` [N] evaluated analytically."""
    x = np.asarray(x, dtype=float)
    z_rel = np.asarray(z_rel, dtype=float)
    k = spec.k
    env = spec.p0 * np.exp(-2.0 * z_rel**2 / spec.sigma_z**2)
    s = np.sin(k * x)
    p = env * s * s
    pref = -0.5 * HBAR * spec.delta_ang / (1.0 + p)
    fx = pref * env * k * np.sin(2.0 * k * x)
    fz = pref * p * (-4.0 * z_rel / spec.sigma_z**2)
    return fx, fz


def peak_intensity_from_power(P0, sigma_z):
    """Peak intensity of a standing-wave Gaussian beam, I0 = 8 P0 / (pi sigma_z^2)."""
    return 8.0 * P0 / (math.pi * sigma_z**2)


def power_from_peak_intensity(I0, sigma_z):
    return I0 * math.pi * sigma_z**2 / 8.0


def power_for_xi(focus: FocusSpec, spec: LatticeSpec) -> float:
    """Beam power [W] giving paraxial lens strength ``focus.xi`` for kinetic energy ``focus.E0``."""
    if spec.delta_ang == 0:
        raise ValueError("resonant beam, dipole formula invalid (delta = 0)")
    gam = spec.species.gamma
    # |delta|: the sign only selects node vs antinode focusing
    return (
        focus.xi
        * (math.pi / 4.0)
        * focus.E0
        / (HBAR * abs(spec.delta_ang))
        * (gam**2 + 4.0 * spec.delta_ang**2)
        / gam**2
        * spec.species.I_sat
        / spec.k**2
    )


def xi_for_power(P0: float, E0: float, spec: LatticeSpec) -> float:
    """Inverse of :func:`power_for_xi` at fixed lattice geometry."""
    unit = power_for_xi(FocusSpec(xi=1.0, E0=E0), spec)
    return P0 / unit


def lattice_center(t, spec: LatticeSpec):
    """Distance travelled by the lattice, z(t) = g t^2 / 2 + v0 t."""
    return 0.5 * spec.g * t**2 + spec.v0 * t
