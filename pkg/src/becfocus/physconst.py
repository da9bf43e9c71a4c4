"""Atomic species data and physical constants.

Unit conventions used throughout the package:

* detunings are carried internally as angular frequencies (rad/s); user
  facing inputs in Hz or GHz go through :func:`detuning_angular`;
* the natural linewidth ``gamma`` is already an angular rate (s^-1);
* the dipole-potential saturation factor is ``gamma**2 / (gamma**2 + 4 delta**2)``
  everywhere.

With these choices the Rb D2 defaults reproduce the lattice powers and peak
intensities of the reference focusing examples (0.0688 uW / 1.752e3 W/m^2 for
a 12.48 um lattice, 43.018 uW for a 312 um lattice).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34
    a0: float = 5.29177e-11
    g_earth: float = 9.80665

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar


CONSTANTS = PhysicalConstants()
HBAR = CONSTANTS.hbar
H_PLANCK = CONSTANTS.h
A0 = CONSTANTS.a0


@dataclass(frozen=True)
class Species:
    """Two-level description of an atomic species.

    Parameters
    ----------
    mass : float
        Atomic mass [kg].
    lambda_res : float
        Resonance wavelength of the cycling transition [m].
    gamma : float
        Natural linewidth as an angular decay rate [s^-1].
    I_sat : float
        Saturation intensity [W/m^2].
    """

    mass: float
    lambda_res: float
    gamma: float
    I_sat: float
    name: str = ""

    def __post_init__(self):
        for field in ("mass", "lambda_res", "gamma", "I_sat"):
            value = getattr(self, field)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"Species.{field} must be strictly positive, got {value!r}")
        if not 100e-9 < self.lambda_res < 10e-6:
            raise ValueError(f"Species.lambda_res={self.lambda_res!r} m outside (100 nm, 10 um)")

    @property
    def k_res(self) -> float:
        """Resonant wavenumber 2*pi/lambda_res [1/m]."""
        return 2.0 * math.pi / self.lambda_res

    @property
    def recoil_velocity(self) -> float:
        """Velocity of one photon recoil, hbar*k/m [m/s]."""
        return HBAR * self.k_res / self.mass


_RB87_D2 = Species(mass=1.44e-25, lambda_res=780.027e-9, gamma=3.7e7, I_sat=16.5, name="87Rb D2")


def rb87_d2_defaults() -> Species:
    """Rb-87 D2 line constants (m = 1.44e-25 kg, gamma = 3.7e7 s^-1, I_s = 16.5 W/m^2)."""
    return _RB87_D2


def detuning_angular(delta_cyclic):
    """Convert a cyclic detuning [Hz] to an angular one [rad/s]; sign is kept."""
    return 2.0 * math.pi * delta_cyclic


def kick_velocity(n_recoils: float, species: Species | None = None) -> float:
    """Velocity imparted by a momentum kick of ``n_recoils`` * hbar*k_res."""
    species = species or rb87_d2_defaults()
    return n_recoils * species.recoil_velocity
