"""Closed-form focal-spot broadening terms and their linear totals.

All widths are full widths at half maximum in metres.  The budget adds the
contributions linearly:

    total_non = sph + diff
    total_int = sph + diff + chrom + ang
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .physconst import H_PLANCK, Species, rb87_d2_defaults

# Rayleigh prefactors: rectangular slit and circular aperture
BETA_RECTANGULAR = 0.88
BETA_CIRCULAR = 1.22


def _require_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise ValueError(f"{name} must be > 0, got {v!r}")


def _require_nonnegative(**values):
    for name, v in values.items():
        if not v >= 0:
            raise ValueError(f"{name} must be >= 0, got {v!r}")


def diffraction_fwhm(f: float, v_z: float, lam: float, species: Species | None = None, *, beta: float = BETA_RECTANGULAR) -> float:
    """Diffraction-limited spot through one lattice slit of width ``D = lam / 2``.

    ``beta * f * lambda_dB / D`` with ``lambda_dB = h / (m v_z)``, i.e.
    ``2 beta f h / (m v_z lam)`` (1.76 f h / (m v_z lam) for a slit).
    """
    _require_positive(f=f, v_z=v_z, lam=lam, beta=beta)
    species = species or rb87_d2_defaults()
    lambda_db = H_PLANCK / (species.mass * v_z)
    return beta * f * lambda_db / (0.5 * lam)


def chromatic_fwhm(xi: float, dF_dxi: float, sigma_z: float, lam: float, f: float, dv_z: float, v_z: float) -> float:
    """Broadening from a longitudinal velocity spread ``dv_z``.

    A faster atom sees a weaker lens (``xi`` scales as ``1/v_z^2``), moving its
    focus by ``df = sigma_z * dF/dxi * dxi`` with ``dxi = -2 xi dv_z / v_z``; the
    converging cone of half-angle ``arctan(lam / (2 f))`` turns that into a
    transverse spread.  The magnitude is returned.
    """
    _require_positive(xi=xi, sigma_z=sigma_z, lam=lam, f=f, v_z=v_z)
    _require_nonnegative(dv_z=dv_z)
    df_dxi = sigma_z * dF_dxi
    return abs(-2.0 * xi * math.atan(lam / (2.0 * f)) * df_dxi * dv_z / v_z)


def angular_fwhm(f: float, dv_x: float, v_z: float) -> float:
    """Broadening from the transverse velocity spread, ``f * arctan(dv_x / v_z)``."""
    _require_positive(f=f, v_z=v_z)
    _require_nonnegative(dv_x=dv_x)
    return f * math.atan(dv_x / v_z)


@dataclass(frozen=True)
class AberrationBudget:
    sph: float
    diff: float
    chrom: float
    ang: float

    def __post_init__(self):
        _require_nonnegative(sph=self.sph, diff=self.diff, chrom=self.chrom, ang=self.ang)

    @property
    def total_non(self) -> float:
        return self.sph + self.diff

    @property
    def total_int(self) -> float:
        return self.sph + self.diff + self.chrom + self.ang

    def as_dict(self) -> dict:
        out = asdict(self)
        out.update(total_non=self.total_non, total_int=self.total_int)
        return out


def assemble_budget(sph: float, diff: float, chrom: float, ang: float) -> AberrationBudget:
    return AberrationBudget(sph=sph, diff=diff, chrom=chrom, ang=ang)
