"""Real-time split-step propagation through the moving lattice, and momentum observables.

The condensate frame is stationary and the lattice approaches it: the
envelope is centred a distance ``z0 - z(t)`` away with ``z(t) = g t^2/2 + v0 t``.
Two envelope models are offered:

``"uniform"``
    the envelope factor ``exp(-2 (z0 - z(t))^2 / sigma_z^2)`` is applied to the
    whole cloud, i.e. the potential depends on ``x`` and ``t`` only;
``"local"``
    each atom sees the envelope at its own distance from the lattice centre,
    ``exp(-2 (z + z0 - z(t))^2 / sigma_z^2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft

from ..lattice import LatticeSpec, lattice_center
from ..physconst import HBAR, Species, rb87_d2_defaults
from .groundstate import ConvergenceError, resolve_coupling
from .grid import Grid3D
from .state import BECConfig, Wavefunction

ENVELOPES = ("uniform", "local")


class BoundaryContaminationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LatticeDrive:
    """Time-dependent lattice potential in the condensate frame."""

    spec: LatticeSpec
    envelope: str = "uniform"

    def __post_init__(self):
        if self.envelope not in ENVELOPES:
            raise ValueError(f"envelope must be one of {ENVELOPES}, got {self.envelope!r}")

    def separation(self, t: float) -> float:
        """Distance from the cloud centre to the lattice centre, ``z0 - z(t)``."""
        return self.spec.z0 - lattice_center(t, self.spec)

    def potential(self, grid: Grid3D, t: float) -> np.ndarray:
        """Potential [J], shape ``(nx, 1, 1)`` (uniform) or ``(nx, 1, nz)`` (local)."""
        s = self.spec
        c = self.separation(t)
        x = grid.x[:, None, None]
        if self.envelope == "uniform":
            env = math.exp(-2.0 * c * c / s.sigma_z**2)
        else:
            z = grid.z[None, None, :]
            env = np.exp(-2.0 * (z + c) ** 2 / s.sigma_z**2)
        p = s.p0 * env * np.sin(s.k * x) ** 2
        return 0.5 * HBAR * s.delta_ang * np.log1p(p)

    def peak(self, t: float) -> float:
        """Largest |V| on any grid at time ``t`` (envelope at its maximum over the cloud)."""
        s = self.spec
        c = self.separation(t)
        env = math.exp(-2.0 * c * c / s.sigma_z**2) if self.envelope == "uniform" else 1.0
        return abs(0.5 * HBAR * s.delta_ang * math.log1p(s.p0 * env))


@dataclass
class Propagation:
    final: Wavefunction
    snapshots: list
    steps: int
    norm_drift: float
    warnings: list = field(default_factory=list)
    dt: float = float("nan")


def _boundary_fraction(wf: Wavefunction) -> float:
    """Largest density on the y and z faces relative to the peak density."""
    n = wf.density
    peak = n.max()
    faces = [n[:, :, 0], n[:, :, -1]]
    if wf.grid.ny > 1:
        faces += [n[:, 0, :], n[:, -1, :]]
    return float(max(f.max() for f in faces) / peak) if peak > 0 else 0.0


def propagate(
    wf: Wavefunction,
    bec: BECConfig,
    t_end: float,
    dt: float,
    *,
    lattice: LatticeDrive | LatticeSpec | None = None,
    potential: np.ndarray | None = None,
    interacting: bool = True,
    coupling: float | None = None,
    phase_limit: float | None = None,
    snapshots=(),
    boundary_tol: float = 1e-6,
    norm_tol: float = 1e-6,
) -> Propagation:
    """Strang split-step evolution from ``wf.time`` to ``t_end``.

    One step of length ``h``: half potential phase with ``V(t + h/4) + u|psi|^2``,
    full kinetic phase in reciprocal space, half potential phase with
    ``V(t + 3h/4) + u|psi|^2``.  ``dt`` is the nominal step.  With
    ``phase_limit`` set, the step is halved (in powers of two) while the
    potential plus mean-field phase per step would exceed ``phase_limit`` rad,
    so long lattice-free stretches are crossed at full ``dt``.

    ``potential`` is an optional static array added to the lattice (used for
    frozen-potential checks).  Snapshots are copies at the requested times.
    """
    if isinstance(lattice, LatticeSpec):
        lattice = LatticeDrive(lattice)
    grid = wf.grid
    m = bec.species.mass
    u = resolve_coupling(bec, grid, coupling) if interacting else 0.0
    psi = wf.psi.copy()
    t = wf.time
    n0 = float(np.sum(psi.real**2 + psi.imag**2))
    stops = sorted(set(float(s) for s in snapshots if t < s < t_end)) + [t_end]
    kin_cache: dict[float, np.ndarray] = {}

    def kinetic(h):
        f = kin_cache.get(h)
        if f is None:
            f = np.exp(-1j * HBAR * grid.k2 * h / (2.0 * m))
            if len(kin_cache) < 16:
                kin_cache[h] = f
        return f

    def V(t_):
        out = lattice.potential(grid, t_) if lattice is not None else 0.0
        if potential is not None:
            out = out + potential
        return out

    static_peak = float(np.max(np.abs(potential))) if potential is not None else 0.0
    n_peak = float(np.max(psi.real**2 + psi.imag**2))
    snaps = []
    steps = 0
    for stop in stops:
        while stop - t > 1e-9 * dt:
            h = dt
            if phase_limit is not None:
                rate = (static_peak + (lattice.peak(t) if lattice is not None else 0.0) + u * n_peak) / HBAR
                while h * rate > phase_limit and h > dt / 2**20:
                    h *= 0.5
            if t + h > stop - 1e-9 * dt:
                h = stop - t
            c = h / (2.0 * HBAR)
            n = psi.real**2 + psi.imag**2
            psi *= np.exp(-1j * c * (V(t + 0.25 * h) + u * n))
            psi = fft.ifftn(kinetic(h) * fft.fftn(psi, overwrite_x=True), overwrite_x=True)
            n = psi.real**2 + psi.imag**2
            psi *= np.exp(-1j * c * (V(t + 0.75 * h) + u * n))
            t += h
            steps += 1
            if phase_limit is not None and steps % 16 == 0:
                n_peak = float(n.max())
        if stop != t_end:
            snaps.append(Wavefunction(grid, psi.copy(), stop, wf.frame_velocity))
    t = t_end

    final = Wavefunction(grid, psi, t, wf.frame_velocity)
    drift = float(np.sum(final.density)) / n0 - 1.0
    notes = []
    frac = _boundary_fraction(final)
    if frac > boundary_tol:
        msg = f"boundary contamination: density on the transverse boundary is {frac:.2e} of the peak"
        notes.append(msg)
        warnings.warn(msg, BoundaryContaminationWarning, stacklevel=2)
    if abs(drift) > norm_tol:
        notes.append(f"norm drift {drift:.2e} exceeds {norm_tol:g}")
    return Propagation(final=final, snapshots=snaps, steps=steps, norm_drift=drift, warnings=notes, dt=dt)


@dataclass
class DtPolicy:
    """Step-halving protocol: halve ``dt`` (and ``phase_limit``) until a scalar
    result changes by less than ``rtol`` between successive halvings."""

    dt0: float
    phase_limit: float | None = 0.1
    rtol: float = 0.01
    max_halvings: int = 3

    def levels(self):
        for i in range(self.max_halvings + 1):
            s = 0.5**i
            yield self.dt0 * s, (self.phase_limit * s if self.phase_limit is not None else None)

    def run(self, fn: Callable):
        """Call ``fn(dt, phase_limit) -> (result, metric)`` on successive levels.

        Returns the result of the finest level evaluated and the study as a
        list of ``(dt, phase_limit, metric)``.
        """
        study = []
        prev = None
        for dt, pl in self.levels():
            result, metric = fn(dt, pl)
            study.append((dt, pl, metric))
            if prev is not None and abs(metric - prev) <= self.rtol * abs(prev):
                return result, study
            prev = metric
        raise ConvergenceError(f"dt study did not converge after {self.max_halvings} halvings: {study}", abs(metric - study[-2][2]) / abs(prev))


def apply_kick(wf: Wavefunction, v: float, axis: str = "z", *, frame: bool = False, species: Species | None = None) -> Wavefunction:
    """Give the cloud velocity ``v`` along ``axis``.

    By default the plane-wave phase ``exp(i m v r / hbar)`` is imprinted.  With
    ``frame=True`` the field is left untouched and the computational frame is
    boosted instead (Galilean invariance); momentum observables add the frame
    velocity back.  The frame form is needed when ``m v / hbar`` lies beyond the
    grid's Nyquist wavenumber.
    """
    i = "xyz".index(axis)
    out = wf.copy()
    if v == 0:
        return out
    if frame:
        fv = list(out.frame_velocity)
        fv[i] += v
        out.frame_velocity = tuple(fv)
        return out
    grid = wf.grid
    m = (species or rb87_d2_defaults()).mass
    k = m * v / HBAR
    k_nyq = math.pi / grid.spacing[i]
    if abs(k) >= k_nyq:
        raise ValueError(f"kick wavenumber {k:.3e} 1/m exceeds the grid Nyquist limit {k_nyq:.3e} 1/m; use frame=True")
    r = grid.mesh()[i]
    out.psi = out.psi * np.exp(1j * k * r)
    return out


def _nontrivial(grid: Grid3D):
    return [i for i in range(3) if grid.shape[i] > 1]


def momentum_density(wf: Wavefunction):
    """|psi(k)|^2 on the FFT grid, normalised so that ``sum * prod(dk) = N``.

    Returns ``(kx, ky, kz, density)`` with wavenumbers in FFT ordering.
    """
    grid = wf.grid
    dims = _nontrivial(grid)
    pk = fft.fftn(wf.psi)
    dens = (pk.real**2 + pk.imag**2) * grid.dV**2 / (2.0 * math.pi) ** len(dims)
    return grid.kx, grid.ky, grid.kz, dens


def momentum_cell(grid: Grid3D) -> float:
    return float(np.prod([2.0 * math.pi / grid.extent[i] for i in _nontrivial(grid)]))


@dataclass
class VelocityMarginal:
    axis: str
    v: np.ndarray  # m/s, ascending
    density: np.ndarray  # atoms per (m/s)

    @property
    def dv(self) -> float:
        return float(self.v[1] - self.v[0])

    def total(self) -> float:
        return float(np.sum(self.density) * self.dv)


def velocity_marginal(wf: Wavefunction, axis: str, *, pad: int = 4, species: Species | None = None) -> VelocityMarginal:
    """Momentum marginal along one axis converted to velocity ``v = hbar k / m``.

    The transform along ``axis`` is zero padded ``pad``-fold (exact for a field
    contained in the box), which refines the velocity sampling without changing
    the marginal.  The frame velocity is added to the axis.
    """
    i = "xyz".index(axis)
    grid = wf.grid
    m = (species or rb87_d2_defaults()).mass
    n = grid.shape[i] * pad
    d = grid.spacing[i]
    F = fft.fft(wf.psi, n=n, axis=i)
    other = tuple(j for j in range(3) if j != i)
    P_k = np.sum(F.real**2 + F.imag**2, axis=other) * d * d / (2.0 * math.pi)
    P_k *= np.prod([grid.spacing[j] for j in other])
    k = 2.0 * math.pi * np.fft.fftfreq(n, d)
    order = np.argsort(k)
    v = HBAR * k[order] / m + wf.frame_velocity[i]
    return VelocityMarginal(axis=axis, v=v, density=P_k[order] * m / HBAR)


def velocity_marginals(wf: Wavefunction, *, pad: int = 4, species: Species | None = None):
    """Transverse (x) and longitudinal (z) velocity marginals."""
    return velocity_marginal(wf, "x", pad=pad, species=species), velocity_marginal(wf, "z", pad=pad, species=species)
