"""Thomas-Fermi seeding and imaginary-time relaxation to the ground state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft
from scipy.optimize import bisect

from ..physconst import HBAR
from .grid import Grid3D
from .state import BECConfig, TrapConfig, Wavefunction


class GridTooSmallError(ValueError):
    def __init__(self, axis: str, radius: float, half_extent: float):
        super().__init__(
            f"Thomas-Fermi radius along {axis} ({radius * 1e6:.3f} um) does not fit in the grid half-extent ({half_extent * 1e6:.3f} um)"
        )
        self.axis = axis


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def tf_chemical_potential(trap: TrapConfig, bec: BECConfig) -> float:
    """Closed-form Thomas-Fermi chemical potential [J]."""
    m = bec.species.mass
    wbar = trap.omega_bar
    abar = math.sqrt(HBAR / (m * wbar))
    return 0.5 * HBAR * wbar * (15.0 * bec.N * bec.a_s / abar) ** 0.4


def tf_radii(mu: float, trap: TrapConfig, mass: float) -> tuple[float, float, float]:
    return tuple(math.sqrt(2.0 * mu / mass) / w if w > 0 else math.inf for w in trap.omegas)


def oscillator_lengths(trap: TrapConfig, mass: float) -> tuple[float, float, float]:
    return tuple(math.sqrt(HBAR / (mass * w)) if w > 0 else math.inf for w in trap.omegas)


def thomas_fermi_seed(grid: Grid3D, trap: TrapConfig, bec: BECConfig) -> Wavefunction:
    """Thomas-Fermi density ``max(0, mu - V) / u`` normalised to ``N`` on the grid.

    ``mu`` is bisected on the discrete normalisation sum.  For ``a_s = 0`` the
    oscillator ground state is returned instead.
    """
    if min(trap.omegas) <= 0:
        raise ValueError("Thomas-Fermi seed needs a closed trap (all omega > 0)")
    m = bec.species.mass
    X, Y, Z = grid.mesh()
    if bec.a_s == 0:
        lx, ly, lz = oscillator_lengths(trap, m)
        psi = np.exp(-0.5 * (X**2 / lx**2 + Y**2 / ly**2 + Z**2 / lz**2)) + 0j
        return Wavefunction(grid, psi).normalize(bec.N)

    mu_guess = tf_chemical_potential(trap, bec)
    for axis, R, L, d in zip("xyz", tf_radii(mu_guess, trap, m), grid.extent, grid.spacing):
        if axis == "y" and grid.is_planar:
            continue
        if R > 0.5 * L - d:
            raise GridTooSmallError(axis, R, 0.5 * L - d)

    V = trap.potential(grid, m)
    u = bec.u

    def excess(mu):
        return np.sum(np.maximum(mu - V, 0.0)) * grid.dV / u - bec.N

    hi = 2.0 * mu_guess
    while excess(hi) < 0:
        hi *= 2.0
    mu = bisect(excess, 0.0, hi, xtol=1e-12 * mu_guess, rtol=1e-14, maxiter=200)
    psi = np.sqrt(np.maximum(mu - V, 0.0) / u) + 0j
    return Wavefunction(grid, psi).normalize(bec.N)


@dataclass(frozen=True)
class Energies:
    """Energy components [J] of a state (total, not per atom)."""

    kinetic: float
    trap: float
    interaction: float
    external: float = 0.0
    N: float = 1.0

    @property
    def total(self) -> float:
        return self.kinetic + self.trap + self.interaction + self.external

    @property
    def mu(self) -> float:
        return (self.kinetic + self.trap + self.external + 2.0 * self.interaction) / self.N

    @property
    def virial_residual(self) -> float:
        """``|2T - 2V_trap + 3E_int| / E``; zero for an exact trapped ground state."""
        return abs(2.0 * self.kinetic - 2.0 * self.trap + 3.0 * self.interaction) / abs(self.total)


def energies(wf: Wavefunction, bec: BECConfig, trap: TrapConfig | None = None, external=None, *, coupling: float | None = None) -> Energies:
    """Kinetic, trap, interaction and external-potential energies of ``wf``.

    ``external`` is an optional array broadcastable to the grid [J].
    """
    m = bec.species.mass
    pk = fft.fftn(wf.psi)
    dV = wf.grid.dV
    T = HBAR**2 / (2.0 * m) * np.sum(wf.grid.k2 * (pk.real**2 + pk.imag**2)) / pk.size * dV
    n = wf.density
    Vt = float(np.sum(trap.potential(wf.grid, m) * n) * dV) if trap is not None else 0.0
    Ei = 0.5 * resolve_coupling(bec, wf.grid, coupling) * float(np.sum(n * n) * dV)
    Ex = float(np.sum(np.broadcast_to(external, n.shape) * n) * dV) if external is not None else 0.0
    return Energies(kinetic=float(T), trap=Vt, interaction=Ei, external=Ex, N=wf.norm())


def resolve_coupling(bec: BECConfig, grid: Grid3D, coupling: float | None = None) -> float:
    """Mean-field coupling for ``grid``: ``bec.u`` in 3D, an explicit value on planar grids."""
    if coupling is not None:
        return coupling
    if bec.a_s == 0:
        return 0.0
    if grid.is_planar:
        raise ValueError("planar grid needs an explicit reduced coupling (see planar_coupling)")
    return bec.u


def planar_coupling(bec: BECConfig, l_y: float) -> float:
    """Effective 2D coupling ``u / (sqrt(2 pi) l_y)`` for a Gaussian y-profile of width ``l_y``."""
    return bec.u / (math.sqrt(2.0 * math.pi) * l_y)


@dataclass
class GroundState:
    wavefunction: Wavefunction
    energies: Energies
    mu_tf: float
    history: list = field(default_factory=list)  # (tau, E_total, mu) samples
    steps: int = 0
    residual: float = float("nan")

    @property
    def mu(self) -> float:
        return self.energies.mu

    @property
    def virial_residual(self) -> float:
        return self.energies.virial_residual


def default_dt_stages(trap: TrapConfig, bec: BECConfig) -> tuple[float, ...]:
    """Imaginary time steps: coarse relaxation, then two refinements by four."""
    scale = tf_chemical_potential(trap, bec) if bec.a_s > 0 else 0.5 * HBAR * sum(trap.omegas)
    dt0 = 0.1 * HBAR / scale
    return (dt0, dt0 / 4.0, dt0 / 16.0)


def imaginary_time_ground_state(
    seed: Wavefunction,
    trap: TrapConfig,
    bec: BECConfig,
    tolerance: float = 1e-8,
    *,
    dt_stages=None,
    check_every: int = 25,
    max_steps: int = 40000,
    min_stage_steps: int = 200,
    coupling: float | None = None,
) -> GroundState:
    """Relax ``seed`` in imaginary time with symmetric split steps.

    Each step applies half the trap plus mean-field factor, the kinetic factor in
    reciprocal space and the second half, then renormalises to ``N``.  The step
    sequence runs through ``dt_stages``; the last stage ends when the relative
    change of ``mu`` per unit dimensionless imaginary time ``tau * mu / hbar``
    drops below ``tolerance`` (earlier stages stop at ``100 * tolerance``).  Small final steps remove the splitting bias of the
    coarse ones (which otherwise dominates the virial residual).

    Raises
    ------
    ConvergenceError
        If a stage does not meet ``tolerance`` within the step budget.
    """
    grid = seed.grid
    m = bec.species.mass
    u = resolve_coupling(bec, grid, coupling)
    V = trap.potential(grid, m)
    N = bec.N
    wf = seed.copy().normalize(N)
    psi = wf.psi
    stages = tuple(dt_stages) if dt_stages is not None else default_dt_stages(trap, bec)
    mu_tf = tf_chemical_potential(trap, bec) if bec.a_s > 0 else 0.5 * HBAR * sum(trap.omegas)

    history = []
    tau = 0.0
    steps = 0
    en = energies(wf, bec, trap, coupling=u)
    history.append((tau, en.total, en.mu))
    residual = math.inf
    for stage, dt in enumerate(stages):
        # intermediate stages only need to hand over a relaxed state
        stage_tol = tolerance if stage == len(stages) - 1 else 100.0 * tolerance
        kin = np.exp(-HBAR * grid.k2 * dt / (2.0 * m))
        c = dt / (2.0 * HBAR)
        mu_prev, tau_prev = en.mu, tau
        stage_steps = 0
        while True:
            psi *= np.exp(-(V + u * (psi.real**2 + psi.imag**2)) * c)
            psi = fft.ifftn(kin * fft.fftn(psi, overwrite_x=True), overwrite_x=True)
            psi *= np.exp(-(V + u * (psi.real**2 + psi.imag**2)) * c)
            psi *= math.sqrt(N / (np.sum(psi.real**2 + psi.imag**2) * grid.dV))
            tau += dt
            steps += 1
            stage_steps += 1
            if stage_steps % check_every:
                continue
            wf.psi = psi
            en = energies(wf, bec, trap, coupling=u)
            history.append((tau, en.total, en.mu))
            residual = abs(en.mu - mu_prev) / abs(en.mu) / ((tau - tau_prev) * abs(en.mu) / HBAR)
            mu_prev, tau_prev = en.mu, tau
            if residual < stage_tol and stage_steps >= min_stage_steps:
                break
            if steps >= max_steps:
                raise ConvergenceError(f"imaginary-time relaxation did not converge in {steps} steps", residual)
    wf.psi = psi
    wf.time = 0.0
    en = energies(wf, bec, trap, coupling=u)
    return GroundState(wavefunction=wf, energies=en, mu_tf=mu_tf, history=history, steps=steps, residual=residual)
