"""End-to-end focusing experiment: ground state, release, lattice, focal profile.

The ground state is prepared on a grid covering the whole trapped cloud and
then resampled onto a periodic x-window spanning an integer number of lattice
periods around the cloud centre (the transverse y/z sampling is kept).  Since
the lattice is periodic and the cloud is much longer than a period, the
window carries the local density of the central slits; peak column
densities are therefore unaffected by the truncation.

The release kick is a Galilean frame boost: the condensate stays at rest on
the grid while the lattice closes in at ``v0 = v_z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from ..lattice import LatticeSpec, peak_intensity_from_power
from ..physconst import A0, detuning_angular, rb87_d2_defaults
from ..profiles import FitResult, PeakSet, fit_gaussian, peak_stats
from .grid import Grid3D, next_pow2
from .groundstate import (
    GroundState,
    imaginary_time_ground_state,
    planar_coupling,
    thomas_fermi_seed,
)
from .propagate import DtPolicy, LatticeDrive, VelocityMarginal, apply_kick, propagate, velocity_marginals
from .state import BECConfig, TrapConfig, Wavefunction

LAMBDA_D2 = rb87_d2_defaults().lambda_res


def default_ground_grid() -> Grid3D:
    return Grid3D(128, 64, 64, 100e-6, 20e-6, 20e-6)


@dataclass(frozen=True)
class FocusConfig:
    """Parameters of one focusing run (SI units).

    Exactly one of ``xi`` (optimal focus for ``v_z``) or ``P0`` (fixed beam
    power) sets the lattice strength.  ``interacting=False`` switches the mean
    field off after release; the cloud is still prepared with ``a_s``.
    """

    sigma_z: float = 10e-6
    v_z: float = 0.01
    lam: float = 16 * LAMBDA_D2
    xi: float | None = 5.37
    P0: float | None = None
    delta_ang: float = detuning_angular(200e9)
    z0: float = 20e-6
    g: float = 0.0
    N: float = 1e5
    a_s: float = 100 * A0
    trap: TrapConfig = field(default_factory=lambda: TrapConfig.from_hz(10.0, 70.0, 70.0))
    interacting: bool = True
    envelope: str = "uniform"
    ground_grid: Grid3D = field(default_factory=default_ground_grid)
    window_periods: int = 2
    nx_window: int = 256
    z_extend: int = 1
    planar: bool = False
    mode: str = "single"
    model: str = "voigt"
    threshold: float = 1.0 / math.e
    dt0: float = 2e-5
    phase_limit: float = 0.1
    dt_rtol: float = 0.01
    max_halvings: int = 3

    def __post_init__(self):
        if (self.xi is None) == (self.P0 is None):
            raise ValueError("give exactly one of xi or P0")
        if self.mode not in ("single", "sweep"):
            raise ValueError(f"mode must be 'single' or 'sweep', got {self.mode!r}")
        if self.z_extend < 1 or self.z_extend & (self.z_extend - 1):
            raise ValueError("z_extend must be a power of two")

    def with_(self, **changes) -> "FocusConfig":
        return replace(self, **changes)

    @property
    def bec(self) -> BECConfig:
        return BECConfig(N=self.N, a_s=self.a_s, v_kick=self.v_z)

    def lattice(self) -> LatticeSpec:
        kw = dict(z0=self.z0, g=self.g, v0=self.v_z)
        if self.xi is not None:
            return LatticeSpec.for_xi(self.xi, self.v_z, self.sigma_z, self.lam, self.delta_ang, **kw)
        I0 = peak_intensity_from_power(self.P0, self.sigma_z)
        return LatticeSpec(I0=I0, sigma_z=self.sigma_z, lam=self.lam, delta_ang=self.delta_ang, **kw)

    def dt_policy(self) -> DtPolicy:
        return DtPolicy(dt0=self.dt0, phase_limit=self.phase_limit, rtol=self.dt_rtol, max_halvings=self.max_halvings)


def focal_time(spec: LatticeSpec) -> float:
    """Time at which the lattice centre reaches the cloud centre, z(t*) = z0."""
    if spec.g == 0:
        if not spec.v0 > 0:
            raise ValueError("lattice never reaches the cloud (v0 <= 0 and g = 0)")
        return spec.z0 / spec.v0
    disc = spec.v0**2 + 2.0 * spec.g * spec.z0
    if disc < 0:
        raise ValueError("lattice never reaches the cloud")
    return (-spec.v0 + math.sqrt(disc)) / spec.g


def prepare_ground_state(config: FocusConfig, tolerance: float = 1e-8) -> GroundState:
    bec = BECConfig(N=config.N, a_s=config.a_s)
    seed = thomas_fermi_seed(config.ground_grid, config.trap, bec)
    return imaginary_time_ground_state(seed, config.trap, bec, tolerance)


def to_window(wf: Wavefunction, lam: float, periods: int, nx: int) -> Wavefunction:
    """Resample onto a periodic x-window of ``periods`` lattice periods (``lam / 2`` each)."""
    grid = wf.grid.with_x(nx, periods * 0.5 * lam)
    xs = wf.grid.x
    if grid.x[0] < xs[0] or grid.x[-1] > xs[-1]:
        raise ValueError("window is wider than the source grid")
    re = CubicSpline(xs, wf.psi.real, axis=0)(grid.x)
    im = CubicSpline(xs, wf.psi.imag, axis=0)(grid.x)
    return Wavefunction(grid, re + 1j * im, wf.time, wf.frame_velocity)


def extend_z(wf: Wavefunction, factor: int) -> Wavefunction:
    """Zero-pad symmetrically along z, keeping the spacing."""
    if factor == 1:
        return wf
    g = wf.grid
    nz = g.nz * factor
    grid = Grid3D(g.nx, g.ny, nz, g.Lx, g.Ly, g.Lz * factor, max_points=g.max_points)
    psi = np.zeros(grid.shape, dtype=complex)
    off = nz // 2 - g.nz // 2
    psi[:, :, off : off + g.nz] = wf.psi
    return Wavefunction(grid, psi, wf.time, wf.frame_velocity)


def y_width(wf: Wavefunction) -> float:
    """Gaussian-equivalent wavefunction width along y, ``sqrt(2 <y^2>)``."""
    n = wf.density
    y = wf.grid.y[None, :, None]
    return math.sqrt(2.0 * float(np.sum(n * y * y) / np.sum(n)))


def to_planar(wf: Wavefunction, bec: BECConfig) -> tuple[Wavefunction, float]:
    """Integrate out y: ``psi_2D = sqrt(int |psi|^2 dy)`` and the reduced coupling.

    Only meaningful for a real, phase-free state such as a ground state.
    """
    g = wf.grid
    col = wf.column_density()
    grid = Grid3D.planar(g.nx, g.nz, g.Lx, g.Lz, max_points=g.max_points)
    out = Wavefunction(grid, np.sqrt(col)[:, None, :] + 0j, wf.time, wf.frame_velocity)
    return out, planar_coupling(bec, y_width(wf))


@dataclass
class FocusResult:
    fwhm: float  # m
    peak_density: float  # atoms / um^2
    x: np.ndarray  # m
    profile: np.ndarray  # atoms / um^2
    z_slice: float  # m, cloud-frame z of the analysed slice
    t_focus: float
    fit: FitResult | None
    peaks: PeakSet
    dt_study: list
    norm_drift: float
    warnings: list = field(default_factory=list)
    config: FocusConfig | None = None


def focal_profile(wf: Wavefunction):
    """y-integrated column density [atoms/um^2] along x at the z-slice of its maximum."""
    col = wf.column_density() * 1e-12
    j = int(np.argmax(col.max(axis=0)))
    return col[:, j], float(wf.grid.z[j])


def analyse_profile(x, profile, lam: float, *, mode="single", model="voigt", threshold=1.0 / math.e):
    """Fit the focal profile; returns ``(fwhm, peak_density, fit, peaks)``.

    ``single`` reports the peak nearest the cloud axis (x = 0); ``sweep``
    averages all peaks above ``threshold`` of the highest one.
    """
    peaks = peak_stats(x, profile, 0.25 * lam, threshold=threshold, model=model, periodic=True)
    if mode == "single":
        central = min(peaks.peaks, key=lambda p: abs(p.position))
        return central.fwhm, central.height, central.fit, peaks
    return peaks.mean_fwhm, peaks.max_height, None, peaks


def focus_run(config: FocusConfig, ground_state: GroundState | Wavefunction | None = None) -> FocusResult:
    """Ground state, frame kick, propagation to the focal time, profile analysis.

    The step size follows ``config.dt_policy()``: the run is repeated with
    halved steps until the reported FWHM changes by less than ``dt_rtol``.
    """
    if ground_state is None:
        ground_state = prepare_ground_state(config)
    gs = ground_state.wavefunction if isinstance(ground_state, GroundState) else ground_state
    bec = config.bec
    wf = to_window(gs, config.lam, config.window_periods, config.nx_window)
    wf = extend_z(wf, config.z_extend)
    coupling = None
    if config.planar:
        wf, coupling = to_planar(wf, bec)
    wf = apply_kick(wf, -config.v_z, "z", frame=True)

    spec = config.lattice()
    drive = LatticeDrive(spec, config.envelope)
    t_star = focal_time(spec)

    def attempt(dt, phase_limit):
        run = propagate(
            wf,
            bec,
            t_star,
            dt,
            lattice=drive,
            interacting=config.interacting,
            coupling=coupling,
            phase_limit=phase_limit,
        )
        prof, zj = focal_profile(run.final)
        fwhm, peak, fit, peaks = analyse_profile(run.final.grid.x, prof, config.lam, mode=config.mode, model=config.model, threshold=config.threshold)
        return (run, prof, zj, fwhm, peak, fit, peaks), fwhm

    (run, prof, zj, fwhm, peak, fit, peaks), study = config.dt_policy().run(attempt)
    return FocusResult(
        fwhm=fwhm,
        peak_density=peak,
        x=run.final.grid.x,
        profile=prof,
        z_slice=zj,
        t_focus=t_star,
        fit=fit,
        peaks=peaks,
        dt_study=study,
        norm_drift=run.norm_drift,
        warnings=list(run.warnings),
        config=config,
    )


@dataclass
class VelocitySpread:
    """Gaussian-fit FWHMs [m/s] of the released cloud's velocity marginals."""

    dv_x: float
    dv_z: float
    marginal_x: VelocityMarginal
    marginal_z: VelocityMarginal
    fit_x: FitResult
    fit_z: FitResult
    t: float
    warnings: list = field(default_factory=list)


def velocity_spread(
    ground_state: GroundState | Wavefunction,
    bec: BECConfig,
    t: float = 2e-3,
    *,
    dt: float = 2e-5,
    phase_limit: float | None = 0.1,
    pad: int = 4,
) -> VelocitySpread:
    """Release the ground state with ``bec.v_kick`` along -z and expand freely for ``t``."""
    gs = ground_state.wavefunction if isinstance(ground_state, GroundState) else ground_state
    wf = apply_kick(gs, -bec.v_kick, "z", frame=True)
    run = propagate(wf, bec, t, dt, phase_limit=phase_limit)
    mx, mz = velocity_marginals(run.final, pad=pad, species=bec.species)
    fx = _fit_marginal(mx)
    fz = _fit_marginal(mz)
    return VelocitySpread(fx.fwhm, fz.fwhm, mx, mz, fx, fz, t, list(run.warnings))


def _fit_marginal(m: VelocityMarginal, span: float = 4.0) -> FitResult:
    """Gaussian fit restricted to ``span`` half-widths around the peak."""
    i0 = int(np.argmax(m.density))
    half = m.density[i0] / 2
    above = np.flatnonzero(m.density >= half)
    w = max(m.v[above[-1]] - m.v[above[0]], 4 * m.dv)
    sel = np.abs(m.v - m.v[i0]) <= span * w
    return fit_gaussian(m.v[sel], m.density[sel], offset=False)


def suggest_window_nx(lam: float, periods: int, fwhm_estimate: float, points_per_fwhm: int = 10) -> int:
    return next_pow2(periods * 0.5 * lam / (fwhm_estimate / points_per_fwhm))
