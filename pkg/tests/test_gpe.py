import math

import numpy as np
import pytest

from becfocus.gpe.focus import FocusConfig, focal_time, to_planar, to_window, y_width
from becfocus.gpe.grid import Grid3D, auto_grid, next_pow2
from becfocus.gpe.groundstate import (
    ConvergenceError,
    GridTooSmallError,
    energies,
    imaginary_time_ground_state,
    planar_coupling,
    resolve_coupling,
    tf_chemical_potential,
    tf_radii,
    thomas_fermi_seed,
)
from becfocus.gpe.propagate import (
    BoundaryContaminationWarning,
    DtPolicy,
    LatticeDrive,
    apply_kick,
    momentum_cell,
    momentum_density,
    propagate,
    velocity_marginal,
)
from becfocus.gpe.state import BECConfig, TrapConfig, Wavefunction
from becfocus.lattice import LatticeSpec
from becfocus.physconst import A0, H_PLANCK, HBAR, kick_velocity, rb87_d2_defaults

M = rb87_d2_defaults().mass
TRAP = TrapConfig.from_hz(10.0, 70.0, 70.0)
BEC = BECConfig(N=1e5, a_s=100 * A0)
LAM16 = 16 * rb87_d2_defaults().lambda_res

# Thomas-Fermi chemical potential of the reference cloud from an independent
# scalar root find on N = (8 pi / 15) (mu / u) Rx Ry Rz.
TF_MU_ORACLE = 3.490395121863998e-31


def gaussian_state(grid, sigmas, N=1.0, center=(0, 0, 0)):
    X, Y, Z = grid.mesh()
    psi = np.exp(-((X - center[0]) ** 2) / (2 * sigmas[0] ** 2) - (Y - center[1]) ** 2 / (2 * sigmas[1] ** 2) - (Z - center[2]) ** 2 / (2 * sigmas[2] ** 2))
    return Wavefunction(grid, psi + 0j).normalize(N)


def rms(wf, axis):
    n = wf.density
    r = wf.grid.mesh()[axis]
    c = np.sum(n * r) / n.sum()
    return math.sqrt(np.sum(n * (r - c) ** 2) / n.sum())


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValueError, match="nx"):
        Grid3D(12, 8, 8, 1.0, 1.0, 1.0)
    with pytest.raises(MemoryError):
        Grid3D(256, 256, 256, 1.0, 1.0, 1.0, max_points=2**20)
    with pytest.raises(ValueError):
        Grid3D(8, 1, 8, 1.0, 2.0, 1.0)


def test_grid_axes_and_reciprocal_ordering():
    g = Grid3D(8, 4, 16, 8.0, 2.0, 4.0)
    assert g.dx == 1.0 and g.dz == 0.25
    np.testing.assert_allclose(g.x, np.arange(-4, 4) * 1.0)
    np.testing.assert_allclose(g.kz, 2 * np.pi * np.fft.fftfreq(16, 0.25))
    assert g.dV == pytest.approx(1.0 * 0.5 * 0.25)
    assert next_pow2(33) == 64 and next_pow2(32) == 32


def test_auto_grid_contains_cloud_with_margin():
    mu = tf_chemical_potential(TRAP, BEC)
    R = tf_radii(mu, TRAP, M)
    g = auto_grid(R)
    for L, r in zip(g.extent, R):
        assert L / 2 == pytest.approx(1.4 * r)


# --------------------------------------------------------------------------
# Thomas-Fermi seed and ground states
# --------------------------------------------------------------------------


def test_tf_mu_matches_oracle():
    assert tf_chemical_potential(TRAP, BEC) == pytest.approx(TF_MU_ORACLE, rel=1e-10)


def test_tf_mu_scaling_with_N():
    mu2 = tf_chemical_potential(TRAP, BEC.with_(N=2e5))
    assert mu2 / tf_chemical_potential(TRAP, BEC) == pytest.approx(2 ** 0.4, rel=1e-12)


def test_tf_seed_normalised_and_bounded():
    g = Grid3D(64, 32, 32, 100e-6, 20e-6, 20e-6)
    wf = thomas_fermi_seed(g, TRAP, BEC)
    assert wf.norm() == pytest.approx(1e5, rel=1e-9)
    n_peak = wf.density.max()
    assert n_peak * BEC.u == pytest.approx(TF_MU_ORACLE, rel=0.05)


def test_tf_seed_names_offending_axis():
    g = Grid3D(64, 32, 32, 100e-6, 20e-6, 6e-6)
    with pytest.raises(GridTooSmallError, match="z"):
        thomas_fermi_seed(g, TRAP, BEC)


def test_ideal_gas_seed_is_oscillator_gaussian():
    g = Grid3D(64, 32, 32, 60e-6, 10e-6, 10e-6)
    bec = BEC.with_(a_s=0.0)
    wf = thomas_fermi_seed(g, TRAP, bec)
    for axis, w in enumerate(TRAP.omegas):
        assert rms(wf, axis) == pytest.approx(math.sqrt(HBAR / (M * w) / 2), rel=1e-3)


def test_ideal_gas_ground_energy_and_monotone_relaxation():
    g = Grid3D(32, 32, 32, 30e-6, 6e-6, 6e-6)
    bec = BEC.with_(a_s=0.0)
    seed = gaussian_state(g, (3e-6, 1e-6, 0.6e-6), N=bec.N)
    gs = imaginary_time_ground_state(seed, TRAP, bec, tolerance=1e-8)
    e_exact = 0.5 * HBAR * sum(TRAP.omegas)
    assert gs.energies.total / bec.N == pytest.approx(e_exact, rel=1e-3)
    E = np.array([h[1] for h in gs.history])
    assert np.all(np.diff(E) <= 1e-12 * abs(E[0]))


def test_interacting_ground_state_small():
    trap = TrapConfig.from_hz(70.0, 70.0, 70.0)
    bec = BECConfig(N=2e4, a_s=100 * A0)
    g = Grid3D(32, 32, 32, 14e-6, 14e-6, 14e-6)
    gs = imaginary_time_ground_state(thomas_fermi_seed(g, trap, bec), trap, bec, tolerance=1e-7)
    assert gs.virial_residual < 0.01
    assert gs.mu == pytest.approx(tf_chemical_potential(trap, bec), rel=0.1)
    assert gs.wavefunction.norm() == pytest.approx(2e4, rel=1e-10)


def test_ground_state_step_budget():
    g = Grid3D(16, 16, 16, 30e-6, 6e-6, 6e-6)
    bec = BEC.with_(a_s=0.0)
    with pytest.raises(ConvergenceError) as exc:
        imaginary_time_ground_state(gaussian_state(g, (6e-6, 1e-6, 1e-6), bec.N), TRAP, bec, 1e-14, max_steps=100)
    assert exc.value.residual > 0


def test_coupling_resolution():
    planar = Grid3D.planar(16, 16, 1e-5, 1e-5)
    with pytest.raises(ValueError, match="planar"):
        resolve_coupling(BEC, planar)
    assert resolve_coupling(BEC.with_(a_s=0.0), planar) == 0.0
    assert planar_coupling(BEC, 1e-6) == pytest.approx(BEC.u / (math.sqrt(2 * math.pi) * 1e-6))


# --------------------------------------------------------------------------
# real-time propagation
# --------------------------------------------------------------------------


@pytest.mark.filterwarnings("ignore::becfocus.gpe.propagate.BoundaryContaminationWarning")
def test_free_expansion_follows_dispersion_law():
    g = Grid3D(64, 8, 64, 40e-6, 8e-6, 40e-6)
    s0 = 1.0e-6  # density rms; wavefunction Gaussian width s0 * sqrt(2)
    wf = gaussian_state(g, (math.sqrt(2) * s0, 1e-6, math.sqrt(2) * s0))
    bec = BECConfig(N=1.0, a_s=0.0)
    t = 2e-3
    run = propagate(wf, bec, t, 1e-4)
    expected = s0 * math.sqrt(1 + (HBAR * t / (2 * M * s0**2)) ** 2)
    assert rms(run.final, 0) == pytest.approx(expected, rel=1e-3)
    assert rms(run.final, 2) == pytest.approx(expected, rel=1e-3)
    assert abs(run.norm_drift) < 1e-10


@pytest.mark.filterwarnings("ignore::becfocus.gpe.propagate.BoundaryContaminationWarning")
def test_kicked_centre_moves_at_kick_velocity():
    g = Grid3D(16, 8, 128, 8e-6, 8e-6, 80e-6)
    wf = gaussian_state(g, (2e-6, 2e-6, 2e-6))
    v = 1e-3
    wf = apply_kick(wf, v, "z")
    run = propagate(wf, BECConfig(N=1.0, a_s=0.0), 10e-3, 1e-4)
    assert run.final.center_of_mass()[2] == pytest.approx(v * 10e-3, rel=1e-6)


def test_kick_identity_norm_and_momentum_shift():
    g = Grid3D(16, 16, 64, 16e-6, 16e-6, 32e-6)
    wf = gaussian_state(g, (2e-6, 2e-6, 2e-6), N=10.0)
    assert np.array_equal(apply_kick(wf, 0.0).psi, wf.psi)
    v = 2e-3
    kicked = apply_kick(wf, v, "z")
    assert kicked.norm() == pytest.approx(wf.norm(), rel=1e-14)
    m0 = velocity_marginal(wf, "z", pad=1)
    m1 = velocity_marginal(kicked, "z", pad=1)
    mean = lambda m: np.sum(m.v * m.density) / np.sum(m.density)
    assert mean(m1) - mean(m0) == pytest.approx(v, rel=1e-6)
    with pytest.raises(ValueError, match="Nyquist"):
        apply_kick(wf, kick_velocity(16), "z")
    framed = apply_kick(wf, kick_velocity(16), "z", frame=True)
    assert mean(velocity_marginal(framed, "z")) == pytest.approx(kick_velocity(16), rel=1e-9)


def test_parseval_and_marginal_normalisation():
    g = Grid3D(32, 16, 32, 20e-6, 10e-6, 20e-6)
    rng = np.random.default_rng(7)
    wf = gaussian_state(g, (3e-6, 2e-6, 2.5e-6), N=1e5)
    wf.psi *= np.exp(1j * rng.normal(size=g.shape))
    *_, dens = momentum_density(wf)
    assert np.sum(dens) * momentum_cell(g) == pytest.approx(wf.norm(), rel=1e-10)
    for axis in "xz":
        assert velocity_marginal(wf, axis).total() == pytest.approx(1e5, rel=1e-10)


@pytest.mark.filterwarnings("ignore::becfocus.gpe.propagate.BoundaryContaminationWarning")
def test_energy_conserved_with_frozen_potential():
    g = Grid3D(32, 8, 32, 12.48e-6, 8e-6, 20e-6)
    bec = BECConfig(N=2e3, a_s=100 * A0)
    spec = LatticeSpec.for_xi(5.37, 0.01, 10e-6, g.Lx)
    V = LatticeDrive(spec.with_(z0=0.0)).potential(g, 0.0) + TRAP.potential(g, M)
    wf = gaussian_state(g, (2e-6, 2e-6, 3e-6), N=bec.N)
    e0 = energies(wf, bec, external=V)
    run = propagate(wf, bec, 10_000 * 2e-6, 2e-6, potential=V)
    assert run.steps == 10_000
    e1 = energies(run.final, bec, external=V)
    assert abs(e1.total / e0.total - 1) < 1e-4
    assert abs(run.norm_drift) < 1e-6


@pytest.mark.filterwarnings("ignore::becfocus.gpe.propagate.BoundaryContaminationWarning")
def test_translation_by_one_lattice_period():
    lam = LAM16
    g = Grid3D.planar(128, 64, lam, 20e-6)
    spec = LatticeSpec.for_xi(5.37, 0.01, 10e-6, lam, z0=5e-6, v0=0.01)
    wf = gaussian_state(g, (1.5e-6, 1.0, 3e-6), N=1e3, center=(0.1e-6, 0, 0))
    shifted = Wavefunction(g, np.roll(wf.psi, 64, axis=0))
    bec = BECConfig(N=1e3, a_s=100 * A0)
    kw = dict(lattice=LatticeDrive(spec), coupling=planar_coupling(bec, 1e-6), phase_limit=0.1)
    a = propagate(wf, bec, 5e-4, 1e-5, **kw).final
    b = propagate(shifted, bec, 5e-4, 1e-5, **kw).final
    np.testing.assert_allclose(np.roll(a.density, 64, axis=0), b.density, atol=1e-12 * a.density.max())


def test_boundary_contamination_warning():
    g = Grid3D(16, 8, 16, 10e-6, 4e-6, 4e-6)
    wf = gaussian_state(g, (2e-6, 2e-6, 2e-6))
    with pytest.warns(BoundaryContaminationWarning):
        run = propagate(wf, BECConfig(N=1.0, a_s=0.0), 1e-4, 1e-5)
    assert any("boundary" in w for w in run.warnings)


def test_lattice_drive_envelopes():
    g = Grid3D(16, 4, 8, LAM16, 4e-6, 40e-6)
    spec = LatticeSpec.for_xi(5.37, 0.01, 10e-6, LAM16, z0=20e-6, v0=0.01)
    uni = LatticeDrive(spec).potential(g, 1e-3)
    loc = LatticeDrive(spec, "local").potential(g, 1e-3)
    assert uni.shape == (16, 1, 1) and loc.shape == (16, 1, 8)
    # separation 10 um: uniform envelope is the local one at the cloud centre
    j = g.nz // 2
    np.testing.assert_allclose(loc[:, 0, j], uni[:, 0, 0], rtol=1e-12)
    assert LatticeDrive(spec).separation(2e-3) == pytest.approx(0.0, abs=1e-18)
    with pytest.raises(ValueError):
        LatticeDrive(spec, "gaussian")


def test_dt_policy_halves_until_converged():
    seen = []

    def fn(dt, pl):
        seen.append(dt)
        return dt, 1.0 + dt  # converges once dt <= 0.01 * value

    pol = DtPolicy(dt0=0.04, phase_limit=0.1, rtol=0.01, max_halvings=4)
    res, study = pol.run(fn)
    assert seen == [0.04, 0.02, 0.01]
    assert [s[1] for s in study] == [0.1, 0.05, 0.025]
    with pytest.raises(ConvergenceError):
        DtPolicy(dt0=1.0, max_halvings=2).run(lambda dt, pl: (None, 1.0 + 10 * dt))


# --------------------------------------------------------------------------
# experiment plumbing
# --------------------------------------------------------------------------


def test_focal_time():
    spec = LatticeSpec.for_xi(5.37, 0.01, 10e-6, LAM16, z0=20e-6, v0=0.01)
    assert focal_time(spec) == pytest.approx(2e-3)
    spec_g = spec.with_(g=9.81)
    t = focal_time(spec_g)
    assert 0.5 * 9.81 * t * t + 0.01 * t == pytest.approx(20e-6)


def test_window_resampling_preserves_smooth_density():
    g = Grid3D(128, 8, 16, 100e-6, 8e-6, 8e-6)
    wf = gaussian_state(g, (30e-6, 2e-6, 2e-6), N=1e5)
    win = to_window(wf, LAM16, 2, 256)
    assert win.grid.Lx == pytest.approx(LAM16)
    expected = wf.norm() * LAM16 / (math.sqrt(2 * math.pi) * 30e-6 / math.sqrt(2))
    assert win.norm() == pytest.approx(expected, rel=5e-3)
    with pytest.raises(ValueError):
        to_window(wf, 200e-6, 2, 256)


def test_planar_reduction_keeps_norm_and_width():
    g = Grid3D(16, 32, 16, 10e-6, 10e-6, 10e-6)
    wf = gaussian_state(g, (2e-6, 1.2e-6, 2e-6), N=1e4)
    assert y_width(wf) == pytest.approx(1.2e-6, rel=1e-6)
    p, u2 = to_planar(wf, BEC)
    assert p.grid.is_planar
    assert p.norm() == pytest.approx(1e4, rel=1e-10)
    assert u2 == pytest.approx(planar_coupling(BEC, 1.2e-6))


def test_focus_config_validation():
    with pytest.raises(ValueError):
        FocusConfig(xi=5.37, P0=1e-7)
    with pytest.raises(ValueError):
        FocusConfig(z_extend=3)
    assert FocusConfig().lattice().P0 == pytest.approx(0.0688e-6, rel=5e-3)
    assert H_PLANCK == pytest.approx(2 * math.pi * HBAR)
