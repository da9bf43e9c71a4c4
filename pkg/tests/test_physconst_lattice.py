import math

import numpy as np
import pytest

from becfocus.lattice import (
    FocusSpec,
    LatticeSpec,
    dipole_force,
    dipole_potential,
    intensity,
    lattice_center,
    peak_intensity_from_power,
    power_for_xi,
    power_from_peak_intensity,
    xi_for_power,
)
from becfocus.physconst import HBAR, Species, detuning_angular, kick_velocity, rb87_d2_defaults

RB = rb87_d2_defaults()
LAM16 = 16 * RB.lambda_res


def spec_for(lam=LAM16, sigma_z=10e-6, I0=1000.0, **kw):
    return LatticeSpec(I0=I0, sigma_z=sigma_z, lam=lam, delta_ang=detuning_angular(200e9), **kw)


def test_species_rejects_nonpositive():
    with pytest.raises(ValueError, match="mass"):
        Species(mass=0.0, lambda_res=780e-9, gamma=1.0, I_sat=1.0)
    with pytest.raises(ValueError, match="lambda_res"):
        Species(mass=1.0, lambda_res=1.0, gamma=1.0, I_sat=1.0)


def test_kick_velocity_16_recoils():
    # 16 * hbar * 2 pi / (780.027 nm * 1.44e-25 kg)
    assert kick_velocity(16) == pytest.approx(0.094386, rel=1e-4)
    assert kick_velocity(0) == 0.0


def test_power_intensity_round_trip():
    P0 = 0.0688e-6
    I0 = peak_intensity_from_power(P0, 10e-6)
    assert I0 == pytest.approx(8 * P0 / (math.pi * 1e-10))
    assert power_from_peak_intensity(I0, 10e-6) == pytest.approx(P0, rel=1e-14)


def test_xi_for_power_inverts_power_for_xi():
    spec = spec_for()
    E0 = 0.5 * RB.mass * 0.01**2
    P = power_for_xi(FocusSpec(5.37, E0), spec)
    assert xi_for_power(P, E0, spec) == pytest.approx(5.37, rel=1e-13)


def test_power_scales_with_energy_and_wavelength():
    spec = spec_for()
    E0 = 0.5 * RB.mass * 0.01**2
    P = power_for_xi(FocusSpec(5.37, E0), spec)
    assert power_for_xi(FocusSpec(5.37, 4 * E0), spec) == pytest.approx(4 * P)
    assert power_for_xi(FocusSpec(5.37, E0), spec.with_(lam=2 * LAM16)) == pytest.approx(4 * P)


def test_resonant_beam_rejected():
    spec = spec_for().with_(delta_ang=0.0)
    with pytest.raises(ValueError, match="resonant"):
        power_for_xi(FocusSpec(1.0, 1e-30), spec)


def test_for_xi_matches_power_for_xi():
    spec = LatticeSpec.for_xi(5.37, 0.01, 10e-6, LAM16)
    E0 = 0.5 * RB.mass * 0.01**2
    assert spec.P0 == pytest.approx(power_for_xi(FocusSpec(5.37, E0), spec), rel=1e-13)


def test_potential_minima_at_nodes_for_blue_detuning():
    spec = spec_for()
    x = np.linspace(-spec.lam / 2, spec.lam / 2, 401)
    U = dipole_potential(spec, x, 0.0)
    assert U.min() == pytest.approx(0.0, abs=1e-40)
    assert abs(x[np.argmin(U)]) < 1e-12 or abs(abs(x[np.argmin(U)]) - spec.lam / 2) < 1e-12
    assert np.all(U >= 0)


def test_paraxial_curvature_matches_xi():
    # U ~ 1/2 kappa x^2 near a node with kappa = hbar delta p0 k^2; xi = kappa sigma^2 / (m v^2)
    v = 0.01
    spec = LatticeSpec.for_xi(5.37, v, 10e-6, LAM16)
    h = 1e-10
    kappa = (dipole_potential(spec, h, 0.0) - 2 * dipole_potential(spec, 0.0, 0.0) + dipole_potential(spec, -h, 0.0)) / h**2
    assert kappa * spec.sigma_z**2 / (RB.mass * v**2) == pytest.approx(5.37, rel=1e-5)


def test_force_is_minus_gradient():
    spec = spec_for(I0=5e4)
    rng = np.random.default_rng(3)
    x = rng.uniform(-spec.lam, spec.lam, 20)
    z = rng.uniform(-2 * spec.sigma_z, 2 * spec.sigma_z, 20)
    fx, fz = dipole_force(spec, x, z)
    hx, hz = 1e-6 * spec.lam, 1e-6 * spec.sigma_z
    gx = (dipole_potential(spec, x + hx, z) - dipole_potential(spec, x - hx, z)) / (2 * hx)
    gz = (dipole_potential(spec, x, z + hz) - dipole_potential(spec, x, z - hz)) / (2 * hz)
    scale = np.max(np.abs(gx))
    np.testing.assert_allclose(fx, -gx, atol=1e-6 * scale)
    np.testing.assert_allclose(fz, -gz, atol=1e-6 * scale)


def test_intensity_envelope():
    spec = spec_for(I0=2.0)
    assert intensity(spec, spec.lam / 4, 0.0) == pytest.approx(2.0)
    assert intensity(spec, spec.lam / 4, spec.sigma_z) == pytest.approx(2.0 * math.exp(-2))


def test_lattice_center_example():
    # g=0, v0=1 cm/s, t=2 ms -> 20 um
    spec = spec_for(v0=0.01)
    assert lattice_center(2e-3, spec) == pytest.approx(20e-6)
    spec = spec_for(v0=0.0, g=9.81)
    assert lattice_center(1e-2, spec) == pytest.approx(0.5 * 9.81e-4)


def test_saturation_factor_value():
    spec = spec_for()
    g, d = RB.gamma, 2 * math.pi * 200e9
    assert spec.saturation_factor == pytest.approx(g * g / (g * g + 4 * d * d))
    assert HBAR * spec.delta_ang > 0
