import math

import pytest

from becfocus.aberration import (
    BETA_CIRCULAR,
    AberrationBudget,
    angular_fwhm,
    assemble_budget,
    chromatic_fwhm,
    diffraction_fwhm,
)
from becfocus.physconst import H_PLANCK, rb87_d2_defaults

RB = rb87_d2_defaults()


def test_diffraction_closed_form():
    f, v, lam = 5e-6, 0.02, 10e-6
    expected = 0.88 * f * (H_PLANCK / (RB.mass * v)) / (lam / 2)
    assert diffraction_fwhm(f, v, lam) == pytest.approx(expected, rel=1e-14)
    assert diffraction_fwhm(f, v, lam, beta=BETA_CIRCULAR) == pytest.approx(expected * 1.22 / 0.88)


def test_diffraction_scaling():
    base = diffraction_fwhm(5e-6, 0.01, 12e-6)
    assert diffraction_fwhm(10e-6, 0.01, 12e-6) == pytest.approx(2 * base)
    assert diffraction_fwhm(5e-6, 0.02, 12e-6) == pytest.approx(base / 2)


def test_chromatic_linear_in_spread_and_sign_free():
    args = dict(xi=5.0, sigma_z=10e-6, lam=12e-6, f=5e-6, v_z=0.01)
    a = chromatic_fwhm(dF_dxi=-0.02, dv_z=1e-3, **args)
    b = chromatic_fwhm(dF_dxi=0.02, dv_z=2e-3, **args)
    assert a > 0
    assert b == pytest.approx(2 * a)
    expected = 2 * 5.0 * math.atan(12e-6 / 10e-6) * 10e-6 * 0.02 * 1e-3 / 0.01
    assert a == pytest.approx(expected, rel=1e-14)
    assert chromatic_fwhm(dF_dxi=-0.02, dv_z=0.0, **args) == 0.0


def test_angular_closed_form():
    assert angular_fwhm(5e-6, 1e-4, 1e-2) == pytest.approx(5e-6 * math.atan(1e-2))


def test_inputs_validated():
    with pytest.raises(ValueError):
        diffraction_fwhm(-1.0, 0.01, 1e-5)
    with pytest.raises(ValueError):
        angular_fwhm(1e-6, -1.0, 0.01)


def test_budget_totals():
    b = assemble_budget(1.0, 2.0, 3.0, 4.0)
    assert isinstance(b, AberrationBudget)
    assert b.total_non == 3.0
    assert b.total_int == 10.0
    d = b.as_dict()
    assert d["total_int"] == 10.0 and d["sph"] == 1.0
