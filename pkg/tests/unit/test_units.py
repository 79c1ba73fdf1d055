import math

import pytest

from sfwm_toolkit.errors import DomainError
from sfwm_toolkit.units import (
    C_MM_PER_PS,
    C_NM_PER_PS,
    fwhm_nm_to_sigma,
    omega_to_wavelength,
    sigma_to_fwhm_nm,
    wavelength_to_omega,
)


def test_speed_of_light_units():
    assert C_MM_PER_PS == pytest.approx(0.299792458)
    assert C_NM_PER_PS == pytest.approx(299792.458)


def test_wavelength_omega_round_trip():
    omega = wavelength_to_omega(715.0)
    assert omega == pytest.approx(2 * math.pi * 299792.458 / 715.0)
    assert omega_to_wavelength(omega) == pytest.approx(715.0)


def test_fwhm_conversion_inverts():
    sigma = fwhm_nm_to_sigma(772.0, 8.0)
    assert sigma == pytest.approx(21.475, abs=5e-3)
    assert sigma_to_fwhm_nm(772.0, sigma) == pytest.approx(8.0)


@pytest.mark.parametrize("value", [0.0, -1.0])
def test_non_positive_inputs_rejected(value):
    with pytest.raises(DomainError):
        wavelength_to_omega(value)
    with pytest.raises(DomainError):
        omega_to_wavelength(value)
