"""Internal unit system: time ps, length mm, wavelength nm, angular frequency rad/ps."""

from __future__ import annotations

import math

from scipy.constants import c as _C_SI

from sfwm_toolkit.errors import DomainError

C_MM_PER_PS = _C_SI * 1e3 / 1e12
C_NM_PER_PS = _C_SI * 1e9 / 1e12
FWHM_FACTOR = math.sqrt(2.0 * math.log(2.0))


def wavelength_to_omega(wavelength_nm: float) -> float:
    if wavelength_nm <= 0:
        raise DomainError(f"wavelength must be positive, got {wavelength_nm} nm")
    return 2.0 * math.pi * C_NM_PER_PS / wavelength_nm


def omega_to_wavelength(omega: float) -> float:
    if omega <= 0:
        raise DomainError(f"angular frequency must be positive, got {omega} rad/ps")
    return 2.0 * math.pi * C_NM_PER_PS / omega


def fwhm_nm_to_sigma(wavelength_nm: float, fwhm_nm: float) -> float:
    """Convert an intensity FWHM in nm to the amplitude width σ of exp(-ν²/σ²).

    Δω = 2πc·Δλ/λ² is the FWHM in angular frequency and σ = Δω/√(2 ln 2).
    """
    if fwhm_nm <= 0:
        raise DomainError(f"bandwidth must be positive, got {fwhm_nm} nm")
    delta_omega = 2.0 * math.pi * C_NM_PER_PS * fwhm_nm / wavelength_nm**2
    return delta_omega / FWHM_FACTOR


def sigma_to_fwhm_nm(wavelength_nm: float, sigma: float) -> float:
    return sigma * FWHM_FACTOR * wavelength_nm**2 / (2.0 * math.pi * C_NM_PER_PS)
