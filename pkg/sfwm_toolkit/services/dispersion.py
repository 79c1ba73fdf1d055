"""Birefringent-fiber dispersion: index, wavenumber, group delay and phasematching."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

from scipy.optimize import brentq

from sfwm_toolkit.errors import DomainError, NoPhasematchingError
from sfwm_toolkit.units import C_MM_PER_PS, omega_to_wavelength, wavelength_to_omega

logger = logging.getLogger(__name__)

WINDOW_NM = (300.0, 2000.0)
DIFF_REL_STEP = 1e-6
SCAN_STEP_NM = 0.5
ROOT_RTOL = 1e-12
RESIDUAL_LIMIT = 1e-9


class Axis(str, Enum):
    FAST = "fast"
    SLOW = "slow"


@dataclass(frozen=True)
class SellmeierModel:
    """Three-term Sellmeier sum n² = 1 + Σ B_k λ²/(λ² − C_k²), λ and C_k in µm."""

    strengths: tuple[float, float, float]
    resonances_um: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.strengths) != 3 or len(self.resonances_um) != 3:
            raise DomainError("Sellmeier model needs exactly three terms")
        if any(b <= 0 for b in self.strengths) or any(c <= 0 for c in self.resonances_um):
            raise DomainError("Sellmeier coefficients must be strictly positive")


FUSED_SILICA = SellmeierModel(
    strengths=(0.6961663, 0.4079426, 0.8974794),
    resonances_um=(0.0684043, 0.1162414, 9.896161),
)


@dataclass(frozen=True)
class FiberSpec:
    length_mm: float
    birefringence: float
    dispersion: SellmeierModel = FUSED_SILICA
    pumps_on_slow_axis: bool = True

    def __post_init__(self) -> None:
        if self.length_mm <= 0:
            raise DomainError(f"fiber length must be positive, got {self.length_mm} mm")
        if self.birefringence < 0:
            raise DomainError(f"birefringence must be non-negative, got {self.birefringence}")

    @property
    def pump_axis(self) -> Axis:
        return Axis.SLOW if self.pumps_on_slow_axis else Axis.FAST

    @property
    def photon_axis(self) -> Axis:
        return Axis.FAST if self.pumps_on_slow_axis else Axis.SLOW


def refractive_index(model: SellmeierModel, wavelength_nm: float) -> float:
    lo, hi = WINDOW_NM
    if not lo <= wavelength_nm <= hi:
        raise DomainError(f"wavelength {wavelength_nm} nm outside Sellmeier window {WINDOW_NM}")
    x2 = (wavelength_nm * 1e-3) ** 2
    n2 = 1.0 + sum(
        b * x2 / (x2 - c * c) for b, c in zip(model.strengths, model.resonances_um)
    )
    if n2 <= 1.0:
        raise DomainError(f"Sellmeier model gives non-physical index at {wavelength_nm} nm")
    return math.sqrt(n2)


def _birefringence_term(fiber: FiberSpec, axis: Axis) -> float:
    return fiber.birefringence if axis is Axis.SLOW else 0.0


def wavenumber(fiber: FiberSpec, omega: float, axis: Axis = Axis.FAST) -> float:
    """k = n(ω)ω/c in rad/mm; the slow axis adds Δn·ω/c."""
    if omega <= 0:
        raise DomainError(f"angular frequency must be positive, got {omega} rad/ps")
    n = refractive_index(fiber.dispersion, omega_to_wavelength(omega))
    return (n + _birefringence_term(fiber, axis)) * omega / C_MM_PER_PS


def inverse_group_velocity(
    fiber: FiberSpec,
    omega: float,
    axis: Axis = Axis.FAST,
    rel_step: float = DIFF_REL_STEP,
) -> float:
    """dk/dω in ps/mm by central difference; the slow axis adds Δn/c."""
    if omega <= 0:
        raise DomainError(f"angular frequency must be positive, got {omega} rad/ps")
    h = rel_step * omega
    k_plus = wavenumber(fiber, omega + h, Axis.FAST)
    k_minus = wavenumber(fiber, omega - h, Axis.FAST)
    return (k_plus - k_minus) / (2.0 * h) + _birefringence_term(fiber, axis) / C_MM_PER_PS


def phase_mismatch(fiber: FiberSpec, omega_p1: float, omega_p2: float, omega_s: float) -> float:
    """Δk(ω_s) with the idler fixed by energy conservation, in rad/mm."""
    omega_i = omega_p1 + omega_p2 - omega_s
    return (
        wavenumber(fiber, omega_p1, fiber.pump_axis)
        + wavenumber(fiber, omega_p2, fiber.pump_axis)
        - wavenumber(fiber, omega_s, fiber.photon_axis)
        - wavenumber(fiber, omega_i, fiber.photon_axis)
    )


def solve_phasematching(
    fiber: FiberSpec, omega_p1: float, omega_p2: float
) -> tuple[float, float]:
    """Return the phasematched (ω_s, ω_i) with ω_s above the pump mean frequency.

    λ_s is scanned downward from the pump-mean wavelength in 0.5 nm steps until Δk changes
    sign (or the signal or idler leaves the dispersion window); the bracket is then refined
    with Brent's method.
    """
    lo_nm, hi_nm = WINDOW_NM
    for omega in (omega_p1, omega_p2):
        if omega <= 0 or not lo_nm <= omega_to_wavelength(omega) <= hi_nm:
            raise DomainError(f"pump frequency {omega} rad/ps outside dispersion window")

    total = omega_p1 + omega_p2
    omega_idler_min = wavelength_to_omega(hi_nm)
    centre_nm = omega_to_wavelength(total / 2.0)

    def mismatch(omega_s: float) -> float:
        return phase_mismatch(fiber, omega_p1, omega_p2, omega_s)

    prev_omega = total / 2.0
    prev_value = mismatch(prev_omega)
    bracket: tuple[float, float] | None = None
    step = 1
    while True:
        lambda_s = centre_nm - step * SCAN_STEP_NM
        if lambda_s < lo_nm:
            break
        omega_s = wavelength_to_omega(lambda_s)
        if total - omega_s < omega_idler_min:
            break
        value = mismatch(omega_s)
        if value == 0.0:
            bracket = (omega_s, omega_s)
            break
        if math.copysign(1.0, value) != math.copysign(1.0, prev_value):
            bracket = (prev_omega, omega_s)
            break
        prev_omega, prev_value = omega_s, value
        step += 1

    if bracket is None:
        raise NoPhasematchingError(
            f"no phasematched signal between {centre_nm:.2f} nm and the window edge"
        )

    a, b = bracket
    root = a if a == b else float(brentq(mismatch, a, b, xtol=1e-14, rtol=ROOT_RTOL, maxiter=200))
    residual = mismatch(root)
    if abs(residual) > RESIDUAL_LIMIT:
        logger.warning(
            "phasematching_residual_high", extra={"residual_rad_per_mm": residual}
        )
        raise NoPhasematchingError(
            f"phasematching residual {residual:.3g} rad/mm exceeds {RESIDUAL_LIMIT:g}"
        )
    logger.debug(
        "phasematching_solved",
        extra={
            "signal_nm": omega_to_wavelength(root),
            "idler_nm": omega_to_wavelength(total - root),
            "scan_steps": step,
        },
    )
    return root, total - root
