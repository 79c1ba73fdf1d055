"""Joint spectral amplitudes of dual-pump and degenerate-pump SFWM.

Detunings ν_s, ν_i are measured in rad/ps from the phasematched carriers. All JSA
builders return unnormalized grids; normalization is done numerically by
:func:`sfwm_toolkit.services.analysis.normalize`.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from cachetools import LRUCache, cached
from scipy import integrate

from sfwm_toolkit.errors import (
    ContractError,
    DegenerateConfigurationError,
    DegenerateInputError,
    DomainError,
)
from sfwm_toolkit.services.dispersion import (
    WINDOW_NM,
    FiberSpec,
    inverse_group_velocity,
    solve_phasematching,
)
from sfwm_toolkit.services.faddeeva import erf_difference, windowed_erf
from sfwm_toolkit.units import fwhm_nm_to_sigma, wavelength_to_omega

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]

NORM_TOLERANCE = 1e-10
PREPASS_POINTS = 64
PREPASS_SPAN = 8.0
DEFAULT_SPAN = 4.0
# Gaussian fit of sinc² used only to size the degenerate pre-pass window.
SINC_GAUSS_KAPPA = 0.193


@dataclass(frozen=True)
class PumpPulse:
    """Pump carrier in nm with amplitude bandwidth σ (rad/ps), amplitude ∝ exp(-ν²/σ²)."""

    wavelength_nm: float
    sigma: float
    power_mw: float | None = None

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise DomainError(f"pump bandwidth must be positive, got {self.sigma} rad/ps")
        lo, hi = WINDOW_NM
        if not lo <= self.wavelength_nm <= hi:
            raise DomainError(f"pump wavelength {self.wavelength_nm} nm outside {WINDOW_NM}")

    @classmethod
    def from_fwhm(
        cls, wavelength_nm: float, fwhm_nm: float, power_mw: float | None = None
    ) -> PumpPulse:
        return cls(wavelength_nm, fwhm_nm_to_sigma(wavelength_nm, fwhm_nm), power_mw)

    @property
    def omega(self) -> float:
        return wavelength_to_omega(self.wavelength_nm)


@dataclass(frozen=True)
class ProcessParams:
    omega_s: float
    omega_i: float
    tau_s: float
    tau_i: float
    tau_p: float
    t_s: float
    t_i: float
    sigma: float
    sigma1: float
    sigma2: float
    length_mm: float

    @classmethod
    def from_delays(
        cls,
        tau_s: float,
        tau_i: float,
        tau_p: float,
        sigma1: float,
        sigma2: float,
        *,
        omega_s: float = 0.0,
        omega_i: float = 0.0,
        length_mm: float = 0.0,
    ) -> ProcessParams:
        if sigma1 <= 0 or sigma2 <= 0:
            raise DomainError("pump bandwidths must be positive")
        spread_sq = sigma1**2 + sigma2**2
        shift = (sigma1**2 - sigma2**2) / spread_sq * tau_p / 2.0
        return cls(
            omega_s=omega_s,
            omega_i=omega_i,
            tau_s=tau_s,
            tau_i=tau_i,
            tau_p=tau_p,
            t_s=tau_s + shift,
            t_i=tau_i + shift,
            sigma=sigma1 * sigma2 / math.sqrt(spread_sq),
            sigma1=sigma1,
            sigma2=sigma2,
            length_mm=length_mm,
        )

    @property
    def spread_sq(self) -> float:
        return self.sigma1**2 + self.sigma2**2

    @property
    def is_degenerate(self) -> bool:
        return self.tau_p == 0.0


def _check_axis(name: str, axis: FloatArray) -> None:
    if axis.ndim != 1 or axis.size < 2:
        raise DomainError(f"{name} axis needs at least two points")
    steps = np.diff(axis)
    if np.any(steps <= 0):
        raise DomainError(f"{name} axis must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-8, atol=0.0):
        raise DomainError(f"{name} axis must be uniform")


@dataclass(frozen=True, eq=False)
class GridAxes:
    nu_s: FloatArray
    nu_i: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "nu_s", np.asarray(self.nu_s, dtype=np.float64))
        object.__setattr__(self, "nu_i", np.asarray(self.nu_i, dtype=np.float64))
        _check_axis("nu_s", self.nu_s)
        _check_axis("nu_i", self.nu_i)

    @classmethod
    def symmetric(
        cls, half_width_s: float, half_width_i: float, points_s: int, points_i: int | None = None
    ) -> GridAxes:
        points_i = points_s if points_i is None else points_i
        return cls(
            np.linspace(-half_width_s, half_width_s, points_s),
            np.linspace(-half_width_i, half_width_i, points_i),
        )

    @property
    def d_nu_s(self) -> float:
        return float(self.nu_s[1] - self.nu_s[0])

    @property
    def d_nu_i(self) -> float:
        return float(self.nu_i[1] - self.nu_i[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nu_s.size, self.nu_i.size)

    def mesh(self) -> tuple[FloatArray, FloatArray]:
        ns, ni = np.meshgrid(self.nu_s, self.nu_i, indexing="ij")
        return ns, ni

    def same_as(self, other: GridAxes) -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.nu_s, other.nu_s)
            and np.array_equal(self.nu_i, other.nu_i)
        )


@dataclass(frozen=True, eq=False)
class JsaGrid:
    """Complex amplitude sampled on ``axes``; rows follow ν_s, columns ν_i."""

    axes: GridAxes
    amplitude: ComplexArray
    normalized: bool = False
    meta: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitude, dtype=np.complex128)
        object.__setattr__(self, "amplitude", amp)
        if amp.shape != self.axes.shape:
            raise DomainError(f"amplitude shape {amp.shape} does not match axes {self.axes.shape}")
        if self.normalized and abs(self.norm() - 1.0) > NORM_TOLERANCE:
            raise ContractError(f"grid flagged normalized but has norm {self.norm():.12g}")

    @property
    def nu_s(self) -> FloatArray:
        return self.axes.nu_s

    @property
    def nu_i(self) -> FloatArray:
        return self.axes.nu_i

    @property
    def d_nu_s(self) -> float:
        return self.axes.d_nu_s

    @property
    def d_nu_i(self) -> float:
        return self.axes.d_nu_i

    @property
    def intensity(self) -> FloatArray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        """Σ|f|²·Δν_s·Δν_i with a fixed summation order."""
        return float(np.sum(self.intensity) * self.d_nu_s * self.d_nu_i)


_params_lock = threading.Lock()


@cached(cache=LRUCache(maxsize=128), lock=_params_lock)
def process_params(fiber: FiberSpec, pump1: PumpPulse, pump2: PumpPulse) -> ProcessParams:
    omega_s, omega_i = solve_phasematching(fiber, pump1.omega, pump2.omega)
    kp1 = inverse_group_velocity(fiber, pump1.omega, fiber.pump_axis)
    kp2 = inverse_group_velocity(fiber, pump2.omega, fiber.pump_axis)
    ks = inverse_group_velocity(fiber, omega_s, fiber.photon_axis)
    ki = inverse_group_velocity(fiber, omega_i, fiber.photon_axis)
    length = fiber.length_mm
    params = ProcessParams.from_delays(
        tau_s=length * ((kp1 + kp2) / 2.0 - ks),
        tau_i=length * ((kp1 + kp2) / 2.0 - ki),
        tau_p=length * (kp1 - kp2),
        sigma1=pump1.sigma,
        sigma2=pump2.sigma,
        omega_s=omega_s,
        omega_i=omega_i,
        length_mm=length,
    )
    logger.debug(
        "process_params_derived",
        extra={"tau_s": params.tau_s, "tau_i": params.tau_i, "tau_p": params.tau_p},
    )
    return params


def _require_walk_off(params: ProcessParams) -> None:
    if params.tau_p == 0.0:
        raise DegenerateConfigurationError(
            "pump walk-off tau_p is zero; use jsa_degenerate for a single-pump source"
        )


def _energy_factor(spread_sq: float, ns: FloatArray, ni: FloatArray) -> FloatArray:
    u = ns + ni
    return np.asarray(np.exp(-(u * u) / spread_sq), dtype=np.float64)


def _walk_off_coordinate(params: ProcessParams, ns: FloatArray, ni: FloatArray) -> FloatArray:
    return np.asarray(
        (params.t_s * ns + params.t_i * ni) / (params.sigma * params.tau_p), dtype=np.float64
    )


def jsa_dual(params: ProcessParams, tau: float, axes: GridAxes) -> JsaGrid:
    """Dual-pump JSA at pump delay τ (ps)."""
    _require_walk_off(params)
    if not math.isfinite(tau):
        raise DomainError(f"pump delay must be finite, got {tau}")
    ns, ni = axes.mesh()
    x = _walk_off_coordinate(params, ns, ni)
    a1 = params.sigma * (tau + params.tau_p) / 2.0
    a2 = params.sigma * tau / 2.0
    window = windowed_erf(a1, x) - windowed_erf(a2, x)
    return JsaGrid(axes, _energy_factor(params.spread_sq, ns, ni) * window, meta={"tau": tau})


def jsa_overlap_max(params: ProcessParams, axes: GridAxes) -> JsaGrid:
    """Dual-pump JSA at maximal mid-fiber pump overlap, τ = -τ_p/2."""
    _require_walk_off(params)
    ns, ni = axes.mesh()
    x = _walk_off_coordinate(params, ns, ni)
    window = 2.0 * np.real(windowed_erf(params.sigma * params.tau_p / 4.0, x))
    amplitude = (_energy_factor(params.spread_sq, ns, ni) * window).astype(np.complex128)
    return JsaGrid(axes, amplitude, meta={"tau": -params.tau_p / 2.0})


def jsa_degenerate(
    sigma1: float, sigma2: float, tau_s: float, tau_i: float, axes: GridAxes
) -> JsaGrid:
    """Single-pump JSA: Gaussian energy factor times sinc(τ_sν_s + τ_iν_i)."""
    if sigma1 <= 0 or sigma2 <= 0:
        raise DomainError("pump bandwidths must be positive")
    ns, ni = axes.mesh()
    phase = tau_s * ns + tau_i * ni
    amplitude = _energy_factor(sigma1**2 + sigma2**2, ns, ni) * np.sinc(phase / math.pi)
    return JsaGrid(axes, amplitude.astype(np.complex128))


def jsa_asymptotic(params: ProcessParams, axes: GridAxes) -> JsaGrid:
    """Large-στ_p limit: product of the energy and walk-off Gaussians."""
    _require_walk_off(params)
    ns, ni = axes.mesh()
    x = _walk_off_coordinate(params, ns, ni)
    amplitude = _energy_factor(params.spread_sq, ns, ni) * np.exp(-(x * x))
    return JsaGrid(axes, amplitude.astype(np.complex128))


def jsa_for(params: ProcessParams, axes: GridAxes, tau: float | None = None) -> JsaGrid:
    """Dual-pump JSA at ``tau`` (default -τ_p/2), or the degenerate JSA when τ_p = 0."""
    if params.is_degenerate:
        return jsa_degenerate(params.sigma1, params.sigma2, params.tau_s, params.tau_i, axes)
    if tau is None:
        return jsa_overlap_max(params, axes)
    return jsa_dual(params, tau, axes)


def pair_probability_ratio(
    tau: npt.ArrayLike, sigma: float, tau_p: float
) -> float | FloatArray:
    """p(τ)/p_max = [erf(σ(τ+τ_p)/√2) - erf(στ/√2)] / [2 erf(στ_p/(2√2))]."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if tau_p == 0.0:
        raise DegenerateConfigurationError("pair probability curve needs non-zero tau_p")
    taus = np.asarray(tau, dtype=np.float64)
    root2 = math.sqrt(2.0)
    numerator = erf_difference(sigma * (taus + tau_p) / root2, sigma * taus / root2)
    denominator = 2.0 * math.erf(sigma * tau_p / (2.0 * root2))
    ratio = numerator / denominator
    if ratio.ndim == 0:
        return float(ratio)
    return np.asarray(ratio, dtype=np.float64)


def _pair_jacobian(params: ProcessParams) -> float:
    """|∂(ν_s, ν_i)/∂(u, x)| for u = ν_s + ν_i and the walk-off coordinate x."""
    _require_walk_off(params)
    gap = abs(params.t_s - params.t_i)
    if gap == 0.0:
        raise DomainError("T_s = T_i leaves the joint spectrum unconfined")
    return abs(params.sigma * params.tau_p) / gap


def pair_probability_integral(params: ProcessParams, tau: float) -> float:
    """Closed-form ∬|F|² dν_s dν_i of the unnormalized dual-pump JSA."""
    jac = _pair_jacobian(params)
    spread = math.sqrt(params.spread_sq)
    root2 = math.sqrt(2.0)
    a1 = params.sigma * (tau + params.tau_p) / 2.0
    a2 = params.sigma * tau / 2.0
    window = abs(float(erf_difference(root2 * a1, root2 * a2)))
    return math.pi * spread * jac * window


def pair_probability_quadrature(params: ProcessParams, tau: float) -> float:
    """∬|F|² by analytic u-integration and adaptive quadrature over the walk-off axis."""
    jac = _pair_jacobian(params)
    a1 = params.sigma * (tau + params.tau_p) / 2.0
    a2 = params.sigma * tau / 2.0

    def integrand(x: float) -> float:
        diff = windowed_erf(a1, x) - windowed_erf(a2, x)
        return float(np.abs(diff) ** 2)

    value, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=0.0, epsrel=1e-11, limit=400)
    u_integral = math.sqrt(params.spread_sq) * math.sqrt(math.pi / 2.0)
    return u_integral * jac * float(value)


def factorability_metric(params: ProcessParams) -> float:
    return params.spread_sq * params.t_s * params.t_i + (params.sigma * params.tau_p) ** 2


def _gaussian_extent(spread_sq: float, a: float, b: float, kappa: float) -> tuple[float, float]:
    """Marginal std of |f|² for f ≈ exp(-(ν_s+ν_i)²/S² - κ(aν_s + bν_i)²)."""
    precision = (2.0 / spread_sq) * np.ones((2, 2)) + 2.0 * kappa * np.array(
        [[a * a, a * b], [a * b, b * b]]
    )
    if np.linalg.det(precision) <= 1e-14 * float(np.trace(precision)) ** 2:
        raise DomainError("joint spectrum is not confined on a finite grid")
    cov = np.linalg.inv(2.0 * precision)
    return math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])


def _measured_extent(grid: JsaGrid) -> tuple[float, float]:
    weight = grid.intensity
    total = float(np.sum(weight))
    if total == 0.0:
        raise DegenerateInputError("pre-pass grid carries no amplitude")
    ns, ni = grid.axes.mesh()
    std_s = math.sqrt(float(np.sum(weight * ns * ns)) / total)
    std_i = math.sqrt(float(np.sum(weight * ni * ni)) / total)
    return std_s, std_i


def auto_grid(
    params: ProcessParams,
    *,
    tau: float | None = None,
    points: int = 256,
    span: float = DEFAULT_SPAN,
) -> GridAxes:
    """Grid spanning ±``span`` marginal std of |f|² around (0, 0).

    A Gaussian approximation sizes a coarse 64×64 pre-pass; the marginal std measured on
    the pre-pass sets the final window.
    """
    if params.is_degenerate:
        std_s, std_i = _gaussian_extent(
            params.spread_sq, params.tau_s, params.tau_i, SINC_GAUSS_KAPPA
        )
    else:
        kappa = 1.0 / (params.sigma * params.tau_p) ** 2
        std_s, std_i = _gaussian_extent(params.spread_sq, params.t_s, params.t_i, kappa)

    coarse = GridAxes.symmetric(
        PREPASS_SPAN * std_s, PREPASS_SPAN * std_i, PREPASS_POINTS
    )
    std_s, std_i = _measured_extent(jsa_for(params, coarse, tau))
    logger.debug(
        "auto_grid_sized", extra={"std_s": std_s, "std_i": std_i, "points": points}
    )
    return GridAxes.symmetric(span * std_s, span * std_i, points)
