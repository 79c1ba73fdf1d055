"""Schmidt purity, fidelity, overlap and marginals of discretized JSAs."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

from sfwm_toolkit.errors import ContractError, DegenerateInputError, ResamplingRequiredError
from sfwm_toolkit.services.spectral import GridAxes, JsaGrid

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]


@dataclass(frozen=True, eq=False)
class SchmidtResult:
    singular_values: FloatArray
    purity: float
    schmidt_number: float
    purity_half_resolution: float | None = None

    @property
    def discretization_drift(self) -> float | None:
        if self.purity_half_resolution is None:
            return None
        return abs(self.purity - self.purity_half_resolution)


@dataclass(frozen=True, eq=False)
class Marginals:
    nu_s: FloatArray
    signal: FloatArray
    nu_i: FloatArray
    idler: FloatArray


def normalize(grid: JsaGrid) -> JsaGrid:
    total = grid.norm()
    if total == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero JSA grid")
    return replace(grid, amplitude=grid.amplitude / math.sqrt(total), normalized=True)


def _require_normalized(grid: JsaGrid) -> None:
    if not grid.normalized:
        raise ContractError("operation requires a normalized grid; call normalize() first")


def _scaled_matrix(grid: JsaGrid) -> ComplexArray:
    return np.asarray(grid.amplitude * math.sqrt(grid.d_nu_s * grid.d_nu_i))


def _purity_of(matrix: ComplexArray) -> tuple[FloatArray, float]:
    values = np.linalg.svd(matrix, compute_uv=False)
    return values, float(np.sum(values**4))


def _half_resolution(grid: JsaGrid) -> JsaGrid | None:
    if min(grid.axes.shape) < 4:
        return None
    axes = GridAxes(grid.nu_s[::2], grid.nu_i[::2])
    coarse = JsaGrid(axes, grid.amplitude[::2, ::2])
    if coarse.norm() == 0.0:
        return None
    return normalize(coarse)


def schmidt_purity(grid: JsaGrid) -> SchmidtResult:
    """Purity Σ s_k⁴ from the SVD of f·√(Δν_sΔν_i), with the half-resolution value."""
    _require_normalized(grid)
    values, purity = _purity_of(_scaled_matrix(grid))
    weight = float(np.sum(values**2))
    if abs(weight - 1.0) > 1e-9:
        raise ContractError(f"singular values carry weight {weight:.12g}, expected 1")

    half = _half_resolution(grid)
    half_purity = _purity_of(_scaled_matrix(half))[1] if half is not None else None
    logger.debug(
        "schmidt_purity_computed",
        extra={"purity": purity, "purity_half_resolution": half_purity},
    )
    return SchmidtResult(
        singular_values=values,
        purity=purity,
        schmidt_number=1.0 / purity,
        purity_half_resolution=half_purity,
    )


def _require_same_axes(a: JsaGrid, b: JsaGrid) -> None:
    if not a.axes.same_as(b.axes):
        raise ResamplingRequiredError("grids are sampled on different axes; resample first")


def jsd_fidelity(a: JsaGrid, b: JsaGrid) -> float:
    """∬ √(|a|²|b|²) dν_s dν_i on a shared grid."""
    _require_normalized(a)
    _require_normalized(b)
    _require_same_axes(a, b)
    overlap = np.sum(np.abs(a.amplitude) * np.abs(b.amplitude))
    return float(overlap * a.d_nu_s * a.d_nu_i)


def state_overlap(a: JsaGrid, b: JsaGrid) -> float:
    """Tr(ρ_a ρ_b) of the reduced signal states, i.e. ‖M_a† M_b‖_F²."""
    _require_normalized(a)
    _require_normalized(b)
    _require_same_axes(a, b)
    cross = _scaled_matrix(a).conj().T @ _scaled_matrix(b)
    return float(np.sum(np.abs(cross) ** 2))


def marginals(grid: JsaGrid) -> Marginals:
    """Signal and idler spectral densities, each integrating to one over its axis."""
    _require_normalized(grid)
    intensity = grid.intensity
    signal = intensity.sum(axis=1) * grid.d_nu_i
    idler = intensity.sum(axis=0) * grid.d_nu_s
    return Marginals(nu_s=grid.nu_s, signal=signal, nu_i=grid.nu_i, idler=idler)


def gaussian_schmidt_purity(a: float, b: float, c: float) -> float:
    """Purity of the real JSA exp(-(aν_s² + bν_i² + 2cν_sν_i)), namely √(1 - c²/(ab))."""
    if a <= 0 or b <= 0 or c * c >= a * b:
        raise ContractError("Gaussian JSA exponent must be positive definite")
    return math.sqrt(1.0 - c * c / (a * b))
