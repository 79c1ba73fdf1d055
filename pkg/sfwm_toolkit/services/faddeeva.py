"""Complex error function and the overflow-free erf window used by the dual-pump JSA."""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt
from scipy import special

from sfwm_toolkit.errors import ErfOverflowError

IM_LIMIT = 12.0

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]


def complex_erf(z: complex) -> complex:
    """erf(z) for |Im z| ≤ 12, evaluated through the Faddeeva function."""
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ErfOverflowError(f"erf argument must be finite, got {z}")
    if abs(z.imag) > IM_LIMIT:
        raise ErfOverflowError(f"|Im z| = {abs(z.imag):.3g} exceeds {IM_LIMIT}")
    # erf(z) = 1 - exp(-z²) w(iz); scipy's complex erf is built on the same relation.
    return complex(special.erf(z))


def windowed_erf(a: float, x: npt.ArrayLike) -> ComplexArray:
    """exp(-x²)·erf(a - ix), finite for any real a and x.

    For a ≥ 0: exp(-x²) - exp(-a² + 2iax)·w(x + ia), with |w| ≤ 1 in the upper half plane.
    For a < 0 the odd symmetry of erf gives E(a, x) = -E(-a, -x).
    """
    xs = np.asarray(x, dtype=np.float64)
    if a < 0:
        return -windowed_erf(-a, -xs)
    tail = np.exp(-a * a + 2j * a * xs) * special.wofz(xs + 1j * a)
    return np.exp(-xs * xs) - tail


def erf_difference(upper: npt.ArrayLike, lower: npt.ArrayLike) -> FloatArray:
    """erf(upper) - erf(lower) without cancellation when both arguments share a sign."""
    b = np.asarray(upper, dtype=np.float64)
    a = np.asarray(lower, dtype=np.float64)
    both_pos = (a > 0) & (b > 0)
    both_neg = (a < 0) & (b < 0)
    out = special.erf(b) - special.erf(a)
    out = np.where(both_pos, special.erfc(a) - special.erfc(b), out)
    out = np.where(both_neg, special.erfc(-b) - special.erfc(-a), out)
    return np.asarray(out, dtype=np.float64)
