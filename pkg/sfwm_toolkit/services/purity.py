"""Noise-corrected heralded-photon purity from auto-correlation counts."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sfwm_toolkit.errors import DomainError, InconsistentDataError, UndefinedEstimatorError
from sfwm_toolkit.services.counts import CountRecord, Estimate
from sfwm_toolkit.services.fit import FitResult

logger = logging.getLogger(__name__)

# Purity above 1 by more than this is reported as statistically inconsistent input.
UPPER_TOLERANCE = 1e-9


def raw_purity(c_ss_prime: int, c_s: int, c_s_prime: int, r: int) -> Estimate:
    """C_ss'·R/(C_s·C_s') - 1, the measured purity, with Poisson-propagated error."""
    if c_s <= 0 or c_s_prime <= 0:
        raise UndefinedEstimatorError("raw purity undefined: zero singles")
    if r <= 0:
        raise DomainError("pulse count R must be positive")
    g2 = c_ss_prime * r / (c_s * c_s_prime)
    rel_sq = 1.0 / max(c_ss_prime, 1) + 1.0 / c_s + 1.0 / c_s_prime
    return Estimate(g2 - 1.0, g2 * math.sqrt(rel_sq))


@dataclass(frozen=True)
class AutocorrCounts:
    """Singles on APD_s and APD_s' and their coincidences over ``r`` pulses."""

    c_s: int
    c_s_prime: int
    c_ss_prime: int
    r: int

    def __post_init__(self) -> None:
        if min(self.c_s, self.c_s_prime, self.c_ss_prime) < 0:
            raise DomainError("counts must be non-negative")
        if self.r <= 0:
            raise DomainError("pulse count R must be positive")

    def rate(self, arm: str) -> float:
        return float(getattr(self, arm)) / self.r

    def purity(self) -> Estimate:
        return raw_purity(self.c_ss_prime, self.c_s, self.c_s_prime, self.r)


@dataclass(frozen=True)
class DarkCounts:
    """Detection-noise counts with both pumps blocked."""

    d_s: int
    d_s_prime: int
    d_ss_prime: int
    r: int

    def __post_init__(self) -> None:
        if min(self.d_s, self.d_s_prime, self.d_ss_prime) < 0:
            raise DomainError("dark counts must be non-negative")
        if self.r <= 0:
            raise DomainError("pulse count R must be positive")

    def purity(self) -> Estimate:
        return raw_purity(self.d_ss_prime, self.d_s, self.d_s_prime, self.r)


@dataclass(frozen=True)
class PurityInputs:
    """Measured purities and per-arm noise fractions feeding the bounds."""

    p_raw: float
    p_noise: float
    p_det: float
    t_s: float
    t_s_prime: float
    u_s: float
    u_s_prime: float
    p_raw_err: float = 0.0
    p_noise_err: float = 0.0
    p_det_err: float = 0.0

    def __post_init__(self) -> None:
        for name in ("p_raw", "p_noise", "p_det"):
            if getattr(self, name) < -1.0:
                raise DomainError(f"{name} must be at least -1")
        for name in ("t_s", "t_s_prime", "u_s", "u_s_prime"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")

    @property
    def r_s(self) -> float:
        return 1.0 - self.t_s

    @property
    def r_s_prime(self) -> float:
        return 1.0 - self.t_s_prime

    @property
    def r(self) -> float:
        return math.sqrt(self.r_s * self.r_s_prime)

    @property
    def t(self) -> float:
        return math.sqrt(self.t_s * self.t_s_prime)

    @property
    def u(self) -> float:
        return math.sqrt(self.u_s * self.u_s_prime)


@dataclass(frozen=True)
class PurityBounds:
    lower: float
    upper: float
    lower_quadratic: float
    lower_err: float = 0.0
    upper_err: float = 0.0
    noise_clamped: bool = False
    above_one: bool = False

    @property
    def collapsed(self) -> bool:
        return self.lower == self.upper


def _fraction(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 0.0


def noise_fractions(tau0: AutocorrCounts, far: AutocorrCounts, dark: DarkCounts) -> PurityInputs:
    """Fractions t, u and the three purities from peak, far-delay and dark measurements.

    Fractions are ratios of per-pulse rates, so each block may use its own R.
    """
    t_arms = []
    u_arms = []
    for arm, dark_arm in (("c_s", "d_s"), ("c_s_prime", "d_s_prime")):
        peak_rate = tau0.rate(arm)
        noise_rate = far.rate(arm)
        dark_rate = getattr(dark, dark_arm) / dark.r
        if peak_rate <= 0:
            raise InconsistentDataError(f"no counts on {arm} at tau0")
        if noise_rate > peak_rate:
            raise InconsistentDataError(
                f"{arm}: far-delay rate {noise_rate:.6g} exceeds peak rate {peak_rate:.6g}"
            )
        if dark_rate > noise_rate and dark_rate > 0:
            raise InconsistentDataError(
                f"{arm}: dark rate {dark_rate:.6g} exceeds far-delay rate {noise_rate:.6g}"
            )
        t_arms.append(noise_rate / peak_rate)
        u_arms.append(_fraction(dark_rate, noise_rate))

    p_raw = tau0.purity()
    p_noise = far.purity() if min(far.c_s, far.c_s_prime) > 0 else Estimate(0.0, 0.0)
    p_det = dark.purity() if min(dark.d_s, dark.d_s_prime) > 0 else Estimate(0.0, 0.0)
    inputs = PurityInputs(
        p_raw=p_raw.value,
        p_noise=p_noise.value,
        p_det=p_det.value,
        t_s=t_arms[0],
        t_s_prime=t_arms[1],
        u_s=u_arms[0],
        u_s_prime=u_arms[1],
        p_raw_err=p_raw.stderr,
        p_noise_err=p_noise.stderr,
        p_det_err=p_det.stderr,
    )
    logger.debug(
        "noise_fractions_computed",
        extra={"r": inputs.r, "t": inputs.t, "u": inputs.u, "p_raw": inputs.p_raw},
    )
    return inputs


def _quadratic_lower(inputs: PurityInputs, spurious: float) -> float:
    """Smallest P with P_raw ≤ r²P + t²P_noise + 2rt·√(P·spurious)."""
    r, t = inputs.r, inputs.t
    excess = inputs.p_raw - t * t * inputs.p_noise
    disc = t * t * spurious + excess
    if disc < 0:
        return 0.0
    root = (-t * math.sqrt(spurious) + math.sqrt(disc)) / r
    return root * root if root > 0 else 0.0


def purity_bounds(inputs: PurityInputs) -> PurityBounds:
    """Lower and upper bounds on the true pair purity given noise contamination."""
    r, t, u = inputs.r, inputs.t, inputs.u
    if r == 0.0:
        raise InconsistentDataError("no pair signal: r = 0")
    r2 = r * r
    upper = (inputs.p_raw - t * t * inputs.p_noise) / r2

    spurious = inputs.p_noise - u * u * inputs.p_det
    clamped = spurious < 0
    if clamped:
        logger.warning(
            "purity_noise_clamped",
            extra={"p_noise": inputs.p_noise, "u": u, "p_det": inputs.p_det, "value": spurious},
        )
        spurious = 0.0

    raw_pos = max(inputs.p_raw, 0.0)
    cross = 2.0 * t / r2 * math.sqrt(raw_pos * spurious)
    lower = upper - cross
    lower_quadratic = max(_quadratic_lower(inputs, spurious), lower)
    if cross == 0.0:
        lower_quadratic = upper

    upper_err = math.hypot(inputs.p_raw_err, t * t * inputs.p_noise_err) / r2
    if cross > 0.0:
        d_raw = 1.0 / r2 - t / r2 * math.sqrt(spurious / raw_pos)
        d_noise = -t * t / r2 - t / r2 * math.sqrt(raw_pos / spurious)
        d_det = t / r2 * u * u * math.sqrt(raw_pos / spurious)
        lower_err = math.sqrt(
            (d_raw * inputs.p_raw_err) ** 2
            + (d_noise * inputs.p_noise_err) ** 2
            + (d_det * inputs.p_det_err) ** 2
        )
    else:
        lower_err = upper_err

    above_one = upper > 1.0 + UPPER_TOLERANCE
    if above_one:
        logger.warning("purity_upper_above_one", extra={"upper": upper})
    return PurityBounds(
        lower=lower,
        upper=upper,
        lower_quadratic=lower_quadratic,
        lower_err=lower_err,
        upper_err=upper_err,
        noise_clamped=clamped,
        above_one=above_one,
    )


@dataclass(frozen=True)
class MixtureModel:
    """Pair photons mixed with spurious photons, then with detection noise on each detector.

    ``w`` is the pair fraction of the photons reaching the detectors, ``v_s``/``v_s_prime``
    the detection-noise fraction of each detector's counts and ``overlap`` is Tr(ρ_s ρ_spu).
    """

    purity: float
    spurious_purity: float
    detection_purity: float
    w: float
    v_s: float
    v_s_prime: float
    overlap: float = 0.0

    def __post_init__(self) -> None:
        for name in ("purity", "spurious_purity", "detection_purity", "w", "v_s", "v_s_prime"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        limit = math.sqrt(self.purity * self.spurious_purity)
        if not 0.0 <= self.overlap <= limit + 1e-15:
            raise DomainError(f"overlap {self.overlap} outside [0, {limit}]")

    def _noise_share(self, v: float) -> float:
        total_noise = (1.0 - self.w) * (1.0 - v) + v
        return v / total_noise if total_noise > 0 else 0.0

    def measured_inputs(self) -> PurityInputs:
        """The PurityInputs an ideal measurement of this mixture would produce."""
        u_s = self._noise_share(self.v_s)
        u_sp = self._noise_share(self.v_s_prime)
        p_noise = (1 - u_s) * (1 - u_sp) * self.spurious_purity + u_s * u_sp * self.detection_purity
        return PurityInputs(
            p_raw=forward_noise_mixture(self),
            p_noise=p_noise,
            p_det=self.detection_purity,
            t_s=1.0 - self.w * (1.0 - self.v_s),
            t_s_prime=1.0 - self.w * (1.0 - self.v_s_prime),
            u_s=u_s,
            u_s_prime=u_sp,
        )


def forward_noise_mixture(model: MixtureModel) -> float:
    """Raw purity of the pair/spurious mixture seen through detection noise."""
    w = model.w
    mixed = (
        w * w * model.purity
        + (1 - w) ** 2 * model.spurious_purity
        + 2 * w * (1 - w) * model.overlap
    )
    return (1 - model.v_s) * (1 - model.v_s_prime) * mixed + (
        model.v_s * model.v_s_prime * model.detection_purity
    )


def select_tau0(records: Sequence[CountRecord], fit: FitResult | None = None) -> float:
    """Delay of maximal pair generation: τ_c - τ_p/2 from a fit, else the smoothed C_si peak."""
    if fit is not None:
        return fit.tau0
    if not records:
        raise InconsistentDataError("no records to locate tau0")
    ordered = sorted(records, key=lambda rec: rec.tau_exp)
    c_si = np.array([rec.c_si for rec in ordered], dtype=np.float64)
    if c_si.size >= 3:
        smoothed = c_si.copy()
        smoothed[1:-1] = (c_si[:-2] + c_si[1:-1] + c_si[2:]) / 3.0
    else:
        smoothed = c_si
    return float(ordered[int(np.argmax(smoothed))].tau_exp)
