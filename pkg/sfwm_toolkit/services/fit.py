"""Shared-parameter Levenberg–Marquardt fit of the singles and coincidence curves."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np
import numpy.typing as npt
from scipy.optimize import least_squares
from scipy.special import expit, logit

from sfwm_toolkit.errors import DomainError, FitConvergenceError, IdentifiabilityError
from sfwm_toolkit.services.counts import CountModelParams, CountRecord
from sfwm_toolkit.services.faddeeva import erf_difference

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

PARAM_NAMES = ("n_s", "n_i", "eta_s", "eta_i", "p_max", "sigma", "tau_p", "tau_c")
MIN_RECORDS = 12
PEAK_SIGMAS = 3.0
OUTER_FRACTION = 0.2
# στ_p used to seed σ and τ_p; at that value the FWHM of p(τ) is about 1.11 τ_p.
SEED_SIGMA_TAU_P = 3.0
FWHM_PER_TAU_P = 1.11
ETA_FLOOR = 1e-3
ETA_CEIL = 0.99

_TWO_OVER_ROOT_PI = 2.0 / math.sqrt(math.pi)
_ROOT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class CountCurves:
    """Records sorted by delay, with singles already multiplied by their scale factor."""

    tau_exp: FloatArray
    c_s: FloatArray
    c_i: FloatArray
    c_si: FloatArray
    r: FloatArray
    scale: FloatArray

    @classmethod
    def from_records(cls, records: Iterable[CountRecord]) -> CountCurves:
        ordered = sorted(records, key=lambda rec: rec.tau_exp)
        return cls(
            tau_exp=np.array([rec.tau_exp for rec in ordered], dtype=np.float64),
            c_s=np.array([rec.singles_s for rec in ordered], dtype=np.float64),
            c_i=np.array([rec.singles_i for rec in ordered], dtype=np.float64),
            c_si=np.array([rec.c_si for rec in ordered], dtype=np.float64),
            r=np.array([rec.r for rec in ordered], dtype=np.float64),
            scale=np.array([rec.scale for rec in ordered], dtype=np.float64),
        )

    @property
    def size(self) -> int:
        return int(self.tau_exp.size)

    @property
    def data(self) -> FloatArray:
        return np.concatenate([self.c_s, self.c_i, self.c_si])

    @property
    def variance_scale(self) -> FloatArray:
        return np.concatenate([self.scale, self.scale, np.ones_like(self.scale)])


@dataclass(frozen=True, eq=False)
class FitResult:
    params: CountModelParams
    stderr: dict[str, float]
    covariance: FloatArray
    reduced_chi2: float
    cost: float
    initial_cost: float
    iterations: int
    gradient_norm: float
    status: int
    message: str = ""
    n_points: int = 0
    initial_guess: CountModelParams | None = field(default=None)

    @property
    def tau0(self) -> float:
        """Stage delay of maximal pump overlap, τ_c - τ_p/2."""
        return self.params.tau_c - self.params.tau_p / 2.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": {name: getattr(self.params, name) for name in PARAM_NAMES},
            "stderr": dict(self.stderr),
            "covariance": self.covariance.tolist(),
            "reduced_chi2": self.reduced_chi2,
            "cost": self.cost,
            "initial_cost": self.initial_cost,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "status": self.status,
            "message": self.message,
            "n_points": self.n_points,
            "tau0": self.tau0,
        }


def pack(params: CountModelParams) -> FloatArray:
    """Map natural parameters to the unconstrained fit coordinates."""
    return np.array(
        [
            math.log(params.n_s),
            math.log(params.n_i),
            float(logit(params.eta_s)),
            float(logit(params.eta_i)),
            math.log(params.p_max),
            math.log(params.sigma),
            math.log(params.tau_p),
            params.tau_c,
        ],
        dtype=np.float64,
    )


def _natural(theta: Sequence[float]) -> dict[str, float]:
    return {
        "n_s": math.exp(theta[0]),
        "n_i": math.exp(theta[1]),
        "eta_s": float(expit(theta[2])),
        "eta_i": float(expit(theta[3])),
        "p_max": math.exp(theta[4]),
        "sigma": math.exp(theta[5]),
        "tau_p": math.exp(theta[6]),
        "tau_c": float(theta[7]),
    }


def unpack(theta: Sequence[float]) -> CountModelParams:
    return CountModelParams(**_natural(theta))


def _ratio_and_gradient(
    tau: FloatArray, sigma: float, tau_p: float
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """p(τ)/p_max and its derivatives with respect to σ, τ_p and τ."""
    a = sigma * (tau + tau_p) / _ROOT2
    b = sigma * tau / _ROOT2
    d = sigma * tau_p / (2.0 * _ROOT2)
    num = erf_difference(a, b)
    den = 2.0 * math.erf(d)
    rho = num / den
    ga = _TWO_OVER_ROOT_PI * np.exp(-a * a)
    gb = _TWO_OVER_ROOT_PI * np.exp(-b * b)
    gd = _TWO_OVER_ROOT_PI * math.exp(-d * d)

    dnum_dsigma = (ga * (tau + tau_p) - gb * tau) / _ROOT2
    dden_dsigma = 2.0 * gd * tau_p / (2.0 * _ROOT2)
    dnum_dtaup = ga * sigma / _ROOT2
    dden_dtaup = 2.0 * gd * sigma / (2.0 * _ROOT2)
    dnum_dtau = (ga - gb) * sigma / _ROOT2

    d_sigma = (dnum_dsigma - rho * dden_dsigma) / den
    d_taup = (dnum_dtaup - rho * dden_dtaup) / den
    d_tau = dnum_dtau / den
    return rho, d_sigma, d_taup, d_tau


def model_and_jacobian(
    theta: Sequence[float], curves: CountCurves
) -> tuple[FloatArray, FloatArray]:
    """Stacked model means [C_s, C_i, C_si] and their derivatives in fit coordinates."""
    nat = _natural(theta)
    n_s, n_i = nat["n_s"], nat["n_i"]
    eta_s, eta_i = nat["eta_s"], nat["eta_i"]
    p_max, sigma, tau_p = nat["p_max"], nat["sigma"], nat["tau_p"]
    r = curves.r

    rho, drho_sigma, drho_taup, drho_tau = _ratio_and_gradient(
        curves.tau_exp - nat["tau_c"], sigma, tau_p
    )
    p = p_max * rho
    m_s = n_s + eta_s * p * r
    m_i = n_i + eta_i * p * r
    m_si = n_s * n_i / r + (1 - eta_s) * p * n_i + (1 - eta_i) * p * n_s + eta_s * eta_i * p * r

    k_s = eta_s * r
    k_i = eta_i * r
    k_si = (1 - eta_s) * n_i + (1 - eta_i) * n_s + eta_s * eta_i * r
    dp = [p, p_max * drho_sigma * sigma, p_max * drho_taup * tau_p, -p_max * drho_tau]
    deta_s = eta_s * (1 - eta_s)
    deta_i = eta_i * (1 - eta_i)
    zeros = np.zeros_like(r)

    cols_s = [np.full_like(r, n_s), zeros, p * r * deta_s, zeros] + [k_s * g for g in dp]
    cols_i = [zeros, np.full_like(r, n_i), zeros, p * r * deta_i] + [k_i * g for g in dp]
    cols_si = [
        (n_i / r + (1 - eta_i) * p) * n_s,
        (n_s / r + (1 - eta_s) * p) * n_i,
        (eta_i * p * r - p * n_i) * deta_s,
        (eta_s * p * r - p * n_s) * deta_i,
    ] + [k_si * g for g in dp]

    model = np.concatenate([m_s, m_i, m_si])
    jac = np.vstack(
        [np.column_stack(cols_s), np.column_stack(cols_i), np.column_stack(cols_si)]
    )
    return model, jac


def fit_residuals(theta: Sequence[float], curves: CountCurves) -> FloatArray:
    """(data - model)/√max(variance, 1), variance being scale·model for scaled singles."""
    model, _ = model_and_jacobian(theta, curves)
    variance = np.maximum(curves.variance_scale * model, 1.0)
    return np.asarray((curves.data - model) / np.sqrt(variance), dtype=np.float64)


def fit_jacobian(theta: Sequence[float], curves: CountCurves) -> FloatArray:
    model, jac = model_and_jacobian(theta, curves)
    scale = curves.variance_scale
    raw_variance = scale * model
    variance = np.maximum(raw_variance, 1.0)
    dvar = np.where(raw_variance > 1.0, scale, 0.0)
    resid = curves.data - model
    dres_dmodel = -1.0 / np.sqrt(variance) - 0.5 * resid * dvar / variance**1.5
    return np.asarray(dres_dmodel[:, None] * jac, dtype=np.float64)


def _smooth3(values: FloatArray) -> FloatArray:
    if values.size < 3:
        return values.copy()
    out = values.copy()
    out[1:-1] = (values[:-2] + values[1:-1] + values[2:]) / 3.0
    return out


def _outer_indices(size: int) -> FloatArray:
    edge = max(1, int(round(size * OUTER_FRACTION / 2.0)))
    return np.concatenate([np.arange(edge), np.arange(size - edge, size)])


def check_identifiable(curves: CountCurves) -> int:
    """Return the index of the coincidence peak, or raise if the data cannot pin the model."""
    if curves.size < MIN_RECORDS:
        raise IdentifiabilityError(
            f"need at least {MIN_RECORDS} delay points, got {curves.size}"
        )
    outer = _outer_indices(curves.size)
    baseline = float(np.median(curves.c_si[outer]))
    smoothed = _smooth3(curves.c_si)
    peak = int(np.argmax(smoothed))
    excess = float(smoothed[peak]) - baseline
    threshold = PEAK_SIGMAS * math.sqrt(max(baseline, 1.0))
    if excess <= threshold:
        raise IdentifiabilityError(
            f"coincidence peak {excess:.3g} above baseline is below {threshold:.3g}"
        )
    if peak in set(outer.tolist()):
        raise IdentifiabilityError("coincidence peak lies in the baseline region of the scan")
    return peak


def _half_max_width(tau: FloatArray, excess: FloatArray, peak: int) -> float:
    half = excess[peak] / 2.0
    left = peak
    while left > 0 and excess[left] > half:
        left -= 1
    right = peak
    while right < excess.size - 1 and excess[right] > half:
        right += 1

    def cross(i: int, j: int) -> float:
        if excess[j] == excess[i]:
            return float(tau[i])
        frac = (half - excess[i]) / (excess[j] - excess[i])
        return float(tau[i] + frac * (tau[j] - tau[i]))

    lo = cross(left, left + 1) if left < peak else float(tau[peak])
    hi = cross(right - 1, right) if right > peak else float(tau[peak])
    width = hi - lo
    if width <= 0:
        width = float(np.median(np.diff(tau)))
    return width


def initial_guess(curves: CountCurves) -> CountModelParams:
    """Heuristic starting point from baselines, peak heights and peak width."""
    peak = check_identifiable(curves)
    outer = _outer_indices(curves.size)
    base_s = float(np.median(curves.c_s[outer]))
    base_i = float(np.median(curves.c_i[outer]))
    base_si = float(np.median(curves.c_si[outer]))
    smooth_s, smooth_i, smooth_si = (_smooth3(c) for c in (curves.c_s, curves.c_i, curves.c_si))

    h_s = max(float(smooth_s[peak]) - base_s, 1.0)
    h_i = max(float(smooth_i[peak]) - base_i, 1.0)
    h_si = max(float(smooth_si[peak]) - base_si, 1.0)
    eta_i = min(max(h_si / h_s, ETA_FLOOR), ETA_CEIL)
    eta_s = min(max(h_si / h_i, ETA_FLOOR), ETA_CEIL)
    r = float(np.median(curves.r))
    p_max = min(max(h_s / (eta_s * r), 1e-12), 0.05)

    fwhm = _half_max_width(curves.tau_exp, smooth_si - base_si, peak)
    tau_p = fwhm / FWHM_PER_TAU_P
    sigma = SEED_SIGMA_TAU_P / tau_p
    tau_c = float(curves.tau_exp[peak]) + tau_p / 2.0
    return CountModelParams(
        n_s=max(base_s, 1.0),
        n_i=max(base_i, 1.0),
        eta_s=eta_s,
        eta_i=eta_i,
        p_max=p_max,
        sigma=sigma,
        tau_p=tau_p,
        tau_c=tau_c,
    )


def feasible_start(params: CountModelParams) -> CountModelParams:
    """Pull a starting point off the boundaries where the fit coordinates diverge."""
    return replace(
        params,
        n_s=max(params.n_s, 1.0),
        n_i=max(params.n_i, 1.0),
        eta_s=min(max(params.eta_s, ETA_FLOOR), ETA_CEIL),
        eta_i=min(max(params.eta_i, ETA_FLOOR), ETA_CEIL),
        p_max=max(params.p_max, 1e-12),
    )


def _natural_gradient(theta: FloatArray) -> FloatArray:
    nat = _natural(theta)
    return np.array(
        [
            nat["n_s"],
            nat["n_i"],
            nat["eta_s"] * (1 - nat["eta_s"]),
            nat["eta_i"] * (1 - nat["eta_i"]),
            nat["p_max"],
            nat["sigma"],
            nat["tau_p"],
            1.0,
        ]
    )


def fit_count_curves(
    records: Sequence[CountRecord],
    initial: CountModelParams | None = None,
    *,
    max_nfev: int = 2000,
) -> FitResult:
    """Jointly fit C_s, C_i and C_si over the eight shared parameters."""
    curves = CountCurves.from_records(records)
    check_identifiable(curves)
    guess = feasible_start(initial) if initial is not None else initial_guess(curves)
    theta0 = pack(guess)
    initial_cost = 0.5 * float(np.sum(fit_residuals(theta0, curves) ** 2))

    result = least_squares(
        fit_residuals,
        theta0,
        jac=fit_jacobian,
        method="lm",
        ftol=1e-12,
        xtol=1e-12,
        gtol=1e-10,
        max_nfev=max_nfev,
        args=(curves,),
    )
    if result.status <= 0:
        raise FitConvergenceError(
            f"fit did not converge: {result.message}", last_iterate=_natural(result.x)
        )
    try:
        params = unpack(result.x)
    except DomainError as exc:
        raise FitConvergenceError(
            f"fit left the physical domain: {exc}", last_iterate=_natural(result.x)
        ) from exc

    jac = np.asarray(result.jac, dtype=np.float64)
    dof = max(jac.shape[0] - jac.shape[1], 1)
    cost = float(result.cost)
    reduced_chi2 = 2.0 * cost / dof
    try:
        cov_theta = np.linalg.inv(jac.T @ jac) * reduced_chi2
    except np.linalg.LinAlgError as exc:
        raise IdentifiabilityError("normal matrix is singular at the fitted parameters") from exc
    grad = _natural_gradient(result.x)
    covariance = grad[:, None] * cov_theta * grad[None, :]
    covariance = (covariance + covariance.T) / 2.0
    stderr = {
        name: math.sqrt(max(float(covariance[k, k]), 0.0)) for k, name in enumerate(PARAM_NAMES)
    }
    gradient_norm = float(np.max(np.abs(jac.T @ result.fun)))
    logger.info(
        "fit_converged",
        extra={
            "reduced_chi2": reduced_chi2,
            "nfev": int(result.nfev),
            "status": int(result.status),
            "p_max": params.p_max,
        },
    )
    return FitResult(
        params=params,
        stderr=stderr,
        covariance=covariance,
        reduced_chi2=reduced_chi2,
        cost=cost,
        initial_cost=initial_cost,
        iterations=int(result.nfev),
        gradient_norm=gradient_norm,
        status=int(result.status),
        message=str(result.message),
        n_points=curves.size,
        initial_guess=guess,
    )
