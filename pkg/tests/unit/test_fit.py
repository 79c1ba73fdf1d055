from dataclasses import replace

import numpy as np
import pytest

from sfwm_toolkit.errors import FitConvergenceError, IdentifiabilityError, SfwmError
from sfwm_toolkit.services.counts import CountRecord, simulate_counts
from sfwm_toolkit.services.fit import (
    PARAM_NAMES,
    CountCurves,
    feasible_start,
    fit_count_curves,
    fit_jacobian,
    fit_residuals,
    initial_guess,
    pack,
)

R = 80_000_000


def _cost(params, records) -> float:
    curves = CountCurves.from_records(records)
    return 0.5 * float(np.sum(fit_residuals(pack(params), curves) ** 2))


def test_noiseless_fit_recovers_parameters(operating_point, noiseless_records):
    result = fit_count_curves(noiseless_records)
    for name in PARAM_NAMES:
        assert getattr(result.params, name) == pytest.approx(
            getattr(operating_point, name), rel=1e-5
        ), name
    assert result.cost < 1e-6 * result.initial_cost
    assert result.tau0 == pytest.approx(1.5 - 0.45 / 2.0, rel=1e-5)


def test_initial_guess_lands_near_truth(operating_point, noiseless_records):
    guess = initial_guess(CountCurves.from_records(noiseless_records))
    assert guess.tau_p == pytest.approx(operating_point.tau_p, rel=0.5)
    assert guess.tau_c == pytest.approx(operating_point.tau_c, abs=0.3)
    assert 0.0 < guess.p_max <= 0.05


def test_analytic_jacobian_matches_finite_differences(operating_point, noiseless_records):
    curves = CountCurves.from_records(noiseless_records)
    rng = np.random.default_rng(11)
    step = 1e-6
    for _ in range(10):
        theta = pack(operating_point) + rng.uniform(-0.2, 0.2, size=len(PARAM_NAMES))
        analytic = fit_jacobian(theta, curves)
        numeric = np.empty_like(analytic)
        for k in range(theta.size):
            shift = np.zeros_like(theta)
            shift[k] = step
            numeric[:, k] = (
                fit_residuals(theta + shift, curves) - fit_residuals(theta - shift, curves)
            ) / (2.0 * step)
        np.testing.assert_allclose(
            analytic, numeric, rtol=1e-5, atol=1e-6 * np.max(np.abs(analytic))
        )


def test_mirrored_scan_shifts_tau_c_by_tau_p(operating_point, scan_delays):
    records = simulate_counts(operating_point, scan_delays, R, seed=5)
    centre = operating_point.tau_c
    mirrored = [replace(rec, tau_exp=2.0 * centre - rec.tau_exp) for rec in records]
    moved = replace(operating_point, tau_c=centre + operating_point.tau_p)
    assert _cost(moved, mirrored) == pytest.approx(_cost(operating_point, records), rel=1e-9)


def test_noisy_fit_within_standard_errors(operating_point, scan_delays):
    records = simulate_counts(operating_point, scan_delays, R, seed=3)
    result = fit_count_curves(records)
    assert 0.5 < result.reduced_chi2 < 2.0
    assert result.n_points == 61
    for name in PARAM_NAMES:
        error = abs(getattr(result.params, name) - getattr(operating_point, name))
        assert error < 4.0 * result.stderr[name], name
    payload = result.to_dict()
    assert set(payload["params"]) == set(PARAM_NAMES)
    assert len(payload["covariance"]) == len(PARAM_NAMES)


def test_too_few_records(noiseless_records):
    with pytest.raises(IdentifiabilityError):
        fit_count_curves(noiseless_records[:11])


@pytest.mark.parametrize(
    "boundary",
    [{"n_s": 0.0}, {"n_i": 0.0}, {"eta_s": 1.0}, {"eta_i": 0.0}, {"p_max": 0.0}],
    ids=["n_s", "n_i", "eta_s", "eta_i", "p_max"],
)
def test_boundary_starting_point_is_pulled_inside(operating_point, boundary):
    start = feasible_start(replace(operating_point, **boundary))
    assert np.all(np.isfinite(pack(start)))
    assert start.sigma == operating_point.sigma
    assert start.tau_c == operating_point.tau_c


@pytest.mark.parametrize(
    "boundary",
    [{"n_s": 0.0}, {"n_i": 0.0}, {"eta_s": 1.0}, {"eta_i": 0.0}],
    ids=["n_s", "n_i", "eta_s", "eta_i"],
)
def test_fit_from_boundary_starting_point(operating_point, noiseless_records, boundary):
    result = fit_count_curves(noiseless_records, initial=replace(operating_point, **boundary))
    for name in PARAM_NAMES:
        assert getattr(result.params, name) == pytest.approx(
            getattr(operating_point, name), rel=1e-4
        ), name


def test_zero_pair_probability_start_raises_only_toolkit_errors(
    operating_point, noiseless_records
):
    try:
        result = fit_count_curves(noiseless_records, initial=replace(operating_point, p_max=0.0))
    except SfwmError:
        return
    assert result.cost <= result.initial_cost


def test_flat_scan_is_not_identifiable(scan_delays):
    records = [
        CountRecord(tau_exp=float(t), c_s=200_000, c_i=170_000, c_si=450, r=R)
        for t in scan_delays
    ]
    with pytest.raises(IdentifiabilityError):
        fit_count_curves(records)


def test_exhausted_budget_reports_last_iterate(operating_point, noiseless_records):
    bad = replace(operating_point, sigma=2.0, tau_c=0.0, p_max=1e-4)
    with pytest.raises(FitConvergenceError) as excinfo:
        fit_count_curves(noiseless_records, initial=bad, max_nfev=2)
    assert set(excinfo.value.last_iterate) == set(PARAM_NAMES)


@pytest.mark.slow
def test_standard_error_coverage(operating_point, scan_delays):
    hits = {name: 0 for name in PARAM_NAMES}
    trials = 200
    for seed in range(trials):
        result = fit_count_curves(simulate_counts(operating_point, scan_delays, R, seed=seed))
        for name in PARAM_NAMES:
            if abs(getattr(result.params, name) - getattr(operating_point, name)) <= (
                3.0 * result.stderr[name]
            ):
                hits[name] += 1
    for name, count in hits.items():
        assert count >= 0.95 * trials, name
