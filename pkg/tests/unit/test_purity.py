import math

import numpy as np
import pytest

from sfwm_toolkit.errors import DomainError, InconsistentDataError, UndefinedEstimatorError
from sfwm_toolkit.formats.records import read_purity_bundle
from sfwm_toolkit.services.fit import FitResult
from sfwm_toolkit.services.purity import (
    AutocorrCounts,
    DarkCounts,
    MixtureModel,
    PurityInputs,
    forward_noise_mixture,
    noise_fractions,
    purity_bounds,
    raw_purity,
    select_tau0,
)

R = 8_000_000_000


def _clean_inputs(p_raw: float, r: float) -> PurityInputs:
    return PurityInputs(
        p_raw=p_raw, p_noise=0.0, p_det=0.0, t_s=1.0 - r, t_s_prime=1.0 - r, u_s=0.0, u_s_prime=0.0
    )


def test_raw_purity_of_peak_block():
    estimate = raw_purity(97_266, 25_000_000, 25_000_000, R)
    assert estimate.value == pytest.approx(0.2450, abs=1e-4)
    assert estimate.stderr == pytest.approx(0.0040, abs=1e-4)


def test_thermal_counts_give_unit_purity():
    assert raw_purity(20_000, 100_000, 100_000, 1_000_000).value == pytest.approx(1.0)


def test_raw_purity_needs_singles():
    with pytest.raises(UndefinedEstimatorError):
        raw_purity(0, 0, 100, 1000)


def test_uncorrelated_streams_have_zero_purity():
    rng = np.random.default_rng(2024)
    p_s, p_sp, pulses = 0.01, 0.012, 100_000_000
    both, s_only, sp_only, _ = rng.multinomial(
        pulses, [p_s * p_sp, p_s * (1 - p_sp), (1 - p_s) * p_sp, (1 - p_s) * (1 - p_sp)]
    )
    estimate = raw_purity(int(both), int(both + s_only), int(both + sp_only), pulses)
    assert abs(estimate.value) < 3.0 * estimate.stderr


def test_no_noise_means_full_pair_fraction():
    peak = AutocorrCounts(c_s=1_000_000, c_s_prime=900_000, c_ss_prime=2_000, r=R)
    far = AutocorrCounts(c_s=0, c_s_prime=0, c_ss_prime=0, r=R)
    inputs = noise_fractions(peak, far, DarkCounts(0, 0, 0, R))
    assert inputs.t == 0.0
    assert inputs.r == 1.0
    bounds = purity_bounds(inputs)
    assert bounds.lower == bounds.upper == pytest.approx(peak.purity().value)


def test_dark_counts_equal_to_noise():
    peak = AutocorrCounts(c_s=1_000_000, c_s_prime=900_000, c_ss_prime=2_000, r=R)
    far = AutocorrCounts(c_s=400_000, c_s_prime=300_000, c_ss_prime=20, r=R)
    dark = DarkCounts(d_s=400_000, d_s_prime=300_000, d_ss_prime=20, r=R)
    inputs = noise_fractions(peak, far, dark)
    assert inputs.u == pytest.approx(1.0)
    assert inputs.t_s == pytest.approx(0.4)
    assert inputs.t_s_prime == pytest.approx(1.0 / 3.0)


def test_bundled_delta187_measurement(repo_root):
    bundle = read_purity_bundle(repo_root / "data" / "purity_delta187.json")
    inputs = noise_fractions(*bundle.blocks())
    assert inputs.r == pytest.approx(0.5)
    bounds = purity_bounds(inputs)
    assert bounds.noise_clamped
    assert bounds.collapsed
    assert bounds.upper == pytest.approx(0.98, abs=1e-3)
    assert not bounds.above_one


def test_far_delay_rate_above_peak_is_inconsistent():
    peak = AutocorrCounts(c_s=100_000, c_s_prime=100_000, c_ss_prime=300, r=R)
    far = AutocorrCounts(c_s=120_000, c_s_prime=50_000, c_ss_prime=10, r=R)
    with pytest.raises(InconsistentDataError):
        noise_fractions(peak, far, DarkCounts(0, 0, 0, R))


def test_all_noise_is_inconsistent():
    with pytest.raises(InconsistentDataError):
        purity_bounds(_clean_inputs(0.3, 0.0))


def test_bounds_collapse_without_noise():
    bounds = purity_bounds(_clean_inputs(0.9, 1.0))
    assert bounds.lower == bounds.upper == bounds.lower_quadratic == pytest.approx(0.9)


@pytest.mark.parametrize(
    ("p_raw", "r", "expected", "reported"),
    [
        (0.382, 0.66, 0.877, 0.882),
        (0.344, 0.62, 0.895, 0.907),
        (0.245, 0.50, 0.980, 0.974),
    ],
)
def test_detuned_source_purities(p_raw, r, expected, reported):
    bounds = purity_bounds(_clean_inputs(p_raw, r))
    assert bounds.upper == pytest.approx(expected, abs=1e-3)
    assert bounds.upper == pytest.approx(reported, abs=0.02)


def test_bounds_contain_true_purity_for_random_mixtures():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        purity, spurious = rng.uniform(0.0, 1.0, size=2)
        model = MixtureModel(
            purity=purity,
            spurious_purity=spurious,
            detection_purity=rng.uniform(0.0, 1.0),
            w=rng.uniform(0.05, 1.0),
            v_s=rng.uniform(0.0, 0.5),
            v_s_prime=rng.uniform(0.0, 0.5),
            overlap=rng.uniform(0.0, 1.0) * math.sqrt(purity * spurious),
        )
        bounds = purity_bounds(model.measured_inputs())
        assert bounds.lower <= purity + 1e-7
        assert bounds.lower_quadratic <= purity + 1e-7
        assert bounds.lower <= bounds.lower_quadratic + 1e-12
        assert bounds.upper >= purity - 1e-7


def test_forward_mixture_limits():
    pure_pairs = MixtureModel(purity=0.7, spurious_purity=0.2, detection_purity=1.0, w=1.0,
                              v_s=0.0, v_s_prime=0.0)
    assert forward_noise_mixture(pure_pairs) == pytest.approx(0.7)
    no_pairs = MixtureModel(purity=0.7, spurious_purity=0.2, detection_purity=1.0, w=0.0,
                            v_s=0.0, v_s_prime=0.0)
    assert forward_noise_mixture(no_pairs) == pytest.approx(0.2)


def test_upper_bound_tight_for_orthogonal_noise():
    model = MixtureModel(purity=0.8, spurious_purity=0.5, detection_purity=0.0, w=0.6,
                         v_s=0.0, v_s_prime=0.0, overlap=0.0)
    assert purity_bounds(model.measured_inputs()).upper == pytest.approx(0.8, abs=1e-12)


def test_quadratic_lower_bound_tight_for_aligned_noise():
    model = MixtureModel(purity=0.8, spurious_purity=0.5, detection_purity=0.0, w=0.6,
                         v_s=0.0, v_s_prime=0.0, overlap=math.sqrt(0.8 * 0.5))
    bounds = purity_bounds(model.measured_inputs())
    assert bounds.lower_quadratic == pytest.approx(0.8, abs=1e-9)
    assert bounds.lower < bounds.lower_quadratic


def test_bound_gap_grows_with_noise_fraction():
    gaps = []
    for t in (0.1, 0.3, 0.5, 0.7):
        inputs = PurityInputs(
            p_raw=0.4, p_noise=0.2, p_det=0.0, t_s=t, t_s_prime=t, u_s=0.0, u_s_prime=0.0
        )
        bounds = purity_bounds(inputs)
        gaps.append(bounds.upper - bounds.lower)
    assert all(b > a for a, b in zip(gaps, gaps[1:]))


def test_overlap_outside_cauchy_schwarz_range():
    with pytest.raises(DomainError):
        MixtureModel(purity=0.5, spurious_purity=0.5, detection_purity=0.0, w=0.5,
                     v_s=0.0, v_s_prime=0.0, overlap=0.6)


def test_select_tau0_from_smoothed_peak(noiseless_records):
    assert select_tau0(noiseless_records) == pytest.approx(1.5 - 0.45 / 2.0, abs=0.076)


def test_select_tau0_prefers_fit(operating_point, noiseless_records):
    fit = FitResult(
        params=operating_point,
        stderr={},
        covariance=np.zeros((8, 8)),
        reduced_chi2=1.0,
        cost=0.0,
        initial_cost=0.0,
        iterations=1,
        gradient_norm=0.0,
        status=1,
    )
    assert select_tau0(noiseless_records, fit) == pytest.approx(1.275)
