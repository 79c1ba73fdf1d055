import numpy as np
import pytest

from sfwm_toolkit.errors import ContractError, DegenerateInputError, ResamplingRequiredError
from sfwm_toolkit.services.analysis import (
    gaussian_schmidt_purity,
    jsd_fidelity,
    marginals,
    normalize,
    schmidt_purity,
    state_overlap,
)
from sfwm_toolkit.services.spectral import GridAxes, JsaGrid, jsa_degenerate


@pytest.fixture
def sinc_grid() -> JsaGrid:
    axes = GridAxes.symmetric(12.0, 12.0, 64)
    return normalize(jsa_degenerate(3.0, 3.0, -0.27, 0.25, axes))


def test_normalize_zero_grid_raises():
    axes = GridAxes.symmetric(1.0, 1.0, 8)
    with pytest.raises(DegenerateInputError):
        normalize(JsaGrid(axes, np.zeros((8, 8))))


def test_purity_requires_normalized_grid():
    axes = GridAxes.symmetric(12.0, 12.0, 32)
    with pytest.raises(ContractError):
        schmidt_purity(jsa_degenerate(3.0, 3.0, -0.27, 0.25, axes))


def test_product_state_is_pure():
    axes = GridAxes.symmetric(5.0, 4.0, 40, 50)
    ns, ni = axes.mesh()
    grid = normalize(JsaGrid(axes, np.exp(-ns**2) * np.exp(-(ni - 0.5) ** 2 / 2.0)))
    result = schmidt_purity(grid)
    assert result.purity == pytest.approx(1.0, abs=1e-12)
    assert result.schmidt_number == pytest.approx(1.0, abs=1e-12)


def test_singular_values_sorted_and_unit_weight(sinc_grid):
    result = schmidt_purity(sinc_grid)
    values = result.singular_values
    assert np.all(np.diff(values) <= 0)
    assert np.sum(values**2) == pytest.approx(1.0, abs=1e-9)
    assert 0.0 < result.purity < 1.0
    assert result.schmidt_number == pytest.approx(1.0 / result.purity)
    assert result.purity_half_resolution is not None
    assert result.discretization_drift is not None


def test_purity_invariant_under_transpose(sinc_grid):
    transposed = JsaGrid(
        GridAxes(sinc_grid.nu_i, sinc_grid.nu_s), sinc_grid.amplitude.T, normalized=True
    )
    assert schmidt_purity(transposed).purity == pytest.approx(
        schmidt_purity(sinc_grid).purity, abs=1e-9
    )


def test_purity_invariant_under_global_phase(sinc_grid):
    rotated = JsaGrid(sinc_grid.axes, sinc_grid.amplitude * np.exp(1.234j), normalized=True)
    assert schmidt_purity(rotated).purity == pytest.approx(
        schmidt_purity(sinc_grid).purity, abs=1e-12
    )


def test_fidelity_of_noisy_copy(sinc_grid):
    assert jsd_fidelity(sinc_grid, sinc_grid) == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(3)
    noisy = sinc_grid.amplitude * (1.0 + 0.05 * rng.standard_normal(sinc_grid.axes.shape))
    other = normalize(JsaGrid(sinc_grid.axes, noisy))
    assert jsd_fidelity(sinc_grid, other) > 0.99


def test_state_overlap_with_itself_is_purity(sinc_grid):
    assert state_overlap(sinc_grid, sinc_grid) == pytest.approx(
        schmidt_purity(sinc_grid).purity, rel=1e-10
    )


def test_comparisons_need_shared_axes(sinc_grid):
    other = normalize(jsa_degenerate(3.0, 3.0, -0.27, 0.25, GridAxes.symmetric(10.0, 10.0, 64)))
    with pytest.raises(ResamplingRequiredError):
        jsd_fidelity(sinc_grid, other)
    with pytest.raises(ResamplingRequiredError):
        state_overlap(sinc_grid, other)


def test_marginals_integrate_to_one():
    axes = GridAxes.symmetric(12.0, 12.0, 48)
    marg = marginals(normalize(jsa_degenerate(3.0, 3.0, -0.27, 0.25, axes)))
    assert np.sum(marg.signal) * axes.d_nu_s == pytest.approx(1.0, abs=1e-12)
    assert np.sum(marg.idler) * axes.d_nu_i == pytest.approx(1.0, abs=1e-12)


def test_marginals_require_normalized_grid():
    axes = GridAxes.symmetric(12.0, 12.0, 48)
    with pytest.raises(ContractError):
        marginals(jsa_degenerate(3.0, 3.0, -0.27, 0.25, axes))


def test_gaussian_oracle():
    assert gaussian_schmidt_purity(1.0, 1.0, 0.0) == 1.0
    assert gaussian_schmidt_purity(2.0, 1.0, 1.0) == pytest.approx(np.sqrt(0.5))
    with pytest.raises(ContractError):
        gaussian_schmidt_purity(1.0, 1.0, 1.0)


def test_state_overlap_bounded_by_purities():
    axes = GridAxes.symmetric(3.0, 3.0, 12)
    rng = np.random.default_rng(4)
    for _ in range(200):
        a, b = (
            normalize(JsaGrid(axes, rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))))
            for _ in range(2)
        )
        overlap = state_overlap(a, b)
        bound = np.sqrt(state_overlap(a, a) * state_overlap(b, b))
        assert 0.0 <= overlap <= bound + 1e-12


def test_disjoint_signal_supports_do_not_overlap():
    axes = GridAxes.symmetric(3.0, 3.0, 16)
    rng = np.random.default_rng(9)
    low = np.zeros((16, 16), dtype=np.complex128)
    high = np.zeros((16, 16), dtype=np.complex128)
    low[:8] = rng.normal(size=(8, 16))
    high[8:] = rng.normal(size=(8, 16))
    assert state_overlap(normalize(JsaGrid(axes, low)), normalize(JsaGrid(axes, high))) == 0.0
