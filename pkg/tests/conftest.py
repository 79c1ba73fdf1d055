"""Pytest fixtures shared across the SFWM toolkit tests."""

from pathlib import Path

import numpy as np
import pytest

from sfwm_toolkit.services.counts import CountModelParams, CountRecord, expected_counts
from sfwm_toolkit.services.dispersion import FiberSpec
from sfwm_toolkit.services.spectral import ProcessParams

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture
def fiber() -> FiberSpec:
    return FiberSpec(length_mm=16.0, birefringence=3.5e-4)


@pytest.fixture
def operating_point() -> CountModelParams:
    return CountModelParams(
        n_s=2.1e5,
        n_i=1.7e5,
        eta_s=0.134,
        eta_i=0.107,
        p_max=6.0e-3,
        sigma=9.0,
        tau_p=0.45,
        tau_c=1.5,
    )


@pytest.fixture
def scan_delays() -> np.ndarray:
    return np.linspace(-1.0, 3.5, 61)


@pytest.fixture
def noiseless_records(operating_point, scan_delays) -> list[CountRecord]:
    r = 80_000_000
    c_s, c_i, c_si = expected_counts(operating_point, scan_delays, r)
    return [
        CountRecord(tau_exp=float(t), c_s=float(a), c_i=float(b), c_si=float(c), r=r)
        for t, a, b, c in zip(scan_delays, c_s, c_i, c_si)
    ]


@pytest.fixture
def gaussian_params() -> ProcessParams:
    """Equal pump bandwidths so T_s = τ_s and T_i = τ_i; στ_p = √2."""
    return ProcessParams.from_delays(tau_s=0.6, tau_i=-0.2, tau_p=0.5, sigma1=4.0, sigma2=4.0)
