from pathlib import Path

import pytest

from sfwm_toolkit.cli import analyse_source
from sfwm_toolkit.runconfig import load_run_config

DETUNED_TARGETS = {"detuning_120": 0.884, "detuning_150": 0.921, "detuning_187": 0.953}


@pytest.fixture(scope="module")
def run_config():
    return load_run_config(Path(__file__).resolve().parents[2] / "sfwm.yaml").config


def _purity(config, name, points=256):
    source = next(s for s in config.sources if s.name == name)
    return analyse_source(config, source, points).schmidt.purity


def test_degenerate_source_purity(run_config):
    assert 0.80 <= _purity(run_config, "degenerate_715") <= 0.86


def test_detuned_sources_near_measured_values(run_config):
    purities = [_purity(run_config, name) for name in DETUNED_TARGETS]
    for purity, target in zip(purities, DETUNED_TARGETS.values()):
        assert purity == pytest.approx(target, abs=0.05)
    assert purities == sorted(purities)
    assert len(set(purities)) == len(purities)
    assert _purity(run_config, "degenerate_715") < purities[0]


@pytest.mark.parametrize("name", ["degenerate_715", *DETUNED_TARGETS])
def test_grid_refinement_is_stable(run_config, name):
    assert abs(_purity(run_config, name, 256) - _purity(run_config, name, 512)) < 1e-3
