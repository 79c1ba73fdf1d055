import pytest

from sfwm_toolkit.errors import ConfigSchemaError
from sfwm_toolkit.runconfig import load_run_config, parse_run_config

BOTH_BANDWIDTHS = """\
fiber:
  length_mm: 16.0
  birefringence: 3.5e-4
sources:
  - name: broken
    pump1:
      wavelength_nm: 715.0
      fwhm_nm: 2.3
      sigma_rad_per_ps: 3.0
"""


def test_repository_config_loads(repo_root):
    loaded = load_run_config(repo_root / "sfwm.yaml")
    config = loaded.config
    assert [s.name for s in config.sources] == [
        "degenerate_715",
        "detuning_120",
        "detuning_150",
        "detuning_187",
    ]
    assert len(loaded.sha256) == 64
    assert config.scan is not None and config.scan.delays().size == 61
    assert config.count_model is not None
    assert config.count_model.to_params().tau_c == 1.5


def test_missing_pump2_means_degenerate_source(repo_root):
    config = load_run_config(repo_root / "sfwm.yaml").config
    pump1, pump2 = config.pumps_for(config.sources[0])
    assert pump1 == pump2
    pump1, pump2 = config.pumps_for(config.sources[1])
    assert pump1.wavelength_nm == 772.0
    assert pump2.wavelength_nm == 652.0


def test_both_bandwidths_reported_with_line():
    with pytest.raises(ConfigSchemaError) as excinfo:
        parse_run_config(BOTH_BANDWIDTHS, source="run.yaml")
    message = str(excinfo.value)
    assert message.startswith("run.yaml:6:")
    assert "sources[0].pump1" in message


def test_unknown_key_rejected():
    text = "fiber:\n  length_mm: 16.0\n  birefringence: 3.5e-4\n  colour: red\n"
    with pytest.raises(ConfigSchemaError, match=r"run.yaml:4: fiber.colour"):
        parse_run_config(text, source="run.yaml")


def test_invalid_yaml():
    with pytest.raises(ConfigSchemaError, match="invalid YAML"):
        parse_run_config("fiber: [16.0\n", source="run.yaml")


def test_non_mapping_document():
    with pytest.raises(ConfigSchemaError, match="mapping"):
        parse_run_config("- 1\n- 2\n")


def test_pump_outside_sellmeier_window():
    text = (
        "fiber: {length_mm: 16.0, birefringence: 3.5e-4}\n"
        "pump1: {wavelength_nm: 250.0, fwhm_nm: 1.0}\n"
        "sources:\n  - name: uv\n"
    )
    with pytest.raises(ConfigSchemaError, match="outside"):
        parse_run_config(text)


def test_source_without_any_pump():
    text = "fiber: {length_mm: 16.0, birefringence: 3.5e-4}\nsources:\n  - name: lonely\n"
    with pytest.raises(ConfigSchemaError, match="no pump1"):
        parse_run_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigSchemaError, match="not found"):
        load_run_config(tmp_path / "absent.yaml")
