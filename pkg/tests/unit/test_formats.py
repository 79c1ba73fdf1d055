import json

import numpy as np
import pytest

from sfwm_toolkit.errors import ConfigSchemaError
from sfwm_toolkit.formats.jsa_text import dump_jsa, load_jsa, read_jsa, write_jsa
from sfwm_toolkit.formats.records import (
    load_count_records,
    load_purity_bundle,
    load_triple_counts,
    read_count_records,
    write_count_records,
)
from sfwm_toolkit.formats.writer import OutputMeta, config_digest, write_json
from sfwm_toolkit.services.counts import conditional_autocorr, simulate_counts
from sfwm_toolkit.services.spectral import GridAxes, jsa_degenerate

META = OutputMeta(config_sha256=config_digest("fiber: {}\n"))
HEADER = "tau_ps,C_s,C_i,C_si,R,scale\n"


def test_count_records_survive_csv(tmp_path, operating_point, scan_delays):
    records = simulate_counts(operating_point, scan_delays, 80_000_000, seed=1)
    path = write_count_records(tmp_path / "counts.csv", records, META)
    assert path.read_text().startswith("# tool=")
    assert read_count_records(path) == records
    assert [p.name for p in tmp_path.iterdir()] == ["counts.csv"]


def test_empty_record_file():
    with pytest.raises(ConfigSchemaError, match="empty"):
        load_count_records("# only a comment\n", source="c.csv")


def test_wrong_header_names_line():
    with pytest.raises(ConfigSchemaError, match=r"c.csv:2: header"):
        load_count_records("# meta\ntau,C_s,C_i,C_si,R,scale\n0,1,1,0,10,1\n", source="c.csv")


def test_bad_number_names_line():
    with pytest.raises(ConfigSchemaError, match="line 3: C_s='many'"):
        load_count_records(HEADER + "0.0,10,10,1,100,1.0\n0.1,many,10,1,100,1.0\n")


def test_coincidences_above_singles_name_line():
    with pytest.raises(ConfigSchemaError, match=r"c.csv:2: coincidences"):
        load_count_records(HEADER + "0.0,10,10,11,100,1.0\n", source="c.csv")


def test_scaled_singles_are_applied():
    records = load_count_records(HEADER + "0.0,10,20,5,100,2.5\n")
    assert records[0].singles_s == 25.0
    assert records[0].singles_i == 50.0


def test_jsa_text_round_trip(tmp_path):
    grid = jsa_degenerate(3.0, 3.0, -0.27, 0.25, GridAxes.symmetric(10.0, 8.0, 12, 10))
    path = write_jsa(tmp_path / "a_jsa.txt", grid, META)
    again = read_jsa(path)
    np.testing.assert_array_equal(again.amplitude, grid.amplitude)
    np.testing.assert_allclose(again.nu_s, grid.nu_s, rtol=0, atol=1e-12)
    assert again.normalized is False


def test_jsa_text_rejects_other_files():
    with pytest.raises(ConfigSchemaError, match="not an sfwm-jsa"):
        load_jsa("hello\n")


def test_jsa_text_reports_bad_amplitude_line():
    grid = jsa_degenerate(3.0, 3.0, -0.27, 0.25, GridAxes.symmetric(1.0, 1.0, 2))
    lines = dump_jsa(grid, META).splitlines()
    lines[8] = "oops"
    with pytest.raises(ConfigSchemaError, match="line 9"):
        load_jsa("\n".join(lines))


def test_bundle_without_pulse_count():
    bundle = load_purity_bundle(
        json.dumps(
            {
                "tau0": {"C_s": 10, "C_s_prime": 10, "C_ss_prime": 1},
                "far": {"C_s": 5, "C_s_prime": 5, "C_ss_prime": 0},
            }
        )
    )
    with pytest.raises(ConfigSchemaError, match="no R"):
        bundle.blocks()


def test_bundle_unknown_key():
    payload = {
        "R": 100,
        "tau0": {"C_s": 10, "C_s_prime": 10, "C_ss_prime": 1},
        "far": {"C_s": 5, "C_s_prime": 5, "C_ss_prime": 0, "C_x": 3},
    }
    with pytest.raises(ConfigSchemaError, match=r"b.json: far.C_x"):
        load_purity_bundle(json.dumps(payload), source="b.json")


def test_bundle_invalid_json():
    with pytest.raises(ConfigSchemaError, match="invalid JSON"):
        load_purity_bundle("{", source="b.json")


def test_bundled_triple_counts(repo_root):
    record = load_triple_counts((repo_root / "data" / "heralded_triples.json").read_text())
    assert conditional_autocorr(record).value == pytest.approx(0.0317, abs=1e-3)


def test_json_output_carries_meta(tmp_path):
    path = write_json(tmp_path / "out.json", META, {"purity": 0.5})
    payload = json.loads(path.read_text())
    assert payload["_meta"]["config_sha256"] == META.config_sha256
    assert payload["purity"] == 0.5
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]
