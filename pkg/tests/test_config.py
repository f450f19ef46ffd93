"""Scenario configuration parsing and diagnostics."""

from __future__ import annotations

import pytest

from cellm2m.config import ConfigError, parse_config


def write(tmp_path, text):
    path = tmp_path / "scenario.cfg"
    path.write_text(text)
    return path


def test_minimal_file_fills_reference_defaults(tmp_path):
    scenario = parse_config(write(tmp_path, "technology = gprs\n"))
    assert scenario.technology == "gprs"
    assert scenario.n_sm == [4500]
    assert scenario.ri == ["default"]
    assert scenario.replications == 10
    assert scenario.access == {}   # reference error probabilities live in the configs
    assert scenario.mode == "both"


def test_penetration_sweep_list(tmp_path):
    scenario = parse_config(write(tmp_path, """
[scenario]
technology = lte
esm_penetration = 0, 2, 5, 10, 20, 30
"""))
    assert scenario.esm_penetration == [0, 2, 5, 10, 20, 30]
    assert len(scenario.sweep_points()) == 6


def test_sections_and_comments_are_tolerated(tmp_path):
    scenario = parse_config(write(tmp_path, """
# reference cell
[scenario]
technology = gprs
ri = 300, 60
[gprs]
n_pdch = 5  # fewer data timeslots
"""))
    assert scenario.ri == [300, 60]
    assert scenario.gprs == {"n_pdch": 5}


def test_out_of_range_probability_names_the_line(tmp_path):
    path = write(tmp_path, "technology = gprs\np_data_error = 1.5\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert ":2:" in str(err.value)
    assert "p_data_error" in str(err.value)


def test_unknown_key_is_rejected_with_line_number(tmp_path):
    path = write(tmp_path, "technology = gprs\nfrequency_reuse = 3\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert ":2:" in str(err.value)


def test_malformed_line_is_rejected(tmp_path):
    path = write(tmp_path, "technology gprs\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert ":1:" in str(err.value)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg")


def test_bad_reporting_interval_value(tmp_path):
    path = write(tmp_path, "ri = 120\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert "reporting interval" in str(err.value)


def test_warmup_must_precede_horizon(tmp_path):
    path = write(tmp_path, "horizon_s = 100\nwarmup_s = 100\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_penetration_above_100_rejected(tmp_path):
    path = write(tmp_path, "esm_penetration = 0, 150\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert ":1:" in str(err.value)


def test_technology_validated_through_scenario(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "technology = umts\n"))
