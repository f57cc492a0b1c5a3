"""
Tests for config.py - Configuration management.
"""
import json

import pytest

from config import (
    DEFAULT_CONFIG,
    SUITES,
    get_seed,
    load_config,
    save_config,
    validate_config
)


def test_default_config_structure():
    """Test that DEFAULT_CONFIG has expected keys."""
    for key in ("space", "delta", "tie_break", "seed", "samples", "functions",
                "scales", "amp", "geometry", "maximal", "operators", "suites"):
        assert key in DEFAULT_CONFIG
    assert DEFAULT_CONFIG["suites"] == list(SUITES)


def test_default_config_is_valid(monkeypatch):
    """Test that the defaults pass validation."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    is_valid, error = validate_config(DEFAULT_CONFIG)
    assert is_valid, error


def test_save_and_load_config(temp_dir, sample_config, monkeypatch):
    """Test saving and loading configuration."""
    config_file = temp_dir / "config.json"

    # Patch CONFIG_FILE to use temp directory
    import config as config_module
    monkeypatch.setattr(config_module, "CONFIG_FILE", config_file)

    save_config(sample_config)
    assert config_file.exists()

    loaded = load_config()
    assert loaded["space"] == sample_config["space"]
    assert loaded["scales"] == sample_config["scales"]


def test_load_config_creates_default(temp_dir, monkeypatch):
    """Test that load_config creates default config if missing."""
    config_file = temp_dir / "config.json"

    import config as config_module
    monkeypatch.setattr(config_module, "CONFIG_FILE", config_file)

    assert not config_file.exists()
    config = load_config()
    assert config_file.exists()
    assert config["delta"] == DEFAULT_CONFIG["delta"]


def test_load_config_merges_sections(temp_dir):
    """Test partial sections are merged over the defaults."""
    path = temp_dir / "partial.json"
    path.write_text(json.dumps({"scales": {"c": 5.0}, "space": {"path": "space.json"}}))
    config = load_config(path)
    assert config["scales"]["c"] == 5.0
    assert config["scales"]["b"] == DEFAULT_CONFIG["scales"]["b"]
    assert config["space"] == {"path": "space.json"}


def test_load_config_missing_explicit_path(temp_dir):
    """Test an explicit missing path raises."""
    with pytest.raises(FileNotFoundError):
        load_config(temp_dir / "nope.json")


def test_get_seed_from_config(sample_config, monkeypatch):
    """Test the seed comes from config when the env var is unset."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    assert get_seed({**sample_config, "seed": 17}) == 17


def test_get_seed_from_env(sample_config, monkeypatch):
    """Test HBL_SEED overrides the config seed."""
    monkeypatch.setenv("HBL_SEED", "99")
    assert get_seed(sample_config) == 99


def test_validate_config_valid(sample_config, monkeypatch):
    """Test validation of a valid config."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    is_valid, error = validate_config(sample_config)
    assert is_valid
    assert error == ""


@pytest.mark.parametrize("change, field", [
    ({"delta": 1.5}, "delta"),
    ({"tie_break": "name"}, "tie_break"),
    ({"seed": "zero"}, "seed"),
    ({"samples": 0}, "samples"),
    ({"suites": ["geometry", "plots"]}, "suites"),
    ({"space": {"generator": "torus"}}, "space.generator"),
    ({"space": {}}, "space"),
])
def test_validate_config_names_field(sample_config, monkeypatch, change, field):
    """Test that each invalid field is named in the message."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    is_valid, error = validate_config({**sample_config, **change})
    assert not is_valid
    assert error.startswith(field)


def test_validate_config_c_must_be_below_b(sample_config, monkeypatch):
    """Test c >= b is rejected when the hardy_bmo suite runs."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    config = {**sample_config, "scales": {**sample_config["scales"], "c": 6.0, "b": 5.5}}
    is_valid, error = validate_config(config)
    assert not is_valid
    assert "scales.c" in error
    assert validate_config({**config, "suites": ["geometry"]})[0]


def test_validate_config_c_above_midpoint_bound(sample_config, monkeypatch):
    """Test c must exceed R0/(1-beta)."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    config = {**sample_config, "scales": {**sample_config["scales"], "c": 3.5}}
    is_valid, error = validate_config(config)
    assert not is_valid
    assert "R0/(1-beta)" in error


def test_validate_config_beta_range(sample_config, monkeypatch):
    """Test beta must lie in (1/2, 1)."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    is_valid, error = validate_config({**sample_config, "amp": {"R0": 1.0, "beta": 0.5}})
    assert not is_valid
    assert error.startswith("amp.beta")


def test_validate_config_bad_env_seed(sample_config, monkeypatch):
    """Test a non-integer HBL_SEED is reported."""
    monkeypatch.setenv("HBL_SEED", "abc")
    is_valid, error = validate_config(sample_config)
    assert not is_valid
    assert "HBL_SEED" in error


def test_validate_config_unknown_multiplier(sample_config, monkeypatch):
    """Test unknown multiplier kinds are rejected."""
    monkeypatch.delenv("HBL_SEED", raising=False)
    config = {**sample_config, "operators": {"b": 2.0, "multipliers": [{"kind": "wave"}]}}
    is_valid, error = validate_config(config)
    assert not is_valid
    assert error.startswith("operators.multipliers[0].kind")
