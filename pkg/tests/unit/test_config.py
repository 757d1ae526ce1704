#!/usr/bin/env python3
"""
Unit tests for config module.

This module tests YAML loading, validation errors with file context and the
seed and trial resolution order.
"""

import os

import pytest

from config import SEED_ENV_VAR, env_seed, load_config, load_validated_config, resolve_seed, resolve_trials
from error_handler import ConfigError, ValidationError


@pytest.fixture
def no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


class TestLoadConfig:
    """Tests for reading config files"""

    def test_roundtrip(self, coin_config, write_config):
        assert load_config(write_config(coin_config)) == coin_config

    def test_missing_file(self, temp_dir):
        with pytest.raises(ConfigError) as excinfo:
            load_config(os.path.join(temp_dir, "absent.yaml"))
        assert excinfo.value.details["path"].endswith("absent.yaml")

    def test_invalid_yaml_reports_position(self, temp_dir):
        path = os.path.join(temp_dir, "broken.yaml")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("architecture: [1, 1\nactivation: relu\n")

        with pytest.raises(ConfigError) as excinfo:
            load_config(path)
        assert excinfo.value.details["line"] >= 1
        assert "column" in excinfo.value.details

    def test_not_a_mapping(self, temp_dir):
        path = os.path.join(temp_dir, "list.yaml")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("- 1\n- 2\n")

        with pytest.raises(ConfigError):
            load_config(path)

    def test_validated(self, coin_config, write_config):
        assert load_validated_config("train", write_config(coin_config))["architecture"] == [1, 1, 1]

    def test_validation_error_names_file(self, coin_config, write_config):
        config = dict(coin_config, training={"steps": 0})
        path = write_config(config)

        with pytest.raises(ValidationError) as excinfo:
            load_validated_config("train", path)
        assert excinfo.value.details["path"] == path
        assert excinfo.value.details["field"] == "training.steps"


class TestSeedResolution:
    """--seed, then NONCONV_SEED, then experiment.seed"""

    def test_cli_wins(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "5")
        assert resolve_seed(9, {"experiment": {"seed": 3}}) == 9

    def test_environment_beats_config(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "5")
        assert resolve_seed(None, {"experiment": {"seed": 3}}) == 5

    def test_config_then_default(self, no_seed_env, temp_dir):
        empty_env = os.path.join(temp_dir, ".env")
        open(empty_env, "w").close()

        assert resolve_seed(None, {"experiment": {"seed": 3}}, empty_env) == 3
        assert resolve_seed(None, {}, empty_env) == 0

    def test_dotenv_file(self, monkeypatch, temp_dir):
        # setenv then delenv so the value load_dotenv writes is undone at teardown
        monkeypatch.setenv(SEED_ENV_VAR, "x")
        monkeypatch.delenv(SEED_ENV_VAR)
        path = os.path.join(temp_dir, ".env")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{SEED_ENV_VAR}=42\n")

        assert env_seed(path) == 42

    @pytest.mark.parametrize("raw", ["abc", "-1"])
    def test_invalid_environment_seed(self, monkeypatch, raw):
        monkeypatch.setenv(SEED_ENV_VAR, raw)
        with pytest.raises(ConfigError):
            env_seed()

    def test_negative_cli_seed(self):
        with pytest.raises(ValidationError):
            resolve_seed(-3, {})


class TestTrials:
    def test_resolution(self):
        assert resolve_trials(7, {"experiment": {"trials": 3}}) == 7
        assert resolve_trials(None, {"experiment": {"trials": 3}}) == 3
        assert resolve_trials(None, {}) == 100

    def test_must_be_positive(self):
        with pytest.raises(ValidationError):
            resolve_trials(0, {})
