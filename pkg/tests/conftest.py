#!/usr/bin/env python3
"""
Pytest configuration and fixtures for the analyzer tests.

This module contains shared fixtures and configuration for all tests.
"""

import os
import tempfile
from typing import Any, Dict

import pytest
import yaml

from activation import clip, relu, repu
from ann_core import Architecture
from loss_risk import DiscreteDistribution
from structured_logging import configure_logging

SLOW_TESTS = os.environ.get("NONCONV_SLOW_TESTS", "").lower() == "true"


def pytest_collection_modifyitems(config, items):
    """Skip tests marked slow unless NONCONV_SLOW_TESTS=true"""
    if SLOW_TESTS:
        return
    skip_slow = pytest.mark.skip(reason="set NONCONV_SLOW_TESTS=true to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _quiet_logging():
    """Keep test output readable; individual tests raise the level when they inspect logs"""
    configure_logging("WARNING")
    yield
    configure_logging("INFO")


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files"""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield temp_dir


@pytest.fixture
def relu_act():
    return relu()


@pytest.fixture
def clip_act():
    return clip(0.0, 1.0)


@pytest.fixture
def repu_act():
    return repu(2)


@pytest.fixture
def arch_111():
    return Architecture((1, 1, 1))


@pytest.fixture
def arch_1111():
    return Architecture((1, 1, 1, 1))


@pytest.fixture
def coin_distribution():
    """x uniform on {0, 1}, y = x"""
    return DiscreteDistribution([[0.0], [1.0]], [[0.0], [1.0]], [0.5, 0.5], (0.0, 1.0))


@pytest.fixture
def coin_config() -> Dict[str, Any]:
    """Small training experiment on the coin data"""
    return {
        "architecture": [1, 1, 1],
        "activation": {"name": "relu"},
        "box": [0.0, 1.0],
        "init": {"law": {"kind": "normal", "sigma": 1.0, "mu": 0.0}},
        "data": {
            "kind": "discrete",
            "atoms": [{"x": 0.0, "y": 0.0, "p": 0.5}, {"x": 1.0, "y": 1.0, "p": 0.5}],
        },
        "loss": {"kind": "mse"},
        "optimizer": {"method": "sgd", "lr": {"schedule": "constant", "value": 0.1}},
        "training": {"steps": 20, "batch_size": 4, "log_every": 5},
        "experiment": {"trials": 4, "seed": 0},
    }


@pytest.fixture
def dead_certain_config(coin_config) -> Dict[str, Any]:
    """
    Layer 1 is dead with probability one: weights 0 and biases -1.5 put every
    pre-activation in the flat part of ReLU. The output bias starts at the
    best constant 0.5.
    """
    config = dict(coin_config)
    config["init"] = {
        "law": {"kind": "normal"},
        "overrides": [
            {"layer": 1, "part": "weights", "law": {"kind": "point", "value": 0.0}},
            {"layer": 1, "part": "biases", "law": {"kind": "point", "value": -1.5}},
            {"layer": 2, "part": "biases", "law": {"kind": "point", "value": 0.5}},
        ],
    }
    config["optimizer"] = {"method": "sgd", "lr": {"schedule": "list", "values": [1e-3] * 20}}
    return config


@pytest.fixture
def write_config(temp_dir):
    """Write a config dict to a YAML file and return its path"""

    def _write(config: Dict[str, Any], name: str = "config.yaml") -> str:
        path = os.path.join(temp_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(config, fh, sort_keys=False)
        return path

    return _write
