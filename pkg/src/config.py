#!/usr/bin/env python3
"""
Experiment config files.

One YAML file describes a whole experiment. The only environment override is
``NONCONV_SEED`` (read from the process environment or a ``.env`` file);
``--seed`` on the command line beats it, and it beats ``experiment.seed``.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv

from error_handler import ConfigError, ValidationError
from structured_logging import get_logger
from validation import validate_config

logger = get_logger("config")

SEED_ENV_VAR = "NONCONV_SEED"


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse a YAML config file into a dict; any read or parse failure is a ``ConfigError``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc.strerror or exc}", {"path": str(path)}) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        details: Dict[str, Any] = {"path": str(path)}
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            details.update({"line": mark.line + 1, "column": mark.column + 1})
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"Invalid YAML in {path}: {problem}", details) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping", {"path": str(path)})
    logger.debug("config loaded", path=str(path), sections=sorted(data))
    return data


def load_validated_config(command: str, path: Union[str, Path]) -> Dict[str, Any]:
    config = load_config(path)
    is_valid, error_details = validate_config(command, config)
    if not is_valid:
        details = dict(error_details["details"])
        details["path"] = str(path)
        raise ValidationError(error_details["message"], details)
    return config


def env_seed(dotenv_path: Optional[Union[str, Path]] = None) -> Optional[int]:
    """``NONCONV_SEED`` from the environment, after loading ``.env`` without overriding."""
    load_dotenv(dotenv_path=dotenv_path, override=False)
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}", {"field": SEED_ENV_VAR}) from exc
    if seed < 0:
        raise ConfigError(f"{SEED_ENV_VAR} must be non-negative", {"field": SEED_ENV_VAR})
    return seed


def resolve_seed(cli_seed: Optional[int], config: Dict[str, Any], dotenv_path: Optional[Union[str, Path]] = None) -> int:
    """``--seed``, else ``NONCONV_SEED``, else ``experiment.seed``, else 0."""
    if cli_seed is not None:
        if cli_seed < 0:
            raise ValidationError("--seed must be non-negative", {"field": "seed"})
        return int(cli_seed)
    seed = env_seed(dotenv_path)
    if seed is not None:
        return seed
    return int((config.get("experiment") or {}).get("seed", 0))


def resolve_trials(cli_trials: Optional[int], config: Dict[str, Any]) -> int:
    trials = cli_trials if cli_trials is not None else (config.get("experiment") or {}).get("trials", 100)
    if int(trials) < 1:
        raise ValidationError("trials must be >= 1", {"field": "experiment.trials"})
    return int(trials)
