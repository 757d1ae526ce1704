#!/usr/bin/env python3
"""
Validation of experiment config dicts.

``validate_config`` runs the jsonschema check for the subcommand first and
then the semantic checks that need the activation or the architecture.
Every failure is reported as ``(False, error_details)`` with a dotted field
path in ``error_details["details"]["field"]``.
"""

from typing import Any, Dict, Optional, Tuple

import jsonschema
from jsonschema.exceptions import best_match

from error_handler import AnalyzerError
from experiments import ExperimentConfig
from loss_risk import PSI_FUNCTIONS
from optimizers import OPTIMIZERS
from schemas import get_schema_for_command
from structured_logging import get_logger

logger = get_logger("validation")

ErrorDetails = Optional[Dict[str, Any]]


def _error(message: str, field: str, **extra: Any) -> Tuple[bool, Dict[str, Any]]:
    details = {"field": field}
    details.update(extra)
    return False, {"code": "validation_error", "message": message, "details": details}


def _schema_field(error: jsonschema.ValidationError) -> str:
    path = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = error.message.split("'")[1] if "'" in error.message else ""
        path.append(missing)
    return ".".join(p for p in path if p) or "<root>"


def validate_schema(command: str, config: Dict[str, Any]) -> Tuple[bool, ErrorDetails]:
    schema = get_schema_for_command(command)
    if schema is None:
        return True, None
    validator = jsonschema.Draft7Validator(schema)
    error = best_match(validator.iter_errors(config))
    if error is None:
        return True, None
    field = _schema_field(error)
    return _error(f"Invalid config at {field}: {error.message}", field, validator=error.validator)


def _check_activation(section: Dict[str, Any]) -> Tuple[bool, ErrorDetails]:
    name = section.get("name")
    if name == "clip":
        if "u" not in section or "v" not in section:
            return _error("clip needs both u and v", "activation.u")
        if not section["u"] < section["v"]:
            return _error("clip needs u < v", "activation.u", u=section["u"], v=section["v"])
    if name == "repu" and "p" not in section:
        return _error("repu needs an integer p >= 2", "activation.p")
    return True, None


def _check_training(command: str, config: Dict[str, Any]) -> Tuple[bool, ErrorDetails]:
    training = config.get("training", {}) or {}
    for key in ("gap_margin", "delta"):
        value = training.get(key)
        if value is None or value == "inf":
            continue
        if not value > 0:
            return _error(f"{key} must lie in (0, inf]", f"training.{key}", value=value)

    steps = int(training.get("steps", 100))
    if command == "sweep":
        steps = int((config.get("sweep") or {}).get("train_steps", 0)) or steps
    lr = (config.get("optimizer") or {}).get("lr")
    if isinstance(lr, dict) and lr.get("schedule") == "list":
        if len(lr.get("values", [])) < steps:
            return _error(
                f"Learning-rate list has {len(lr.get('values', []))} entries but training runs {steps} steps",
                "optimizer.lr.values",
            )
    if isinstance(lr, dict) and lr.get("schedule") in ("constant", "inverse") and "value" not in lr:
        return _error(f"{lr['schedule']} schedule needs a value", "optimizer.lr.value")

    method = (config.get("optimizer") or {}).get("method", "sgd")
    if method not in OPTIMIZERS:
        return _error(f"Unknown optimizer method: {method}", "optimizer.method", known=sorted(OPTIMIZERS))
    return True, None


def _check_loss(config: Dict[str, Any]) -> Tuple[bool, ErrorDetails]:
    loss = config.get("loss") or {}
    if loss.get("kind", "mse") != "psi":
        return True, None
    psi = loss.get("psi")
    if psi not in PSI_FUNCTIONS:
        return _error(f"Unknown psi function: {psi}", "loss.psi", known=sorted(PSI_FUNCTIONS))
    output_dim = (config.get("architecture") or [1])[-1]
    if output_dim != 1:
        return _error("psi losses need a scalar output layer", "loss.kind", output_dim=output_dim)
    return True, None


def _check_objects(config: Dict[str, Any]) -> Tuple[bool, ErrorDetails]:
    """Build every object once; constructor errors carry their own field."""
    try:
        cfg = ExperimentConfig(config)
        cfg.inputs.validate()
    except AnalyzerError as exc:
        field = exc.details.get("field", "<root>") if exc.details else "<root>"
        return _error(exc.message, field, **{k: v for k, v in (exc.details or {}).items() if k != "field"})
    return True, None


def validate_config(command: str, config: Dict[str, Any]) -> Tuple[bool, ErrorDetails]:
    """
    Validate a config dict for a subcommand.

    Unknown subcommands have no schema and pass, like commands that take no
    config file.
    """
    if not isinstance(config, dict):
        return _error("Config must be a mapping", "<root>")
    checks = (
        lambda: validate_schema(command, config),
        lambda: _check_activation(config.get("activation") or {"name": "relu"}),
        lambda: _check_loss(config),
        lambda: _check_training(command, config),
    )
    for check in checks:
        ok, details = check()
        if not ok:
            logger.debug("config rejected", command=command, field=details["details"]["field"])
            return ok, details
    if get_schema_for_command(command) is None:
        return True, None
    return _check_objects(config)
