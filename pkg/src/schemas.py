#!/usr/bin/env python3
"""
JSON schemas for experiment config files and for the documents the CLI writes.

Config files are checked section by section against ``CONFIG_SCHEMA``; each
subcommand adds the sections it cannot run without (see
``get_schema_for_command``). Output documents carry ``schema_version``.
"""

import copy
from typing import Any, Dict, Optional

SCHEMA_VERSION = "1.0"

_NUMBER = {"type": "number"}
_POSITIVE_INT = {"type": "integer", "minimum": 1}
_NON_NEGATIVE_INT = {"type": "integer", "minimum": 0}
_NUMBER_OR_INF = {"oneOf": [{"type": "number"}, {"type": "string", "enum": ["inf"]}]}
_VECTOR = {"type": "array", "items": _NUMBER, "minItems": 1}

ARCHITECTURE_SCHEMA = {
    "type": "array",
    "items": _POSITIVE_INT,
    "minItems": 2,
    "description": "Layer widths (l_0, ..., l_L)",
}

ACTIVATION_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "enum": ["relu", "clip", "repu"]},
        "u": _NUMBER,
        "v": _NUMBER,
        "p": {"type": "integer", "minimum": 2},
    },
    "required": ["name"],
    "additionalProperties": False,
}

BOX_SCHEMA = {
    "type": "array",
    "items": _NUMBER,
    "minItems": 2,
    "maxItems": 2,
    "description": "Input box [a, b]",
}

LAW_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"type": "string", "enum": ["normal", "uniform", "point", "scaled"]},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "mu": _NUMBER,
        "lo": _NUMBER,
        "hi": _NUMBER,
        "value": _NUMBER,
        "base": {"type": "string", "minLength": 1},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "base_params": {"type": "object", "additionalProperties": _NUMBER},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

INIT_SCHEMA = {
    "type": "object",
    "properties": {
        "law": LAW_SCHEMA,
        "overrides": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "layer": _POSITIVE_INT,
                    "part": {"type": "string", "enum": ["weights", "biases"]},
                    "law": LAW_SCHEMA,
                },
                "required": ["layer", "part", "law"],
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

BOUND_SCHEMA = {
    "type": "object",
    "properties": {
        "window": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
        "gamma": _NUMBER,
        "chi": _POSITIVE_INT,
    },
    "additionalProperties": False,
}

DATA_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"type": "string", "enum": ["discrete", "teacher", "affine"]},
        "atoms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "x": {"oneOf": [_NUMBER, _VECTOR]},
                    "y": {"oneOf": [_NUMBER, _VECTOR]},
                    "p": {"type": "number", "minimum": 0, "maximum": 1},
                },
                "required": ["x", "y", "p"],
                "additionalProperties": False,
            },
        },
        "widths": ARCHITECTURE_SCHEMA,
        "noise_sigma": {"type": "number", "minimum": 0},
        "teacher_seed": _NON_NEGATIVE_INT,
        "slope": {"oneOf": [_VECTOR, {"type": "array", "items": _VECTOR, "minItems": 1}]},
        "intercept": {"oneOf": [_NUMBER, _VECTOR]},
    },
    "required": ["kind"],
    "allOf": [
        {"if": {"properties": {"kind": {"const": "discrete"}}}, "then": {"required": ["atoms"]}},
        {"if": {"properties": {"kind": {"const": "teacher"}}}, "then": {"required": ["widths"]}},
        {"if": {"properties": {"kind": {"const": "affine"}}}, "then": {"required": ["slope"]}},
    ],
    "additionalProperties": False,
}

LOSS_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"type": "string", "enum": ["mse", "psi"]},
        "psi": {"type": "string", "minLength": 1},
    },
    "additionalProperties": False,
}

LEARNING_RATE_SCHEMA = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {
            "type": "object",
            "properties": {
                "schedule": {"type": "string", "enum": ["constant", "inverse", "list"]},
                "value": {"type": "number", "exclusiveMinimum": 0},
                "values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
            },
            "required": ["schedule"],
            "additionalProperties": False,
        },
    ]
}

OPTIMIZER_SCHEMA = {
    "type": "object",
    "properties": {
        "method": {"type": "string", "minLength": 1},
        "lr": LEARNING_RATE_SCHEMA,
        "hyperparams": {"type": "object", "additionalProperties": _NUMBER},
    },
    "additionalProperties": False,
}

TRAINING_SCHEMA = {
    "type": "object",
    "properties": {
        "steps": _POSITIVE_INT,
        "batch_size": _POSITIVE_INT,
        "log_every": _POSITIVE_INT,
        "eval_samples": {"type": "integer", "minimum": 2},
        "falsifier_samples": _NON_NEGATIVE_INT,
        "reference_optimum": _NUMBER,
        "gap_margin": _NUMBER,
        "delta": _NUMBER_OR_INF,
    },
    "additionalProperties": False,
}

SWEEP_SCHEMA = {
    "type": "object",
    "properties": {
        "width": _POSITIVE_INT,
        "depths": {"type": "array", "items": _POSITIVE_INT, "minItems": 1},
        "train_steps": _NON_NEGATIVE_INT,
        "p": _NUMBER,
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "c_const": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "trials": _POSITIVE_INT,
        "seed": _NON_NEGATIVE_INT,
        "block_size": _POSITIVE_INT,
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "architecture": ARCHITECTURE_SCHEMA,
        "activation": ACTIVATION_SCHEMA,
        "box": BOX_SCHEMA,
        "init": INIT_SCHEMA,
        "bound": BOUND_SCHEMA,
        "data": DATA_SCHEMA,
        "loss": LOSS_SCHEMA,
        "optimizer": OPTIMIZER_SCHEMA,
        "training": TRAINING_SCHEMA,
        "sweep": SWEEP_SCHEMA,
        "experiment": EXPERIMENT_SCHEMA,
    },
    "required": ["architecture"],
    "additionalProperties": False,
}


def _requiring(*sections: str, sweep_keys=()) -> Dict[str, Any]:
    schema = copy.deepcopy(CONFIG_SCHEMA)
    schema["required"] = ["architecture", *sections]
    if sweep_keys:
        schema["properties"]["sweep"]["required"] = list(sweep_keys)
    return schema


BOUND_COMMAND_SCHEMA = _requiring()
MC_INIT_COMMAND_SCHEMA = _requiring()
TRAIN_COMMAND_SCHEMA = _requiring("data")
SWEEP_COMMAND_SCHEMA = _requiring("sweep", sweep_keys=("width", "depths"))

COMMAND_SCHEMAS = {
    "bound": BOUND_COMMAND_SCHEMA,
    "mc-init": MC_INIT_COMMAND_SCHEMA,
    "train": TRAIN_COMMAND_SCHEMA,
    "sweep": SWEEP_COMMAND_SCHEMA,
}


def get_schema_for_command(command: str) -> Optional[Dict[str, Any]]:
    """Schema for a subcommand's config file, ``None`` if it takes no config."""
    return COMMAND_SCHEMAS.get(command)


_PROBABILITY = {"type": "number", "minimum": 0, "maximum": 1}
_FLOAT_OR_STR = {"type": ["number", "string"]}

BOUND_REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "arch": ARCHITECTURE_SCHEMA,
        "activation": {"type": "object"},
        "distribution": {"type": "object"},
        "window": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
        "gamma": _NUMBER,
        "layer1_bound": _PROBABILITY,
        "deep_bound": _PROBABILITY,
        "combined_bound": _PROBABILITY,
        "diagnostics": {
            "type": "object",
            "properties": {
                "flat_lo_is_minus_infinity": {"type": "boolean"},
                "chi_condition": {"type": "boolean"},
                "window_valid": {"type": "boolean"},
                "window_margin_ok": {"type": "boolean"},
                "rho": _FLOAT_OR_STR,
            },
            "required": ["flat_lo_is_minus_infinity", "chi_condition", "window_valid", "rho"],
        },
    },
    "required": ["schema_version", "arch", "layer1_bound", "deep_bound", "combined_bound", "diagnostics"],
}

MC_INIT_SUMMARY_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"const": "mc-init"},
        "seed": _NON_NEGATIVE_INT,
        "trials": _POSITIVE_INT,
        "layer1_window_freq": _PROBABILITY,
        "layer_freqs": {"type": "array", "items": _PROBABILITY},
        "union_freq": _PROBABILITY,
        "witness_freq": _PROBABILITY,
        "layer1_bound": _PROBABILITY,
        "deep_bound": _PROBABILITY,
        "combined_bound": _PROBABILITY,
    },
    "required": [
        "schema_version", "command", "seed", "trials", "layer_freqs",
        "union_freq", "witness_freq", "layer1_bound", "deep_bound", "combined_bound",
    ],
}

TRAIN_SUMMARY_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"const": "train"},
        "seed": _NON_NEGATIVE_INT,
        "trials": _POSITIVE_INT,
        "frequency": {
            "type": "object",
            "properties": {
                "freq": _PROBABILITY,
                "ci_halfwidth": {"type": "number", "minimum": 0},
                "analytic_bound": _PROBABILITY,
                "applicable": {"type": "boolean"},
            },
            "required": ["freq", "ci_halfwidth", "analytic_bound", "applicable"],
        },
        "gap_estimator": {
            "type": "object",
            "properties": {
                "delta": _FLOAT_OR_STR,
                "steps": {"type": "array", "items": _NON_NEGATIVE_INT},
                "estimates": {"type": "array", "items": _NUMBER},
                "running_inf": {"type": "array", "items": _NUMBER},
            },
            "required": ["delta", "steps", "estimates", "running_inf"],
        },
    },
    "required": ["schema_version", "command", "seed", "trials", "frequency", "gap_estimator"],
}

SWEEP_SUMMARY_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"const": "sweep"},
        "seed": _NON_NEGATIVE_INT,
        "rows": {"type": "array", "items": {"type": "object"}, "minItems": 1},
        "hypothesis": {"type": ["object", "null"]},
        "trend_ok": {"type": "boolean"},
    },
    "required": ["schema_version", "command", "seed", "rows", "trend_ok"],
}

OUTPUT_SCHEMAS = {
    "bound": BOUND_REPORT_SCHEMA,
    "mc-init": MC_INIT_SUMMARY_SCHEMA,
    "train": TRAIN_SUMMARY_SCHEMA,
    "sweep": SWEEP_SUMMARY_SCHEMA,
}
