#!/usr/bin/env python3
"""
Command-line front end.

    nonconv bound    CONFIG              analytic bounds and hypothesis diagnostics
    nonconv mc-init  CONFIG [--trials]   certified-inactivity frequencies at initialization
    nonconv train    CONFIG [--trials]   training trials, non-convergence frequency, gap estimator
    nonconv sweep    CONFIG [--trials]   frequencies and bounds along a list of depths
    nonconv selftest                     invariant suite as a pass/fail table

Results go to stdout (``--format json`` or ``csv``) and, with ``--out-dir``,
to ``<command>.json`` / ``<command>.csv`` plus SVG figures. Logs go to stderr.
Errors are printed to stderr as the JSON error envelope; the exit code is 2
for config and validation errors, 3 when a bound's hypotheses fail and 4 for
internal failures.
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import jsonschema
import numpy as np

from config import load_validated_config, resolve_seed, resolve_trials
from error_handler import InvariantViolationError, get_exit_code_for_error, handle_exception
from experiments import (
    SWEEP_COLUMNS,
    TRIAL_COLUMNS,
    ExperimentConfig,
    depth_hypothesis_check,
    depth_sweep_experiment,
    gap_expectation_estimator,
    mc_init_frequency,
    run_trials,
    summarize_nonconvergence,
    sweep_constants,
)
from init_inactivity import bound_report, depth_sweep_bound
from plotting import plot_depth_sweep, plot_risk_traces
from random_streams import default_threads
from schemas import OUTPUT_SCHEMAS, SCHEMA_VERSION
from selftest import format_table, run_selftest
from structured_logging import configure_logging, create_correlation_id, get_logger

logger = get_logger("cli")


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, tuples to lists, infinities to strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def render_json(document: Dict[str, Any]) -> str:
    return json.dumps(_plain(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row.get(c, "") for c in columns})
    return buffer.getvalue()


def check_document(command: str, document: Dict[str, Any]) -> Dict[str, Any]:
    """Validate an output document against its schema before anything is written."""
    plain = _plain(document)
    try:
        jsonschema.validate(plain, OUTPUT_SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise InvariantViolationError(
            f"{command} output does not match its schema: {exc.message}",
            {"command": command, "path": [str(p) for p in exc.absolute_path]},
        ) from exc
    return plain


def emit(args: argparse.Namespace, command: str, document: Dict[str, Any], rows: List[Dict[str, Any]], columns: Sequence[str]) -> None:
    document = check_document(command, document)
    json_text = render_json(document)
    csv_text = render_csv(rows, columns)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{command}.json").write_text(json_text, encoding="utf-8")
        (out_dir / f"{command}.csv").write_text(csv_text, encoding="utf-8")
        logger.info("results written", command=command, out_dir=str(out_dir))
    sys.stdout.write(csv_text if args.format == "csv" else json_text)


def _prepare(args: argparse.Namespace, command: str) -> Dict[str, Any]:
    config = load_validated_config(command, args.config)
    seed = resolve_seed(getattr(args, "seed", None), config)
    config.setdefault("experiment", {})["seed"] = seed
    return config


def cmd_bound(args: argparse.Namespace) -> int:
    config = _prepare(args, "bound")
    cfg = ExperimentConfig(config)
    report = bound_report(cfg.act, cfg.init, cfg.inputs).to_record()
    report["schema_version"] = SCHEMA_VERSION
    sweep = cfg.sweep
    if "p" in sweep and "width" in sweep and "depths" in sweep:
        width, depths, p = int(sweep["width"]), list(sweep["depths"]), float(sweep["p"])
        eps, c_const, p_limit = sweep_constants(cfg)
        report["depth_sweep"] = [
            {"depth": L, "bound": b} for L, b in depth_sweep_bound(
                width, depths, p, cfg.act.inf_bound, c_const, eps, p_limit
            )
        ]
        report["depth_hypothesis"] = depth_hypothesis_check(width, depths, p, cfg.act.inf_bound, eps, c_const)
    rows = [
        {"quantity": name, "value": repr(float(report[name]))}
        for name in ("layer1_bound", "deep_bound", "combined_bound")
    ]
    emit(args, "bound", report, rows, ("quantity", "value"))
    return 0


MC_INIT_COLUMNS = ("quantity", "freq", "ci", "bound")


def cmd_mc_init(args: argparse.Namespace) -> int:
    config = _prepare(args, "mc-init")
    seed = config["experiment"]["seed"]
    trials = resolve_trials(args.trials, config)
    summary = mc_init_frequency(config, trials, seed, args.threads)
    document = summary.to_record()
    document.update({"schema_version": SCHEMA_VERSION, "command": "mc-init", "seed": seed})
    rows = [
        {
            "quantity": "layer1_window",
            "freq": repr(summary.layer1_window_freq),
            "ci": repr(summary.ci(summary.layer1_window_freq)),
            "bound": repr(summary.layer1_bound),
        }
    ]
    for k, freq in enumerate(summary.layer_freqs, start=1):
        rows.append({"quantity": f"layer{k}_certified", "freq": repr(freq), "ci": repr(summary.ci(freq)), "bound": ""})
    rows.append(
        {
            "quantity": "deep_witness",
            "freq": repr(summary.witness_freq),
            "ci": repr(summary.ci(summary.witness_freq)),
            "bound": repr(summary.deep_bound),
        }
    )
    rows.append(
        {
            "quantity": "union_certified",
            "freq": repr(summary.union_freq),
            "ci": repr(summary.ci(summary.union_freq)),
            "bound": repr(summary.combined_bound),
        }
    )
    emit(args, "mc-init", document, rows, MC_INIT_COLUMNS)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _prepare(args, "train")
    seed = config["experiment"]["seed"]
    trials = resolve_trials(args.trials, config)
    cfg = ExperimentConfig(config)
    records = run_trials(config, trials, seed, args.threads)
    frequency = summarize_nonconvergence(cfg, records)
    delta = cfg.training.get("delta", math.inf)
    delta = math.inf if delta in (None, "inf") else float(delta)
    gap = gap_expectation_estimator(records, delta, frequency.reference_optimum)
    document = {
        "schema_version": SCHEMA_VERSION,
        "command": "train",
        "seed": seed,
        "trials": trials,
        "method": cfg.method,
        "arch": list(cfg.arch.widths),
        "frequency": frequency.to_record(),
        "gap_estimator": {
            "delta": delta,
            "steps": list(gap.steps),
            "estimates": list(gap.estimates),
            "std_errors": list(gap.std_errors),
            "running_inf": list(gap.running_inf),
        },
        "dead_at_init_trials": sum(1 for r in records if r.certified_dead_layer is not None),
    }
    emit(args, "train", document, [r.to_row() for r in records], TRIAL_COLUMNS)
    if args.out_dir:
        plot_risk_traces(records, Path(args.out_dir) / "risk_traces.svg")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _prepare(args, "sweep")
    seed = config["experiment"]["seed"]
    trials = resolve_trials(args.trials, config)
    sweep = config["sweep"]
    result = depth_sweep_experiment(
        config,
        int(sweep["width"]),
        list(sweep["depths"]),
        trials,
        seed,
        args.threads,
        int(sweep.get("train_steps", 0)),
    )
    document = result.to_record()
    document.update({"schema_version": SCHEMA_VERSION, "command": "sweep", "seed": seed, "trials": trials})
    emit(args, "sweep", document, [row.to_row() for row in result.rows], SWEEP_COLUMNS)
    if args.out_dir:
        plot_depth_sweep(result.rows, Path(args.out_dir) / "depth_sweep.svg")
    return 0


def cmd_selftest(args: argparse.Namespace) -> int:
    results = run_selftest()
    sys.stdout.write(format_table(results) + "\n")
    return 0 if all(r.passed for r in results) else 4


COMMANDS = {
    "bound": cmd_bound,
    "mc-init": cmd_mc_init,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonconv", description="Dead-layer non-convergence analyzer")
    parser.add_argument("--log-level", default="INFO", help="DEBUG, INFO, WARNING, ERROR or CRITICAL")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("bound", "analytic dead-layer probability bounds"),
        ("mc-init", "Monte Carlo inactivity frequencies at initialization"),
        ("train", "training trials and non-convergence frequency"),
        ("sweep", "frequencies and bounds along a list of depths"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="YAML experiment config")
        cmd.add_argument("--format", choices=("json", "csv"), default="json")
        cmd.add_argument("--out-dir", default=None, help="also write results and figures here")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--trials", type=int, default=None)
        cmd.add_argument("--threads", type=int, default=None, help="worker processes (default: physical cores)")

    sub.add_parser("selftest", help="run the invariant suite")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    if getattr(args, "threads", None) is None and args.command != "selftest":
        args.threads = default_threads()
    correlation_id = create_correlation_id()
    log = logger.with_correlation_id(correlation_id)
    log.debug("command started", command=args.command)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        response = handle_exception(exc, {"command": args.command, "correlation_id": correlation_id})
        sys.stderr.write(json.dumps(_plain(response), sort_keys=True) + "\n")
        return get_exit_code_for_error(response["error"]["code"])


if __name__ == "__main__":
    sys.exit(main())
