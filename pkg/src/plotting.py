#!/usr/bin/env python3
"""
SVG figures for training and sweep results.

Figures are rendered with the Agg backend, a fixed SVG hash salt and no date
metadata, so the same results always give the same bytes.
"""

from pathlib import Path
from typing import List, Sequence, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

from structured_logging import get_logger  # noqa: E402

logger = get_logger("plotting")

SVG_RC = {"svg.hashsalt": "nonconvergence-analyzer", "svg.fonttype": "none"}
MAX_TRACES = 50


def _save(fig: Figure, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("figure written", path=str(path))
    return path


def plot_risk_traces(records: Sequence, path: Union[str, Path], title: str = "Risk along training") -> List[List[float]]:
    """
    One line per trial (at most ``MAX_TRACES``), dead-at-init trials in red.

    Returns the plotted y-values of each line.
    """
    fig = Figure(figsize=(7, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    plotted = []
    for record in list(records)[:MAX_TRACES]:
        steps = [n for n, _ in record.risk_trace]
        risks = [r for _, r in record.risk_trace]
        dead = record.certified_dead_layer is not None
        ax.plot(steps, risks, color="tab:red" if dead else "tab:blue", alpha=0.6, linewidth=1)
        plotted.append(risks)
    ax.set_xlabel("step")
    ax.set_ylabel("risk")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)
    return plotted


def plot_depth_sweep(rows: Sequence, path: Union[str, Path]) -> List[float]:
    """Witness-set frequency with 3σ bars against depth, analytic deep bound overlaid."""
    depths = [row.depth for row in rows]
    freqs = [row.witness_freq for row in rows]
    fig = Figure(figsize=(7, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    ax.errorbar(depths, freqs, yerr=[row.witness_ci for row in rows], fmt="o", capsize=3, label="empirical")
    ax.plot(depths, [row.deep_bound for row in rows], "-", color="black", label="deep-layer bound")
    if any(row.sweep_bound is not None for row in rows):
        ax.plot(
            depths,
            [row.sweep_bound if row.sweep_bound is not None else float("nan") for row in rows],
            "--",
            color="gray",
            label="depth-sweep bound",
        )
    if any(row.nonconvergence_freq is not None for row in rows):
        ax.plot(
            depths,
            [row.nonconvergence_freq if row.nonconvergence_freq is not None else float("nan") for row in rows],
            "s",
            color="tab:red",
            label="non-convergence",
        )
    ax.set_xscale("log")
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("depth L")
    ax.set_ylabel("frequency")
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3, which="both")
    _save(fig, path)
    return freqs
