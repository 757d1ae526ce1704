#!/usr/bin/env python3
"""
Monte Carlo experiments.

Work units (training trials, blocks of initializations) receive the plain
config dict plus ``(seed, index)`` and rebuild every object themselves, so a
result depends only on the config and the seed, never on which process ran
it or how many processes there were.
"""

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from activation import ActivationFamily, activation_from_name
from ann_core import (
    Architecture,
    ParamVector,
    embed_scalar_chain,
    forward_batch,
    nonconstant_chain_parameters,
    scalar_chain,
)
from autodiff import generalized_gradient
from error_handler import InvariantViolationError, ValidationError
from init_inactivity import (
    BoundInputs,
    InitDistribution,
    Inactivity,
    NormalLaw,
    ScaledLaw,
    admissible_p_limit,
    certified_inactive_masks,
    certify_layer_inactive,
    combined_bound,
    deep_layer_bound,
    deep_witness_mask,
    depth_sweep_bound,
    divergence_sequence,
    layer1_bound,
    layer1_certified_mask,
    sweep_q,
)
from loss_risk import (
    AffineTargetDistribution,
    DataDistribution,
    Loss,
    TeacherNetworkDistribution,
    best_constant_risk,
    check_psi_nondegeneracy,
    check_target_nondegeneracy,
    distribution_from_config,
    estimate_best_constant_risk,
    loss_from_config,
    weighted_risk,
)
from optimizers import Optimizer, make_optimizer
from random_streams import parallel_map, stream
from structured_logging import get_logger

logger = get_logger("experiments")

RISK_FLOOR_TOLERANCE = 1e-10
OUTPUT_SPREAD_TOLERANCE = 1e-9
DEFAULT_BLOCK_SIZE = 10_000

DEFAULT_TRAINING = {
    "steps": 100,
    "batch_size": 8,
    "log_every": 10,
    "eval_samples": 4096,
    "falsifier_samples": 256,
}


def _sigma3(freq: float, n: int) -> float:
    return 3.0 * math.sqrt(max(freq * (1.0 - freq), 0.0) / n) if n > 0 else math.inf


class ExperimentConfig:
    """Objects built from a validated config dict."""

    def __init__(self, config: Dict[str, Any]):
        self.raw = copy.deepcopy(config)
        self.arch = Architecture(tuple(config["architecture"]))
        act_section = dict(config.get("activation", {"name": "relu"}))
        self.act: ActivationFamily = activation_from_name(act_section.pop("name"), **act_section)
        box = config.get("box", [0.0, 1.0])
        self.box: Tuple[float, float] = (float(box[0]), float(box[1]))
        self.init = InitDistribution.from_config(config.get("init"))
        self.init.check_architecture(self.arch)
        bound = config.get("bound", {}) or {}
        window = bound.get("window")
        self.inputs = BoundInputs.from_activation(
            self.act,
            self.arch,
            self.box,
            window=tuple(window) if window is not None else None,
            gamma=bound.get("gamma"),
            chi=bound.get("chi"),
        )
        self.loss: Loss = loss_from_config(config.get("loss"))
        data = config.get("data")
        self.dist: Optional[DataDistribution] = (
            distribution_from_config(data, self.box, self.act) if data is not None else None
        )
        if self.dist is not None and (
            self.dist.input_dim != self.arch.input_dim or self.dist.output_dim != self.arch.output_dim
        ):
            raise ValidationError(
                "Data dimensions do not match the architecture",
                {"field": "data", "input_dim": self.dist.input_dim, "output_dim": self.dist.output_dim},
            )
        opt = config.get("optimizer", {}) or {}
        self.method = opt.get("method", "sgd")
        self.optimizer: Optimizer = make_optimizer(
            self.method, opt.get("lr", {"schedule": "constant", "value": 0.1}), **(opt.get("hyperparams") or {})
        )
        self.training = dict(DEFAULT_TRAINING)
        self.training.update(config.get("training", {}) or {})
        experiment = config.get("experiment", {}) or {}
        self.trials = int(experiment.get("trials", 100))
        self.seed = int(experiment.get("seed", 0))
        self.block_size = int(experiment.get("block_size", DEFAULT_BLOCK_SIZE))
        self.sweep = config.get("sweep", {}) or {}

    @classmethod
    def from_dict(cls, config: Union[Dict[str, Any], "ExperimentConfig"]) -> "ExperimentConfig":
        return config if isinstance(config, ExperimentConfig) else cls(config)

    def require_data(self) -> DataDistribution:
        if self.dist is None:
            raise ValidationError("This command needs a data section", {"field": "data"})
        return self.dist

    def evaluation_set(self) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
        """Exact support when available, else a fixed sample from evaluation stream 0."""
        dist = self.require_data()
        support = dist.exact_support
        if support is not None:
            return support
        n = int(self.training["eval_samples"])
        batch = dist.sample(stream(self.seed, "evaluation", 0), n)
        return batch.X, batch.Y, None

    def best_constant(self) -> float:
        dist = self.require_data()
        if dist.exact_support is not None:
            return best_constant_risk(dist, self.loss)[1]
        n = int(self.training["eval_samples"])
        return estimate_best_constant_risk(dist, self.loss, stream(self.seed, "evaluation", 1), n)[1]

    def reference_optimum(self) -> float:
        """
        ``inf_θ`` of the true risk: the configured value, else the realizable
        noise floor, else the trivial lower bound (0 for squared error, ψ(0)).
        """
        value = self.training.get("reference_optimum")
        if value is not None:
            return float(value)
        floor = self.require_data().noise_floor(self.loss)
        if floor is not None:
            return float(floor)
        return 0.0 if self.loss.psi is None else float(self.loss.psi.fn(0.0))

    def gap_margin(self) -> float:
        """Configured margin, else half the best-constant minus optimum gap."""
        value = self.training.get("gap_margin")
        if value is not None:
            return float(value)
        return 0.5 * (self.best_constant() - self.reference_optimum())


@dataclass
class TrialRecord:
    seed: int
    trial: int
    arch: Tuple[int, ...]
    method: str
    dead_at_init: Tuple[str, ...]
    risk_trace: Tuple[Tuple[int, float], ...]
    final_gap: float
    frozen_prefix_ok: Optional[bool]
    dead_at_end: Tuple[str, ...]

    @property
    def certified_dead_layer(self) -> Optional[int]:
        """Deepest hidden layer certified inactive at initialization."""
        dead = [k + 1 for k, verdict in enumerate(self.dead_at_init) if verdict == Inactivity.INACTIVE.value]
        return max(dead) if dead else None

    @property
    def min_risk(self) -> float:
        return min(r for _, r in self.risk_trace)

    @property
    def final_risk(self) -> float:
        return self.risk_trace[-1][1]

    def to_row(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "trial": self.trial,
            "arch": "-".join(str(w) for w in self.arch),
            "method": self.method,
            "dead_at_init": "|".join(self.dead_at_init),
            "dead_at_end": "|".join(self.dead_at_end),
            "certified_dead_layer": self.certified_dead_layer or 0,
            "frozen_prefix_ok": "" if self.frozen_prefix_ok is None else str(self.frozen_prefix_ok).lower(),
            "initial_risk": repr(self.risk_trace[0][1]),
            "min_risk": repr(self.min_risk),
            "final_risk": repr(self.final_risk),
            "final_gap": repr(self.final_gap),
        }


TRIAL_COLUMNS = (
    "seed",
    "trial",
    "arch",
    "method",
    "dead_at_init",
    "dead_at_end",
    "certified_dead_layer",
    "frozen_prefix_ok",
    "initial_risk",
    "min_risk",
    "final_risk",
    "final_gap",
)


def _dead_verdicts(theta: ParamVector, cfg: ExperimentConfig, rng: np.random.Generator) -> Tuple[str, ...]:
    n_samples = int(cfg.training["falsifier_samples"])
    return tuple(
        certify_layer_inactive(theta, k, cfg.act, cfg.box, rng, n_samples).value
        for k in range(1, cfg.arch.depth)
    )


def run_training_trial(
    config: Union[Dict[str, Any], ExperimentConfig], seed: int, trial: int = 0
) -> TrialRecord:
    """
    One training run from a fresh initialization.

    Risk is logged at step 0, every ``log_every`` steps and at the last step.
    If layer ``k`` is certified inactive at initialization, coordinates of
    layers ``1..k`` are compared bitwise after every step and every logged
    risk must stay above the best-constant floor on exact-support data.
    """
    cfg = ExperimentConfig.from_dict(config)
    dist = cfg.require_data()
    arch = cfg.arch
    theta = cfg.init.sample(arch, stream(seed, "init", trial))
    dead_at_init = _dead_verdicts(theta, cfg, stream(seed, "falsifier", 2 * trial))
    dead_layers = [k + 1 for k, v in enumerate(dead_at_init) if v == Inactivity.INACTIVE.value]
    prefix_len = arch.prefix_count(max(dead_layers)) if dead_layers else 0
    prefix = theta.theta[:prefix_len].copy()

    X_eval, Y_eval, w_eval = cfg.evaluation_set()
    floor = None
    if dead_layers and dist.exact_support is not None and (cfg.loss.psi is None or arch.output_dim == 1):
        floor = best_constant_risk(dist, cfg.loss)[1]

    steps = int(cfg.training["steps"])
    log_every = int(cfg.training["log_every"])
    batch_size = int(cfg.training["batch_size"])
    data_rng = stream(seed, "data", trial)
    optimizer = cfg.optimizer
    state = optimizer.init_state(arch.param_count)
    trial_log = logger.bind(seed=seed, trial=trial, method=cfg.method)

    def log_risk(n: int) -> Tuple[int, float]:
        output = forward_batch(theta, cfg.act, X_eval).output
        losses = cfg.loss.value(output, Y_eval)
        risk = float(np.mean(losses)) if w_eval is None else float(np.dot(w_eval, losses))
        if not math.isfinite(risk):
            raise InvariantViolationError(
                "Risk became non-finite during training",
                {"seed": seed, "trial": trial, "step": n},
            )
        if dead_layers:
            spread = float(np.max(np.ptp(output, axis=0)))
            if spread > OUTPUT_SPREAD_TOLERANCE * (1.0 + float(np.max(np.abs(output)))):
                raise InvariantViolationError(
                    "Network with an inactive layer produced input-dependent output",
                    {"seed": seed, "trial": trial, "step": n, "spread": spread},
                )
        if floor is not None and risk < floor - RISK_FLOOR_TOLERANCE:
            raise InvariantViolationError(
                "Dead network dropped below the best-constant risk",
                {"seed": seed, "trial": trial, "step": n, "risk": risk, "floor": floor},
            )
        return n, risk

    trace: List[Tuple[int, float]] = [log_risk(0)]
    for n in range(1, steps + 1):
        batch = dist.sample(data_rng, batch_size)
        grad = generalized_gradient(theta, batch, cfg.loss, cfg.act)
        state, theta = optimizer.step(state, theta, grad)
        if prefix_len and not np.array_equal(theta.theta[:prefix_len], prefix):
            raise InvariantViolationError(
                "Coordinates of a certified inactive prefix moved",
                {"seed": seed, "trial": trial, "step": n, "prefix_len": prefix_len},
            )
        if n % log_every == 0 or n == steps:
            trace.append(log_risk(n))

    dead_at_end = _dead_verdicts(theta, cfg, stream(seed, "falsifier", 2 * trial + 1))
    optimum = cfg.reference_optimum()
    record = TrialRecord(
        seed=seed,
        trial=trial,
        arch=arch.widths,
        method=cfg.method,
        dead_at_init=dead_at_init,
        risk_trace=tuple(trace),
        final_gap=min(r for _, r in trace) - optimum,
        frozen_prefix_ok=True if prefix_len else None,
        dead_at_end=dead_at_end,
    )
    trial_log.debug("trial finished", final_gap=record.final_gap, dead_layers=dead_layers)
    return record


def _trial_worker(args: Tuple[Dict[str, Any], int, int]) -> TrialRecord:
    config, seed, trial = args
    return run_training_trial(config, seed, trial)


def run_trials(config: Dict[str, Any], n_trials: int, seed: int, threads: Optional[int] = 1) -> List[TrialRecord]:
    if n_trials < 1:
        raise ValidationError("trials must be >= 1", {"field": "experiment.trials"})
    logger.info("running training trials", trials=n_trials, seed=seed, threads=threads)
    return parallel_map(_trial_worker, [(config, seed, i) for i in range(n_trials)], threads)


def target_nondegenerate(cfg: ExperimentConfig) -> bool:
    """``P(E[Y|X] = E[Y]) < 1`` (and its ψ analogue for ψ-losses)."""
    dist = cfg.require_data()
    if dist.exact_support is not None:
        if cfg.loss.psi is not None:
            _, Y, _ = dist.exact_support
            return check_psi_nondegeneracy(dist, cfg.loss, np.unique(Y))
        return check_target_nondegeneracy(dist)
    if isinstance(dist, AffineTargetDistribution):
        return bool(np.any(dist.slope != 0.0))
    if isinstance(dist, TeacherNetworkDistribution):
        X, _, _ = cfg.evaluation_set()
        return bool(np.ptp(dist.target(X)) > 1e-12)
    return True


IMPROVEMENT_TOLERANCE = 1e-12
CHAIN_POINTS = (1.0, -1.0, 0.5, -0.5, 2.0, -2.0)


@dataclass
class RiskImprovement:
    theta: ParamVector
    risk: float
    best_constant: float

    @property
    def improves(self) -> bool:
        return self.risk < self.best_constant - IMPROVEMENT_TOLERANCE


def risk_improvement_witness(config: Union[Dict[str, Any], ExperimentConfig]) -> Optional[RiskImprovement]:
    """
    Parameters whose risk lies strictly below the best constant risk when
    the target depends on ``x``.

    A non-constant scalar chain ``f`` runs through neuron 1 of every hidden
    layer and the output is the least-squares fit ``ȳ + e·(f - f̄)`` with
    ``e = Cov(Y, f) / Var(f)``, lowering the squared-error risk on the
    evaluation set by ``‖Cov(Y, f)‖² / Var(f)``. The first-layer direction
    and shift with the largest reduction win. ``None`` when no chain of the
    required depth is non-constant.
    """
    cfg = ExperimentConfig.from_dict(config)
    X, Y, weights = cfg.evaluation_set()
    chain = nonconstant_chain_parameters(cfg.act, cfg.arch.depth - 2, CHAIN_POINTS)
    if chain is None:
        return None
    eta, zeta = chain
    probs = np.full(X.shape[0], 1.0 / X.shape[0]) if weights is None else weights
    mean_y = probs @ Y
    center = 0.5 * (cfg.box[0] + cfg.box[1])
    best = None
    for i in range(cfg.arch.input_dim):
        for sign in (1.0, -1.0):
            w = np.zeros(cfg.arch.input_dim)
            w[i] = sign
            for shift in np.linspace(-4.0, 4.0, 33):
                z = float(shift - sign * center)
                f = scalar_chain(cfg.act, eta, zeta, X @ w + z)
                mean_f = float(probs @ f)
                var = float(probs @ (f - mean_f) ** 2)
                if var <= 0.0:
                    continue
                cov = probs @ ((f - mean_f)[:, None] * (Y - mean_y))
                gain = float(cov @ cov) / var
                if best is None or gain > best[0]:
                    best = (gain, w, z, cov / var, mean_f)
    if best is None:
        return None
    _, w, z, e, mean_f = best
    theta = embed_scalar_chain(cfg.arch, 1.0, w, z, eta, zeta, mean_y - e * mean_f, e)
    result = RiskImprovement(theta, weighted_risk(theta, X, Y, weights, cfg.loss, cfg.act), cfg.best_constant())
    logger.info(
        "risk improvement witness",
        risk=result.risk,
        best_constant=result.best_constant,
        improves=result.improves,
    )
    return result


def equivalence_statistics(gaps: Sequence[float], delta: float, eps: float) -> Dict[str, float]:
    """``P(X > 0)``, ``P(X > ε)``, ``E[X]`` and ``E[min(δ, X)]`` over gap samples."""
    if not delta > 0:
        raise ValidationError("delta must lie in (0, inf]", {"field": "training.delta"})
    x = np.asarray(gaps, dtype=np.float64)
    return {
        "p_positive": float(np.mean(x > 0)),
        "p_above_eps": float(np.mean(x > eps)),
        "mean_gap": float(np.mean(x)),
        "mean_truncated_gap": float(np.mean(np.minimum(delta, x))),
        "eps": float(eps),
        "delta": delta if math.isfinite(delta) else "inf",
    }


@dataclass
class FrequencyResult:
    freq: float
    ci_halfwidth: float
    analytic_bound: float
    applicable: bool
    n_trials: int
    nonconverged: int
    margin: float
    reference_optimum: float
    best_constant: float
    equivalence: Dict[str, Any] = field(default_factory=dict)

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.freq, self.ci_halfwidth, self.analytic_bound

    def to_record(self) -> Dict[str, Any]:
        return asdict(self)


def summarize_nonconvergence(cfg: ExperimentConfig, records: Sequence[TrialRecord]) -> FrequencyResult:
    optimum = cfg.reference_optimum()
    margin = cfg.gap_margin()
    if not margin > 0:
        raise ValidationError("gap margin must be positive", {"field": "training.gap_margin", "margin": margin})
    applicable = target_nondegenerate(cfg)
    if not applicable:
        logger.warning("target is degenerate, non-convergence claims do not apply")
    gaps = [r.final_gap for r in records]
    nonconverged = sum(1 for g in gaps if g > margin)
    n = len(records)
    freq = nonconverged / n
    delta = cfg.training.get("delta", math.inf)
    delta = math.inf if delta in (None, "inf") else float(delta)
    return FrequencyResult(
        freq=freq,
        ci_halfwidth=_sigma3(freq, n),
        analytic_bound=combined_bound(cfg.init, cfg.inputs),
        applicable=applicable,
        n_trials=n,
        nonconverged=nonconverged,
        margin=margin,
        reference_optimum=optimum,
        best_constant=cfg.best_constant(),
        equivalence=equivalence_statistics(gaps, delta, margin),
    )


def nonconvergence_frequency(
    config: Dict[str, Any], n_trials: int, seed: int, threads: Optional[int] = 1
) -> FrequencyResult:
    """Fraction of trials whose best logged risk stays more than the margin above the optimum."""
    cfg = ExperimentConfig.from_dict(config)
    records = run_trials(cfg.raw, n_trials, seed, threads)
    return summarize_nonconvergence(cfg, records)


@dataclass
class GapEstimate:
    steps: Tuple[int, ...]
    estimates: Tuple[float, ...]
    std_errors: Tuple[float, ...]
    running_inf: Tuple[float, ...]

    @property
    def value(self) -> float:
        return self.running_inf[-1]


def gap_expectation_estimator(records: Sequence[TrialRecord], delta: float, reference_optimum: float) -> GapEstimate:
    """
    ``E[min(δ, |risk_n - inf risk|)]`` at every logged step, with its running infimum.

    All records must share the logging schedule. ``δ`` lies in ``(0, ∞]``.
    """
    if not delta > 0:
        raise ValidationError("delta must lie in (0, inf]", {"field": "training.delta", "delta": delta})
    if not records:
        raise ValidationError("Need at least one trial record", {"field": "records"})
    steps = tuple(n for n, _ in records[0].risk_trace)
    if any(tuple(n for n, _ in r.risk_trace) != steps for r in records):
        raise ValidationError("Records use different logging schedules", {"field": "records"})
    risks = np.array([[risk for _, risk in r.risk_trace] for r in records])
    clipped = np.minimum(delta, np.abs(risks - reference_optimum))
    estimates = clipped.mean(axis=0)
    std_errors = clipped.std(axis=0, ddof=1) / math.sqrt(len(records)) if len(records) > 1 else np.zeros_like(estimates)
    return GapEstimate(
        steps=steps,
        estimates=tuple(float(v) for v in estimates),
        std_errors=tuple(float(v) for v in std_errors),
        running_inf=tuple(float(v) for v in np.minimum.accumulate(estimates)),
    )


@dataclass
class McInitSummary:
    n: int
    layer1_window_freq: float
    layer_freqs: Tuple[float, ...]
    union_freq: float
    witness_freq: float
    layer1_bound: float
    deep_bound: float
    combined_bound: float

    def ci(self, freq: float) -> float:
        return _sigma3(freq, self.n)

    def to_record(self) -> Dict[str, Any]:
        return {
            "trials": self.n,
            "layer1_window_freq": self.layer1_window_freq,
            "layer1_window_ci": self.ci(self.layer1_window_freq),
            "layer_freqs": list(self.layer_freqs),
            "union_freq": self.union_freq,
            "union_ci": self.ci(self.union_freq),
            "witness_freq": self.witness_freq,
            "witness_ci": self.ci(self.witness_freq),
            "layer1_bound": self.layer1_bound,
            "deep_bound": self.deep_bound,
            "combined_bound": self.combined_bound,
        }


def _mc_block(args: Tuple[Dict[str, Any], int, int, int]) -> Dict[str, Any]:
    config, seed, block, size = args
    cfg = ExperimentConfig.from_dict(config)
    thetas = cfg.init.sample_many(cfg.arch, stream(seed, "init", block), size)
    layer_masks = certified_inactive_masks(thetas, cfg.arch, cfg.act, cfg.box)
    return {
        "n": size,
        "window": int(np.sum(layer1_certified_mask(thetas, cfg.arch, cfg.inputs.window, cfg.box))),
        "layers": [int(c) for c in np.sum(layer_masks, axis=0)],
        "union": int(np.sum(np.any(layer_masks, axis=1))) if layer_masks.shape[1] else 0,
        "witness": int(np.sum(deep_witness_mask(thetas, cfg.inputs))),
    }


def mc_init_frequency(
    config: Dict[str, Any], n_trials: int, seed: int, threads: Optional[int] = 1
) -> McInitSummary:
    """
    Certified-inactivity frequencies over ``n_trials`` initializations next to the analytic bounds.

    Initializations are drawn in blocks of ``experiment.block_size``, block
    ``i`` from init stream ``i``; the block layout depends only on ``n_trials``.
    """
    cfg = ExperimentConfig.from_dict(config)
    if n_trials < 1:
        raise ValidationError("trials must be >= 1", {"field": "experiment.trials"})
    cfg.inputs.validate()
    sizes = [cfg.block_size] * (n_trials // cfg.block_size)
    if n_trials % cfg.block_size:
        sizes.append(n_trials % cfg.block_size)
    counts = parallel_map(_mc_block, [(cfg.raw, seed, i, s) for i, s in enumerate(sizes)], threads)
    n_hidden = cfg.arch.depth - 1
    layers = [sum(c["layers"][k] for c in counts) for k in range(n_hidden)]
    summary = McInitSummary(
        n=n_trials,
        layer1_window_freq=sum(c["window"] for c in counts) / n_trials,
        layer_freqs=tuple(v / n_trials for v in layers),
        union_freq=sum(c["union"] for c in counts) / n_trials,
        witness_freq=sum(c["witness"] for c in counts) / n_trials,
        layer1_bound=layer1_bound(cfg.init, cfg.inputs),
        deep_bound=deep_layer_bound(cfg.init, cfg.inputs),
        combined_bound=combined_bound(cfg.init, cfg.inputs),
    )
    logger.info("mc-init finished", trials=n_trials, union_freq=summary.union_freq)
    return summary


def sweep_architecture(input_dim: int, width: int, depth: int, output_dim: int) -> Tuple[int, ...]:
    """``(ℓ_0, l, ..., l, ℓ_L)`` with ``depth - 1`` hidden layers of width ``l``."""
    if depth < 1:
        raise ValidationError("depths must be >= 1", {"field": "sweep.depths"})
    return (input_dim,) + (width,) * (depth - 1) + (output_dim,)


DEFAULT_SWEEP_EPS = 1.0
UNIT_SCALE_C = 2.0


def sweep_law(cfg: ExperimentConfig) -> Optional[ScaledLaw]:
    """
    The single scaled law every coordinate follows (a centred normal counts,
    with scale σ); ``None`` with overrides or any other law.
    """
    law = cfg.init.default
    if cfg.init.overrides:
        return None
    if isinstance(law, NormalLaw) and law.mu == 0.0:
        return ScaledLaw("norm", law.sigma)
    return law if isinstance(law, ScaledLaw) else None


def sweep_c_const(cfg: ExperimentConfig) -> float:
    """
    ``c`` of the depth-sweep bound: ``scale + 1/scale`` for a scaled law, or
    the configured ``sweep.c_const``, which may not undercut that value.
    """
    configured = cfg.sweep.get("c_const")
    law = sweep_law(cfg)
    if law is None:
        return float(configured) if configured is not None else UNIT_SCALE_C
    minimum = law.scale + 1.0 / law.scale
    if configured is None:
        return minimum
    if float(configured) < minimum * (1.0 - 1e-12):
        raise ValidationError(
            f"sweep.c_const = {configured} is below scale + 1/scale = {minimum}",
            {"field": "sweep.c_const", "c_const": float(configured), "minimum": minimum},
        )
    return float(configured)


def sweep_p_limit(cfg: ExperimentConfig, eps: float, c_const: Optional[float] = None) -> Optional[float]:
    """Admissible limit for ``sweep.p`` under ``sweep_law``; ``None`` without one."""
    law = sweep_law(cfg)
    if law is None:
        return None
    if c_const is None:
        c_const = sweep_c_const(cfg)
    return admissible_p_limit(law, cfg.act.inf_bound, cfg.inputs.gamma, eps, c_const)


def sweep_constants(cfg: ExperimentConfig) -> Tuple[float, float, Optional[float]]:
    """``(eps, c, p_limit)`` for the depth-sweep bound of this config."""
    eps = float(cfg.sweep.get("eps", DEFAULT_SWEEP_EPS))
    c_const = sweep_c_const(cfg)
    return eps, c_const, sweep_p_limit(cfg, eps, c_const)


def depth_hypothesis_check(
    width: int, depths: Sequence[int], p: float, inf_bound: float = 0.0, eps: float = 1.0, c_const: float = 2.0
) -> Dict[str, Any]:
    """``L·q^{l(l+1)}`` along the depth list and whether it grows."""
    values = divergence_sequence(width, depths, sweep_q(p, width, inf_bound, eps, c_const))
    return {
        "values": values,
        "nondecreasing": all(b >= a for a, b in zip(values, values[1:])),
        "final": values[-1] if values else 0.0,
    }


@dataclass
class SweepRow:
    depth: int
    arch: Tuple[int, ...]
    trials: int
    witness_freq: float
    dead_freq: float
    deep_bound: float
    combined_bound: float
    sweep_bound: Optional[float] = None
    nonconvergence_freq: Optional[float] = None

    @property
    def witness_ci(self) -> float:
        return _sigma3(self.witness_freq, self.trials)

    @property
    def dead_ci(self) -> float:
        return _sigma3(self.dead_freq, self.trials)

    def to_row(self) -> Dict[str, Any]:
        return {
            "depth": self.depth,
            "arch": "-".join(str(w) for w in self.arch),
            "trials": self.trials,
            "witness_freq": repr(self.witness_freq),
            "witness_ci": repr(self.witness_ci),
            "dead_freq": repr(self.dead_freq),
            "dead_ci": repr(self.dead_ci),
            "deep_bound": repr(self.deep_bound),
            "combined_bound": repr(self.combined_bound),
            "sweep_bound": "" if self.sweep_bound is None else repr(self.sweep_bound),
            "nonconvergence_freq": "" if self.nonconvergence_freq is None else repr(self.nonconvergence_freq),
        }


SWEEP_COLUMNS = (
    "depth",
    "arch",
    "trials",
    "witness_freq",
    "witness_ci",
    "dead_freq",
    "dead_ci",
    "deep_bound",
    "combined_bound",
    "sweep_bound",
    "nonconvergence_freq",
)


@dataclass
class SweepResult:
    rows: List[SweepRow]
    hypothesis: Optional[Dict[str, Any]]
    trend_ok: bool

    def to_record(self) -> Dict[str, Any]:
        return {
            "rows": [row.to_row() for row in self.rows],
            "hypothesis": self.hypothesis,
            "trend_ok": self.trend_ok,
        }


def depth_sweep_experiment(
    config: Dict[str, Any],
    width: int,
    depths: Sequence[int],
    n_trials: int,
    seed: int,
    threads: Optional[int] = 1,
    train_steps: int = 0,
) -> SweepResult:
    """
    Per depth: witness-set and certified-dead frequencies at initialization,
    the analytic deep bound, optionally the depth-sweep bound for
    ``sweep.p`` and, with ``train_steps > 0``, a non-convergence frequency.
    """
    base = ExperimentConfig.from_dict(config)
    p = base.sweep.get("p")
    eps, c_const, p_limit = sweep_constants(base)
    if p is not None:
        sweep_values = dict(
            depth_sweep_bound(width, depths, float(p), base.act.inf_bound, c_const, eps, p_limit)
        )
    rows: List[SweepRow] = []
    for depth in depths:
        sub = copy.deepcopy(base.raw)
        sub["architecture"] = list(sweep_architecture(base.arch.input_dim, width, depth, base.arch.output_dim))
        summary = mc_init_frequency(sub, n_trials, seed, threads)
        nonconv = None
        if train_steps > 0:
            sub.setdefault("training", {})["steps"] = int(train_steps)
            nonconv = nonconvergence_frequency(sub, n_trials, seed, threads).freq
        rows.append(
            SweepRow(
                depth=int(depth),
                arch=tuple(sub["architecture"]),
                trials=n_trials,
                witness_freq=summary.witness_freq,
                dead_freq=summary.union_freq,
                deep_bound=summary.deep_bound,
                combined_bound=summary.combined_bound,
                sweep_bound=sweep_values[int(depth)] if p is not None else None,
                nonconvergence_freq=nonconv,
            )
        )
        logger.info("sweep depth finished", depth=depth, witness_freq=summary.witness_freq)
    trend_ok = all(
        b.witness_freq >= a.witness_freq - (a.witness_ci + b.witness_ci) for a, b in zip(rows, rows[1:])
    )
    hypothesis = (
        depth_hypothesis_check(width, depths, float(p), base.act.inf_bound, eps, c_const) if p is not None else None
    )
    return SweepResult(rows=rows, hypothesis=hypothesis, trend_ok=trend_ok)
