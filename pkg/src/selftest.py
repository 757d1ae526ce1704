#!/usr/bin/env python3
"""
Invariant suite behind ``nonconv selftest``.

Each check returns ``CheckResult(name, passed, detail)``. Checks draw their
randomness from fixed stream keys so the table is reproducible.
"""

from typing import Callable, List, NamedTuple

import numpy as np

from activation import clip, invariant_report, relu, repu
from ann_core import Architecture, ParamVector, embed_scalar_chain, forward_batch, scalar_chain
from autodiff import (
    central_difference,
    finite_difference_gradient,
    generalized_gradient,
    mollified_gradient,
    mollifier_threshold,
)
from experiments import ExperimentConfig, risk_improvement_witness
from init_inactivity import (
    BoundInputs,
    InitDistribution,
    NormalLaw,
    certified_inactive_masks,
    deep_layer_bound,
    deep_witness_mask,
    layer1_bound,
    layer1_certified_mask,
)
from loss_risk import Batch, Loss, weighted_risk
from optimizers import SGD, SHIPPED_METHODS, verify_phi_condition
from random_streams import stream
from reference import path_product_gradient
from structured_logging import get_logger

logger = get_logger("selftest")

SELFTEST_SEED = 20_241
PHI_TRIALS = 1000


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str = ""


class DriftingSGD(SGD):
    """SGD that adds ``γ·1e-8`` to every coordinate. Violates the dead-coordinate condition."""

    name = "drifting-sgd"

    def _delta(self, acc, g, n, gamma):
        return gamma * g - gamma * 1e-8


def check_activations() -> List[CheckResult]:
    results = []
    for act in (relu(), clip(-1.0, 1.0), repu(2), repu(3)):
        for name, passed in invariant_report(act):
            results.append(CheckResult(f"activation {act!r} {name}", passed))
    return results


def check_phi_conditions() -> List[CheckResult]:
    results = [
        CheckResult(f"phi-condition {method}", verify_phi_condition(method, trials=PHI_TRIALS, seed=SELFTEST_SEED))
        for method in SHIPPED_METHODS
    ]
    violated = not verify_phi_condition(DriftingSGD(0.1), trials=PHI_TRIALS, seed=SELFTEST_SEED)
    results.append(CheckResult("phi-condition negative control rejected", violated))
    return results


def check_dead_gradients(n_samples: int = 1000) -> List[CheckResult]:
    """Gradient coordinates of layers ``1..k`` are exact zeros whenever layer ``k`` is certified inactive."""
    arch = Architecture((2, 3, 3, 2))
    box = (0.0, 1.0)
    # Biases centred at -2 make inactive layers common.
    init = InitDistribution(NormalLaw(), {(k, "biases"): NormalLaw(1.0, 2.0) for k in range(1, arch.depth + 1)})
    results = []
    for act in (relu(), clip(0.0, 1.0)):
        rng = stream(SELFTEST_SEED, "init", 0)
        thetas = init.sample_many(arch, rng, n_samples)
        masks = certified_inactive_masks(thetas, arch, act, box)
        data_rng = stream(SELFTEST_SEED, "data", 0)
        checked, failures = 0, 0
        for i in np.flatnonzero(np.any(masks, axis=1)):
            theta = ParamVector(thetas[i], arch)
            k = int(np.max(np.flatnonzero(masks[i]))) + 1
            batch = Batch(data_rng.uniform(*box, size=(8, 2)), data_rng.standard_normal((8, 2)))
            grad = generalized_gradient(theta, batch, Loss.mse(), act)
            checked += 1
            if not np.all(grad[: arch.prefix_count(k)] == 0.0):
                failures += 1
        results.append(
            CheckResult(f"dead-gradient exactness {act!r}", checked > 0 and failures == 0, f"{checked} certified")
        )
    return results


def check_gradient_oracle(cases: int = 200) -> List[CheckResult]:
    """Backprop against central differences on a C¹ activation."""
    arch = Architecture((2, 3, 1))
    act = repu(2)
    rng = stream(SELFTEST_SEED, "evaluation", 0)
    worst = 0.0
    for _ in range(cases):
        theta = InitDistribution.standard_normal().sample(arch, rng)
        batch = Batch(rng.uniform(0.0, 1.0, size=(5, 2)), rng.standard_normal((5, 1)))
        grad = generalized_gradient(theta, batch, Loss.mse(), act)
        fd = finite_difference_gradient(theta, batch, Loss.mse(), act, 1e-6)
        worst = max(worst, float(np.max(np.abs(grad - fd)) / max(1.0, float(np.max(np.abs(grad))))))
    return [CheckResult("gradient vs finite differences (repu 2)", worst < 1e-5, f"max rel err {worst:.2e}")]


def check_path_products(cases: int = 20) -> List[CheckResult]:
    """Backprop against explicit sums over neuron paths, kinks included."""
    arch = Architecture((2, 3, 2, 1))
    rng = stream(SELFTEST_SEED, "evaluation", 2)
    results = []
    for act in (relu(), clip(-1.0, 1.0)):
        worst = 0.0
        for _ in range(cases):
            theta = InitDistribution.standard_normal().sample(arch, rng)
            batch = Batch(rng.uniform(0.0, 1.0, size=(4, 2)), rng.standard_normal((4, 1)))
            grad = generalized_gradient(theta, batch, Loss.mse(), act)
            expected = path_product_gradient(arch.widths, theta.theta, act, act.gen_deriv, batch.X, batch.Y)
            worst = max(worst, float(np.max(np.abs(grad - expected))))
        results.append(CheckResult(f"gradient vs path products {act!r}", worst < 1e-10, f"max abs err {worst:.2e}"))
    return results


def check_index_maps() -> List[CheckResult]:
    """Flat indices address the same entries as the per-layer views and cover the vector once."""
    results = []
    for widths in ((2, 3, 1), (1, 2, 3, 1), (3, 2, 2, 2)):
        arch = Architecture(widths)
        theta = ParamVector(np.arange(1, arch.param_count + 1, dtype=np.float64), arch)
        seen = []
        ok = True
        for k in range(1, arch.depth + 1):
            W, b = theta.weights(k), theta.bias(k)
            for i in range(1, widths[k] + 1):
                for j in range(1, widths[k - 1] + 1):
                    index = arch.weight_index(k, i, j)
                    ok &= W[i - 1, j - 1] == index
                    seen.append(index)
                index = arch.bias_index(k, i)
                ok &= b[i - 1] == index
                seen.append(index)
        ok &= sorted(seen) == list(range(1, arch.param_count + 1))
        results.append(CheckResult(f"parameter index map {widths}", bool(ok)))
    return results


def check_loss_gradients(cases: int = 50, step: float = 1e-6) -> List[CheckResult]:
    """``Loss.grad_pred`` against central differences of ``Loss.value``."""
    rng = stream(SELFTEST_SEED, "evaluation", 3)
    results = []
    for loss in (Loss.mse(), Loss.from_psi("sqrt_shift"), Loss.from_psi("log_shift")):
        worst = 0.0
        for _ in range(cases):
            pred, target = rng.standard_normal(2), rng.standard_normal(2)
            fd = central_difference(lambda p: float(loss.value(p, target)), pred, step)
            worst = max(worst, float(np.max(np.abs(loss.grad_pred(pred, target) - fd))))
        label = loss.psi.name if loss.psi is not None else "mse"
        results.append(CheckResult(f"loss gradient {label}", worst < 1e-6, f"max abs err {worst:.2e}"))
    return results


def check_scalar_chain_embedding(cases: int = 20) -> List[CheckResult]:
    """Embedded parameters realize ``y + r·e·N^{L-2}(w·x + z)``."""
    arch = Architecture((1, 2, 2, 2, 1))
    rng = stream(SELFTEST_SEED, "evaluation", 4)
    results = []
    for act in (relu(), clip(-1.0, 1.0)):
        worst = 0.0
        for _ in range(cases):
            r = float(rng.uniform(0.5, 2.0))
            w, z = rng.standard_normal(1), float(rng.standard_normal())
            eta, zeta = rng.standard_normal(2).tolist(), rng.standard_normal(2).tolist()
            y, e = rng.standard_normal(1), rng.standard_normal(1)
            theta = embed_scalar_chain(arch, r, w, z, eta, zeta, y, e)
            X = rng.uniform(-3.0, 3.0, size=(16, 1))
            expected = y[0] + r * e[0] * scalar_chain(act, eta, zeta, w[0] * X[:, 0] + z)
            worst = max(worst, float(np.max(np.abs(forward_batch(theta, act, X).output[:, 0] - expected))))
        results.append(CheckResult(f"scalar chain embedding {act!r}", worst < 1e-12, f"max abs err {worst:.2e}"))
    return results


def check_layer1_certificates(n_samples: int = 5000, inputs_per_theta: int = 64) -> List[CheckResult]:
    """
    Layer-1 window certificates are sound: a certified layer is interval
    certified inactive and stays inside the window on sampled inputs. The
    certified frequency is at least the layer-1 bound up to 4σ.
    """
    arch = Architecture((2, 3, 1))
    act = relu()
    box = (0.0, 1.0)
    # Biases near -1.5 and small weights put most layers in the default window (-2, -1).
    init = InitDistribution(NormalLaw(10.0), {(1, "biases"): NormalLaw(4.0, 6.0)})
    inputs = BoundInputs.from_activation(act, arch, box)
    eta, zeta = inputs.window
    thetas = init.sample_many(arch, stream(SELFTEST_SEED, "init", 2), n_samples)
    window_mask = layer1_certified_mask(thetas, arch, inputs.window, box)
    dead_mask = certified_inactive_masks(thetas, arch, act, box)[:, 0]

    rng = stream(SELFTEST_SEED, "falsifier", 0)
    escaped = 0
    for i in np.flatnonzero(window_mask)[:200]:
        X = rng.uniform(*box, size=(inputs_per_theta, arch.input_dim))
        pre = forward_batch(ParamVector(thetas[i], arch), act, X).pre_activations[0]
        escaped += int(not np.all((pre > eta) & (pre < zeta)))

    bound = layer1_bound(init, inputs)
    freq = float(np.mean(window_mask))
    sigma4 = 4.0 * np.sqrt(bound * (1.0 - bound) / n_samples)
    return [
        CheckResult("layer-1 certificate implies inactive layer", bool(np.all(dead_mask[window_mask]))),
        CheckResult("layer-1 certificate holds on sampled inputs", escaped == 0, f"{int(window_mask.sum())} certified"),
        CheckResult("layer-1 certified frequency above bound", freq >= bound - sigma4, f"{freq:.4f} vs {bound:.4f}"),
    ]


def _coin_config(widths, act_section) -> dict:
    return {
        "architecture": list(widths),
        "activation": dict(act_section),
        "box": [0.0, 1.0],
        "data": {"kind": "discrete", "atoms": [{"x": 0.0, "y": 0.0, "p": 0.5}, {"x": 1.0, "y": 1.0, "p": 0.5}]},
    }


def check_dead_risk_floor(n_samples: int = 2000) -> List[CheckResult]:
    """A certified-inactive hidden layer keeps the risk at or above the best constant risk."""
    results = []
    for widths in ((1, 2, 1), (1, 2, 2, 1)):
        cfg = ExperimentConfig(_coin_config(widths, {"name": "relu"}))
        init = InitDistribution(NormalLaw(), {(k, "biases"): NormalLaw(1.0, 1.0) for k in range(1, cfg.arch.depth + 1)})
        thetas = init.sample_many(cfg.arch, stream(SELFTEST_SEED, "init", 3), n_samples)
        dead = np.any(certified_inactive_masks(thetas, cfg.arch, cfg.act, cfg.box), axis=1)
        X, Y, probs = cfg.evaluation_set()
        best = cfg.best_constant()
        risks = [weighted_risk(ParamVector(t, cfg.arch), X, Y, probs, cfg.loss, cfg.act) for t in thetas[dead]]
        lowest = min(risks) if risks else float("nan")
        results.append(
            CheckResult(
                f"certified-dead risk >= best constant {widths}",
                bool(risks) and lowest >= best - 1e-12,
                f"{len(risks)} dead, min risk {lowest:.4f}",
            )
        )
    return results


def check_risk_improvement() -> List[CheckResult]:
    """On data with ``Y = X`` some network beats the best constant risk 0.25."""
    results = []
    cases = (
        ((1, 1, 1), {"name": "relu"}),
        ((1, 2, 2, 1), {"name": "relu"}),
        ((1, 2, 2, 1), {"name": "clip", "u": 0.0, "v": 1.0}),
    )
    for widths, act_section in cases:
        witness = risk_improvement_witness(_coin_config(widths, act_section))
        passed = witness is not None and witness.improves
        detail = f"risk {witness.risk:.2e} vs {witness.best_constant:.2f}" if witness is not None else "no chain"
        results.append(CheckResult(f"risk below best constant {act_section['name']} {widths}", passed, detail))
    return results


def check_mollifier_exactness() -> List[CheckResult]:
    arch = Architecture((1, 3, 1))
    act = relu()
    rng = stream(SELFTEST_SEED, "evaluation", 1)
    theta = InitDistribution.standard_normal().sample(arch, rng)
    batch = Batch(rng.uniform(0.0, 1.0, size=(6, 1)), rng.standard_normal((6, 1)))
    threshold = mollifier_threshold(theta, batch.X, act) or 1
    exact = all(
        np.array_equal(mollified_gradient(theta, batch, Loss.mse(), act, r), generalized_gradient(theta, batch, Loss.mse(), act))
        for r in (threshold, 2 * threshold, 10 * threshold)
    )
    return [CheckResult("mollified gradient exact beyond threshold", exact, f"R = {threshold}")]


def check_deep_bound(n_samples: int = 20_000) -> List[CheckResult]:
    """Witness-set frequency matches the deep-layer product within 4σ."""
    arch = Architecture((1, 1, 1, 1))
    act = relu()
    init = InitDistribution.standard_normal()
    inputs = BoundInputs.from_activation(act, arch, (0.0, 1.0))
    bound = deep_layer_bound(init, inputs)
    thetas = init.sample_many(arch, stream(SELFTEST_SEED, "init", 1), n_samples)
    freq = float(np.mean(deep_witness_mask(thetas, inputs)))
    sigma4 = 4.0 * np.sqrt(bound * (1.0 - bound) / n_samples)
    return [
        CheckResult("deep bound (1,1,1,1) equals 0.25", abs(bound - 0.25) < 1e-12, f"{bound:.6f}"),
        CheckResult("deep witness frequency within 4 sigma", abs(freq - bound) <= sigma4, f"{freq:.4f}"),
    ]


CHECKS: List[Callable[[], List[CheckResult]]] = [
    check_activations,
    check_phi_conditions,
    check_dead_gradients,
    check_index_maps,
    check_loss_gradients,
    check_gradient_oracle,
    check_path_products,
    check_scalar_chain_embedding,
    check_mollifier_exactness,
    check_layer1_certificates,
    check_deep_bound,
    check_dead_risk_floor,
    check_risk_improvement,
]


def run_selftest() -> List[CheckResult]:
    results: List[CheckResult] = []
    for check in CHECKS:
        batch = check()
        for result in batch:
            if not result.passed:
                logger.error("selftest check failed", check=result.name, detail=result.detail)
        results.extend(batch)
    logger.info("selftest finished", checks=len(results), failed=sum(not r.passed for r in results))
    return results


def format_table(results: List[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  result  detail", f"{'-' * width}  ------  ------"]
    for r in results:
        lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL':6}  {r.detail}".rstrip())
    return "\n".join(lines)
