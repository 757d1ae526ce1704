#!/usr/bin/env python3
"""
History-dependent update rules ``Θ_n = Φ_n(Θ_0..Θ_{n-1}, g_1..g_n)``.

Every shipped method is a constant-memory state-space realization: the
state holds the step counter and per-coordinate accumulators, and
``step`` maps ``(state, θ, g)`` to ``(new state, new θ)`` without mutating
its inputs. All of them leave a coordinate untouched as long as its gradient
history is identically zero.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, Union

import numpy as np

from ann_core import ParamVector
from error_handler import ValidationError
from random_streams import stream
from structured_logging import get_logger

logger = get_logger("optimizers")


class LearningRateSchedule:
    """``γ_n`` for ``n >= 1``: ``constant`` (γ), ``inverse`` (γ/n) or an explicit ``list``."""

    def __init__(self, kind: str = "constant", value: Optional[float] = None, values: Optional[Sequence[float]] = None):
        if kind in ("constant", "inverse"):
            if value is None or not value > 0:
                raise ValidationError(f"{kind} schedule needs a positive value", {"field": "optimizer.lr.value"})
            self.value = float(value)
            self.values: Tuple[float, ...] = ()
        elif kind == "list":
            if not values or any(not v > 0 for v in values):
                raise ValidationError("list schedule needs positive values", {"field": "optimizer.lr.values"})
            self.value = None
            self.values = tuple(float(v) for v in values)
        else:
            raise ValidationError(f"Unknown learning-rate schedule: {kind}", {"field": "optimizer.lr.schedule"})
        self.kind = kind

    @classmethod
    def from_config(cls, section: Union[float, Dict[str, Any]]) -> "LearningRateSchedule":
        if isinstance(section, (int, float)):
            return cls("constant", float(section))
        return cls(section.get("schedule", "constant"), section.get("value"), section.get("values"))

    def rate(self, n: int) -> float:
        if n < 1:
            raise ValidationError("Step index starts at 1", {"field": "n"})
        if self.kind == "constant":
            return self.value
        if self.kind == "inverse":
            return self.value / n
        if n > len(self.values):
            raise ValidationError(
                f"Learning-rate list has {len(self.values)} entries, step {n} requested",
                {"field": "optimizer.lr.values"},
            )
        return self.values[n - 1]

    def __len__(self) -> int:
        return len(self.values) if self.kind == "list" else 2**63 - 1

    def to_record(self) -> Dict[str, Any]:
        if self.kind == "list":
            return {"schedule": "list", "values": list(self.values)}
        return {"schedule": self.kind, "value": self.value}


@dataclass(frozen=True)
class OptimizerState:
    """Step counter and per-coordinate accumulators of one training run."""

    method: str
    n: int = 0
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def fresh(cls, method: str, dim: int, names: Sequence[str]) -> "OptimizerState":
        return cls(method, 0, {name: np.zeros(dim) for name in names})


def _check_unit(name: str, value: float, closed_low: bool = True) -> float:
    value = float(value)
    ok = (0.0 <= value < 1.0) if closed_low else (0.0 < value < 1.0)
    if not ok:
        raise ValidationError(f"{name} must lie in {'[0, 1)' if closed_low else '(0, 1)'}", {"field": f"optimizer.hyperparams.{name}"})
    return value


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0:
        raise ValidationError(f"{name} must be positive", {"field": f"optimizer.hyperparams.{name}"})
    return value


class Optimizer(ABC):
    """Base class; subclasses implement ``_delta`` on plain arrays."""

    name = "optimizer"
    accumulator_names: Tuple[str, ...] = ()
    experimental = False

    def __init__(self, lr: Union[LearningRateSchedule, float] = 0.01):
        self.lr = lr if isinstance(lr, LearningRateSchedule) else LearningRateSchedule("constant", lr)

    def init_state(self, dim: int) -> OptimizerState:
        return OptimizerState.fresh(self.name, dim, self.accumulator_names)

    @abstractmethod
    def _delta(self, acc: Dict[str, np.ndarray], g: np.ndarray, n: int, gamma: float) -> np.ndarray:
        """Update ``acc`` in place (it is a private copy) and return ``θ_{n-1} - θ_n``."""

    def step(
        self, state: OptimizerState, theta: Union[ParamVector, np.ndarray], grad: np.ndarray
    ) -> Tuple[OptimizerState, Union[ParamVector, np.ndarray]]:
        values = theta.theta if isinstance(theta, ParamVector) else np.asarray(theta, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != values.shape:
            raise ValidationError(
                f"Gradient has shape {grad.shape}, parameters have {values.shape}",
                {"field": "grad", "expected": list(values.shape)},
            )
        n = state.n + 1
        acc = {name: arr.copy() for name, arr in state.accumulators.items()}
        delta = self._delta(acc, grad, n, self.lr.rate(n))
        new_values = values - delta
        new_state = OptimizerState(state.method, n, acc)
        if isinstance(theta, ParamVector):
            return new_state, theta.replace(new_values)
        return new_state, new_values

    def hyperparams(self) -> Dict[str, float]:
        return {}

    def to_record(self) -> Dict[str, Any]:
        return {"method": self.name, "lr": self.lr.to_record(), "hyperparams": self.hyperparams()}


class SGD(Optimizer):
    name = "sgd"

    def _delta(self, acc, g, n, gamma):
        return gamma * g


class Momentum(Optimizer):
    """``v_n = β v_{n-1} + g_n``, ``θ_n = θ_{n-1} - γ_n v_n``."""

    name = "momentum"
    accumulator_names = ("velocity",)

    def __init__(self, lr=0.01, beta: float = 0.9):
        super().__init__(lr)
        self.beta = _check_unit("beta", beta)

    def _delta(self, acc, g, n, gamma):
        acc["velocity"] = self.beta * acc["velocity"] + g
        return gamma * acc["velocity"]

    def hyperparams(self):
        return {"beta": self.beta}


class Nesterov(Optimizer):
    """Lookahead form: ``v_n = β v_{n-1} + g_n``, ``θ_n = θ_{n-1} - γ_n (g_n + β v_n)``."""

    name = "nesterov"
    accumulator_names = ("velocity",)

    def __init__(self, lr=0.01, beta: float = 0.9):
        super().__init__(lr)
        self.beta = _check_unit("beta", beta)

    def _delta(self, acc, g, n, gamma):
        acc["velocity"] = self.beta * acc["velocity"] + g
        return gamma * (g + self.beta * acc["velocity"])

    def hyperparams(self):
        return {"beta": self.beta}


class Adagrad(Optimizer):
    name = "adagrad"
    accumulator_names = ("sum_sq",)

    def __init__(self, lr=0.01, eps: float = 1e-10):
        super().__init__(lr)
        self.eps = _check_positive("eps", eps)

    def _delta(self, acc, g, n, gamma):
        acc["sum_sq"] = acc["sum_sq"] + g * g
        return gamma * g / (np.sqrt(acc["sum_sq"]) + self.eps)

    def hyperparams(self):
        return {"eps": self.eps}


class RMSprop(Optimizer):
    name = "rmsprop"
    accumulator_names = ("mean_sq",)

    def __init__(self, lr=0.01, rho: float = 0.9, eps: float = 1e-8):
        super().__init__(lr)
        self.rho = _check_unit("rho", rho)
        self.eps = _check_positive("eps", eps)

    def _delta(self, acc, g, n, gamma):
        acc["mean_sq"] = self.rho * acc["mean_sq"] + (1.0 - self.rho) * g * g
        return gamma * g / (np.sqrt(acc["mean_sq"]) + self.eps)

    def hyperparams(self):
        return {"rho": self.rho, "eps": self.eps}


class Adadelta(Optimizer):
    """Step ``Δ = sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g``, scaled by ``γ_n`` (1 recovers the plain method)."""

    name = "adadelta"
    accumulator_names = ("mean_sq", "mean_step_sq")

    def __init__(self, lr=1.0, rho: float = 0.95, eps: float = 1e-6):
        super().__init__(lr)
        self.rho = _check_unit("rho", rho)
        self.eps = _check_positive("eps", eps)

    def _delta(self, acc, g, n, gamma):
        acc["mean_sq"] = self.rho * acc["mean_sq"] + (1.0 - self.rho) * g * g
        step = np.sqrt(acc["mean_step_sq"] + self.eps) / np.sqrt(acc["mean_sq"] + self.eps) * g
        acc["mean_step_sq"] = self.rho * acc["mean_step_sq"] + (1.0 - self.rho) * step * step
        return gamma * step

    def hyperparams(self):
        return {"rho": self.rho, "eps": self.eps}


class Adam(Optimizer):
    """Bias-corrected moments; ``ε`` is added outside the square root."""

    name = "adam"
    accumulator_names = ("m", "v")

    def __init__(self, lr=0.001, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1 = _check_unit("beta1", beta1)
        self.beta2 = _check_unit("beta2", beta2)
        self.eps = _check_positive("eps", eps)

    def _moments(self, acc, g, n):
        acc["m"] = self.beta1 * acc["m"] + (1.0 - self.beta1) * g
        acc["v"] = self.beta2 * acc["v"] + (1.0 - self.beta2) * g * g
        return acc["m"] / (1.0 - self.beta1**n), acc["v"] / (1.0 - self.beta2**n)

    def _delta(self, acc, g, n, gamma):
        m_hat, v_hat = self._moments(acc, g, n)
        return gamma * m_hat / (np.sqrt(v_hat) + self.eps)

    def hyperparams(self):
        return {"beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


class Adamax(Adam):
    """Infinity-norm variant: ``u_n = max(β₂ u_{n-1}, |g_n|)``."""

    name = "adamax"
    accumulator_names = ("m", "u")

    def __init__(self, lr=0.002, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr, beta1, beta2, eps)

    def _delta(self, acc, g, n, gamma):
        acc["m"] = self.beta1 * acc["m"] + (1.0 - self.beta1) * g
        acc["u"] = np.maximum(self.beta2 * acc["u"], np.abs(g))
        return gamma / (1.0 - self.beta1**n) * acc["m"] / (acc["u"] + self.eps)


class AMSGrad(Adam):
    """Adam with the running maximum of the second moment in the denominator."""

    name = "amsgrad"
    accumulator_names = ("m", "v", "v_max")

    def _delta(self, acc, g, n, gamma):
        m_hat, _ = self._moments(acc, g, n)
        acc["v_max"] = np.maximum(acc["v_max"], acc["v"])
        v_max_hat = acc["v_max"] / (1.0 - self.beta2**n)
        return gamma * m_hat / (np.sqrt(v_max_hat) + self.eps)


class Nadam(Adam):
    """Adam with a Nesterov-corrected first moment. Experimental."""

    name = "nadam"
    experimental = True

    def _delta(self, acc, g, n, gamma):
        m_hat, v_hat = self._moments(acc, g, n)
        lookahead = self.beta1 * m_hat + (1.0 - self.beta1) * g / (1.0 - self.beta1**n)
        return gamma * lookahead / (np.sqrt(v_hat) + self.eps)


class Nadamax(Adam):
    """Adamax with a Nesterov-corrected first moment. Experimental."""

    name = "nadamax"
    accumulator_names = ("m", "u")
    experimental = True

    def __init__(self, lr=0.002, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr, beta1, beta2, eps)

    def _delta(self, acc, g, n, gamma):
        acc["m"] = self.beta1 * acc["m"] + (1.0 - self.beta1) * g
        acc["u"] = np.maximum(self.beta2 * acc["u"], np.abs(g))
        m_hat = acc["m"] / (1.0 - self.beta1**n)
        lookahead = self.beta1 * m_hat + (1.0 - self.beta1) * g / (1.0 - self.beta1**n)
        return gamma * lookahead / (acc["u"] + self.eps)


OPTIMIZERS: Dict[str, Type[Optimizer]] = {
    cls.name: cls
    for cls in (SGD, Momentum, Nesterov, Adagrad, RMSprop, Adadelta, Adam, Adamax, AMSGrad, Nadam, Nadamax)
}

SHIPPED_METHODS: Tuple[str, ...] = tuple(name for name, cls in OPTIMIZERS.items() if not cls.experimental)


def make_optimizer(method: str, lr: Union[LearningRateSchedule, float, Dict[str, Any], None] = None, **hyperparams: Any) -> Optimizer:
    """Instantiate a method by name; unknown hyperparameters are a validation error."""
    if method not in OPTIMIZERS:
        raise ValidationError(
            f"Unknown optimizer method: {method}",
            {"field": "optimizer.method", "known": sorted(OPTIMIZERS)},
        )
    cls = OPTIMIZERS[method]
    kwargs: Dict[str, Any] = dict(hyperparams)
    if lr is not None:
        kwargs["lr"] = lr if isinstance(lr, LearningRateSchedule) else LearningRateSchedule.from_config(lr)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(
            f"Invalid hyperparameters for {method}: {exc}",
            {"field": "optimizer.hyperparams", "given": sorted(hyperparams)},
        ) from exc


def verify_phi_condition(
    method: Union[str, Optimizer],
    hyperparams: Optional[Dict[str, Any]] = None,
    trials: int = 1000,
    seed: int = 0,
    max_steps: int = 50,
) -> bool:
    """
    Simulate random histories and check the dead-coordinate condition bitwise.

    In each trial a random nonempty subset of coordinates gets gradient 0 at
    every step. Whenever a coordinate's full gradient history is zero and its
    parameter history is constant, the next iterate must leave it
    bit-identical. The full history is kept for the check.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1", {"field": "trials"})
    schedule = method.lr if isinstance(method, Optimizer) else None
    if schedule is None and "lr" in (hyperparams or {}):
        schedule = LearningRateSchedule.from_config(hyperparams["lr"])
    if schedule is not None and len(schedule) < max_steps:
        raise ValidationError(
            f"Learning-rate list has {len(schedule)} entries, histories run up to {max_steps} steps",
            {"field": "optimizer.lr.values", "entries": len(schedule), "max_steps": max_steps},
        )
    rng = stream(seed, "phi-check")
    hyperparams = dict(hyperparams or {})
    label = method if isinstance(method, str) else method.name
    for trial in range(trials):
        dim = int(rng.integers(2, 9))
        n_steps = int(rng.integers(1, max_steps + 1))
        dead = rng.random(dim) < 0.5
        dead[int(rng.integers(dim))] = True
        if isinstance(method, Optimizer):
            optimizer = method
        else:
            lr = hyperparams.get("lr", {"schedule": "list", "values": rng.uniform(1e-3, 1.0, n_steps).tolist()})
            params = {k: v for k, v in hyperparams.items() if k != "lr"}
            optimizer = make_optimizer(method, lr, **params)

        thetas: List[np.ndarray] = [rng.standard_normal(dim)]
        grads: List[np.ndarray] = []
        state = optimizer.init_state(dim)
        for _ in range(n_steps):
            g = rng.standard_normal(dim)
            g[dead] = 0.0
            grads.append(g)
            state, theta = optimizer.step(state, thetas[-1], g)
            thetas.append(theta)

            g_hist = np.array(grads)
            th_hist = np.array(thetas[:-1])
            zero_grads = np.all(g_hist == 0.0, axis=0)
            constant = np.all(th_hist.view(np.int64) == th_hist[0].view(np.int64), axis=0)
            held = zero_grads & constant
            moved = thetas[-1].view(np.int64) != thetas[-2].view(np.int64)
            if np.any(held & moved):
                logger.warning(
                    "dead-coordinate condition violated",
                    method=label,
                    trial=trial,
                    step=len(grads),
                    coordinates=np.flatnonzero(held & moved).tolist(),
                )
                return False
    logger.debug("dead-coordinate condition holds", method=label, trials=trials)
    return True
