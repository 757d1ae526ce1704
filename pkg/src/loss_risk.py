#!/usr/bin/env python3
"""
Losses, data distributions and risks.

Losses are the squared error ``‖p - y‖²`` and ψ-losses ``ψ(‖p - y‖²)``.
Risks are exact on distributions with a finite support table and Monte Carlo
estimates otherwise.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from ann_core import Architecture, ParamVector, forward_batch
from error_handler import UnsupportedError, ValidationError
from random_streams import stream

PROBABILITY_TOLERANCE = 1e-12
NONDEGENERACY_TOLERANCE = 1e-12


class Psi(NamedTuple):
    """Strictly increasing C¹ ``ψ`` on ``[0, ∞)`` together with ``ψ'``."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]


def _identity(x):
    return np.asarray(x, dtype=np.float64)


def _identity_deriv(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


def _sqrt_shift(x):
    return np.sqrt(np.asarray(x, dtype=np.float64) + 1.0)


def _sqrt_shift_deriv(x):
    return 0.5 / np.sqrt(np.asarray(x, dtype=np.float64) + 1.0)


def _log_shift(x):
    return np.log1p(np.asarray(x, dtype=np.float64))


def _log_shift_deriv(x):
    return 1.0 / (1.0 + np.asarray(x, dtype=np.float64))


PSI_FUNCTIONS: Dict[str, Psi] = {
    "identity": Psi("identity", _identity, _identity_deriv),
    "sqrt_shift": Psi("sqrt_shift", _sqrt_shift, _sqrt_shift_deriv),
    "log_shift": Psi("log_shift", _log_shift, _log_shift_deriv),
}


def get_psi(name: str) -> Psi:
    if name not in PSI_FUNCTIONS:
        raise ValidationError(
            f"Unknown psi function: {name}",
            {"field": "loss.psi", "known": sorted(PSI_FUNCTIONS)},
        )
    return PSI_FUNCTIONS[name]


class Loss:
    """Squared-error (``kind="mse"``) or ψ-loss (``kind="psi"``)."""

    def __init__(self, kind: str = "mse", psi: Union[str, Psi, None] = None):
        if kind not in ("mse", "psi"):
            raise ValidationError(f"Unknown loss kind: {kind}", {"field": "loss.kind"})
        if kind == "psi":
            if psi is None:
                raise ValidationError("A psi loss needs a psi function", {"field": "loss.psi"})
            psi = get_psi(psi) if isinstance(psi, str) else psi
        self.kind = kind
        self.psi: Optional[Psi] = psi if kind == "psi" else None

    @classmethod
    def mse(cls) -> "Loss":
        return cls("mse")

    @classmethod
    def from_psi(cls, psi: Union[str, Psi]) -> "Loss":
        return cls("psi", psi)

    def value(self, pred: np.ndarray, target: np.ndarray) -> np.ndarray:
        """Per-sample loss; the last axis is the output dimension."""
        diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
        sq = np.sum(diff * diff, axis=-1)
        return sq if self.psi is None else self.psi.fn(sq)

    def grad_pred(self, pred: np.ndarray, target: np.ndarray) -> np.ndarray:
        """Per-sample gradient with respect to ``pred``."""
        diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
        if self.psi is None:
            return 2.0 * diff
        sq = np.sum(diff * diff, axis=-1, keepdims=True)
        return 2.0 * self.psi.deriv(sq) * diff

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"kind": self.kind}
        if self.psi is not None:
            record["psi"] = self.psi.name
        return record


class Batch(NamedTuple):
    """Inputs ``X`` of shape ``(M, ℓ_0)`` and targets ``Y`` of shape ``(M, ℓ_L)``."""

    X: np.ndarray
    Y: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[Sequence[float], Sequence[float]]]) -> "Batch":
        if len(pairs) == 0:
            raise ValidationError("Batch must not be empty", {"field": "batch"})
        X = np.array([np.atleast_1d(np.asarray(x, dtype=np.float64)) for x, _ in pairs])
        Y = np.array([np.atleast_1d(np.asarray(y, dtype=np.float64)) for _, y in pairs])
        return cls(X, Y)

    def __len__(self) -> int:
        return self.X.shape[0]


def as_batch(batch: Union[Batch, Sequence[Tuple[Any, Any]]]) -> Batch:
    if isinstance(batch, Batch):
        if batch.X.shape[0] == 0:
            raise ValidationError("Batch must not be empty", {"field": "batch"})
        return batch
    return Batch.from_pairs(list(batch))


class DataDistribution(ABC):
    """Law of ``(X, Y)`` with ``X`` in the box ``[a, b]^{ℓ_0}``."""

    input_dim: int
    output_dim: int
    box: Tuple[float, float]

    @abstractmethod
    def sample(self, rng: np.random.Generator, m: int) -> Batch:
        """Draw ``m`` i.i.d. pairs."""

    @property
    def exact_support(self) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """``(X, Y, probs)`` for finitely supported laws, else ``None``."""
        return None

    def noise_floor(self, loss: Loss) -> Optional[float]:
        """``inf_θ`` of the true risk when the target is realizable, else ``None``."""
        return None

    @abstractmethod
    def to_record(self) -> Dict[str, Any]:
        """Plain description for reports."""


class DiscreteDistribution(DataDistribution):
    """Finite table of atoms ``(x, y, p)``."""

    def __init__(
        self,
        X: Sequence[Sequence[float]],
        Y: Sequence[Sequence[float]],
        probs: Sequence[float],
        box: Optional[Tuple[float, float]] = None,
    ):
        X = np.array(X, dtype=np.float64)
        Y = np.array(Y, dtype=np.float64)
        probs = np.array(probs, dtype=np.float64).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        if not (X.shape[0] == Y.shape[0] == probs.shape[0]) or probs.shape[0] == 0:
            raise ValidationError("Atoms need matching x, y and p entries", {"field": "data.atoms"})
        if np.any(probs < 0) or abs(float(np.sum(probs)) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValidationError(
                "Atom probabilities must be non-negative and sum to 1",
                {"field": "data.atoms", "sum": float(np.sum(probs))},
            )
        if box is None:
            box = (float(np.min(X)), float(np.max(X)))
        a, b = float(box[0]), float(box[1])
        if not a <= b or np.any(X < a) or np.any(X > b):
            raise ValidationError("Atom inputs must lie inside the box", {"field": "box"})
        self.X, self.Y, self.probs = X, Y, probs
        self.box = (a, b)
        self.input_dim = X.shape[1]
        self.output_dim = Y.shape[1]
        self._cdf = np.cumsum(probs)

    @classmethod
    def from_atoms(cls, atoms: Sequence[Dict[str, Any]], box: Optional[Tuple[float, float]] = None):
        return cls(
            [np.atleast_1d(a["x"]) for a in atoms],
            [np.atleast_1d(a["y"]) for a in atoms],
            [a["p"] for a in atoms],
            box,
        )

    def sample(self, rng: np.random.Generator, m: int) -> Batch:
        u = rng.random(m)
        idx = np.minimum(np.searchsorted(self._cdf, u, side="right"), len(self.probs) - 1)
        return Batch(self.X[idx], self.Y[idx])

    @property
    def exact_support(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.X, self.Y, self.probs

    def to_record(self) -> Dict[str, Any]:
        return {"kind": "discrete", "atoms": int(self.probs.shape[0]), "box": list(self.box)}


class TeacherNetworkDistribution(DataDistribution):
    """
    ``X`` uniform on the box, ``Y = teacher(X) + σ·ε`` with standard normal ``ε``.

    The teacher parameters are standard normal draws from the ``teacher``
    stream of ``teacher_seed``. When the student architecture contains the
    teacher's, the noise floor ``σ²·ℓ_L`` is the optimal squared-error risk.
    """

    def __init__(
        self,
        widths: Sequence[int],
        act,
        noise_sigma: float,
        teacher_seed: int,
        box: Tuple[float, float],
    ):
        if noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative", {"field": "data.noise_sigma"})
        self.arch = Architecture(tuple(widths))
        self.act = act
        self.noise_sigma = float(noise_sigma)
        self.teacher_seed = int(teacher_seed)
        self.box = (float(box[0]), float(box[1]))
        rng = stream(self.teacher_seed, "teacher")
        self.theta = ParamVector(rng.standard_normal(self.arch.param_count), self.arch)
        self.input_dim = self.arch.input_dim
        self.output_dim = self.arch.output_dim

    def target(self, X: np.ndarray) -> np.ndarray:
        return forward_batch(self.theta, self.act, X).output

    def sample(self, rng: np.random.Generator, m: int) -> Batch:
        a, b = self.box
        X = rng.uniform(a, b, size=(m, self.input_dim))
        noise = rng.standard_normal((m, self.output_dim))
        return Batch(X, self.target(X) + self.noise_sigma * noise)

    def noise_floor(self, loss: Loss) -> Optional[float]:
        if loss.kind == "mse":
            return self.noise_sigma**2 * self.output_dim
        if self.noise_sigma == 0.0:
            return float(loss.psi.fn(0.0))
        return None

    def to_record(self) -> Dict[str, Any]:
        return {
            "kind": "teacher",
            "widths": list(self.arch.widths),
            "noise_sigma": self.noise_sigma,
            "teacher_seed": self.teacher_seed,
            "box": list(self.box),
        }


class AffineTargetDistribution(DataDistribution):
    """``X`` uniform on the box, ``Y = A·X + c + σ·ε``."""

    def __init__(
        self,
        slope: Sequence[Any],
        intercept: Sequence[float],
        noise_sigma: float,
        box: Tuple[float, float],
    ):
        slope = np.atleast_2d(np.array(slope, dtype=np.float64))
        intercept = np.atleast_1d(np.array(intercept, dtype=np.float64))
        if slope.shape[0] != intercept.shape[0]:
            raise ValidationError("slope rows must match intercept length", {"field": "data.slope"})
        if noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative", {"field": "data.noise_sigma"})
        self.slope = slope
        self.intercept = intercept
        self.noise_sigma = float(noise_sigma)
        self.box = (float(box[0]), float(box[1]))
        self.input_dim = slope.shape[1]
        self.output_dim = slope.shape[0]

    def sample(self, rng: np.random.Generator, m: int) -> Batch:
        a, b = self.box
        X = rng.uniform(a, b, size=(m, self.input_dim))
        noise = rng.standard_normal((m, self.output_dim))
        return Batch(X, X @ self.slope.T + self.intercept + self.noise_sigma * noise)

    def noise_floor(self, loss: Loss) -> Optional[float]:
        if loss.kind == "mse":
            return self.noise_sigma**2 * self.output_dim
        if self.noise_sigma == 0.0:
            return float(loss.psi.fn(0.0))
        return None

    def to_record(self) -> Dict[str, Any]:
        return {
            "kind": "affine",
            "slope": self.slope.tolist(),
            "intercept": self.intercept.tolist(),
            "noise_sigma": self.noise_sigma,
            "box": list(self.box),
        }


def weighted_risk(
    theta: ParamVector,
    X: np.ndarray,
    Y: np.ndarray,
    weights: Optional[np.ndarray],
    loss: Loss,
    act,
    r: int = 0,
) -> float:
    """Risk on a fixed sample; ``weights=None`` means equal weights."""
    losses = loss.value(forward_batch(theta, act, X, r).output, Y)
    if weights is None:
        return float(np.mean(losses))
    return float(np.dot(weights, losses))


def empirical_risk(theta: ParamVector, batch, loss: Loss, act, r: int = 0) -> float:
    """Mean loss over the batch with activation ``A_r`` (``r = 0``: ``A_0``)."""
    batch = as_batch(batch)
    return weighted_risk(theta, batch.X, batch.Y, None, loss, act, r)


def _require_support(dist: DataDistribution) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    support = dist.exact_support
    if support is None:
        raise ValidationError(
            "Operation needs a distribution with exact support",
            {"field": "data.kind", "distribution": dist.to_record().get("kind")},
        )
    return support


def _best_constant(Y: np.ndarray, probs: np.ndarray, loss: Loss) -> Tuple[np.ndarray, float]:
    if loss.kind == "mse":
        z = probs @ Y
        return z, float(probs @ np.sum((Y - z) ** 2, axis=1))
    if Y.shape[1] != 1:
        raise UnsupportedError(
            "Best constant risk for psi losses is only supported for scalar outputs",
            {"field": "loss.psi", "output_dim": int(Y.shape[1])},
        )
    y = Y[:, 0]
    lo, hi = float(np.min(y)), float(np.max(y))

    def risk(z: float) -> float:
        return float(probs @ loss.psi.fn((z - y) ** 2))

    if lo == hi:
        return np.array([lo]), risk(lo)
    # ψ∘square need not be convex; bracket the global minimum on a grid first.
    grid = np.linspace(lo, hi, 201)
    values = np.array([risk(z) for z in grid])
    i = int(np.argmin(values))
    left, right = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    result = minimize_scalar(risk, bounds=(left, right), method="bounded", options={"xatol": 1e-12})
    z_best, v_best = (float(result.x), float(result.fun)) if result.fun <= values[i] else (float(grid[i]), float(values[i]))
    return np.array([z_best]), v_best


def best_constant_risk(dist: DataDistribution, loss: Loss) -> Tuple[np.ndarray, float]:
    """
    Minimizing constant prediction ``z*`` and its risk.

    Squared error: ``z* = E[Y]`` and the value is ``E‖Y - E Y‖²``. ψ-losses
    (scalar output only): bounded Brent search over ``[min Y, max Y]``, which
    contains the minimizer because ψ is increasing.
    """
    _, Y, probs = _require_support(dist)
    return _best_constant(Y, probs, loss)


def estimate_best_constant_risk(
    dist: DataDistribution, loss: Loss, rng: np.random.Generator, n: int
) -> Tuple[np.ndarray, float]:
    """Best constant risk of the empirical law of ``n`` samples."""
    if n < 1:
        raise ValidationError("Need at least one sample", {"field": "n"})
    batch = dist.sample(rng, n)
    return _best_constant(batch.Y, np.full(n, 1.0 / n), loss)


def true_risk_mc(
    theta: ParamVector, dist: DataDistribution, loss: Loss, act, n_samples: int, seed: int
) -> Tuple[float, float]:
    """``(estimate, standard error)``; exact with error 0 on finitely supported laws."""
    support = dist.exact_support
    if support is not None:
        X, Y, probs = support
        return weighted_risk(theta, X, Y, probs, loss, act), 0.0
    if n_samples < 2:
        raise ValidationError("Monte Carlo risk needs at least 2 samples", {"field": "n_samples"})
    batch = dist.sample(stream(seed, "evaluation"), n_samples)
    losses = loss.value(forward_batch(theta, act, batch.X).output, batch.Y)
    return float(np.mean(losses)), float(np.std(losses, ddof=1) / np.sqrt(n_samples))


def _conditional_means(
    X: np.ndarray, Y: np.ndarray, probs: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct x atoms, their probabilities and ``E[Y | X = x]``."""
    xs, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    mass = np.zeros(xs.shape[0])
    np.add.at(mass, inverse, probs)
    weighted = np.zeros((xs.shape[0], Y.shape[1]))
    np.add.at(weighted, inverse, probs[:, None] * Y)
    keep = mass > 0
    return xs[keep], mass[keep], weighted[keep] / mass[keep, None]


def check_target_nondegeneracy(dist: DataDistribution) -> bool:
    """True iff ``E[Y | X]`` differs from ``E[Y]`` on some atom of positive mass."""
    X, Y, probs = _require_support(dist)
    _, _, cond = _conditional_means(X, Y, probs)
    overall = probs @ Y
    return bool(np.any(np.linalg.norm(cond - overall, axis=1) > NONDEGENERACY_TOLERANCE))


def psi_condition_check(psi: Union[str, Psi], grid: Sequence[float]) -> bool:
    """ψ and ``x ↦ ψ'(x)·√x`` strictly increase along the grid."""
    psi = get_psi(psi) if isinstance(psi, str) else psi
    x = np.asarray(grid, dtype=np.float64)
    if x.size < 2 or np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise ValidationError("Grid must be strictly ascending and positive", {"field": "grid"})
    values = np.asarray(psi.fn(x), dtype=np.float64)
    scaled = np.asarray(psi.deriv(x), dtype=np.float64) * np.sqrt(x)
    return bool(np.all(np.diff(values) > 0) and np.all(np.diff(scaled) > 0))


def check_psi_nondegeneracy(dist: DataDistribution, loss: Loss, y_grid: Sequence[float]) -> bool:
    """
    ``E‖E[(y - Y)·ψ'(‖y - Y‖²) | X]‖² > 0`` for every constant ``y`` in the grid.

    Scalar outputs use the grid values directly; vector outputs use each grid
    value on every coordinate.
    """
    X, Y, probs = _require_support(dist)
    xs, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    mass = np.zeros(xs.shape[0])
    np.add.at(mass, inverse, probs)
    keep = mass > 0
    for y in np.asarray(y_grid, dtype=np.float64).reshape(-1):
        diff = y - Y
        sq = np.sum(diff * diff, axis=1)
        slope = np.ones_like(sq) if loss.psi is None else loss.psi.deriv(sq)
        term = diff * slope[:, None]
        cond = np.zeros((xs.shape[0], Y.shape[1]))
        np.add.at(cond, inverse, probs[:, None] * term)
        cond = cond[keep] / mass[keep, None]
        if float(mass[keep] @ np.sum(cond * cond, axis=1)) <= NONDEGENERACY_TOLERANCE:
            return False
    return True


def distribution_from_config(data: Dict[str, Any], box: Tuple[float, float], act) -> DataDistribution:
    """Build the data law described by the ``data`` config section."""
    kind = data.get("kind")
    if kind == "discrete":
        return DiscreteDistribution.from_atoms(data["atoms"], box)
    if kind == "teacher":
        return TeacherNetworkDistribution(
            data["widths"], act, data.get("noise_sigma", 0.0), data.get("teacher_seed", 0), box
        )
    if kind == "affine":
        return AffineTargetDistribution(
            data["slope"], data.get("intercept", [0.0]), data.get("noise_sigma", 0.0), box
        )
    raise ValidationError(f"Unknown data kind: {kind}", {"field": "data.kind"})


def loss_from_config(section: Optional[Dict[str, Any]]) -> Loss:
    section = section or {"kind": "mse"}
    return Loss(section.get("kind", "mse"), section.get("psi"))
