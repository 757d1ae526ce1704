#!/usr/bin/env python3
"""
Initialization laws, inactive-layer certification and probability bounds.

A hidden layer ``k`` is inactive for a parameter vector when every one of
its pre-activations stays in the activation's flat set ``(lo, hi) \\ S`` for
every input in the box ``[a, b]^{ℓ_0}``. The network output is then
constant and every gradient coordinate of layers ``1..k`` is exactly zero,
so training can never leave the best-constant risk floor.

Layer 1 is decided exactly (the affine image of a box is an interval with
closed-form ends). Deeper layers use interval propagation, which is sound
but may answer ``unknown``; a sampling falsifier turns some of those into
``certified-active``.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from itertools import product as cartesian
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats
from scipy.special import ndtr

from ann_core import Architecture, ParamVector, forward_batch
from error_handler import BoundInapplicableError, ValidationError
from structured_logging import get_logger

logger = get_logger("init_inactivity")

PARTS = ("weights", "biases")
MAX_CORNER_DIM = 12


def normal_cdf(x):
    """
    Standard normal CDF.

    Delegates to ``scipy.special.ndtr`` (Cephes: ``erfc`` continued fraction in
    the tails, ``erf`` series near 0), accurate to about 1e-16 absolute.
    """
    values = ndtr(np.asarray(x, dtype=np.float64))
    return float(values) if np.ndim(values) == 0 else values


class CoordinateLaw(ABC):
    """Law of a single initial coordinate."""

    @abstractmethod
    def prob_below(self, x) -> np.ndarray:
        """``P(Θ < x)``."""

    def prob_between(self, lo, hi) -> np.ndarray:
        """``P(lo < Θ < hi)``; zero for empty intervals."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        return np.where(hi > lo, np.maximum(self.prob_below(hi) - self.prob_at_most(lo), 0.0), 0.0)

    def prob_at_most(self, x) -> np.ndarray:
        """``P(Θ <= x)``; equal to ``prob_below`` for atomless laws."""
        return self.prob_below(x)

    @abstractmethod
    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Independent draws."""

    @abstractmethod
    def to_record(self) -> Dict[str, Any]:
        """Plain description."""


class NormalLaw(CoordinateLaw):
    """``σΘ + μ`` is standard normal, i.e. ``Θ = (Z - μ) / σ``."""

    def __init__(self, sigma: float = 1.0, mu: float = 0.0):
        if not sigma > 0:
            raise ValidationError("sigma must be positive", {"field": "init.law.sigma"})
        self.sigma = float(sigma)
        self.mu = float(mu)

    def prob_below(self, x):
        return ndtr(self.sigma * np.asarray(x, dtype=np.float64) + self.mu)

    def sample(self, rng, size):
        return (rng.standard_normal(size) - self.mu) / self.sigma

    def to_record(self):
        return {"kind": "normal", "sigma": self.sigma, "mu": self.mu}


class UniformLaw(CoordinateLaw):
    def __init__(self, lo: float, hi: float):
        if not lo < hi:
            raise ValidationError("uniform law needs lo < hi", {"field": "init.law"})
        self.lo = float(lo)
        self.hi = float(hi)

    def prob_below(self, x):
        return np.clip((np.asarray(x, dtype=np.float64) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def to_record(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


class PointMass(CoordinateLaw):
    def __init__(self, value: float):
        self.value = float(value)

    def prob_below(self, x):
        return np.where(self.value < np.asarray(x, dtype=np.float64), 1.0, 0.0)

    def prob_at_most(self, x):
        return np.where(self.value <= np.asarray(x, dtype=np.float64), 1.0, 0.0)

    def sample(self, rng, size):
        return np.full(size, self.value)

    def to_record(self):
        return {"kind": "point", "value": self.value}


class ScaledLaw(CoordinateLaw):
    """
    ``P(Θ < x) = F(c·x)`` for a continuous scipy base law ``F`` and factor ``c > 0``.

    Sampling is by inversion, ``Θ = F^{-1}(U) / c``.
    """

    def __init__(self, base: str = "norm", scale: float = 1.0, base_params: Optional[Dict[str, float]] = None):
        if not scale > 0:
            raise ValidationError("scale factor must be positive", {"field": "init.law.scale"})
        dist = getattr(scipy.stats, base, None)
        if not isinstance(dist, scipy.stats.rv_continuous):
            raise ValidationError(f"Unknown continuous base law: {base}", {"field": "init.law.base"})
        self.base = base
        self.base_params = dict(base_params or {})
        self.scale = float(scale)
        self.frozen = dist(**self.base_params)

    def prob_below(self, x):
        return self.frozen.cdf(self.scale * np.asarray(x, dtype=np.float64))

    def sample(self, rng, size):
        return self.frozen.ppf(rng.random(size)) / self.scale

    def density_infimum(self, eps: float, points: int = 1001) -> float:
        """``inf`` of the base density on ``[-eps, 0]`` (grid including both ends)."""
        return float(np.min(self.frozen.pdf(np.linspace(-eps, 0.0, points))))

    def to_record(self):
        return {"kind": "scaled", "base": self.base, "scale": self.scale, "base_params": self.base_params}


def law_from_config(section: Dict[str, Any]) -> CoordinateLaw:
    kind = section.get("kind", "normal")
    if kind == "normal":
        return NormalLaw(section.get("sigma", 1.0), section.get("mu", 0.0))
    if kind == "uniform":
        return UniformLaw(section["lo"], section["hi"])
    if kind == "point":
        return PointMass(section["value"])
    if kind == "scaled":
        return ScaledLaw(section.get("base", "norm"), section.get("scale", 1.0), section.get("base_params"))
    raise ValidationError(f"Unknown initialization law: {kind}", {"field": "init.law.kind"})


class InitDistribution:
    """
    Independent coordinates: a default law plus per-layer overrides.

    Overrides are keyed by ``(layer, part)`` with ``part`` in
    ``("weights", "biases")`` and layers counted from 1.
    """

    def __init__(self, default: CoordinateLaw, overrides: Optional[Dict[Tuple[int, str], CoordinateLaw]] = None):
        self.default = default
        self.overrides = dict(overrides or {})
        for _, part in self.overrides:
            if part not in PARTS:
                raise ValidationError(f"Override part must be one of {PARTS}", {"field": "init.overrides.part"})

    @classmethod
    def standard_normal(cls) -> "InitDistribution":
        return cls(NormalLaw())

    @classmethod
    def from_config(cls, section: Optional[Dict[str, Any]]) -> "InitDistribution":
        section = section or {}
        overrides = {}
        for item in section.get("overrides", []):
            overrides[(int(item["layer"]), item["part"])] = law_from_config(item["law"])
        return cls(law_from_config(section.get("law", {"kind": "normal"})), overrides)

    def law(self, k: int, part: str) -> CoordinateLaw:
        return self.overrides.get((k, part), self.default)

    def check_architecture(self, arch: Architecture) -> None:
        for k, _ in self.overrides:
            if not 1 <= k <= arch.depth:
                raise ValidationError(
                    f"Override for layer {k} outside 1..{arch.depth}", {"field": "init.overrides.layer"}
                )

    def sample_many(self, arch: Architecture, rng: np.random.Generator, n: int) -> np.ndarray:
        """``(n, param_count)`` array; coordinates are drawn block by block in flat order."""
        blocks: List[np.ndarray] = []
        for k in range(1, arch.depth + 1):
            n_weights = arch.widths[k] * arch.widths[k - 1]
            blocks.append(self.law(k, "weights").sample(rng, (n, n_weights)))
            blocks.append(self.law(k, "biases").sample(rng, (n, arch.widths[k])))
        return np.concatenate(blocks, axis=1)

    def sample(self, arch: Architecture, rng: np.random.Generator) -> ParamVector:
        return ParamVector(self.sample_many(arch, rng, 1)[0], arch)

    def to_record(self) -> Dict[str, Any]:
        return {
            "law": self.default.to_record(),
            "overrides": [
                {"layer": k, "part": part, "law": law.to_record()}
                for (k, part), law in sorted(self.overrides.items())
            ],
        }


class Inactivity(str, Enum):
    INACTIVE = "certified-inactive"
    ACTIVE = "certified-active"
    UNKNOWN = "unknown"


def _flat_set_mask(lo: np.ndarray, hi: np.ndarray, act) -> np.ndarray:
    """Elementwise: ``[lo, hi]`` lies inside ``(flat_lo, flat_hi)`` and misses every kink."""
    ok = (lo > act.flat_lo) & (hi < act.flat_hi)
    for s in act.exception_set:
        ok &= ~((lo <= s) & (s <= hi))
    return ok


def _layer1_extrema(W: np.ndarray, b: np.ndarray, box: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray]:
    a, bb = box
    lo = b + np.sum(np.minimum(W * a, W * bb), axis=-1)
    hi = b + np.sum(np.maximum(W * a, W * bb), axis=-1)
    return lo, hi


def certify_layer1_inactive(theta: ParamVector, window: Tuple[float, float], box: Tuple[float, float]) -> bool:
    """Exact: every layer-1 pre-activation stays in the open window over the whole box."""
    eta, zeta = window
    if not eta < zeta:
        raise ValidationError("window needs eta < zeta", {"field": "bound.window"})
    lo, hi = _layer1_extrema(theta.weights(1), theta.bias(1), box)
    return bool(np.all(lo > eta) and np.all(hi < zeta))


def interval_bounds(theta: ParamVector, act, box: Tuple[float, float], k: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Sound pre-activation intervals for layers ``1..k``."""
    lo, hi = interval_bounds_batch(theta.theta[None, :], theta.arch, act, box, k)
    return [(l[0], h[0]) for l, h in zip(lo, hi)]


def interval_bounds_batch(
    thetas: np.ndarray, arch: Architecture, act, box: Tuple[float, float], k: int
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Interval propagation for many parameter vectors at once.

    Returns per-layer lists of ``(n, ℓ_v)`` lower and upper bounds for
    ``v = 1..k``. Weights are split into positive and negative parts so each
    bound picks the matching end of the input interval.
    """
    if not 1 <= k <= arch.depth:
        raise ValidationError(f"Layer index {k} outside 1..{arch.depth}", {"field": "layer"})
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    n = thetas.shape[0]
    in_lo = np.full((n, arch.input_dim), float(box[0]))
    in_hi = np.full((n, arch.input_dim), float(box[1]))
    lows: List[np.ndarray] = []
    highs: List[np.ndarray] = []
    for v in range(1, k + 1):
        w_slice, b_slice = arch.layer_slices(v)
        W = thetas[:, w_slice].reshape(n, arch.widths[v], arch.widths[v - 1])
        b = thetas[:, b_slice]
        W_pos = np.maximum(W, 0.0)
        W_neg = np.minimum(W, 0.0)
        lo = np.einsum("nij,nj->ni", W_pos, in_lo) + np.einsum("nij,nj->ni", W_neg, in_hi) + b
        hi = np.einsum("nij,nj->ni", W_pos, in_hi) + np.einsum("nij,nj->ni", W_neg, in_lo) + b
        lows.append(lo)
        highs.append(hi)
        in_lo, in_hi = act.interval_image(lo, hi)
    return lows, highs


def box_probe_points(box: Tuple[float, float], dim: int, rng: np.random.Generator, n_samples: int) -> np.ndarray:
    """Box corners (up to ``2**MAX_CORNER_DIM`` of them) followed by uniform interior samples."""
    a, b = float(box[0]), float(box[1])
    parts = []
    if dim <= MAX_CORNER_DIM:
        parts.append(np.array(list(cartesian((a, b), repeat=dim)), dtype=np.float64))
    if n_samples > 0:
        parts.append(rng.uniform(a, b, size=(n_samples, dim)))
    return np.concatenate(parts, axis=0)


def certify_layer_inactive(
    theta: ParamVector,
    k: int,
    act,
    box: Tuple[float, float],
    rng: Optional[np.random.Generator] = None,
    n_samples: int = 1000,
) -> Inactivity:
    """
    Tri-state verdict for hidden layer ``k`` (``1 <= k <= L-1``).

    ``certified-inactive`` when interval propagation puts every neuron of
    layer ``k`` in the flat set; ``certified-active`` when a probe input
    (box corners and ``n_samples`` uniform points from ``rng``) leaves it;
    ``unknown`` otherwise.
    """
    arch = theta.arch
    if not 1 <= k <= arch.depth - 1:
        raise ValidationError(f"Hidden layer index {k} outside 1..{arch.depth - 1}", {"field": "layer"})
    lows, highs = interval_bounds_batch(theta.theta[None, :], arch, act, box, k)
    if bool(np.all(_flat_set_mask(lows[-1][0], highs[-1][0], act))):
        return Inactivity.INACTIVE
    rng = rng if rng is not None else np.random.Generator(np.random.Philox(0))
    probes = box_probe_points(box, arch.input_dim, rng, n_samples)
    pre = forward_batch(theta, act, probes).pre_activations[k - 1]
    if not bool(np.all(act.is_flat(pre))):
        return Inactivity.ACTIVE
    return Inactivity.UNKNOWN


def layer1_certified_mask(
    thetas: np.ndarray, arch: Architecture, window: Tuple[float, float], box: Tuple[float, float]
) -> np.ndarray:
    """Vectorized ``certify_layer1_inactive`` over the rows of ``thetas``."""
    thetas = np.atleast_2d(thetas)
    if arch.depth < 2:
        return np.zeros(thetas.shape[0], dtype=bool)
    w_slice, b_slice = arch.layer_slices(1)
    W = thetas[:, w_slice].reshape(-1, arch.widths[1], arch.widths[0])
    lo, hi = _layer1_extrema(W, thetas[:, b_slice], box)
    return np.all(lo > window[0], axis=1) & np.all(hi < window[1], axis=1)


def certified_inactive_masks(thetas: np.ndarray, arch: Architecture, act, box: Tuple[float, float]) -> np.ndarray:
    """``(n, L-1)`` boolean array: column ``k-1`` marks interval-certified inactivity of layer ``k``."""
    thetas = np.atleast_2d(thetas)
    if arch.depth < 2:
        return np.zeros((thetas.shape[0], 0), dtype=bool)
    lows, highs = interval_bounds_batch(thetas, arch, act, box, arch.depth - 1)
    return np.stack([np.all(_flat_set_mask(lo, hi, act), axis=1) for lo, hi in zip(lows, highs)], axis=1)


@dataclass
class BoundInputs:
    """Everything the analytic bounds consume apart from the initialization law."""

    arch: Architecture
    box: Tuple[float, float]
    window: Tuple[float, float]
    gamma: float
    inf_bound: float
    flat_lo: float
    flat_hi: float
    exception_set: Tuple[float, ...] = ()
    chi: Optional[int] = None

    def __post_init__(self) -> None:
        if self.chi is None:
            self.chi = self.arch.param_count

    @classmethod
    def from_activation(
        cls,
        act,
        arch: Architecture,
        box: Tuple[float, float],
        window: Optional[Tuple[float, float]] = None,
        gamma: Optional[float] = None,
        chi: Optional[int] = None,
    ) -> "BoundInputs":
        """Defaults: ``γ = min(S ∪ {hi})`` and the window from ``default_window``."""
        if gamma is None:
            gamma = min(tuple(act.exception_set) + (act.flat_hi,))
        if window is None:
            window = default_window(act)
        return cls(
            arch=arch,
            box=(float(box[0]), float(box[1])),
            window=(float(window[0]), float(window[1])),
            gamma=float(gamma),
            inf_bound=float(act.inf_bound),
            flat_lo=float(act.flat_lo),
            flat_hi=float(act.flat_hi),
            exception_set=tuple(float(s) for s in act.exception_set),
            chi=chi,
        )

    @property
    def rho(self) -> float:
        """``-∞`` if ``A >= 0``; ``1/(A · max ℓ_1..ℓ_{L-2})`` if ``A < 0`` and ``L > 2``; ``0`` if ``A < 0`` and ``L = 2``."""
        if self.inf_bound >= 0:
            return -math.inf
        L = self.arch.depth
        if L <= 2:
            return 0.0
        return 1.0 / (self.inf_bound * max(self.arch.widths[1 : L - 1]))

    @property
    def bias_threshold(self) -> float:
        return self.gamma - (1.0 if self.inf_bound < 0 else 0.0)

    def window_problems(self) -> List[str]:
        eta, zeta = self.window
        problems = []
        if not eta < zeta:
            problems.append("window needs eta < zeta")
        if eta < self.flat_lo or zeta > self.flat_hi:
            problems.append("window must lie inside the flat interval")
        if any(eta < s < zeta for s in self.exception_set):
            problems.append("window must not contain a kink")
        return problems

    def validate(self) -> None:
        problems = self.window_problems()
        if problems:
            raise ValidationError(
                "; ".join(problems),
                {"field": "bound.window", "window": list(self.window), "flat": [self.flat_lo, self.flat_hi]},
            )
        gamma_cap = min(self.exception_set + (self.flat_hi,))
        if self.gamma > gamma_cap:
            raise ValidationError(
                f"gamma must not exceed min(S ∪ {{hi}}) = {gamma_cap}",
                {"field": "bound.gamma", "gamma": self.gamma},
            )
        a, b = self.box
        if not a <= b:
            raise ValidationError("box needs a <= b", {"field": "box"})

    @property
    def chi_threshold(self) -> int:
        widths = self.arch.widths
        return self.arch.param_count - widths[-1] * widths[-2] - widths[-1]

    def deep_applicability(self) -> Dict[str, bool]:
        return {
            "flat_lo_is_minus_infinity": math.isinf(self.flat_lo) and self.flat_lo < 0,
            "chi_condition": int(self.chi) >= self.chi_threshold,
        }

    def window_margin_ok(self) -> bool:
        """The window widened by a quarter of its width on both sides still lies in the flat set."""
        eta, zeta = self.window
        pad = (zeta - eta) / 4.0
        lo, hi = eta - pad, zeta + pad
        return lo > self.flat_lo and hi < self.flat_hi and not any(lo <= s <= hi for s in self.exception_set)

    def to_record(self) -> Dict[str, Any]:
        return {
            "box": list(self.box),
            "window": list(self.window),
            "gamma": self.gamma,
            "rho": _finite_or_str(self.rho),
            "inf_bound": _finite_or_str(self.inf_bound),
            "chi": int(self.chi),
        }


def _finite_or_str(value: float):
    return value if math.isfinite(value) else ("-inf" if value < 0 else "inf")


def default_window(act) -> Tuple[float, float]:
    """
    ``(hi - 2, hi - 1)`` when it fits in the flat interval; otherwise the
    second quarter of the flat interval. Kinks inside are avoided by keeping
    the longest kink-free piece.
    """
    lo_f, hi_f = act.flat_lo, act.flat_hi
    eta, zeta = hi_f - 2.0, hi_f - 1.0
    if math.isfinite(lo_f) and eta <= lo_f:
        width = hi_f - lo_f
        eta, zeta = lo_f + width / 4.0, lo_f + width / 2.0
    cuts = sorted(s for s in act.exception_set if eta < s < zeta)
    if cuts:
        edges = [eta] + cuts + [zeta]
        pieces = sorted(zip(edges, edges[1:]), key=lambda p: p[1] - p[0], reverse=True)
        eta, zeta = pieces[0]
    return float(eta), float(zeta)


def layer1_bound(dist: InitDistribution, inputs: BoundInputs) -> float:
    """
    ``∏_i ϱ_i`` with ``ϱ_i = P((3η+ζ)/4 < b_i < (η+3ζ)/4) · ∏_j P(|w_ij| < (ζ-η) / (2 ℓ_0 max{1,|a|,|b|}))``.
    """
    inputs.validate()
    if inputs.arch.depth < 2:
        return 0.0
    eta, zeta = inputs.window
    a, b = inputs.box
    l0, l1 = inputs.arch.widths[0], inputs.arch.widths[1]
    threshold = (zeta - eta) / (2.0 * l0 * max(1.0, abs(a), abs(b)))
    bias_law = dist.law(1, "biases")
    weight_law = dist.law(1, "weights")
    bias_term = float(bias_law.prob_between((3 * eta + zeta) / 4.0, (eta + 3 * zeta) / 4.0))
    weight_term = float(weight_law.prob_between(-threshold, threshold))
    rho_i = bias_term * weight_term**l0
    return float(min(1.0, max(0.0, rho_i**l1)))


def deep_layer_terms(dist: InitDistribution, inputs: BoundInputs) -> List[float]:
    """Per-layer witness probabilities ``P(weights in (ρ,0)) · P(biases < γ - 1{A<0})`` for ``k = 2..L-1``."""
    arch = inputs.arch
    rho = inputs.rho
    terms = []
    for k in range(2, arch.depth):
        n_weights = arch.widths[k] * arch.widths[k - 1]
        w_term = float(dist.law(k, "weights").prob_between(rho, 0.0)) ** n_weights
        b_term = float(dist.law(k, "biases").prob_below(inputs.bias_threshold)) ** arch.widths[k]
        terms.append(w_term * b_term)
    return terms


def _complement_of_product(terms: Sequence[float]) -> float:
    """``1 - ∏ (1 - t)`` computed through logs."""
    log_keep = 0.0
    for t in terms:
        if t >= 1.0:
            return 1.0
        log_keep += math.log1p(-t)
    return float(-math.expm1(log_keep))


def deep_layer_bound(dist: InitDistribution, inputs: BoundInputs) -> float:
    """
    ``1 - ∏_{k=2}^{L-1} (1 - P(weights in (ρ,0)) · P(biases < γ - 1{A<0}))``.

    Needs ``lo = -∞`` and enough independent coordinates; otherwise the bound
    does not apply and 0 is returned with a warning.
    """
    applicability = inputs.deep_applicability()
    if not all(applicability.values()):
        logger.warning("deep-layer bound inapplicable, reporting 0", **applicability)
        return 0.0
    return _complement_of_product(deep_layer_terms(dist, inputs))


def combined_bound(dist: InitDistribution, inputs: BoundInputs) -> float:
    """``max(layer1_bound, deep_layer_bound)`` with the deep term gated by its hypotheses."""
    first = layer1_bound(dist, inputs)
    deep = deep_layer_bound(dist, inputs)
    return max(first, deep)


def deep_witness_mask(thetas: np.ndarray, inputs: BoundInputs) -> np.ndarray:
    """
    Membership in the union over ``k = 2..L-1`` of the explicit witness sets.

    Under independent coordinates the probability of this event is exactly
    the value of ``deep_layer_bound``.
    """
    arch = inputs.arch
    thetas = np.atleast_2d(thetas)
    hit = np.zeros(thetas.shape[0], dtype=bool)
    for k in range(2, arch.depth):
        w_slice, b_slice = arch.layer_slices(k)
        W = thetas[:, w_slice]
        ok = np.all((W > inputs.rho) & (W < 0.0), axis=1)
        ok &= np.all(thetas[:, b_slice] < inputs.bias_threshold, axis=1)
        hit |= ok
    return hit


def admissible_p_limit(
    base: ScaledLaw, inf_bound: float, gamma: float, eps: float = 1.0, c_const: float = 2.0
) -> float:
    """
    Upper limit for ``p`` in the depth-sweep bound.

    ``min(p_inf·ε·1{A<0} + 1{A>=0}·F(0), F(min(0, c·(γ - 1{A<0}))))`` where
    ``F`` is the base CDF and ``p_inf`` the infimum of its density on
    ``[-ε, 0]``.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive", {"field": "sweep.eps"})
    F = base.frozen.cdf
    negative = inf_bound < 0
    first = base.density_infimum(eps) * eps if negative else float(F(0.0))
    second = float(F(min(0.0, c_const * (gamma - (1.0 if negative else 0.0)))))
    return float(min(first, second))


def sweep_q(p: float, width: int, inf_bound: float = 0.0, eps: float = 1.0, c_const: float = 2.0) -> float:
    """``q = p·ε / (ε - l·c·min(A, 0))``."""
    return p * eps / (eps - width * c_const * min(inf_bound, 0.0))


def depth_sweep_bound(
    width: int,
    depths: Sequence[int],
    p: float,
    inf_bound: float = 0.0,
    c_const: float = 2.0,
    eps: float = 1.0,
    p_limit: Optional[float] = None,
) -> List[Tuple[int, float]]:
    """
    ``(L, 1 - (1 - q^{l(l+1)})^{L-2})`` for each depth; ``L <= 2`` gives 0.

    ``p_limit`` (see ``admissible_p_limit``) is enforced when given.
    """
    if width < 1:
        raise ValidationError("width must be >= 1", {"field": "sweep.width"})
    if not 0.0 < p < 1.0:
        raise BoundInapplicableError("p must lie in (0, 1)", {"field": "sweep.p", "p": p})
    if p_limit is not None and not p < p_limit:
        raise BoundInapplicableError(
            f"p = {p} is not below the admissible limit {p_limit}",
            {"field": "sweep.p", "p": p, "limit": p_limit},
        )
    x = sweep_q(p, width, inf_bound, eps, c_const) ** (width * (width + 1))
    rows = []
    for L in depths:
        if L < 1:
            raise ValidationError("depths must be >= 1", {"field": "sweep.depths"})
        rows.append((int(L), 0.0 if L <= 2 else float(-math.expm1((L - 2) * math.log1p(-x)))))
    return rows


def divergence_sequence(width: int, depths: Sequence[int], q: float) -> List[float]:
    """``L·q^{l(l+1)}`` along the depth list."""
    return [float(L * q ** (width * (width + 1))) for L in depths]


def best_layer1_window(
    dist: InitDistribution, inputs: BoundInputs, grid: Optional[Sequence[float]] = None
) -> Tuple[Tuple[float, float], float]:
    """
    Grid search over windows ``(η, ζ)`` with both ends on ``grid`` maximizing ``layer1_bound``.

    The default grid has 25 points on ``[max(lo, hi - 6), hi]``. Windows that
    leave the flat interval or contain a kink are skipped.
    """
    if grid is None:
        lo = max(inputs.flat_lo, inputs.flat_hi - 6.0)
        grid = np.linspace(lo, inputs.flat_hi, 25)
    points = sorted(float(g) for g in grid)
    best: Optional[Tuple[Tuple[float, float], float]] = None
    for i, eta in enumerate(points):
        for zeta in points[i + 1 :]:
            candidate = BoundInputs(
                inputs.arch, inputs.box, (eta, zeta), inputs.gamma, inputs.inf_bound,
                inputs.flat_lo, inputs.flat_hi, inputs.exception_set, inputs.chi,
            )
            if candidate.window_problems():
                continue
            value = layer1_bound(dist, candidate)
            if best is None or value > best[1]:
                best = ((eta, zeta), value)
    if best is None:
        raise ValidationError("No admissible window on the grid", {"field": "grid"})
    return best


@dataclass
class BoundReport:
    arch: Architecture
    activation: Dict[str, Any]
    distribution: Dict[str, Any]
    inputs: BoundInputs
    layer1_bound: float
    deep_bound: float
    combined_bound: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> Dict[str, Any]:
        record = {
            "arch": list(self.arch.widths),
            "activation": self.activation,
            "distribution": self.distribution,
            "window": list(self.inputs.window),
            "gamma": self.inputs.gamma,
            "layer1_bound": self.layer1_bound,
            "deep_bound": self.deep_bound,
            "combined_bound": self.combined_bound,
            "diagnostics": self.diagnostics,
        }
        return record


def bound_report(act, dist: InitDistribution, inputs: BoundInputs) -> BoundReport:
    """All three bounds plus hypothesis diagnostics."""
    inputs.validate()
    first = layer1_bound(dist, inputs)
    deep = deep_layer_bound(dist, inputs)
    diagnostics: Dict[str, Any] = dict(inputs.deep_applicability())
    diagnostics.update(
        {
            "rho": _finite_or_str(inputs.rho),
            "bias_threshold": inputs.bias_threshold,
            "chi": int(inputs.chi),
            "chi_threshold": inputs.chi_threshold,
            "window_valid": not inputs.window_problems(),
            "window_margin_ok": inputs.window_margin_ok(),
            "deep_layer_terms": deep_layer_terms(dist, inputs),
        }
    )
    return BoundReport(
        arch=inputs.arch,
        activation=act.to_record(),
        distribution=dist.to_record(),
        inputs=inputs,
        layer1_bound=first,
        deep_bound=deep,
        combined_bound=max(first, deep),
        diagnostics=diagnostics,
    )
