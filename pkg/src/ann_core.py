#!/usr/bin/env python3
"""
Fully-connected feedforward networks over a flat parameter vector.

Parameters are stored layer by layer: for layer ``k`` the ``ℓ_k × ℓ_{k-1}``
weight matrix in row-major order, followed by the ``ℓ_k`` biases. The
activation is applied to hidden layers only; the output layer is affine.

Activations are duck-typed: anything callable as ``act(x, r)`` on numpy
arrays works, where ``r = 0`` selects the activation itself and ``r >= 1`` its
``r``-th smooth approximation.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from error_handler import ValidationError


@dataclass(frozen=True)
class Architecture:
    """Layer widths ``(ℓ_0, ..., ℓ_L)`` with ``L >= 1``."""

    widths: Tuple[int, ...]

    def __post_init__(self) -> None:
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValidationError(
                "An architecture needs at least an input and an output width",
                {"field": "architecture", "widths": list(widths)},
            )
        if any(w < 1 for w in widths):
            raise ValidationError(
                "Every layer width must be a positive integer",
                {"field": "architecture", "widths": list(widths)},
            )
        object.__setattr__(self, "widths", widths)

    @property
    def depth(self) -> int:
        """Number of affine layers ``L``."""
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def layer_param_count(self, k: int) -> int:
        self._check_layer(k)
        return self.widths[k] * (self.widths[k - 1] + 1)

    def prefix_count(self, k: int) -> int:
        """Number of parameters in layers ``1..k``; ``prefix_count(0) == 0``."""
        if not 0 <= k <= self.depth:
            raise ValidationError(f"Layer index {k} outside 0..{self.depth}", {"field": "layer"})
        return sum(self.widths[i] * (self.widths[i - 1] + 1) for i in range(1, k + 1))

    @property
    def param_count(self) -> int:
        return self.prefix_count(self.depth)

    def layer_slices(self, k: int) -> Tuple[slice, slice]:
        """0-based ``(weights, biases)`` slices of layer ``k`` in the flat vector."""
        self._check_layer(k)
        start = self.prefix_count(k - 1)
        n_weights = self.widths[k] * self.widths[k - 1]
        return (
            slice(start, start + n_weights),
            slice(start + n_weights, start + n_weights + self.widths[k]),
        )

    def weight_index(self, k: int, i: int, j: int) -> int:
        """1-based flat index of the weight from neuron ``j`` of layer ``k-1`` into neuron ``i`` of layer ``k``."""
        self._check_layer(k)
        if not (1 <= i <= self.widths[k] and 1 <= j <= self.widths[k - 1]):
            raise ValidationError(f"Weight index ({k},{i},{j}) out of range", {"field": "index"})
        return (i - 1) * self.widths[k - 1] + j + self.prefix_count(k - 1)

    def bias_index(self, k: int, i: int) -> int:
        """1-based flat index of the bias of neuron ``i`` in layer ``k``."""
        self._check_layer(k)
        if not 1 <= i <= self.widths[k]:
            raise ValidationError(f"Bias index ({k},{i}) out of range", {"field": "index"})
        return self.widths[k] * self.widths[k - 1] + i + self.prefix_count(k - 1)

    def _check_layer(self, k: int) -> None:
        if not 1 <= k <= self.depth:
            raise ValidationError(f"Layer index {k} outside 1..{self.depth}", {"field": "layer"})


def param_count(arch: Architecture) -> int:
    """``Σ_i ℓ_i (ℓ_{i-1} + 1)``."""
    return arch.param_count


class ParamVector:
    """Read-only flat parameter vector bound to an architecture."""

    __slots__ = ("theta", "arch")

    def __init__(self, theta: Sequence[float], arch: Architecture):
        values = np.array(theta, dtype=np.float64).reshape(-1)
        if values.shape[0] != arch.param_count:
            raise ValidationError(
                f"Parameter vector has length {values.shape[0]}, architecture needs {arch.param_count}",
                {"field": "theta", "expected": arch.param_count, "actual": int(values.shape[0])},
            )
        values.setflags(write=False)
        self.theta = values
        self.arch = arch

    @classmethod
    def zeros(cls, arch: Architecture) -> "ParamVector":
        return cls(np.zeros(arch.param_count), arch)

    @classmethod
    def from_layers(
        cls, arch: Architecture, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]
    ) -> "ParamVector":
        """Assemble from per-layer ``(ℓ_k, ℓ_{k-1})`` weight matrices and ``ℓ_k`` bias vectors."""
        if len(weights) != arch.depth or len(biases) != arch.depth:
            raise ValidationError("Need one weight matrix and one bias vector per layer", {"field": "layers"})
        parts: List[np.ndarray] = []
        for k in range(1, arch.depth + 1):
            w = np.asarray(weights[k - 1], dtype=np.float64)
            b = np.asarray(biases[k - 1], dtype=np.float64).reshape(-1)
            if w.shape != (arch.widths[k], arch.widths[k - 1]) or b.shape != (arch.widths[k],):
                raise ValidationError(f"Layer {k} has the wrong shape", {"field": "layers", "layer": k})
            parts.extend([w.reshape(-1), b])
        return cls(np.concatenate(parts), arch)

    def weights(self, k: int) -> np.ndarray:
        w_slice, _ = self.arch.layer_slices(k)
        return self.theta[w_slice].reshape(self.arch.widths[k], self.arch.widths[k - 1])

    def bias(self, k: int) -> np.ndarray:
        _, b_slice = self.arch.layer_slices(k)
        return self.theta[b_slice]

    def replace(self, theta: Sequence[float]) -> "ParamVector":
        return ParamVector(theta, self.arch)

    def __len__(self) -> int:
        return self.theta.shape[0]

    def __repr__(self) -> str:
        return f"ParamVector(arch={self.arch.widths}, n={len(self)})"


@dataclass(frozen=True)
class ForwardTrace:
    """Pre-activations of layers ``1..L``; the last entry is the network output."""

    pre_activations: Tuple[np.ndarray, ...]

    @property
    def output(self) -> np.ndarray:
        return self.pre_activations[-1]


def _as_batch(X: np.ndarray, input_dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != input_dim:
        raise ValidationError(
            f"Inputs must have {input_dim} columns, got shape {X.shape}",
            {"field": "x", "expected": input_dim},
        )
    return X


def forward_batch(theta: ParamVector, act, X: np.ndarray, r: int = 0) -> ForwardTrace:
    """Evaluate the realization on the rows of ``X``; each pre-activation has shape ``(M, ℓ_v)``."""
    arch = theta.arch
    h = _as_batch(X, arch.input_dim)
    pre: List[np.ndarray] = []
    for v in range(1, arch.depth + 1):
        z = h @ theta.weights(v).T + theta.bias(v)
        pre.append(z)
        if v < arch.depth:
            h = act(z, r)
    return ForwardTrace(tuple(pre))


def forward(arch: Architecture, theta: ParamVector, act, x: Sequence[float], r: int = 0) -> ForwardTrace:
    """Single-input realization; pre-activations are 1-d vectors."""
    if theta.arch != arch:
        raise ValidationError("Parameter vector belongs to a different architecture", {"field": "theta"})
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != arch.input_dim:
        raise ValidationError(
            f"Input has dimension {x.shape[0]}, architecture expects {arch.input_dim}",
            {"field": "x", "expected": arch.input_dim},
        )
    trace = forward_batch(theta, act, x.reshape(1, -1), r)
    return ForwardTrace(tuple(z[0] for z in trace.pre_activations))


def scalar_chain(act, eta: Sequence[float], zeta: Sequence[float], x, r: int = 0) -> np.ndarray:
    """``N^0 = A(x)``, ``N^v = A(η_v N^{v-1} + ζ_v)``; returns ``N^{len(eta)}``."""
    if len(eta) != len(zeta):
        raise ValidationError("eta and zeta must have equal length", {"field": "zeta"})
    n = act(np.asarray(x, dtype=np.float64), r)
    for e, z in zip(eta, zeta):
        n = act(float(e) * n + float(z), r)
    return n


def embed_scalar_chain(
    arch: Architecture,
    r: float,
    w: Sequence[float],
    z: float,
    eta: Sequence[float],
    zeta: Sequence[float],
    y: Sequence[float],
    e: Sequence[float],
) -> ParamVector:
    """
    Parameters whose realization is ``x ↦ y + r·e·N^{L-2}(w·x + z)``.

    Neuron 1 of every hidden layer carries the chain; every other entry is
    zero. For ``L == 2`` eta and zeta must be empty and the realization is
    ``y + r·e·A(w·x + z)``.
    """
    L = arch.depth
    if L < 2:
        raise ValidationError("Scalar-chain embedding needs at least one hidden layer", {"field": "architecture"})
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    e = np.asarray(e, dtype=np.float64).reshape(-1)
    eta = list(eta)
    zeta = list(zeta)
    if w.shape[0] != arch.input_dim:
        raise ValidationError("w must have one entry per input", {"field": "w", "expected": arch.input_dim})
    if y.shape[0] != arch.output_dim or e.shape[0] != arch.output_dim:
        raise ValidationError("y and e must have one entry per output", {"field": "y", "expected": arch.output_dim})
    if len(eta) != L - 2 or len(zeta) != L - 2:
        raise ValidationError("eta and zeta must have length L-2", {"field": "eta", "expected": L - 2})

    weights = [np.zeros((arch.widths[k], arch.widths[k - 1])) for k in range(1, L + 1)]
    biases = [np.zeros(arch.widths[k]) for k in range(1, L + 1)]
    weights[0][0, :] = w
    biases[0][0] = z
    for k in range(2, L):
        weights[k - 1][0, 0] = eta[k - 2]
        biases[k - 1][0] = zeta[k - 2]
    weights[L - 1][:, 0] = r * e
    biases[L - 1][:] = y
    return ParamVector.from_layers(arch, weights, biases)


def find_nonconstancy_composition(act, probe_points: Sequence[float]) -> Optional[Tuple[float, float]]:
    """
    Find ``(a, b)`` with ``x ↦ A(a·A(x) + b)`` non-constant.

    Uses the first probe ``x`` with ``A(x) != A(0)``: ``a = x / (A(x) - A(0))``
    and ``b = -x·A(0) / (A(x) - A(0))``, so the composition takes the values
    ``A(x)`` and ``A(0)`` at ``x`` and ``0``. Returns ``None`` when ``A`` is
    constant on the probes.
    """
    probes = [float(p) for p in probe_points]
    if not probes or not all(np.isfinite(probes)):
        raise ValidationError("Probe points must be finite and nonempty", {"field": "probe_points"})
    a0 = float(act(np.float64(0.0)))
    for x in probes:
        ax = float(act(np.float64(x)))
        if ax == a0:
            continue
        a = x / (ax - a0)
        b = -x * a0 / (ax - a0)
        if float(act(np.float64(a * ax + b))) != float(act(np.float64(a * a0 + b))):
            return a, b
    return None


def nonconstant_chain_parameters(
    act, depth: int, probe_points: Sequence[float]
) -> Optional[Tuple[List[float], List[float]]]:
    """
    Chain parameters ``(eta, zeta)`` of length ``depth`` whose scalar chain is non-constant.

    Each step maps the previous chain's values at a witness ``x0`` and at 0
    onto a probe ``u`` with ``A(u) != A(0)`` and onto 0, so the witness
    survives every layer. The chain stays constant wherever ``A`` is.
    """
    probes = [float(p) for p in probe_points]
    if depth < 0:
        raise ValidationError("Chain depth must be non-negative", {"field": "depth"})
    if not probes or not all(np.isfinite(probes)):
        raise ValidationError("Probe points must be finite and nonempty", {"field": "probe_points"})
    a0 = float(act(np.float64(0.0)))
    witnesses = [u for u in probes if float(act(np.float64(u))) != a0]
    if not witnesses:
        return None

    eta: List[float] = []
    zeta: List[float] = []
    for _ in range(depth):
        chain_at = {x: float(scalar_chain(act, eta, zeta, x)) for x in probes + [0.0]}
        s = chain_at[0.0]
        step = None
        for x0 in probes:
            t = chain_at[x0]
            if t == s:
                continue
            for u in witnesses:
                a = u / (t - s)
                b = -u * s / (t - s)
                if float(act(np.float64(a * t + b))) != float(act(np.float64(a * s + b))):
                    step = (a, b)
                    break
            if step is not None:
                break
        if step is None:
            return None
        eta.append(step[0])
        zeta.append(step[1])
    return eta, zeta
