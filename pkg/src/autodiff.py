#!/usr/bin/env python3
"""
Gradients of the empirical risk with respect to the flat parameter vector.

``generalized_gradient`` is reverse-mode backpropagation that multiplies by
the generalized derivative ``a`` at each hidden pre-activation. Where a whole
layer sits in the flat region its factor is exactly zero, so every
coordinate up to and including that layer comes out as an exact zero.
"""

import math
from typing import Callable, List, Optional

import numpy as np

from ann_core import ParamVector, forward_batch
from error_handler import ValidationError
from loss_risk import Loss, as_batch, empirical_risk


def _backprop(theta: ParamVector, batch, loss: Loss, act, r: int) -> np.ndarray:
    batch = as_batch(batch)
    arch = theta.arch
    L = arch.depth
    pre = forward_batch(theta, act, batch.X, r).pre_activations
    delta = loss.grad_pred(pre[-1], batch.Y) / batch.X.shape[0]
    parts: List[np.ndarray] = [np.empty(0)] * (2 * L)
    for v in range(L, 0, -1):
        h_prev = batch.X if v == 1 else act(pre[v - 2], r)
        parts[2 * (v - 1)] = (delta.T @ h_prev).reshape(-1)
        parts[2 * (v - 1) + 1] = delta.sum(axis=0)
        if v > 1:
            delta = (delta @ theta.weights(v)) * act.derivative(pre[v - 2], r)
    return np.concatenate(parts)


def generalized_gradient(theta: ParamVector, batch, loss: Loss, act) -> np.ndarray:
    """Backprop gradient with ``a`` at every hidden pre-activation."""
    return _backprop(theta, batch, loss, act, 0)


def mollified_gradient(theta: ParamVector, batch, loss: Loss, act, r: int) -> np.ndarray:
    """Exact gradient of the C¹ risk built from ``A_r``."""
    if r < 1:
        raise ValidationError("Approximation index r must be >= 1", {"field": "r"})
    return _backprop(theta, batch, loss, act, int(r))


def central_difference(fn: Callable[[np.ndarray], float], point: np.ndarray, step: float) -> np.ndarray:
    """Coordinate-wise central differences of a scalar function."""
    if not step > 0:
        raise ValidationError("Finite-difference step must be positive", {"field": "step"})
    point = np.asarray(point, dtype=np.float64)
    grad = np.empty_like(point)
    for j in range(point.shape[0]):
        up = point.copy()
        down = point.copy()
        up[j] += step
        down[j] -= step
        grad[j] = (fn(up) - fn(down)) / (2.0 * step)
    return grad


def finite_difference_gradient(theta: ParamVector, batch, loss: Loss, act, step: float) -> np.ndarray:
    """Central differences of the ``A_0`` empirical risk."""
    batch = as_batch(batch)
    return central_difference(
        lambda values: empirical_risk(theta.replace(values), batch, loss, act), theta.theta, step
    )


def mollifier_threshold(theta: ParamVector, X: np.ndarray, act) -> Optional[int]:
    """
    Smallest ``R`` with ``mollified_gradient(r) == generalized_gradient`` for all ``r >= R``.

    Pre-activations exactly on a kink do not count, the approximation is
    exact there for every ``r``. Returns ``None`` for an activation without
    kinks (every ``r`` works).
    """
    kinks = np.asarray(act.exception_set, dtype=np.float64)
    if kinks.size == 0:
        return None
    pre = forward_batch(theta, act, X).pre_activations[:-1]
    margin = math.inf
    for z in pre:
        dist = np.abs(z.reshape(-1)[:, None] - kinks[None, :])
        dist = dist[dist > 0]
        if dist.size:
            margin = min(margin, float(np.min(dist)))
    if math.isinf(margin):
        return 1
    return max(1, math.ceil(1.0 / margin))
