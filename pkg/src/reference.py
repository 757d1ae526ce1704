#!/usr/bin/env python3
"""
Loop-based reference computations for networks and their gradients.

Everything here works one neuron and one path at a time so it shares no code
path with the vectorized realization in ``ann_core`` and ``autodiff``. The
self-test and the unit tests check the fast code against these.
"""

import itertools
from typing import List, Sequence, Tuple

import numpy as np


def layer_blocks(widths: Sequence[int], theta: Sequence[float]) -> List[Tuple[List[List[float]], List[float]]]:
    """Split a flat vector into per-layer ``(W, b)`` nested lists."""
    blocks = []
    pos = 0
    for k in range(1, len(widths)):
        rows, cols = widths[k], widths[k - 1]
        W = [[float(theta[pos + i * cols + j]) for j in range(cols)] for i in range(rows)]
        pos += rows * cols
        b = [float(theta[pos + i]) for i in range(rows)]
        pos += rows
        blocks.append((W, b))
    return blocks


def straight_line_forward(widths, theta, act_fn, x) -> Tuple[List[List[float]], List[float]]:
    """Pre-activations per layer and the output, one scalar at a time."""
    blocks = layer_blocks(widths, theta)
    h = [float(v) for v in x]
    pre = []
    for k, (W, b) in enumerate(blocks, start=1):
        z = [b[i] + sum(W[i][j] * h[j] for j in range(len(h))) for i in range(len(b))]
        pre.append(z)
        h = z if k == len(blocks) else [float(act_fn(np.array(v))) for v in z]
    return pre, h


def path_product_gradient(widths, theta, act_fn, deriv_fn, X, Y) -> np.ndarray:
    """
    Gradient of the mean squared error by summing products along every path.

    ``d out_o / d z^k_i`` is the sum over neuron paths ``i = n_k, n_{k+1}, ..., n_L = o``
    of ``prod_v W^v[n_v][n_{v-1}] · a(z^{v-1}[n_{v-1}])``.
    """
    blocks = layer_blocks(widths, theta)
    L = len(blocks)
    grad = np.zeros(len(theta))
    for x, y in zip(X, Y):
        pre, out = straight_line_forward(widths, theta, act_fn, x)
        hidden = [[float(act_fn(np.array(v))) for v in z] for z in pre[:-1]]
        residual = [2.0 * (out[o] - float(y[o])) for o in range(widths[-1])]

        def sensitivity(k: int, i: int, o: int) -> float:
            if k == L:
                return 1.0 if i == o else 0.0
            total = 0.0
            middle = [range(widths[v]) for v in range(k + 1, L)]
            for path in itertools.product(*middle):
                nodes = (i,) + path + (o,)
                prod = 1.0
                for step, v in enumerate(range(k + 1, L + 1)):
                    prev = nodes[step]
                    prod *= blocks[v - 1][0][nodes[step + 1]][prev] * float(deriv_fn(np.array(pre[v - 2][prev])))
                total += prod
            return total

        pos = 0
        for k in range(1, L + 1):
            inputs = [float(v) for v in x] if k == 1 else hidden[k - 2]
            rows, cols = widths[k], widths[k - 1]
            for i in range(rows):
                s = sum(residual[o] * sensitivity(k, i, o) for o in range(widths[-1]))
                for j in range(cols):
                    grad[pos + i * cols + j] += s * inputs[j]
                grad[pos + rows * cols + i] += s
            pos += rows * cols + rows
    return grad / len(X)
