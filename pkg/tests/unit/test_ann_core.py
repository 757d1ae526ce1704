#!/usr/bin/env python3
"""
Unit tests for ann_core module.

This module tests parameter layout, realizations and the scalar-chain
constructions against straight-line reference arithmetic.
"""

import numpy as np
import pytest

from activation import CustomActivation, clip, relu
from ann_core import (
    Architecture,
    ParamVector,
    embed_scalar_chain,
    find_nonconstancy_composition,
    forward,
    forward_batch,
    nonconstant_chain_parameters,
    param_count,
    scalar_chain,
)
from error_handler import ValidationError
from random_streams import stream
from tests.oracles import straight_line_forward


class TestArchitecture:
    """Tests for widths, counts and index layout"""

    @pytest.mark.parametrize(
        "widths,expected",
        [((2, 3, 1), 13), ((1, 1), 2), ((2, 3, 3, 2), 29), ((1, 1, 1, 1), 6)],
    )
    def test_param_count(self, widths, expected):
        """d = sum of l_i (l_{i-1} + 1)"""
        assert param_count(Architecture(widths)) == expected

    @pytest.mark.parametrize("widths", [(3,), (2, 0, 1), (1, -2)])
    def test_invalid_widths(self, widths):
        with pytest.raises(ValidationError):
            Architecture(widths)

    def test_indices_are_one_based_and_layer_ordered(self):
        """Weights of a layer in row-major order, then its biases"""
        arch = Architecture((2, 3, 1))

        assert arch.weight_index(1, 1, 1) == 1
        assert arch.weight_index(1, 3, 2) == 6
        assert arch.bias_index(1, 1) == 7
        assert arch.bias_index(1, 3) == 9
        assert arch.weight_index(2, 1, 3) == 12
        assert arch.bias_index(2, 1) == 13

    def test_every_index_used_once(self):
        arch = Architecture((2, 3, 3, 2))
        indices = []
        for k in range(1, arch.depth + 1):
            for i in range(1, arch.widths[k] + 1):
                indices.extend(arch.weight_index(k, i, j) for j in range(1, arch.widths[k - 1] + 1))
                indices.append(arch.bias_index(k, i))

        assert sorted(indices) == list(range(1, arch.param_count + 1))

    def test_layer_slices_match_indices(self):
        arch = Architecture((2, 3, 1))
        w_slice, b_slice = arch.layer_slices(2)

        assert w_slice.start == arch.weight_index(2, 1, 1) - 1
        assert b_slice.start == arch.bias_index(2, 1) - 1
        assert arch.prefix_count(0) == 0
        assert arch.prefix_count(1) == 9

    def test_index_out_of_range(self):
        arch = Architecture((2, 3, 1))
        with pytest.raises(ValidationError):
            arch.weight_index(3, 1, 1)
        with pytest.raises(ValidationError):
            arch.bias_index(1, 4)


class TestParamVector:
    """Tests for the flat parameter vector"""

    def test_wrong_length(self):
        with pytest.raises(ValidationError) as excinfo:
            ParamVector(np.zeros(12), Architecture((2, 3, 1)))
        assert excinfo.value.details["expected"] == 13

    def test_read_only(self):
        theta = ParamVector.zeros(Architecture((1, 1)))
        with pytest.raises(ValueError):
            theta.theta[0] = 1.0

    def test_from_layers_roundtrip(self):
        """Layer blocks come back out of weights() and bias()"""
        arch = Architecture((2, 3, 1))
        W1 = np.arange(6.0).reshape(3, 2)
        b1 = np.array([10.0, 11.0, 12.0])
        W2 = np.array([[20.0, 21.0, 22.0]])
        b2 = np.array([30.0])

        theta = ParamVector.from_layers(arch, [W1, W2], [b1, b2])

        np.testing.assert_array_equal(theta.weights(1), W1)
        np.testing.assert_array_equal(theta.bias(1), b1)
        np.testing.assert_array_equal(theta.weights(2), W2)
        assert theta.theta[arch.bias_index(2, 1) - 1] == 30.0
        assert theta.theta[arch.weight_index(1, 2, 1) - 1] == 2.0


class TestForward:
    """Tests for realizations"""

    def test_matches_straight_line_arithmetic(self):
        """Random parameters and inputs against scalar loops, exact equality"""
        arch = Architecture((2, 2, 1))
        rng = stream(3, "evaluation")
        act = relu()
        for _ in range(50):
            theta = ParamVector(rng.standard_normal(arch.param_count), arch)
            x = rng.uniform(-1.0, 1.0, size=2)
            _, expected = straight_line_forward(arch.widths, theta.theta, act, x)

            out = forward(arch, theta, act, x).output

            assert out.tolist() == pytest.approx(expected, rel=1e-14, abs=1e-14)

    def test_hand_computed_example(self):
        """out = w2 * relu(w1 . x + b1) + b2"""
        arch = Architecture((2, 1, 1))
        theta = ParamVector([1.0, -2.0, 0.5, 3.0, -1.0], arch)

        assert forward(arch, theta, relu(), [2.0, 0.25]).output[0] == 3.0 * 2.0 - 1.0
        assert forward(arch, theta, relu(), [0.0, 1.0]).output[0] == -1.0

    def test_batch_shapes(self):
        arch = Architecture((2, 3, 3, 2))
        theta = ParamVector(stream(0, "init").standard_normal(arch.param_count), arch)
        trace = forward_batch(theta, clip(-1.0, 1.0), np.zeros((7, 2)))

        assert [z.shape for z in trace.pre_activations] == [(7, 3), (7, 3), (7, 2)]
        assert trace.output.shape == (7, 2)

    def test_input_dimension_checked(self):
        arch = Architecture((2, 1, 1))
        theta = ParamVector.zeros(arch)
        with pytest.raises(ValidationError):
            forward(arch, theta, relu(), [1.0])
        with pytest.raises(ValidationError):
            forward(Architecture((2, 2, 1)), theta, relu(), [1.0, 2.0])


class TestScalarChain:
    """Tests for the scalar chain and its embedding"""

    def test_embedding_realizes_the_chain(self):
        """Network output equals y + r e N^{L-2}(w x + z) at many inputs"""
        arch = Architecture((1, 2, 2, 2, 1))
        act = relu()
        rng = stream(11, "evaluation")
        r = float(rng.uniform(0.5, 2.0))
        w = rng.standard_normal(1)
        z = float(rng.standard_normal())
        eta = rng.standard_normal(2).tolist()
        zeta = rng.standard_normal(2).tolist()
        y = rng.standard_normal(1)
        e = rng.standard_normal(1)
        theta = embed_scalar_chain(arch, r, w, z, eta, zeta, y, e)

        for x in rng.uniform(-3.0, 3.0, size=100):
            expected = y[0] + r * e[0] * float(scalar_chain(act, eta, zeta, w[0] * x + z))
            assert forward(arch, theta, act, [x]).output[0] == pytest.approx(expected, rel=1e-14, abs=1e-14)

    def test_embedding_example(self):
        arch = Architecture((1, 2, 2, 1))
        theta = embed_scalar_chain(arch, 3.0, [2.0], -0.5, [1.5], [0.25], [0.1], [-1.0])

        assert forward(arch, theta, relu(), [1.0]).output[0] == pytest.approx(0.1 - 7.5)
        assert forward(arch, theta, relu(), [0.0]).output[0] == pytest.approx(0.1 - 0.75)

    def test_embedding_checks_lengths(self):
        arch = Architecture((1, 2, 2, 1))
        with pytest.raises(ValidationError):
            embed_scalar_chain(arch, 1.0, [1.0], 0.0, [], [], [0.0], [1.0])
        with pytest.raises(ValidationError):
            embed_scalar_chain(Architecture((1, 1)), 1.0, [1.0], 0.0, [], [], [0.0], [1.0])

    def test_nonconstancy_composition(self):
        a, b = find_nonconstancy_composition(relu(), [1.0])
        act = relu()

        assert act(a * act(1.0) + b) != act(a * act(0.0) + b)

    def test_nonconstant_chain(self):
        """The constructed chain separates a probe from 0 at every depth"""
        for act in (relu(), clip(-1.0, 1.0)):
            eta, zeta = nonconstant_chain_parameters(act, 3, [0.5, 1.0, -1.0])
            values = scalar_chain(act, eta, zeta, np.array([0.0, 0.5, 1.0, -1.0]))

            assert len(eta) == len(zeta) == 3
            assert len(set(values.tolist())) > 1

    def test_constant_activation_has_no_chain(self):
        flat = CustomActivation("zero", lambda x: np.zeros_like(x), lambda x: np.zeros_like(x), inf_bound=0.0)

        assert find_nonconstancy_composition(flat, [1.0, -1.0]) is None
        assert nonconstant_chain_parameters(flat, 2, [1.0, -1.0]) is None
