#!/usr/bin/env python3
"""
Unit tests for init_inactivity module.

This module tests initialization laws, the inactivity certificates and the
closed-form probability bounds, including soundness against an independent
sampling falsifier.
"""

import math

import numpy as np
import pytest
from scipy.stats import norm

from activation import CustomActivation, clip, relu
from ann_core import Architecture, ParamVector
from error_handler import BoundInapplicableError, ValidationError
from init_inactivity import (
    BoundInputs,
    Inactivity,
    InitDistribution,
    NormalLaw,
    PointMass,
    ScaledLaw,
    UniformLaw,
    admissible_p_limit,
    best_layer1_window,
    bound_report,
    box_probe_points,
    certified_inactive_masks,
    certify_layer1_inactive,
    certify_layer_inactive,
    combined_bound,
    deep_layer_bound,
    deep_layer_terms,
    deep_witness_mask,
    default_window,
    depth_sweep_bound,
    divergence_sequence,
    interval_bounds,
    law_from_config,
    layer1_bound,
    layer1_certified_mask,
    normal_cdf,
)
from random_streams import stream
from tests.oracles import sampling_falsifier


def _two_neuron_case(b2: float) -> ParamVector:
    """Layer 2 computes x - x + b2 on (1, 2, 1, 1), so it is constant in x."""
    arch = Architecture((1, 2, 1, 1))
    return ParamVector.from_layers(
        arch,
        [np.array([[1.0], [1.0]]), np.array([[1.0, -1.0]]), np.array([[1.0]])],
        [np.zeros(2), np.array([b2]), np.zeros(1)],
    )


class TestLaws:
    """Tests for single-coordinate laws"""

    def test_normal_cdf(self):
        assert normal_cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-15)
        assert normal_cdf(0.0) == 0.5
        np.testing.assert_allclose(normal_cdf(np.array([-1.0, 1.0])), norm.cdf([-1.0, 1.0]), atol=1e-15)

    def test_normal_law_parameterization(self):
        """sigma * theta + mu is standard normal, so mu = 2 centres the law at -2"""
        law = NormalLaw(1.0, 2.0)

        assert float(law.prob_below(-2.0)) == 0.5
        assert law.sample(stream(0, "init"), 20_000).mean() == pytest.approx(-2.0, abs=0.05)

    def test_point_mass_uses_open_intervals(self):
        law = PointMass(1.0)

        assert float(law.prob_between(0.0, 1.0)) == 0.0
        assert float(law.prob_between(1.0, 2.0)) == 0.0
        assert float(law.prob_between(0.5, 1.5)) == 1.0

    def test_uniform(self):
        law = UniformLaw(-1.0, 1.0)

        assert float(law.prob_between(-0.5, 0.0)) == 0.25
        assert float(law.prob_between(0.5, -0.5)) == 0.0
        with pytest.raises(ValidationError):
            UniformLaw(1.0, 1.0)

    def test_scaled_law(self):
        law = ScaledLaw("norm", 2.0)

        assert float(law.prob_below(0.5)) == pytest.approx(norm.cdf(1.0))
        assert law.density_infimum(1.0) == pytest.approx(norm.pdf(1.0))
        with pytest.raises(ValidationError):
            ScaledLaw("not_a_law")
        with pytest.raises(ValidationError):
            ScaledLaw("norm", 0.0)

    @pytest.mark.parametrize(
        "section,cls",
        [
            ({"kind": "normal"}, NormalLaw),
            ({"kind": "uniform", "lo": 0, "hi": 1}, UniformLaw),
            ({"kind": "point", "value": 3}, PointMass),
            ({"kind": "scaled", "base": "t", "base_params": {"df": 3}}, ScaledLaw),
        ],
    )
    def test_law_from_config(self, section, cls):
        assert isinstance(law_from_config(section), cls)

    def test_unknown_law(self):
        with pytest.raises(ValidationError):
            law_from_config({"kind": "cauchy"})


class TestInitDistribution:
    """Tests for per-layer initialization"""

    def test_overrides(self):
        dist = InitDistribution.from_config(
            {"overrides": [{"layer": 2, "part": "biases", "law": {"kind": "point", "value": 0.5}}]}
        )

        assert isinstance(dist.law(2, "biases"), PointMass)
        assert isinstance(dist.law(2, "weights"), NormalLaw)
        assert dist.to_record()["overrides"][0]["layer"] == 2

    def test_sample_layout(self, arch_111):
        """Overrides land on the flat-vector coordinates of their block"""
        dist = InitDistribution(NormalLaw(), {(1, "biases"): PointMass(-1.5), (2, "weights"): PointMass(7.0)})
        thetas = dist.sample_many(arch_111, stream(1, "init"), 5)

        assert thetas.shape == (5, 4)
        assert np.all(thetas[:, arch_111.bias_index(1, 1) - 1] == -1.5)
        assert np.all(thetas[:, arch_111.weight_index(2, 1, 1) - 1] == 7.0)
        assert isinstance(dist.sample(arch_111, stream(1, "init")), ParamVector)

    def test_same_stream_same_draws(self, arch_1111):
        dist = InitDistribution.standard_normal()
        np.testing.assert_array_equal(
            dist.sample_many(arch_1111, stream(4, "init", 2), 3),
            dist.sample_many(arch_1111, stream(4, "init", 2), 3),
        )

    def test_override_checks(self, arch_111):
        with pytest.raises(ValidationError):
            InitDistribution(NormalLaw(), {(1, "gains"): NormalLaw()})
        with pytest.raises(ValidationError):
            InitDistribution(NormalLaw(), {(3, "weights"): NormalLaw()}).check_architecture(arch_111)


class TestCertification:
    """Tests for the inactivity certificates"""

    def test_layer1_window(self, arch_111):
        narrow = ParamVector([0.1, -1.5, 1.0, 0.0], arch_111)
        wide = ParamVector([1.0, -1.5, 1.0, 0.0], arch_111)

        assert certify_layer1_inactive(narrow, (-2.0, -1.0), (0.0, 1.0)) is True
        assert certify_layer1_inactive(wide, (-2.0, -1.0), (0.0, 1.0)) is False
        with pytest.raises(ValidationError):
            certify_layer1_inactive(narrow, (-1.0, -2.0), (0.0, 1.0))

    def test_layer1_mask_matches_scalar_check(self):
        arch = Architecture((2, 2, 1))
        thetas = InitDistribution(NormalLaw(), {(1, "biases"): NormalLaw(1.0, 1.5)}).sample_many(arch, stream(2, "init"), 300)
        mask = layer1_certified_mask(thetas, arch, (-2.0, -1.0), (0.0, 1.0))

        expected = [certify_layer1_inactive(ParamVector(t, arch), (-2.0, -1.0), (0.0, 1.0)) for t in thetas]
        assert mask.tolist() == expected
        assert mask.any()

    def test_interval_bounds(self):
        lows_highs = interval_bounds(_two_neuron_case(-0.5), relu(), (0.0, 1.0), 2)

        np.testing.assert_array_equal(lows_highs[0][0], [0.0, 0.0])
        np.testing.assert_array_equal(lows_highs[0][1], [1.0, 1.0])
        assert lows_highs[1][0].tolist() == [-1.5]
        assert lows_highs[1][1].tolist() == [0.5]

    @pytest.mark.parametrize(
        "b2,verdict",
        [(-5.0, Inactivity.INACTIVE), (0.5, Inactivity.ACTIVE), (-0.5, Inactivity.UNKNOWN)],
    )
    def test_tri_state_verdicts(self, b2, verdict):
        """Interval arithmetic cannot see the cancellation x - x, so b2 = -0.5 stays unknown"""
        theta = _two_neuron_case(b2)
        assert certify_layer_inactive(theta, 2, relu(), (0.0, 1.0), stream(0, "falsifier"), 200) is verdict

    def test_output_layer_is_not_hidden(self):
        with pytest.raises(ValidationError):
            certify_layer_inactive(_two_neuron_case(0.0), 3, relu(), (0.0, 1.0))

    def test_probe_points(self):
        points = box_probe_points((0.0, 1.0), 2, stream(0, "falsifier"), 10)

        assert points.shape == (14, 2)
        assert points[:4].tolist() == [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]

    @pytest.mark.parametrize("act", [relu(), clip(0.0, 1.0)], ids=["relu", "clip"])
    def test_certificates_are_sound(self, act):
        """No sampled input ever activates a layer certified inactive"""
        arch = Architecture((2, 3, 2, 1))
        box = (0.0, 1.0)
        dist = InitDistribution(NormalLaw(), {(k, "biases"): NormalLaw(1.0, 1.5) for k in (1, 2)})
        thetas = dist.sample_many(arch, stream(7, "init"), 400)
        masks = certified_inactive_masks(thetas, arch, act, box)
        rng = stream(7, "falsifier")

        checked = 0
        for i, k in zip(*np.nonzero(masks)):
            assert not sampling_falsifier(
                arch.widths, thetas[i], act, int(k) + 1, act.flat_lo, act.flat_hi, act.exception_set, box, rng, 50
            )
            checked += 1
        assert checked > 0

    def test_shallow_network_has_no_hidden_layer(self):
        arch = Architecture((1, 1))
        thetas = np.zeros((3, arch.param_count))

        assert certified_inactive_masks(thetas, arch, relu(), (0.0, 1.0)).shape == (3, 0)
        assert not layer1_certified_mask(thetas, arch, (-2.0, -1.0), (0.0, 1.0)).any()


class TestBoundInputs:
    """Tests for hypotheses and derived constants"""

    def test_relu_defaults(self, arch_1111):
        inputs = BoundInputs.from_activation(relu(), arch_1111, (0.0, 1.0))

        assert inputs.window == (-2.0, -1.0)
        assert inputs.gamma == 0.0
        assert inputs.rho == -math.inf
        assert inputs.bias_threshold == 0.0
        assert inputs.chi == inputs.arch.param_count
        assert inputs.to_record()["rho"] == "-inf"

    def test_clip_constants(self):
        inputs = BoundInputs.from_activation(clip(-1.0, 1.0), Architecture((1, 2, 2, 1)), (0.0, 1.0))

        assert inputs.window == (-3.0, -2.0)
        assert inputs.gamma == -1.0
        assert inputs.rho == -0.5
        assert inputs.bias_threshold == -2.0

    def test_default_window_in_short_flat_interval(self):
        """A flat interval narrower than 2 falls back to its second quarter"""
        act = CustomActivation(
            "bump",
            lambda x: np.where((x > -1.0) & (x < 0.0), 0.0, x),
            lambda x: np.where((x > -1.0) & (x < 0.0), 0.0, 1.0),
            exception_set=(-1.0, 0.0),
            flat_lo=-1.0,
            flat_hi=0.0,
            inf_bound=-np.inf,
        )
        assert default_window(act) == (-0.75, -0.5)

    @pytest.mark.parametrize("window", [(-1.0, 0.5), (-1.0, -2.0)])
    def test_invalid_window(self, arch_111, window):
        with pytest.raises(ValidationError) as excinfo:
            BoundInputs.from_activation(relu(), arch_111, (0.0, 1.0), window=window).validate()
        assert excinfo.value.details["field"] == "bound.window"

    def test_gamma_cap(self, arch_111):
        with pytest.raises(ValidationError):
            BoundInputs.from_activation(relu(), arch_111, (0.0, 1.0), gamma=0.5).validate()

    def test_window_margin(self, arch_111):
        assert BoundInputs.from_activation(relu(), arch_111, (0.0, 1.0), window=(-2.0, -1.0)).window_margin_ok()
        assert not BoundInputs.from_activation(relu(), arch_111, (0.0, 1.0), window=(-1.0, -0.1)).window_margin_ok()

    def test_chi_threshold(self, arch_1111):
        inputs = BoundInputs.from_activation(relu(), arch_1111, (0.0, 1.0), chi=3)

        assert inputs.chi_threshold == 4
        assert inputs.deep_applicability() == {"flat_lo_is_minus_infinity": True, "chi_condition": False}


class TestAnalyticBounds:
    """Closed-form values of the bounds"""

    def test_layer1_relu_111(self, arch_111):
        inputs = BoundInputs.from_activation(relu(), arch_111, (0.0, 1.0))
        expected = (norm.cdf(-1.25) - norm.cdf(-1.75)) * (norm.cdf(0.5) - norm.cdf(-0.5))

        assert layer1_bound(InitDistribution.standard_normal(), inputs) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.025116, abs=1e-6)

    @pytest.mark.parametrize("act", [relu(), clip(-1.0, 1.0)], ids=["relu", "clip"])
    def test_layer1_nonincreasing_as_window_shrinks(self, act):
        arch = Architecture((2, 2, 1))
        dist = InitDistribution.standard_normal()
        center = act.flat_hi - 1.5
        values = [
            layer1_bound(dist, BoundInputs.from_activation(act, arch, (0.0, 1.0), window=(center - half, center + half)))
            for half in (1.0, 0.75, 0.5, 0.25, 0.1, 0.01)
        ]

        assert all(later <= earlier for earlier, later in zip(values, values[1:]))
        assert values[-1] < values[0]

    def test_layer1_needs_a_hidden_layer(self):
        inputs = BoundInputs.from_activation(relu(), Architecture((1, 1)), (0.0, 1.0))
        assert layer1_bound(InitDistribution.standard_normal(), inputs) == 0.0

    def test_layer1_scales_with_box(self):
        """A wider box shrinks the weight threshold"""
        dist = InitDistribution.standard_normal()
        arch = Architecture((2, 1, 1))
        unit = layer1_bound(dist, BoundInputs.from_activation(relu(), arch, (0.0, 1.0)))
        wide = layer1_bound(dist, BoundInputs.from_activation(relu(), arch, (-3.0, 3.0)))
        threshold = 1.0 / (2 * 2 * 3.0)
        bias = norm.cdf(-1.25) - norm.cdf(-1.75)

        assert wide == pytest.approx(bias * (2 * norm.cdf(threshold) - 1.0) ** 2, rel=1e-12)
        assert wide < unit

    @pytest.mark.parametrize("widths,expected", [((1, 1, 1, 1), 0.25), ((1, 1, 1, 1, 1), 0.4375), ((1, 1, 1), 0.0)])
    def test_deep_bound_relu(self, widths, expected):
        inputs = BoundInputs.from_activation(relu(), Architecture(widths), (0.0, 1.0))
        assert deep_layer_bound(InitDistribution.standard_normal(), inputs) == pytest.approx(expected, abs=1e-15)

    def test_deep_bound_clip(self):
        inputs = BoundInputs.from_activation(clip(-1.0, 1.0), Architecture((1, 2, 2, 1)), (0.0, 1.0))
        expected = (norm.cdf(0.0) - norm.cdf(-0.5)) ** 4 * norm.cdf(-2.0) ** 2

        assert deep_layer_terms(InitDistribution.standard_normal(), inputs) == [pytest.approx(expected, rel=1e-12)]
        assert deep_layer_bound(InitDistribution.standard_normal(), inputs) == pytest.approx(expected, rel=1e-12)

    def test_deep_bound_inapplicable_reports_zero(self, arch_1111):
        inputs = BoundInputs.from_activation(relu(), arch_1111, (0.0, 1.0), chi=3)
        assert deep_layer_bound(InitDistribution.standard_normal(), inputs) == 0.0

    def test_combined_is_the_larger(self, arch_1111):
        dist = InitDistribution.standard_normal()
        inputs = BoundInputs.from_activation(relu(), arch_1111, (0.0, 1.0))

        assert combined_bound(dist, inputs) == max(layer1_bound(dist, inputs), deep_layer_bound(dist, inputs)) == 0.25

    def test_best_window_beats_default(self, arch_111):
        dist = InitDistribution.standard_normal()
        inputs = BoundInputs.from_activation(relu(), arch_111, (0.0, 1.0))
        window, value = best_layer1_window(dist, inputs)

        assert value >= layer1_bound(dist, inputs)
        assert window[1] <= 0.0

    def test_bound_report(self, arch_1111):
        report = bound_report(relu(), InitDistribution.standard_normal(), BoundInputs.from_activation(relu(), arch_1111, (0.0, 1.0)))
        record = report.to_record()

        assert record["arch"] == [1, 1, 1, 1]
        assert record["deep_bound"] == pytest.approx(0.25)
        assert record["combined_bound"] == max(record["layer1_bound"], record["deep_bound"])
        assert record["diagnostics"]["chi_condition"] is True
        assert record["diagnostics"]["window_margin_ok"] is True


class TestWitnessSets:
    """Empirical frequencies against the analytic bounds"""

    def test_witness_frequency_matches_deep_bound(self, arch_1111):
        n = 20_000
        dist = InitDistribution.standard_normal()
        inputs = BoundInputs.from_activation(relu(), arch_1111, (0.0, 1.0))
        thetas = dist.sample_many(arch_1111, stream(11, "init"), n)

        freq = float(np.mean(deep_witness_mask(thetas, inputs)))

        assert abs(freq - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / n)

    def test_witness_implies_certified_inactive(self):
        arch = Architecture((1, 2, 2, 2, 1))
        inputs = BoundInputs.from_activation(relu(), arch, (0.0, 1.0))
        thetas = InitDistribution.standard_normal().sample_many(arch, stream(12, "init"), 5000)

        witness = deep_witness_mask(thetas, inputs)
        certified = certified_inactive_masks(thetas, arch, relu(), (0.0, 1.0)).any(axis=1)

        assert witness.any()
        assert np.all(certified[witness])

    def test_layer1_frequency_above_bound(self, arch_111):
        n = 20_000
        dist = InitDistribution.standard_normal()
        inputs = BoundInputs.from_activation(relu(), arch_111, (0.0, 1.0))
        bound = layer1_bound(dist, inputs)
        thetas = dist.sample_many(arch_111, stream(13, "init"), n)

        freq = float(np.mean(layer1_certified_mask(thetas, arch_111, inputs.window, inputs.box)))

        assert freq >= bound - 3 * math.sqrt(bound * (1 - bound) / n)


class TestDepthSweep:
    """Tests for the growing-depth bound"""

    def test_values(self):
        rows = dict(depth_sweep_bound(1, [1, 2, 3, 4, 1002], 0.5))

        assert rows[1] == rows[2] == 0.0
        assert rows[3] == pytest.approx(0.25)
        assert rows[4] == pytest.approx(0.4375)
        assert dict(depth_sweep_bound(1, [1002], 0.1))[1002] == pytest.approx(1 - 0.99**1000, rel=1e-12)

    def test_monotone_in_depth(self):
        values = [v for _, v in depth_sweep_bound(2, [3, 10, 30, 100, 1000], 0.6)]
        assert values == sorted(values)

    def test_negative_inf_bound_shrinks_q(self):
        """With A = -1, l = 1, c = 2, eps = 1: q = p / 3"""
        rows = dict(depth_sweep_bound(1, [3], 0.6, inf_bound=-1.0))
        assert rows[3] == pytest.approx(0.2**2)

    @pytest.mark.parametrize("p", [0.0, 1.0, 1.5])
    def test_p_outside_unit_interval(self, p):
        with pytest.raises(BoundInapplicableError):
            depth_sweep_bound(1, [3], p)

    def test_p_limit_enforced(self):
        with pytest.raises(BoundInapplicableError) as excinfo:
            depth_sweep_bound(1, [3], 0.6, p_limit=0.5)
        assert excinfo.value.details["limit"] == 0.5

    def test_invalid_width_or_depth(self):
        with pytest.raises(ValidationError):
            depth_sweep_bound(0, [3], 0.5)
        with pytest.raises(ValidationError):
            depth_sweep_bound(1, [0], 0.5)

    def test_divergence_sequence(self):
        assert divergence_sequence(1, [3, 10], 0.5) == [0.75, 2.5]

    def test_admissible_p_limit(self):
        base = ScaledLaw("norm")

        assert admissible_p_limit(base, 0.0, 0.0) == pytest.approx(0.5)
        assert admissible_p_limit(base, -1.0, -1.0) == pytest.approx(norm.cdf(-4.0), rel=1e-9)
        with pytest.raises(ValidationError):
            admissible_p_limit(base, 0.0, 0.0, eps=0.0)
