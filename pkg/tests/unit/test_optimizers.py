#!/usr/bin/env python3
"""
Unit tests for optimizers module.

This module tests learning-rate schedules, the update rules and the
dead-coordinate condition every shipped method must satisfy.
"""

import numpy as np
import pytest

from ann_core import Architecture, ParamVector
from error_handler import ValidationError
from optimizers import (
    OPTIMIZERS,
    SHIPPED_METHODS,
    SGD,
    Adam,
    LearningRateSchedule,
    Momentum,
    make_optimizer,
    verify_phi_condition,
)
from selftest import DriftingSGD


class TestLearningRateSchedule:
    """Tests for γ_n schedules"""

    def test_constant(self):
        schedule = LearningRateSchedule("constant", 0.1)
        assert schedule.rate(1) == schedule.rate(500) == 0.1

    def test_inverse(self):
        schedule = LearningRateSchedule("inverse", 0.5)
        assert [schedule.rate(n) for n in (1, 2, 4)] == [0.5, 0.25, 0.125]

    def test_list(self):
        schedule = LearningRateSchedule("list", values=[0.3, 0.2])

        assert schedule.rate(2) == 0.2
        assert len(schedule) == 2
        with pytest.raises(ValidationError):
            schedule.rate(3)

    def test_step_index_starts_at_one(self):
        with pytest.raises(ValidationError):
            LearningRateSchedule("constant", 0.1).rate(0)

    @pytest.mark.parametrize(
        "kind,value,values",
        [("constant", 0.0, None), ("inverse", None, None), ("list", None, []), ("list", None, [0.1, -0.1]), ("cosine", 0.1, None)],
    )
    def test_invalid(self, kind, value, values):
        with pytest.raises(ValidationError):
            LearningRateSchedule(kind, value, values)

    def test_from_config(self):
        assert LearningRateSchedule.from_config(0.05).to_record() == {"schedule": "constant", "value": 0.05}
        assert LearningRateSchedule.from_config({"schedule": "list", "values": [1, 2]}).values == (1.0, 2.0)


class TestUpdateRules:
    """Tests for individual update rules"""

    def test_sgd(self):
        optimizer = SGD(0.1)
        state, theta = optimizer.step(optimizer.init_state(2), np.array([1.0, 1.0]), np.array([2.0, 0.0]))

        np.testing.assert_allclose(theta, [0.8, 1.0])
        assert state.n == 1

    def test_momentum_accumulates(self):
        optimizer = Momentum(0.1, beta=0.9)
        state = optimizer.init_state(1)
        theta = np.zeros(1)
        state, theta = optimizer.step(state, theta, np.ones(1))
        assert theta[0] == pytest.approx(-0.1)
        state, theta = optimizer.step(state, theta, np.ones(1))
        assert theta[0] == pytest.approx(-0.29)

    def test_adam_first_step_is_sign_step(self):
        """Bias correction makes the first step γ·g/|g| up to ε"""
        optimizer = Adam(0.01)
        _, theta = optimizer.step(optimizer.init_state(3), np.zeros(3), np.array([5.0, -0.2, 1e3]))

        np.testing.assert_allclose(theta, [-0.01, 0.01, -0.01], rtol=1e-6)

    def test_step_does_not_mutate_inputs(self):
        optimizer = Adam(0.01)
        state = optimizer.init_state(2)
        theta = np.array([1.0, 2.0])
        grad = np.array([0.5, -0.5])

        new_state, _ = optimizer.step(state, theta, grad)

        assert state.n == 0
        assert np.all(state.accumulators["m"] == 0.0)
        assert theta.tolist() == [1.0, 2.0]
        assert np.any(new_state.accumulators["m"] != 0.0)

    def test_param_vector_in_param_vector_out(self):
        arch = Architecture((1, 1))
        optimizer = SGD(0.5)
        _, theta = optimizer.step(optimizer.init_state(2), ParamVector([1.0, 1.0], arch), np.array([1.0, -1.0]))

        assert isinstance(theta, ParamVector)
        assert theta.theta.tolist() == [0.5, 1.5]

    def test_shape_mismatch(self):
        optimizer = SGD(0.1)
        with pytest.raises(ValidationError):
            optimizer.step(optimizer.init_state(2), np.zeros(2), np.zeros(3))

    @pytest.mark.parametrize("method", sorted(OPTIMIZERS))
    def test_dead_coordinates_stay_put(self, method):
        """A coordinate whose gradients are all zero never moves"""
        optimizer = make_optimizer(method, 0.05)
        rng = np.random.default_rng(0)
        state = optimizer.init_state(3)
        theta = np.array([0.3, -1.7, 2.0])
        for _ in range(25):
            g = rng.standard_normal(3)
            g[1] = 0.0
            state, theta = optimizer.step(state, theta, g)

        assert theta[1] == -1.7
        assert theta[0] != 0.3


class TestMakeOptimizer:
    """Tests for name lookup"""

    def test_known_methods(self):
        assert set(SHIPPED_METHODS) == set(OPTIMIZERS) - {"nadam", "nadamax"}
        assert make_optimizer("momentum", 0.1, beta=0.5).hyperparams() == {"beta": 0.5}

    def test_unknown_method(self):
        with pytest.raises(ValidationError) as excinfo:
            make_optimizer("lbfgs")
        assert excinfo.value.details["field"] == "optimizer.method"

    def test_unknown_hyperparameter(self):
        with pytest.raises(ValidationError):
            make_optimizer("sgd", 0.1, beta=0.9)

    @pytest.mark.parametrize("method,params", [("momentum", {"beta": 1.0}), ("adam", {"eps": 0.0}), ("rmsprop", {"rho": -0.1})])
    def test_out_of_range_hyperparameter(self, method, params):
        with pytest.raises(ValidationError):
            make_optimizer(method, 0.1, **params)

    def test_to_record(self):
        record = make_optimizer("adam", {"schedule": "inverse", "value": 0.01}).to_record()

        assert record["method"] == "adam"
        assert record["lr"] == {"schedule": "inverse", "value": 0.01}
        assert set(record["hyperparams"]) == {"beta1", "beta2", "eps"}


class TestPhiCondition:
    """Tests for the bitwise dead-coordinate simulation"""

    @pytest.mark.parametrize("method", SHIPPED_METHODS)
    def test_shipped_methods_hold(self, method):
        assert verify_phi_condition(method, trials=100, seed=3) is True

    def test_negative_control_is_rejected(self):
        assert verify_phi_condition(DriftingSGD(0.1), trials=20, seed=3) is False

    def test_trials_must_be_positive(self):
        with pytest.raises(ValidationError):
            verify_phi_condition("sgd", trials=0)

    def test_short_list_schedule_rejected(self):
        """A list schedule must cover the longest simulated history"""
        optimizer = make_optimizer("sgd", {"schedule": "list", "values": [0.1] * 10})
        with pytest.raises(ValidationError) as exc:
            verify_phi_condition(optimizer, trials=5, seed=3, max_steps=50)
        assert exc.value.details["field"] == "optimizer.lr.values"
        assert exc.value.details["entries"] == 10

        with pytest.raises(ValidationError):
            verify_phi_condition("adam", {"lr": {"schedule": "list", "values": [0.1, 0.2]}}, trials=5)

    def test_list_schedule_long_enough(self):
        optimizer = make_optimizer("sgd", {"schedule": "list", "values": [0.1] * 20})
        assert verify_phi_condition(optimizer, trials=20, seed=3, max_steps=20) is True
