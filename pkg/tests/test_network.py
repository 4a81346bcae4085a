"""
Tests for the numpy MLP, its optimisers and soft target updates.
"""

import numpy as np
import pytest

from reach_avoid_rl.errors import DimensionError
from reach_avoid_rl.network import (
    Adam,
    NetworkParams,
    action_mse,
    forward,
    make_optimizer,
    soft_update,
)


@pytest.fixture
def net():
    return NetworkParams.initialize((3, 5, 4, 2), seed=0)


class TestForward:
    """Tests for the forward pass."""

    def test_single_and_batch(self, net):
        """Test: a 1-D state gives a 1-D output matching the batch row."""
        states = np.array([[0.1, -0.2, 0.3], [1.0, 0.0, -1.0]])
        batch = forward(net, states)
        assert batch.shape == (2, 2)
        assert np.allclose(forward(net, states[1]), batch[1])

    def test_zero_network(self):
        """Test: an all-zero network outputs its (zero) biases."""
        params = NetworkParams.zeros((2, 3, 4))
        assert np.array_equal(forward(params, np.ones((5, 2))), np.zeros((5, 4)))

    def test_input_dimension(self, net):
        """Test: wrong input width raises DimensionError."""
        with pytest.raises(DimensionError):
            forward(net, np.zeros((1, 4)))

    def test_shape_validation(self):
        """Test: mismatched weight shapes are rejected."""
        with pytest.raises(DimensionError):
            NetworkParams((2, 3), [np.zeros((3, 2))], [np.zeros(3)])

    def test_dict_round_trip(self, net):
        """Test: serialised weights reload exactly."""
        data = net.to_dict()
        assert data["kind"] == "network"
        assert NetworkParams.from_dict(data).max_abs_difference(net) == 0.0


class TestGradients:
    """Tests for backpropagation."""

    def test_matches_finite_differences(self, net):
        """Test: analytic gradients of the chosen-action MSE match central differences."""
        rng = np.random.default_rng(1)
        states = rng.normal(size=(6, 3))
        actions = rng.integers(2, size=6)
        targets = rng.normal(size=6)
        _, (grad_w, grad_b) = action_mse(net, states, actions, targets)

        eps = 1e-6
        for layer, (i, j) in [(0, (1, 2)), (1, (4, 0)), (2, (3, 1))]:
            plus, minus = net.copy(), net.copy()
            plus.weights[layer][i, j] += eps
            minus.weights[layer][i, j] -= eps
            numeric = (
                action_mse(plus, states, actions, targets)[0]
                - action_mse(minus, states, actions, targets)[0]
            ) / (2 * eps)
            assert grad_w[layer][i, j] == pytest.approx(numeric, rel=1e-4, abs=1e-8)

        plus, minus = net.copy(), net.copy()
        plus.biases[2][0] += eps
        minus.biases[2][0] -= eps
        numeric = (
            action_mse(plus, states, actions, targets)[0]
            - action_mse(minus, states, actions, targets)[0]
        ) / (2 * eps)
        assert grad_b[2][0] == pytest.approx(numeric, rel=1e-4, abs=1e-8)

    def test_unchosen_actions_get_no_gradient(self):
        """Test: only the taken action's output contributes to the loss."""
        params = NetworkParams.zeros((1, 2))
        _, (grad_w, grad_b) = action_mse(params, np.ones((1, 1)), np.array([0]), np.array([1.0]))
        assert grad_b[0][1] == 0.0
        assert grad_b[0][0] == pytest.approx(-2.0)


class TestOptimizers:
    """Tests for Adam, AdamW and soft updates."""

    def test_adam_first_step_is_lr(self):
        """Test: the first Adam step moves a parameter by about lr."""
        params = NetworkParams.zeros((1, 1))
        opt = Adam(params, lr=0.01)
        opt.step(params, ([np.array([[2.0]])], [np.array([0.0])]))
        assert params.weights[0][0, 0] == pytest.approx(-0.01, rel=1e-6)
        assert params.biases[0][0] == 0.0

    def test_adamw_decay(self):
        """Test: decoupled weight decay shrinks parameters without a gradient."""
        params = NetworkParams((1, 1), [np.array([[1.0]])], [np.array([1.0])])
        opt = make_optimizer("adamw", params, lr=0.1, weight_decay=0.01)
        opt.step(params, ([np.zeros((1, 1))], [np.zeros(1)]))
        assert params.weights[0][0, 0] == pytest.approx(0.999)
        assert params.biases[0][0] == pytest.approx(0.999)

    def test_unknown_optimizer(self, net):
        """Test: unsupported optimizer names raise ValueError."""
        with pytest.raises(ValueError):
            make_optimizer("sgd", net)

    def test_soft_update_geometric(self, net):
        """Test: repeated soft updates close the gap by (1 - tau) each time."""
        online = NetworkParams.initialize((3, 5, 4, 2), seed=1)
        target = net.copy()
        gap = target.max_abs_difference(online)
        for _ in range(10):
            soft_update(target, online, 0.1)
        diff = target.weights[0] - online.weights[0]
        assert np.allclose(diff, 0.9**10 * (net.weights[0] - online.weights[0]))
        assert target.max_abs_difference(online) < gap

    def test_soft_update_validation(self, net):
        """Test: tau outside [0, 1] and shape mismatches are rejected."""
        with pytest.raises(ValueError):
            soft_update(net.copy(), net, 1.5)
        with pytest.raises(DimensionError):
            soft_update(net.copy(), NetworkParams.zeros((3, 2)), 0.5)
