"""
Tests for the reach-avoid payoff, backups and learning targets.
"""

import numpy as np
import pytest

from reach_avoid_rl.bellman import (
    ddqn_target,
    discounted_backup,
    drabe_backup,
    minimax_ddqn_target,
    minimax_drabe_backup,
    minimax_value,
    payoff,
    rabe_backup,
    safety_backup,
    safety_term,
    sum_cost_target,
    sum_costs,
)
from reach_avoid_rl.envs import AttackDefense, make_environment
from reach_avoid_rl.replay import Transition
from reach_avoid_rl.tabular import TransitionModel, grid_for_env


def _transition(l=0.5, g=-1.0, l_next=-0.2, g_next=-1.0, terminal=False, dim=2):
    return Transition(
        state=np.zeros(dim),
        action=0,
        next_state=np.zeros(dim),
        terminal=terminal,
        l=l,
        g=g,
        l_next=l_next,
        g_next=g_next,
    )


def _const_q(values):
    row = np.asarray(values, dtype=float)
    return lambda states: np.tile(row, (len(states), 1))


class TestPayoff:
    """Tests for the trajectory payoff."""

    def test_reaches_target(self):
        """Test: trace that reaches the target safely is negative."""
        assert payoff([1.0, 0.5, -0.3], [-1.0, -0.8, -0.9]) == pytest.approx(-0.3)

    def test_failure_before_target(self):
        """Test: earlier failure dominates a later target visit."""
        assert payoff([1.0, 0.5, -0.3], [-1.0, 0.2, -0.9]) == pytest.approx(0.2)

    def test_target_before_failure(self):
        """Test: failure after the target visit does not matter."""
        assert payoff([-0.4, 1.0], [-1.0, 2.0]) == pytest.approx(-0.4)

    def test_single_state(self):
        """Test: one-state trace is max(l, g)."""
        assert payoff([0.3], [-0.1]) == pytest.approx(0.3)

    def test_empty_trace(self):
        """Test: empty trace is rejected."""
        with pytest.raises(ValueError):
            payoff([], [])

    def test_length_mismatch(self):
        """Test: l and g traces must have equal length."""
        with pytest.raises(ValueError):
            payoff([0.1, 0.2], [0.1])


class TestBackups:
    """Tests for the array kernels and state-level backups."""

    def test_drabe_at_gamma_one_is_rabe(self):
        """Test: discounted backup at gamma=1 equals max(g, min(l, v))."""
        assert discounted_backup(0.5, -1.0, 0.2, 1.0) == pytest.approx(0.2)
        assert discounted_backup(0.5, 0.7, -3.0, 1.0) == pytest.approx(0.7)

    def test_gamma_zero_gives_max_lg(self):
        """Test: at gamma=0 the backup is the immediate max(l, g)."""
        assert discounted_backup(0.5, -1.0, -9.0, 0.0) == pytest.approx(0.5)

    def test_safety_backup_values(self):
        """Test: safety kernel follows gamma*min(g, v) + (1-gamma)*g."""
        assert safety_term(-1.0, -3.0, 0.5) == pytest.approx(-2.0)
        assert safety_term(2.0, 5.0, 0.5) == pytest.approx(2.0)

    def test_state_level_backups(self, particle):
        """Test: state-level backups evaluate the minimum over successors."""
        state = [0.0, 0.0]
        l, g = particle.margins(state)

        def value_fn(states):
            return states[:, 0]  # cheapest successor is the leftmost one

        v_min = -0.1
        assert rabe_backup(value_fn, particle, state) == pytest.approx(max(g, min(l, v_min)))
        assert drabe_backup(value_fn, particle, state, 0.9) == pytest.approx(
            0.9 * max(g, min(l, v_min)) + 0.1 * max(l, g)
        )
        assert safety_backup(value_fn, particle, state, 0.9) == pytest.approx(
            0.9 * min(g, v_min) + 0.1 * g
        )

    def test_drabe_rejects_bad_gamma(self, particle):
        """Test: gamma outside [0, 1] raises ValueError."""
        with pytest.raises(ValueError):
            drabe_backup(lambda s: s[:, 0], particle, [0.0, 0.0], 1.5)

    def test_minimax_value(self):
        """Test: min over attacker of max over defender on a 2x2 game."""
        assert float(minimax_value([1.0, 2.0, 0.0, 3.0], 2, 2)) == pytest.approx(2.0)

    def test_minimax_backup_dominated_by_margins(self, game):
        """Test: with g >= every successor value the backup reduces to margins."""
        state = [0.8, 0.0, np.pi, 0.0, 0.0, 0.0]
        l, g = game.margins(state)
        value = minimax_drabe_backup(lambda s: np.full(len(s), -100.0), game, state, 1.0)
        assert value == pytest.approx(max(g, min(l, -100.0)))

    def test_degenerate_game_matches_single_player(self):
        """Test: a 1x1 game backup equals the single-player backup."""
        env = AttackDefense(attacker_controls=(0.0,), defender_controls=(0.0,))
        state = [0.8, 0.0, np.pi, 0.0, 0.3, 0.0]

        def value_fn(states):
            return np.linalg.norm(states[:, 0:2], axis=1) - 0.5

        assert minimax_drabe_backup(value_fn, env, state, 0.9) == pytest.approx(
            drabe_backup(value_fn, env, state, 0.9)
        )

    def test_minimax_requires_game(self, particle):
        """Test: minimax backup rejects single-player environments."""
        with pytest.raises(TypeError):
            minimax_drabe_backup(lambda s: s[:, 0], particle, [0.0, 0.0], 0.9)


class TestTargets:
    """Tests for the DDQN learning targets."""

    def test_double_q_decoupling(self):
        """Test: online argmin picks the action, the target net values it."""
        t = _transition(l=2.0, g=-1.0, l_next=0.0, g_next=0.0)
        y = ddqn_target(t, _const_q([1.0, 0.0, 2.0]), _const_q([5.0, 7.0, 9.0]), 0.9)
        # bootstrap = 7 (action 1); 0.9*max(-1, min(2, 7)) + 0.1*max(2, -1)
        assert y == pytest.approx(2.0)

    def test_terminal_bootstraps_from_margins(self):
        """Test: terminal successor uses max(l', g') in place of Q."""
        t = _transition(l=0.5, g=-1.0, l_next=-0.2, g_next=-1.0, terminal=True)
        y = ddqn_target(t, _const_q([100.0]), _const_q([100.0]), 0.9)
        assert y == pytest.approx(-0.13)

    def test_minimax_target(self):
        """Test: minimax target values the online saddle action with the target net."""
        t = _transition(l=20.0, g=-1.0, l_next=0.0, g_next=0.0, dim=6)
        y = minimax_ddqn_target(
            t, _const_q([1.0, 3.0, 2.0, 0.0]), _const_q([10.0, 11.0, 12.0, 13.0]), 1.0, 2, 2
        )
        # online: attacker 0 worst is 3 (d=1), attacker 1 worst is 2 (d=0) -> a=1, d=0
        assert y == pytest.approx(12.0)

    def test_sum_costs(self):
        """Test: failure costs rho, target costs -1, failure wins when both hold."""
        costs = sum_costs(np.array([1.0, -1.0, -1.0]), np.array([-1.0, -1.0, 0.5]), 1.0)
        assert np.allclose(costs, [0.0, -1.0, 1.0])

    def test_sum_target_terminal(self):
        """Test: terminal sum targets are the immediate cost."""
        fail = _transition(l_next=1.0, g_next=0.5, terminal=True)
        goal = _transition(l_next=-0.5, g_next=-1.0, terminal=True)
        q = _const_q([3.0, 4.0, 5.0])
        assert sum_cost_target(fail, q, q, 0.95, 1.0) == pytest.approx(1.0)
        assert sum_cost_target(goal, q, q, 0.95, 1.0) == pytest.approx(-1.0)

    def test_sum_target_bootstrap(self):
        """Test: non-terminal sum target adds the discounted double-Q value."""
        t = _transition(l_next=1.0, g_next=-1.0)
        y = sum_cost_target(t, _const_q([1.0, 0.0]), _const_q([4.0, 8.0]), 0.5, 1.0)
        assert y == pytest.approx(4.0)


def _apply_backup(model, values, gamma):
    v_next = np.min(model.successor_values(values), axis=1)
    return discounted_backup(model.l, model.g, v_next, gamma)


@pytest.fixture(scope="module")
def particle_model():
    env = make_environment("particle")
    return TransitionModel.build(env, grid_for_env(env, (81, 241)))


class TestBackupProperties:
    """Property checks of the discounted operators on random value functions."""

    @pytest.mark.parametrize("gamma", [0.5, 0.9, 0.9999])
    def test_contraction_on_random_pairs(self, particle_model, gamma):
        """Test: sup-norm distance shrinks by at least gamma for 200 random pairs."""
        rng = np.random.default_rng(7)
        n = particle_model.n_cells
        for _ in range(200):
            v = rng.normal(scale=3.0, size=n)
            w = v + rng.normal(scale=rng.uniform(0.01, 5.0), size=n)
            diff = _apply_backup(particle_model, v, gamma) - _apply_backup(particle_model, w, gamma)
            gap = np.max(np.abs(diff))
            assert gap <= gamma * np.max(np.abs(v - w)) + 1e-12

    def test_drabe_monotone_in_gamma(self, particle):
        """Test: a larger discount never raises the backup of a fixed value function."""
        rng = np.random.default_rng(3)
        gammas = [0.0, 0.3, 0.5, 0.9, 0.99, 0.9999, 1.0]
        for state in particle.sample_states(50, seed=4):
            w = rng.normal(size=2)
            c = rng.normal()

            def value_fn(states, w=w, c=c):
                return states @ w + c

            backups = [drabe_backup(value_fn, particle, state, gamma) for gamma in gammas]
            assert all(b <= a + 1e-12 for a, b in zip(backups, backups[1:]))

    def test_minimax_monotone_in_values(self, game):
        """Test: raising the value function pointwise never lowers the minimax backup."""
        rng = np.random.default_rng(5)
        for state in game.sample_states(40, seed=6):
            w = rng.normal(size=6)
            bump = rng.uniform(0.0, 2.0, size=6)

            def low(states, w=w):
                return states @ w

            def high(states, w=w, bump=bump):
                return states @ w + np.abs(states) @ bump + 0.1

            for gamma in (0.5, 0.99, 1.0):
                assert minimax_drabe_backup(low, game, state, gamma) <= minimax_drabe_backup(
                    high, game, state, gamma
                ) + 1e-12

    def test_ddqn_target_matches_drabe(self, particle):
        """Test: with both nets reading off one value function, the best target is the backup."""
        rng = np.random.default_rng(9)
        w = rng.normal(size=2)

        def value_fn(states):
            return np.atleast_2d(states) @ w - 0.5

        def q_fn(states):
            return np.repeat(value_fn(states)[:, None], particle.n_actions, axis=1)

        for state in particle.sample_states(30, seed=8):
            l, g = particle.margins(state)
            targets = []
            for a in range(particle.n_actions):
                s_next = particle.step_index(state, a)
                l_next, g_next = particle.margins(s_next)
                t = Transition(
                    state=np.asarray(state),
                    action=a,
                    next_state=np.asarray(s_next),
                    terminal=False,
                    l=l,
                    g=g,
                    l_next=l_next,
                    g_next=g_next,
                )
                targets.append(ddqn_target(t, q_fn, q_fn, 0.95))
            assert min(targets) == pytest.approx(drabe_backup(value_fn, particle, state, 0.95))

    def test_safety_backup_rejects_gamma_one(self, particle):
        """Test: the safety backup needs a strict discount."""
        with pytest.raises(ValueError):
            safety_backup(lambda s: s[:, 0], particle, [0.0, 0.0], 1.0)
