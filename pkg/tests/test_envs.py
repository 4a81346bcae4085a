"""
Tests for the benchmark environments.
"""

import math

import numpy as np
import pytest

from reach_avoid_rl.envs import (
    AttackDefense,
    DubinsCar,
    PointParticle,
    list_environments,
    make_environment,
    margins,
    sample_state,
    step,
)
from reach_avoid_rl.errors import ActionError, ConfigError, DimensionError
from reach_avoid_rl.geometry import BoxSpec, polygon_signed_distance


class TestStep:
    """Tests for single-step integration."""

    def test_particle_euler_step(self, particle):
        """Test: particle with u=0 moves straight up by vy*dt."""
        s = step(particle, [0.0, 0.0], [0.0])
        assert np.allclose(s, [0.0, 0.1])

    def test_particle_action_index_matches_control(self, particle):
        """Test: step_index uses the same control ordering as step."""
        assert np.allclose(particle.step_index([0.0, 0.0], 2), particle.step([0.0, 0.0], [1.0]))
        assert np.allclose(particle.step_index([0.0, 0.0], 0), [-0.1, 0.1])

    def test_dubins_straight(self, dubins):
        """Test: Dubins car driving straight advances along its heading."""
        s = dubins.step([0.0, 0.0, 0.0], [0.0])
        assert np.allclose(s, [0.025, 0.0, 0.0])

    def test_dubins_turn_matches_arc(self, dubins):
        """Test: RK4 turning step agrees with the closed-form arc."""
        omega, v, dt = 0.833, 0.5, 0.05
        s = dubins.step([0.0, 0.0, 0.0], [omega])
        assert s[2] == pytest.approx(0.04165)
        assert s[0] == pytest.approx(v / omega * math.sin(omega * dt), abs=1e-6)
        assert s[1] == pytest.approx(v / omega * (1.0 - math.cos(omega * dt)), abs=1e-6)

    def test_heading_wraps(self, dubins):
        """Test: headings stay in [0, 2pi) after crossing the period."""
        s = dubins.step([0.0, 0.0, 2 * math.pi - 0.01], [0.833])
        assert 0.0 <= s[2] < 0.1

    def test_batch_matches_single(self, dubins):
        """Test: step_batch equals repeated single steps."""
        states = np.array([[0.1, 0.2, 0.3], [-0.4, 0.0, 5.0]])
        batch = dubins.step_batch(states, [0, 2])
        assert np.allclose(batch[0], dubins.step_index(states[0], 0))
        assert np.allclose(batch[1], dubins.step_index(states[1], 2))

    def test_wrong_dimension_raises(self, particle):
        """Test: a state of the wrong length is rejected."""
        with pytest.raises(DimensionError):
            particle.step([0.0, 0.0, 0.0], [0.0])

    def test_unknown_control_raises(self, particle):
        """Test: controls outside the finite set are rejected."""
        with pytest.raises(ActionError):
            particle.step([0.0, 0.0], [0.5])

    def test_action_index_out_of_range(self, particle):
        """Test: step_batch rejects indices outside the action set."""
        with pytest.raises(ActionError):
            particle.step_batch(np.zeros((1, 2)), 3)

    def test_non_finite_state_raises(self, particle):
        """Test: NaN states are rejected."""
        with pytest.raises(ValueError):
            particle.step([np.nan, 0.0], [0.0])


class TestMargins:
    """Tests for target and safety margins."""

    def test_dubins_inside(self, dubins):
        """Test: position norm 0.3 gives l=-0.2, g=-0.7."""
        l, g = margins(dubins, [0.3, 0.0, 1.0])
        assert l == pytest.approx(-0.2)
        assert g == pytest.approx(-0.7)

    def test_dubins_outer_circle_is_not_failure(self, dubins):
        """Test: on the outer circle g is exactly 0."""
        _, g = dubins.margins([1.0, 0.0, 0.0])
        assert g == 0.0

    def test_particle_target_center(self, particle):
        """Test: target centre has Chebyshev margins -0.75 for l and g."""
        l, g = particle.margins([0.0, 9.25])
        assert l == pytest.approx(-0.75)
        assert g == pytest.approx(-0.75)

    def test_particle_obstacle_is_failure(self, particle):
        """Test: obstacle centre lies in the failure set."""
        _, g = particle.margins([0.0, 6.0])
        assert g == pytest.approx(0.75)

    def test_attack_defense_capture(self, game):
        """Test: attacker 0.2 from the defender is captured."""
        _, g = game.margins([0.7, 0.0, 0.0, 0.5, 0.0, 0.0])
        assert g == pytest.approx(0.05)
        assert g > 0

    def test_attack_defense_capture_boundary(self, game):
        """Test: a gap of exactly the capture radius is not a capture."""
        _, g = game.margins([0.75, 0.0, 0.0, 0.5, 0.0, 0.0])
        assert g == 0.0

    def test_lander_margins(self):
        """Test: lander margins are signed distances to the target box and terrain."""
        env = make_environment("lander")
        l, g = env.margins([0.0, 3.25, 0.0, 0.0, 0.0, 0.0])
        assert l == pytest.approx(-1.0)
        _, g_air = env.margins([0.0, 5.0, 0.0, 0.0, 0.0, 0.0])
        assert g_air == pytest.approx(-3.0)
        _, g_ground = env.margins([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        assert g_ground == pytest.approx(1.0)

    def test_lander_free_fall(self):
        """Test: without thrust the lander accelerates downward at gravity."""
        env = make_environment("lander")
        d = env.derivative(np.zeros((1, 6)), env.controls[[0]])
        assert np.allclose(d[0], [0.0, 0.0, 0.0, 0.0, -1.6, 0.0])

    def test_batch_margins(self, particle):
        """Test: margins_batch agrees with the single-state form."""
        states = np.array([[0.0, 9.25], [0.0, 6.0], [1.9, -1.9]])
        l, g = particle.margins_batch(states)
        for i, s in enumerate(states):
            assert (l[i], g[i]) == pytest.approx(particle.margins(s))


class TestGeometry:
    """Tests for box and polygon margins."""

    def test_box_margin_sign(self):
        """Test: box margin is non-positive exactly on the closed box."""
        box = BoxSpec(center=(0.0, 0.0), size=(2.0, 2.0))
        values = box.margin(np.array([[0.0, 0.0], [1.0, 0.0], [1.5, 0.0]]))
        assert np.allclose(values, [-1.0, 0.0, 0.5])

    def test_box_signed_distance_corner(self):
        """Test: outside a corner the signed distance is Euclidean."""
        box = BoxSpec(center=(0.0, 0.0), size=(2.0, 2.0))
        assert box.signed_distance(np.array([[4.0, 5.0]]))[0] == pytest.approx(5.0)

    def test_polygon_signed_distance(self):
        """Test: unit square distance is negative inside and positive outside."""
        square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
        d = polygon_signed_distance(np.array([[0.5, 0.5], [2.0, 0.5]]), square)
        assert np.allclose(d, [-0.5, 1.0])


class TestSampling:
    """Tests for state sampling."""

    def test_sample_is_reproducible(self, particle):
        """Test: same seed gives the same state."""
        assert np.array_equal(sample_state(particle, 7), sample_state(particle, 7))

    def test_sample_mean(self, particle):
        """Test: uniform samples centre on the domain midpoint."""
        samples = particle.sample_states(100_000, seed=0)
        low, high = particle.domain[:, 0], particle.domain[:, 1]
        midpoint = (low + high) / 2
        stderr = (high - low) / math.sqrt(12 * len(samples))
        assert np.all(np.abs(samples.mean(axis=0) - midpoint) < 4 * stderr)

    def test_attack_defense_ring(self, game):
        """Test: attacker samples lie in the ring, defender samples in the disk."""
        samples = game.sample_states(2_000, seed=3)
        ra = np.linalg.norm(samples[:, 0:2], axis=1)
        rd = np.linalg.norm(samples[:, 3:5], axis=1)
        assert np.all((ra >= 0.5) & (ra <= 1.0))
        assert np.all(rd <= 1.0)
        assert np.all((samples[:, [2, 5]] >= 0) & (samples[:, [2, 5]] < 2 * math.pi))


class TestRegistry:
    """Tests for the environment registry."""

    def test_presets(self):
        """Test: every preset is registered."""
        names = set(list_environments())
        assert {
            "particle",
            "particle-thin",
            "dubins",
            "dubins-high",
            "dubins-low",
            "lander",
            "attack-defense",
        } <= names

    def test_dubins_low_preset(self):
        """Test: the low turn-rate preset uses omega=0.667 and r=0.4."""
        env = make_environment("dubins-low")
        assert isinstance(env, DubinsCar)
        assert env.turn_rate == 0.667
        assert env.inner_radius == 0.4

    def test_override_with_box_dict(self):
        """Test: box parameters can be given as center/size mappings."""
        env = make_environment("particle", {"target": {"center": [0, 8], "size": [1, 1]}})
        assert isinstance(env, PointParticle)
        assert env.target == BoxSpec(center=(0.0, 8.0), size=(1.0, 1.0))

    def test_params_round_trip(self):
        """Test: to_params rebuilds an equal environment."""
        env = make_environment("particle-thin")
        assert make_environment("particle-thin", env.to_params()) == env

    def test_unknown_environment(self):
        """Test: unknown names raise ConfigError."""
        with pytest.raises(ConfigError):
            make_environment("cartpole")

    def test_unknown_parameter(self):
        """Test: unknown fields raise ConfigError naming the field."""
        with pytest.raises(ConfigError) as exc:
            make_environment("dubins", {"wheelbase": 2.0})
        assert exc.value.field == "environment.wheelbase"

    def test_invalid_radii(self):
        """Test: r >= R is rejected."""
        with pytest.raises(ConfigError):
            make_environment("dubins", {"inner_radius": 1.0})

    def test_attack_defense_joint_actions(self, game):
        """Test: the joint action set is the 3x3 product."""
        assert game.n_actions == 9
        assert game.joint_index(1, 2) == 5
        assert np.allclose(game.controls[5], [0.0, -3.0])

    def test_degenerate_game(self):
        """Test: per-player control sets can shrink to a single action."""
        env = AttackDefense(attacker_controls=(0.0,), defender_controls=(0.0,))
        assert env.n_actions == 1
