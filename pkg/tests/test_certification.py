"""
Tests for rollouts, confusion statistics, shielding, exhaustive validation
and reach-avoid set distances.
"""

import numpy as np
import pytest

from reach_avoid_rl.certification import (
    REFERENCE_GAMMA,
    ShieldedController,
    confusion_from_outcomes,
    confusion_matrix,
    exhaustive_validate,
    hausdorff_distance,
    nesting_report,
    rank_worst,
    rollout_batch,
    rollout_membership_value,
    rollout_value,
    shield_action,
    shield_monte_carlo,
)
from reach_avoid_rl.envs import AttackDefense, make_environment
from reach_avoid_rl.network import NetworkParams
from reach_avoid_rl.policies import (
    ConstantPolicy,
    JointPolicy,
    MinimaxPolicy,
    RandomPolicy,
    ScriptedPolicy,
    ValueGridPolicy,
    greedy_policy,
    value_function,
)
from reach_avoid_rl.tabular import (
    ValueGrid,
    build_grid,
    extract_ra_mask,
    gamma_ladder,
    grid_for_env,
    value_iteration,
)


@pytest.fixture
def toy_values(toy_env, toy_grid):
    return value_iteration(toy_env, toy_grid, 0.99)


class TestRollouts:
    """Tests for closed-loop simulation."""

    def test_start_in_target(self, toy_env):
        """Test: a start inside the target succeeds at step 0 with payoff max(l, g)."""
        record = rollout_value(toy_env, ConstantPolicy(1), [0.05, 0.85])
        l, g = toy_env.margins([0.05, 0.85])
        assert record.outcome == "success"
        assert record.steps == 0
        assert record.payoff == pytest.approx(max(l, g))

    def test_start_in_failure(self, toy_env):
        """Test: a start inside an obstacle fails at step 0."""
        record = rollout_value(toy_env, ConstantPolicy(1), [0.05, 0.45])
        assert record.outcome == "failure"
        assert record.steps == 0
        assert record.payoff > 0

    def test_horizon_truncation(self, particle):
        """Test: running out of horizon is reported as unfinished."""
        record = rollout_value(particle, ConstantPolicy(1), [0.0, 0.0], horizon=1)
        assert record.outcome == "unfinished"
        assert record.steps == 1
        assert record.states.shape == (2, 2)

    def test_straight_up_failures(self, toy_env):
        """Test: straight up hits the obstacle in the middle and the ceiling beside it."""
        record = rollout_value(toy_env, ConstantPolicy(1), [0.05, 0.05])
        assert record.outcome == "failure"
        assert record.steps == 4
        record = rollout_value(toy_env, ConstantPolicy(1), [0.35, 0.05])
        assert record.outcome == "failure"
        assert record.steps == 10

    def test_batch_matches_single(self, toy_env, toy_values):
        """Test: batched rollouts agree with one-at-a-time rollouts."""
        policy = ValueGridPolicy(toy_env, toy_values)
        states = toy_env.sample_states(20, seed=3)
        batch = rollout_batch(toy_env, policy, states)
        for i, s in enumerate(states):
            single = rollout_value(toy_env, policy, s)
            assert batch.payoffs[i] == pytest.approx(single.payoff)
            assert batch.steps[i] == single.steps

    def test_invalid_horizon(self, toy_env):
        """Test: horizons below one are rejected."""
        with pytest.raises(ValueError):
            rollout_value(toy_env, ConstantPolicy(1), [0.0, 0.05], horizon=0)


class TestConfusion:
    """Tests for predictor/outcome statistics."""

    def test_counts_and_rates(self):
        """Test: FSR and FFR follow the four confusion counts."""
        report = confusion_from_outcomes([True, True, False, False, True], [True, False, True, False, True])
        assert (report.true_success, report.false_success) == (2, 1)
        assert (report.true_failure, report.false_failure) == (1, 1)
        assert report.fsr == pytest.approx(1 / 3)
        assert report.ffr == pytest.approx(1 / 2)

    def test_empty_predictions(self):
        """Test: rates are zero when nothing was predicted in a class."""
        report = confusion_from_outcomes([False, False], [False, True])
        assert report.fsr == 0.0

    def test_membership_value_is_exact(self, toy_env, toy_values):
        """Test: using realised payoffs as the predictor gives zero FSR and FFR."""
        policy = greedy_policy(toy_env, toy_values)
        states = toy_env.sample_states(300, seed=0)
        report = confusion_matrix(
            toy_env, rollout_membership_value(toy_env, policy), policy, states
        )
        assert report.fsr == 0.0
        assert report.ffr == 0.0
        assert report.total == 300

    def test_grid_predictor(self, toy_env, toy_values):
        """Test: grid values give a well-formed report over all probe states."""
        report = confusion_matrix(
            toy_env, value_function(toy_values), greedy_policy(toy_env, toy_values), toy_env.sample_states(100, seed=1)
        )
        assert report.total == 100
        assert 0.0 <= report.fsr <= 1.0

    def test_no_states(self, toy_env, toy_values):
        """Test: an empty probe set is rejected."""
        with pytest.raises(ValueError):
            confusion_matrix(toy_env, value_function(toy_values), ConstantPolicy(1), np.zeros((0, 2)))


class TestShield:
    """Tests for the receding-horizon shield."""

    @pytest.fixture
    def open_field(self):
        return make_environment("particle", {"obstacles": []})

    def test_unsafe_candidate_replaced(self, open_field):
        """Test: a candidate whose follow-up fails is overridden by the fallback."""
        decision = shield_action(open_field, [0.7, 8.0], 2, ConstantPolicy(1))
        assert decision.intervened
        assert decision.action == 1
        assert not decision.guarantee_lost

    def test_safe_candidate_kept(self, open_field):
        """Test: a candidate whose follow-up succeeds passes through."""
        decision = shield_action(open_field, [0.7, 8.0], 0, ConstantPolicy(1))
        assert not decision.intervened
        assert decision.action == 0

    def test_guarantee_lost(self, open_field):
        """Test: a failing fallback is flagged."""
        decision = shield_action(open_field, [1.9, 8.0], 2, ConstantPolicy(1))
        assert decision.intervened
        assert decision.guarantee_lost

    def test_scripted_adversary_overridden(self, open_field):
        """Test: a candidate steering past the target is overridden until the target is reached."""
        adversary = ScriptedPolicy(lambda s: 2 if s[0] > 0.5 else 1)
        report = ShieldedController(open_field, adversary, ConstantPolicy(1)).run([[0.7, 8.0]])
        assert report.interventions >= 1
        assert report.failures == 0
        assert report.successes == 1
        assert report.guarantee_lost == 0

    def test_intervention_rate_over_many_episodes(self, open_field):
        """Test: steps count every episode's decisions, so the rate stays a fraction."""
        adversary = ScriptedPolicy(lambda s: 2 if s[0] > 0.5 else 1)
        controller = ShieldedController(open_field, adversary, ConstantPolicy(1))
        single = controller.run([[0.7, 8.0]])
        report = controller.run(np.tile([0.7, 8.0], (10, 1)))
        assert report.episodes == 10
        assert report.interventions == 10 * single.interventions
        assert report.steps == 10 * single.steps
        assert report.intervention_rate == pytest.approx(single.intervention_rate)
        assert 0.0 < report.intervention_rate <= 1.0

    def test_no_failures_when_fallback_succeeds(self, toy_env, toy_values):
        """Test: shielded random control never fails from fallback-safe starts."""
        fallback = ValueGridPolicy(toy_env, toy_values)
        report = shield_monte_carlo(
            toy_env, RandomPolicy(3, seed=1), fallback, episodes=50, seed=0, horizon=30
        )
        assert report.episodes == 50
        assert report.failures == 0
        assert report.guarantee_lost == 0
        assert report.successes == 50

    def test_fallback_as_candidate_never_intervenes(self, toy_env, toy_values):
        """Test: proposing the fallback's own action needs no intervention."""
        fallback = ValueGridPolicy(toy_env, toy_values)
        starts = toy_env.sample_states(200, seed=2)
        starts = starts[rollout_batch(toy_env, fallback, starts, 30).success]
        report = ShieldedController(toy_env, fallback, fallback, horizon=30).run(starts)
        assert report.interventions == 0
        assert report.failures == 0


class TestExhaustive:
    """Tests for exhaustive defender enumeration."""

    def test_sequence_count_and_rounds(self, game):
        """Test: an unfinished worst case continues into a second round."""
        result = exhaustive_validate(
            game,
            ConstantPolicy(1),
            [0.9, 0.0, np.pi / 2, -0.9, 0.0, 0.0],
            intervals=2,
            steps_per_interval=1,
            rounds=2,
        )
        assert result.rounds == 2
        assert result.sequences_evaluated == 18
        assert result.worst.steps == 4
        assert result.worst.outcome == "unfinished"
        assert result.to_dict()["rounds"] == 2

    def test_single_defender_action_is_plain_rollout(self):
        """Test: with one defender action the worst case is the only rollout."""
        env = AttackDefense(defender_controls=(0.0,))
        state = [0.8, 0.1, 3.0, 0.0, 0.5, 1.0]
        result = exhaustive_validate(env, ConstantPolicy(0), state, intervals=4, steps_per_interval=3, rounds=1)
        plain = rollout_value(env, JointPolicy(ConstantPolicy(0), ConstantPolicy(0), 1), state, horizon=12)
        assert result.sequences_evaluated == 1
        assert result.worst.payoff == pytest.approx(plain.payoff)
        assert result.worst.outcome == plain.outcome

    def test_worst_is_pessimal(self, game):
        """Test: the reported record has the lowest outcome and then the largest payoff."""
        result = exhaustive_validate(
            game,
            ConstantPolicy(1),
            [0.6, 0.0, np.pi, 0.2, 0.1, 0.0],
            intervals=3,
            steps_per_interval=2,
            rounds=1,
            keep_records=True,
        )
        payoffs, outcomes = result.round_payoffs[0], result.round_outcomes[0]
        lowest = outcomes.min()
        assert result.worst.payoff == pytest.approx(payoffs[outcomes == lowest].max())

    def test_network_attacker(self, game):
        """Test: a minimax network can drive the attacker."""
        params = NetworkParams.initialize((6, 8, 9), seed=0)
        attacker = MinimaxPolicy(params, game, role="attacker")
        result = exhaustive_validate(
            game, attacker, [0.8, 0.0, np.pi, 0.0, 0.0, 0.0], intervals=2, steps_per_interval=2
        )
        assert result.sequences_evaluated in (9, 18)

    @pytest.mark.slow
    def test_full_enumeration(self, game):
        """Test: ten intervals of five steps enumerate 3**10 plays per round."""
        params = NetworkParams.initialize((6, 16, 9), seed=0)
        attacker = MinimaxPolicy(params, game, role="attacker")
        result = exhaustive_validate(game, attacker, [0.8, 0.0, np.pi, 0.0, 0.0, 0.0])
        assert result.sequences_evaluated % 3**10 == 0
        assert 1 <= result.rounds <= 2

    def test_requires_game(self, particle):
        """Test: single-player environments are rejected."""
        with pytest.raises(TypeError):
            exhaustive_validate(particle, ConstantPolicy(0), [0.0, 0.0])

    def test_rank_worst(self):
        """Test: failures rank first, then larger payoffs, then lower index."""
        assert rank_worst(np.array([0.1, 0.5, 0.5, -1.0]), np.array([1, 1, 1, 0])) == 3
        assert rank_worst(np.array([0.1, 0.5, 0.5, -1.0]), np.array([1, 1, 1, 2])) == 1


class TestSetDistances:
    """Tests for Hausdorff distances and nesting reports."""

    def test_hausdorff(self):
        """Test: directed, reverse and symmetric distances between cell masks."""
        grid = build_grid([(0.0, 4.0), (0.0, 2.0)], [4, 2])
        a = np.zeros(8, dtype=bool)
        b = np.zeros(8, dtype=bool)
        a[0] = True
        b[[0, 6]] = True
        result = hausdorff_distance(a, b, grid)
        assert result.directed == pytest.approx(0.0)
        assert result.reverse == pytest.approx(3.0)
        assert result.symmetric == pytest.approx(3.0)

    def test_hausdorff_empty(self):
        """Test: an empty mask gives an infinite distance and the empty flag."""
        grid = build_grid([(0.0, 1.0)], [2])
        result = hausdorff_distance(np.array([True, False]), np.array([False, False]), grid)
        assert result.empty
        assert np.isinf(result.symmetric)

    def test_nesting_report(self, toy_env, toy_grid):
        """Test: a discount ladder on a loop-free grid is nested and monotone."""
        report = nesting_report(gamma_ladder(toy_env, toy_grid, [0.5, 0.9, 0.99, 0.999]))
        assert report["all_nested"]
        assert report["all_monotone"]
        assert report["mask_sizes"] == sorted(report["mask_sizes"])
        assert report["reference_gamma"] == 0.999
        assert len(report["directed_from_reference"]) == 3

    def test_nesting_against_reference(self, toy_env, toy_grid):
        """Test: distances from the near-undiscounted set shrink up the ladder."""
        grids = gamma_ladder(toy_env, toy_grid, [0.5, 0.9, 0.99, 0.999, REFERENCE_GAMMA])
        report = nesting_report(grids[:-1], reference=grids[-1])
        assert report["reference_gamma"] == REFERENCE_GAMMA
        assert all(report["nested_in_reference"])
        distances = report["directed_from_reference"]
        assert len(distances) == 4
        assert distances[-1] < np.inf
        assert all(b <= a for a, b in zip(distances, distances[1:]))
        assert report["hausdorff_non_increasing"]

    def test_nesting_directed_from_reference(self):
        """Test: a strictly smaller rung is a positive distance away from the reference."""
        grid = build_grid([(0.0, 4.0)], [4])
        low = ValueGrid(grid=grid, values=np.array([-1.0, 1.0, 1.0, 1.0]), gamma=0.5)
        mid = ValueGrid(grid=grid, values=np.array([-1.0, -1.0, 1.0, 1.0]), gamma=0.9)
        ref = ValueGrid(grid=grid, values=np.array([-1.0, -1.0, -1.0, 1.0]), gamma=REFERENCE_GAMMA)
        report = nesting_report([low, mid], reference=ref)
        assert report["directed_from_reference"] == pytest.approx([2.0, 1.0])
        assert report["hausdorff_non_increasing"]

    def test_nesting_reference_below_ladder(self, toy_env, toy_grid):
        """Test: a reference with a lower discount than the top rung is rejected."""
        ladder = gamma_ladder(toy_env, toy_grid, [0.5, 0.9])
        with pytest.raises(ValueError):
            nesting_report(ladder[1:], reference=ladder[0])

    def test_nesting_needs_order(self, toy_env, toy_grid):
        """Test: ladders must be sorted by gamma."""
        ladder = gamma_ladder(toy_env, toy_grid, [0.9, 0.5])
        with pytest.raises(ValueError):
            nesting_report(ladder)


@pytest.mark.slow
class TestParticleLadderAcceptance:
    """Desk-scale discount ladder on the particle preset."""

    def test_ladder_converges_to_reference_set(self, particle):
        """Test: nested masks, monotone values and shrinking distance to the reference set."""
        grid = grid_for_env(particle, (81, 241))
        gammas = [0.5, 0.9, 0.99, 0.999, 0.9999, REFERENCE_GAMMA]
        grids = gamma_ladder(particle, grid, gammas, tol=1e-10)
        report = nesting_report(grids[:-1], reference=grids[-1])
        assert report["all_nested"]
        assert report["all_monotone"]
        assert all(report["nested_in_reference"])
        assert report["hausdorff_non_increasing"]
        assert report["directed_from_reference"][-1] < np.inf


@pytest.mark.slow
@pytest.mark.parametrize("preset", ["dubins-high", "dubins-low"])
class TestDubinsCertification:
    """Desk-scale value iteration and rollout certification for the Dubins presets."""

    @pytest.fixture
    def solved(self, preset):
        env = make_environment(preset)
        grid = grid_for_env(env, (61, 61, 60))
        vg = value_iteration(env, grid, 0.999, tol=1e-6)
        return env, vg

    def test_membership_predictor_has_no_false_success(self, solved):
        """Test: rollout-membership predictions never claim a failing start."""
        env, vg = solved
        assert vg.converged
        assert extract_ra_mask(vg).any()
        policy = greedy_policy(env, vg)
        states = env.sample_states(2000, seed=0)
        report = confusion_matrix(env, rollout_membership_value(env, policy), policy, states)
        assert report.false_success == 0
        assert report.fsr == 0.0
        assert report.true_success > 0

    def test_shielded_monte_carlo_never_fails(self, solved):
        """Test: ten thousand shielded random episodes from fallback-safe starts never fail."""
        env, vg = solved
        report = shield_monte_carlo(
            env, RandomPolicy(env.n_actions, seed=1), greedy_policy(env, vg), 10_000, seed=2
        )
        assert report.episodes == 10_000
        assert report.failures == 0
        assert report.guarantee_lost == 0
        assert 0.0 <= report.intervention_rate <= 1.0
