"""Rollout-based certification of learned policies.

A learned value function is treated as an untrusted oracle: membership in
the reach-avoid set is only claimed for states whose rollout under the
policy actually reaches the target without failing. This module provides the
rollouts, predictor/outcome confusion statistics, a shielding supervisor,
exhaustive adversarial validation for the attack-defense game and set
distances between reach-avoid masks.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from reach_avoid_rl.bellman import payoff
from reach_avoid_rl.envs import AttackDefense, ReachAvoidEnv
from reach_avoid_rl.policies import Policy
from reach_avoid_rl.tabular import Grid, ValueGrid, extract_ra_mask
from reach_avoid_rl.utils import SeedLike, as_generator

logger = logging.getLogger(__name__)

SUCCESS, UNFINISHED, FAILURE = "success", "unfinished", "failure"
OUTCOMES = (FAILURE, UNFINISHED, SUCCESS)
# Codes double as the attacker-perspective rank: failure < unfinished < success.
_CODE = {FAILURE: 0, UNFINISHED: 1, SUCCESS: 2}

# Discount whose fixed point stands in for the undiscounted reach-avoid set.
REFERENCE_GAMMA = 0.999999

# (t, states of the active rows, indices of the active rows) -> action indices
ActionFn = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class RolloutRecord:
    """One simulated trajectory with its margins, payoff and outcome."""

    states: np.ndarray
    actions: np.ndarray
    l: np.ndarray
    g: np.ndarray
    payoff: float
    outcome: str
    steps: int

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "payoff": self.payoff,
            "outcome": self.outcome,
            "steps": self.steps,
            "final_state": self.states[-1].tolist(),
        }


@dataclass
class RolloutBatch:
    """Vectorised rollout results; ``outcomes`` holds rank codes."""

    payoffs: np.ndarray
    outcomes: np.ndarray
    steps: np.ndarray
    final_states: np.ndarray
    records: Optional[List[RolloutRecord]] = None

    @property
    def success(self) -> np.ndarray:
        return self.outcomes == _CODE[SUCCESS]

    @property
    def failure(self) -> np.ndarray:
        return self.outcomes == _CODE[FAILURE]

    def success_ratio(self) -> float:
        return float(np.mean(self.success)) if self.success.size else 0.0


# =============================================================================
# Rollouts
# =============================================================================


def _simulate(
    env: ReachAvoidEnv,
    states: np.ndarray,
    choose: ActionFn,
    horizon: int,
    record: bool = False,
) -> RolloutBatch:
    """Step every row until failure (``g > 0``), target (``l <= 0``) or ``horizon``."""
    x = env.validate_states(states).copy()
    N = x.shape[0]
    l, g = env.margins_batch(x)
    run_g = g.copy()
    pay = np.maximum(l, run_g)
    outcomes = np.full(N, _CODE[UNFINISHED])
    steps = np.zeros(N, dtype=np.int64)
    alive = np.ones(N, dtype=bool)

    if record:
        hist_x = np.full((N, horizon + 1, env.dim), np.nan)
        hist_l = np.full((N, horizon + 1), np.nan)
        hist_g = np.full((N, horizon + 1), np.nan)
        hist_a = np.full((N, horizon), -1, dtype=np.int64)
        hist_x[:, 0], hist_l[:, 0], hist_g[:, 0] = x, l, g

    for t in range(horizon + 1):
        failed = alive & (g > 0)
        reached = alive & ~failed & (l <= 0)
        outcomes[failed] = _CODE[FAILURE]
        outcomes[reached] = _CODE[SUCCESS]
        alive &= ~(failed | reached)
        if t == horizon or not alive.any():
            break
        idx = np.flatnonzero(alive)
        actions = np.asarray(choose(t, x[idx], idx), dtype=np.int64)
        x[idx] = env.step_batch(x[idx], actions)
        l_new, g_new = env.margins_batch(x[idx])
        l[idx], g[idx] = l_new, g_new
        run_g[idx] = np.maximum(run_g[idx], g_new)
        pay[idx] = np.minimum(pay[idx], np.maximum(l_new, run_g[idx]))
        steps[idx] += 1
        if record:
            hist_a[idx, t] = actions
            hist_x[idx, t + 1], hist_l[idx, t + 1], hist_g[idx, t + 1] = x[idx], l_new, g_new

    records = None
    if record:
        inverse = {v: k for k, v in _CODE.items()}
        records = []
        for i in range(N):
            k = int(steps[i])
            records.append(
                RolloutRecord(
                    states=hist_x[i, : k + 1].copy(),
                    actions=hist_a[i, :k].copy(),
                    l=hist_l[i, : k + 1].copy(),
                    g=hist_g[i, : k + 1].copy(),
                    payoff=float(pay[i]),
                    outcome=inverse[int(outcomes[i])],
                    steps=k,
                )
            )
    return RolloutBatch(payoffs=pay, outcomes=outcomes, steps=steps, final_states=x, records=records)


def _policy_choice(policy: Policy, first_actions: Optional[np.ndarray] = None) -> ActionFn:
    def choose(t: int, states: np.ndarray, idx: np.ndarray) -> np.ndarray:
        if t == 0 and first_actions is not None:
            return first_actions[idx]
        return policy.act_batch(states)

    return choose


def _check_horizon(env: ReachAvoidEnv, horizon: Optional[int]) -> int:
    horizon = env.horizon if horizon is None else int(horizon)
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    return horizon


def rollout_batch(
    env: ReachAvoidEnv,
    policy: Policy,
    states: np.ndarray,
    horizon: Optional[int] = None,
    first_actions: Optional[np.ndarray] = None,
    record: bool = False,
) -> RolloutBatch:
    """Roll ``policy`` out from every row of ``states`` in one vectorised batch.

    ``first_actions`` optionally forces the first action of each rollout.
    """
    horizon = _check_horizon(env, horizon)
    if first_actions is not None:
        first_actions = np.asarray(first_actions, dtype=np.int64)
    return _simulate(env, states, _policy_choice(policy, first_actions), horizon, record=record)


def rollout_value(
    env: ReachAvoidEnv,
    policy: Policy,
    state: Sequence[float],
    horizon: Optional[int] = None,
) -> RolloutRecord:
    """Simulate ``policy`` from ``state`` and return the full record."""
    s = env.validate_state(state)
    batch = rollout_batch(env, policy, s[None, :], horizon, record=True)
    return batch.records[0]  # type: ignore[index]


def rollout_membership_value(
    env: ReachAvoidEnv, policy: Policy, horizon: Optional[int] = None
) -> Callable[[np.ndarray], np.ndarray]:
    """Value handle returning the realised rollout payoff of each state."""

    def value_fn(states: np.ndarray) -> np.ndarray:
        return rollout_batch(env, policy, np.atleast_2d(states), horizon).payoffs

    return value_fn


# =============================================================================
# Confusion statistics
# =============================================================================


@dataclass
class ConfusionReport:
    """Predicted success (``V <= 0``) against rollout outcome.

    Unfinished rollouts count as failures.
    """

    true_success: int
    false_success: int
    true_failure: int
    false_failure: int

    @property
    def total(self) -> int:
        return self.true_success + self.false_success + self.true_failure + self.false_failure

    @property
    def fsr(self) -> float:
        predicted = self.true_success + self.false_success
        return self.false_success / predicted if predicted else 0.0

    @property
    def ffr(self) -> float:
        predicted = self.true_failure + self.false_failure
        return self.false_failure / predicted if predicted else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "true_success": self.true_success,
            "false_success": self.false_success,
            "true_failure": self.true_failure,
            "false_failure": self.false_failure,
            "total": self.total,
            "fsr": self.fsr,
            "ffr": self.ffr,
        }


def confusion_from_outcomes(predicted_success: np.ndarray, actual_success: np.ndarray) -> ConfusionReport:
    predicted_success = np.asarray(predicted_success, dtype=bool)
    actual_success = np.asarray(actual_success, dtype=bool)
    return ConfusionReport(
        true_success=int(np.sum(predicted_success & actual_success)),
        false_success=int(np.sum(predicted_success & ~actual_success)),
        true_failure=int(np.sum(~predicted_success & ~actual_success)),
        false_failure=int(np.sum(~predicted_success & actual_success)),
    )


def confusion_matrix(
    env: ReachAvoidEnv,
    value_fn: Callable[[np.ndarray], np.ndarray],
    policy: Policy,
    states: np.ndarray,
    horizon: Optional[int] = None,
) -> ConfusionReport:
    """Confusion counts of ``value_fn <= 0`` against ``policy``'s rollout outcomes."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] == 0:
        raise ValueError("confusion_matrix needs at least one state")
    predicted = np.asarray(value_fn(states)).reshape(-1) <= 0.0
    outcome = rollout_batch(env, policy, states, horizon)
    report = confusion_from_outcomes(predicted, outcome.success)
    logger.info(
        f"Confusion over {report.total} states: FSR={report.fsr:.4f}, FFR={report.ffr:.4f}"
    )
    return report


# =============================================================================
# Shielding
# =============================================================================


@dataclass
class ShieldDecision:
    action: int
    intervened: bool
    guarantee_lost: bool


def shield_actions(
    env: ReachAvoidEnv,
    states: np.ndarray,
    candidates: np.ndarray,
    fallback: Policy,
    horizon: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised shield: keep each candidate whose candidate-then-fallback rollout succeeds.

    Returns:
        ``(actions, intervened, guarantee_lost)`` arrays, one entry per state
    """
    horizon = _check_horizon(env, horizon)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    candidates = np.asarray(candidates, dtype=np.int64).reshape(-1)
    keep = rollout_batch(env, fallback, states, horizon, first_actions=candidates).success
    actions = candidates.copy()
    intervened = ~keep
    guarantee_lost = np.zeros(len(candidates), dtype=bool)
    if intervened.any():
        idx = np.flatnonzero(intervened)
        actions[idx] = fallback.act_batch(states[idx])
        guarantee_lost[idx] = ~rollout_batch(env, fallback, states[idx], horizon).success
        if guarantee_lost.any():
            logger.warning(
                f"Shield precondition violated at {int(guarantee_lost.sum())} state(s): "
                "fallback rollout does not succeed"
            )
    return actions, intervened, guarantee_lost


def shield_action(
    env: ReachAvoidEnv,
    state: Sequence[float],
    candidate: int,
    fallback: Policy,
    horizon: Optional[int] = None,
) -> ShieldDecision:
    """Least-restrictive supervision of one candidate action.

    The candidate is applied and the fallback policy simulated for the rest of
    the horizon; if that rollout succeeds the candidate is kept, otherwise the
    fallback's own action is returned with ``intervened`` set.
    ``guarantee_lost`` flags the case where the fallback itself fails from
    ``state``.
    """
    s = env.validate_state(state)
    actions, intervened, lost = shield_actions(env, s[None, :], np.array([candidate]), fallback, horizon)
    return ShieldDecision(int(actions[0]), bool(intervened[0]), bool(lost[0]))


@dataclass
class ShieldReport:
    """Closed-loop shield counts; ``steps`` sums decision steps over all episodes."""

    episodes: int
    failures: int
    successes: int
    unfinished: int
    guarantee_lost: int
    interventions: int
    steps: int

    @property
    def intervention_rate(self) -> float:
        return self.interventions / self.steps if self.steps else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "episodes": self.episodes,
            "failures": self.failures,
            "successes": self.successes,
            "unfinished": self.unfinished,
            "guarantee_lost": self.guarantee_lost,
            "interventions": self.interventions,
            "steps": self.steps,
            "intervention_rate": self.intervention_rate,
        }


class ShieldedController:
    """Closed loop of a candidate policy supervised by a fallback policy."""

    def __init__(
        self,
        env: ReachAvoidEnv,
        candidate: Policy,
        fallback: Policy,
        horizon: Optional[int] = None,
    ):
        self.env = env
        self.candidate = candidate
        self.fallback = fallback
        self.horizon = _check_horizon(env, horizon)

    def run(self, starts: np.ndarray, max_steps: Optional[int] = None) -> ShieldReport:
        """Run one shielded episode from each row of ``starts``, all in lockstep."""
        env = self.env
        max_steps = env.horizon if max_steps is None else max_steps
        x = env.validate_states(starts).copy()
        N = x.shape[0]
        alive = np.ones(N, dtype=bool)
        outcome = np.full(N, _CODE[UNFINISHED])
        interventions = 0
        lost = 0
        steps = 0
        for _ in range(max_steps + 1):
            l, g = env.margins_batch(x)
            failed = alive & (g > 0)
            reached = alive & ~failed & (l <= 0)
            outcome[failed] = _CODE[FAILURE]
            outcome[reached] = _CODE[SUCCESS]
            alive &= ~(failed | reached)
            if not alive.any() or steps == max_steps:
                break
            idx = np.flatnonzero(alive)
            proposed = self.candidate.act_batch(x[idx])
            actions, intervened, guarantee_lost = shield_actions(
                env, x[idx], proposed, self.fallback, self.horizon
            )
            interventions += int(intervened.sum())
            lost += int(guarantee_lost.sum())
            x[idx] = env.step_batch(x[idx], actions)
            steps += idx.size
        report = ShieldReport(
            episodes=N,
            failures=int(np.sum(outcome == _CODE[FAILURE])),
            successes=int(np.sum(outcome == _CODE[SUCCESS])),
            unfinished=int(np.sum(outcome == _CODE[UNFINISHED])),
            guarantee_lost=lost,
            interventions=interventions,
            steps=steps,
        )
        logger.info(
            f"Shielded episodes: {report.episodes}, failures {report.failures}, "
            f"interventions {report.interventions}"
        )
        return report


def shield_monte_carlo(
    env: ReachAvoidEnv,
    candidate: Policy,
    fallback: Policy,
    episodes: int,
    seed: SeedLike = None,
    horizon: Optional[int] = None,
    max_draws: int = 100,
) -> ShieldReport:
    """Shielded episodes from random states whose fallback rollout succeeds."""
    rng = as_generator(seed)
    horizon = _check_horizon(env, horizon)
    starts = np.empty((0, env.dim))
    for _ in range(max_draws):
        draws = env.sample_states(max(episodes, 64), rng)
        ok = rollout_batch(env, fallback, draws, horizon).success
        starts = np.vstack([starts, draws[ok]])
        if len(starts) >= episodes:
            break
    if len(starts) < episodes:
        logger.warning(f"Only {len(starts)} of {episodes} start states have a successful fallback")
    return ShieldedController(env, candidate, fallback, horizon).run(starts[:episodes])


# =============================================================================
# Exhaustive adversarial validation
# =============================================================================


@dataclass
class ExhaustiveResult:
    """Attacker-pessimal record across all piecewise-constant defender plays."""

    worst: RolloutRecord
    rounds: int
    sequences_evaluated: int
    round_payoffs: List[np.ndarray] = field(default_factory=list)
    round_outcomes: List[np.ndarray] = field(default_factory=list)
    round_sequences: List[np.ndarray] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = self.worst.to_dict()
        data.update({"rounds": self.rounds, "sequences_evaluated": self.sequences_evaluated})
        return data


def rank_worst(payoffs: np.ndarray, outcomes: np.ndarray) -> int:
    """Index of the attacker-worst rollout: lowest outcome rank, then largest payoff."""
    order = np.lexsort((np.arange(len(payoffs)), -np.asarray(payoffs), np.asarray(outcomes)))
    return int(order[0])


def _defender_choice(
    attacker: Policy, sequences: np.ndarray, steps_per_interval: int, n_defender: int
) -> ActionFn:
    def choose(t: int, states: np.ndarray, idx: np.ndarray) -> np.ndarray:
        defender = sequences[idx, t // steps_per_interval]
        return attacker.act_batch(states) * n_defender + defender

    return choose


def _concatenate(first: RolloutRecord, second: RolloutRecord) -> RolloutRecord:
    l = np.concatenate([first.l, second.l[1:]])
    g = np.concatenate([first.g, second.g[1:]])
    return RolloutRecord(
        states=np.vstack([first.states, second.states[1:]]),
        actions=np.concatenate([first.actions, second.actions]),
        l=l,
        g=g,
        payoff=payoff(l, g),
        outcome=second.outcome,
        steps=first.steps + second.steps,
    )


def exhaustive_validate(
    env: AttackDefense,
    attacker: Policy,
    state: Sequence[float],
    intervals: int = 10,
    steps_per_interval: int = 5,
    rounds: int = 2,
    keep_records: bool = False,
) -> ExhaustiveResult:
    """Worst outcome for the attacker over every interval-constant defender play.

    ``attacker`` returns attacker action indices. Each round enumerates all
    ``n_defender ** intervals`` defender sequences, holding each defender
    action for ``steps_per_interval`` steps, and simulates them in one batch.
    If the worst record is unfinished, the next round starts from its end
    state and the records are concatenated.
    """
    if not isinstance(env, AttackDefense):
        raise TypeError("exhaustive_validate requires the attack-defense environment")
    if intervals < 1 or steps_per_interval < 1 or rounds < 1:
        raise ValueError("intervals, steps_per_interval and rounds must all be >= 1")
    horizon = intervals * steps_per_interval
    nD = env.n_defender
    sequences = np.array(list(itertools.product(range(nD), repeat=intervals)), dtype=np.int64)
    start = env.validate_state(state)

    worst: Optional[RolloutRecord] = None
    result_payoffs, result_outcomes, result_sequences = [], [], []
    evaluated = 0
    rounds_run = 0
    for r in range(rounds):
        rounds_run += 1
        batch_states = np.repeat(start[None, :], len(sequences), axis=0)
        choose = _defender_choice(attacker, sequences, steps_per_interval, nD)
        batch = _simulate(env, batch_states, choose, horizon)
        evaluated += len(sequences)
        pick = rank_worst(batch.payoffs, batch.outcomes)
        if keep_records:
            result_payoffs.append(batch.payoffs)
            result_outcomes.append(batch.outcomes)
            result_sequences.append(sequences)

        single = _simulate(
            env,
            start[None, :],
            _defender_choice(attacker, sequences[pick : pick + 1], steps_per_interval, nD),
            horizon,
            record=True,
        ).records[0]  # type: ignore[index]
        worst = single if worst is None else _concatenate(worst, single)
        logger.info(
            f"Exhaustive round {r + 1}: {len(sequences)} sequences, worst outcome "
            f"{single.outcome} (payoff {single.payoff:.4f})"
        )
        if single.outcome != UNFINISHED:
            break
        start = single.states[-1]

    assert worst is not None
    return ExhaustiveResult(
        worst=worst,
        rounds=rounds_run,
        sequences_evaluated=evaluated,
        round_payoffs=result_payoffs,
        round_outcomes=result_outcomes,
        round_sequences=result_sequences,
    )


# =============================================================================
# Set distances
# =============================================================================


@dataclass
class HausdorffResult:
    """Directed distances both ways and their maximum; ``empty`` flags an empty mask."""

    directed: float
    reverse: float
    symmetric: float
    empty: bool = False


def hausdorff_distance(mask_a: np.ndarray, mask_b: np.ndarray, grid: Grid) -> HausdorffResult:
    """Hausdorff distance between two cell masks, measured between cell centres.

    ``directed`` is ``max_{a in A} min_{b in B} |a - b|``. Periodic
    coordinates are treated as plain coordinates.
    """
    a = np.asarray(mask_a, dtype=bool).reshape(-1)
    b = np.asarray(mask_b, dtype=bool).reshape(-1)
    if a.size != grid.size or b.size != grid.size:
        raise ValueError(f"Masks must have {grid.size} cells, got {a.size} and {b.size}")
    if not a.any() or not b.any():
        return HausdorffResult(np.inf, np.inf, np.inf, empty=True)
    centers = grid.centers()
    pa, pb = centers[a], centers[b]
    directed = float(np.max(cKDTree(pb).query(pa)[0]))
    reverse = float(np.max(cKDTree(pa).query(pb)[0]))
    return HausdorffResult(directed, reverse, max(directed, reverse))


def nesting_report(
    ladder: Sequence[ValueGrid],
    reference: Optional[ValueGrid] = None,
    tol: float = 1e-9,
) -> Dict[str, Any]:
    """Check that reach-avoid sets grow and values shrink as the discount rises.

    ``ladder`` must be ordered by increasing gamma on one grid. Distances are
    measured against ``reference`` (usually the ``REFERENCE_GAMMA`` fixed
    point); without one the last rung is the reference and is not compared
    with itself. ``directed_from_reference`` is the distance from the
    reference set to each rung's set, the direction that shrinks as the
    rungs approach it.
    """
    if len(ladder) < (1 if reference is not None else 2):
        raise ValueError("A nesting report needs two value grids, or one and a reference")
    gammas = [vg.gamma for vg in ladder]
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError(f"Value grids must be ordered by increasing gamma, got {gammas}")
    if reference is None:
        reference, rungs = ladder[-1], list(ladder[:-1])
    else:
        if reference.gamma < gammas[-1]:
            raise ValueError(
                f"Reference gamma {reference.gamma} is below the ladder's top {gammas[-1]}"
            )
        rungs = list(ladder)
    masks = [extract_ra_mask(vg) for vg in ladder]
    nested = [bool(np.all(lo <= hi)) for lo, hi in zip(masks, masks[1:])]
    monotone = [
        bool(np.all(hi.values <= lo.values + tol)) for lo, hi in zip(ladder, ladder[1:])
    ]
    ref_mask = extract_ra_mask(reference)
    distances = [hausdorff_distance(extract_ra_mask(vg), ref_mask, reference.grid) for vg in rungs]
    from_reference = [d.reverse for d in distances]
    return {
        "gammas": gammas,
        "reference_gamma": reference.gamma,
        "mask_sizes": [int(m.sum()) for m in masks],
        "reference_mask_size": int(ref_mask.sum()),
        "nested": nested,
        "nested_in_reference": [bool(np.all(extract_ra_mask(vg) <= ref_mask)) for vg in rungs],
        "values_monotone": monotone,
        "hausdorff_to_reference": [d.symmetric for d in distances],
        "directed_from_reference": from_reference,
        "hausdorff_non_increasing": bool(
            all(b <= a for a, b in zip(from_reference, from_reference[1:]))
        ),
        "all_nested": bool(all(nested)),
        "all_monotone": bool(all(monotone)),
    }
