"""Reach-avoid payoff and Bellman backups.

Values follow the cost convention: negative means success, the inner
optimisation over controls is a minimum and greedy policies take the argmin
(lowest action index on ties). All array kernels are vectorised and pure.

Backups come in two layers. The array kernels ``reach_avoid_term``,
``discounted_backup`` and ``safety_term`` work on margins and successor
values directly and are what the solvers call. The state-level operations
(``rabe_backup``, ``drabe_backup``, ...) evaluate a value handle at the
one-step successors of a single state.
"""

import logging
from typing import Callable, Sequence

import numpy as np

from reach_avoid_rl.envs import AttackDefense, ReachAvoidEnv
from reach_avoid_rl.replay import Transition

logger = logging.getLogger(__name__)

# Maps an (N, n) state batch to (N,) values.
ValueFn = Callable[[np.ndarray], np.ndarray]
# Maps an (N, n) state batch to (N, A) action values.
QFn = Callable[[np.ndarray], np.ndarray]


def check_gamma(gamma: float, allow_one: bool = True) -> float:
    """Validate a discount factor.

    Args:
        gamma: Discount factor
        allow_one: Whether ``gamma == 1`` is acceptable (it is not for
            fixed-point iteration, which needs a contraction)

    Raises:
        ValueError: If gamma is outside ``[0, 1]`` (or equals 1 when disallowed)
    """
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if gamma == 1.0 and not allow_one:
        raise ValueError("gamma must be < 1 for fixed-point iteration")
    return gamma


# =============================================================================
# Payoff
# =============================================================================


def payoff_batch(l_values: np.ndarray, g_values: np.ndarray) -> np.ndarray:
    """Row-wise reach-avoid payoff of ``(N, T)`` margin traces."""
    l_values = np.atleast_2d(np.asarray(l_values, dtype=float))
    g_values = np.atleast_2d(np.asarray(g_values, dtype=float))
    if l_values.shape != g_values.shape:
        raise ValueError(f"Trace shapes differ: {l_values.shape} vs {g_values.shape}")
    if l_values.shape[1] == 0:
        raise ValueError("Margin trace must not be empty")
    running_g = np.maximum.accumulate(g_values, axis=1)
    return np.min(np.maximum(l_values, running_g), axis=1)


def payoff(l_values: Sequence[float], g_values: Sequence[float]) -> float:
    """Reach-avoid payoff ``min_t max(l_t, max_{k<=t} g_k)`` of one trace.

    Negative exactly when the trace reaches the target before ever entering
    the failure set.

    Raises:
        ValueError: If the trace is empty or the sequences differ in length
    """
    l_arr = np.asarray(l_values, dtype=float).reshape(1, -1)
    g_arr = np.asarray(g_values, dtype=float).reshape(1, -1)
    return float(payoff_batch(l_arr, g_arr)[0])


# =============================================================================
# Array kernels
# =============================================================================


def reach_avoid_term(l: np.ndarray, g: np.ndarray, v_next: np.ndarray) -> np.ndarray:
    """Undiscounted backup ``max(g, min(l, v_next))``."""
    return np.maximum(g, np.minimum(l, v_next))


def discounted_backup(
    l: np.ndarray, g: np.ndarray, v_next: np.ndarray, gamma: float
) -> np.ndarray:
    """Discounted backup ``gamma * max(g, min(l, v)) + (1 - gamma) * max(l, g)``."""
    return gamma * reach_avoid_term(l, g, v_next) + (1.0 - gamma) * np.maximum(l, g)


def safety_term(g: np.ndarray, v_next: np.ndarray, gamma: float) -> np.ndarray:
    """Safety-only backup ``gamma * min(g, v) + (1 - gamma) * g``."""
    return gamma * np.minimum(g, v_next) + (1.0 - gamma) * g


def minimax_value(values: np.ndarray, n_attacker: int, n_defender: int) -> np.ndarray:
    """``min_a max_d`` over joint values laid out as ``a * n_defender + d``.

    Accepts ``(A,)`` or ``(N, A)`` input and returns a scalar array or ``(N,)``.
    """
    values = np.asarray(values, dtype=float)
    matrix = values.reshape(values.shape[:-1] + (n_attacker, n_defender))
    return np.min(np.max(matrix, axis=-1), axis=-1)


# =============================================================================
# State-level backups
# =============================================================================


def successors(env: ReachAvoidEnv, state: Sequence[float]) -> np.ndarray:
    """All one-step successors of ``state``, one row per action."""
    s = env.validate_state(state)
    batch = np.repeat(s[None, :], env.n_actions, axis=0)
    return env.step_batch(batch, np.arange(env.n_actions))


def _successor_values(value_fn: ValueFn, env: ReachAvoidEnv, state: Sequence[float]) -> np.ndarray:
    return np.asarray(value_fn(successors(env, state)), dtype=float).reshape(-1)


def rabe_backup(value_fn: ValueFn, env: ReachAvoidEnv, state: Sequence[float]) -> float:
    """Undiscounted reach-avoid backup at ``state``."""
    l, g = env.margins(state)
    v_next = np.min(_successor_values(value_fn, env, state))
    return float(reach_avoid_term(l, g, v_next))


def drabe_backup(
    value_fn: ValueFn, env: ReachAvoidEnv, state: Sequence[float], gamma: float
) -> float:
    """Discounted reach-avoid backup at ``state``; equals ``rabe_backup`` at gamma 1."""
    gamma = check_gamma(gamma)
    l, g = env.margins(state)
    v_next = np.min(_successor_values(value_fn, env, state))
    return float(discounted_backup(l, g, v_next, gamma))


def safety_backup(
    value_fn: ValueFn, env: ReachAvoidEnv, state: Sequence[float], gamma: float
) -> float:
    """Discounted safety-only backup at ``state`` (min convention), ``gamma < 1``."""
    gamma = check_gamma(gamma, allow_one=False)
    _, g = env.margins(state)
    v_next = np.min(_successor_values(value_fn, env, state))
    return float(safety_term(g, v_next, gamma))


def minimax_drabe_backup(
    value_fn: ValueFn, env: AttackDefense, state: Sequence[float], gamma: float
) -> float:
    """Discounted backup with ``min`` over attacker of ``max`` over defender."""
    if not isinstance(env, AttackDefense):
        raise TypeError("minimax_drabe_backup requires the attack-defense environment")
    gamma = check_gamma(gamma)
    l, g = env.margins(state)
    values = _successor_values(value_fn, env, state)
    v_next = minimax_value(values, env.n_attacker, env.n_defender)
    return float(discounted_backup(l, g, v_next, gamma))


# =============================================================================
# Training targets
# =============================================================================


def ddqn_targets(
    l: np.ndarray,
    g: np.ndarray,
    l_next: np.ndarray,
    g_next: np.ndarray,
    terminal: np.ndarray,
    q_online_next: np.ndarray,
    q_target_next: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """Discounted reach-avoid DDQN targets for a batch.

    The action at ``s'`` is chosen by the online network (argmin) and valued by
    the target network; terminal successors bootstrap from ``max(l', g')``.
    """
    best = np.argmin(q_online_next, axis=1)
    bootstrap = q_target_next[np.arange(len(best)), best]
    bootstrap = np.where(terminal, np.maximum(l_next, g_next), bootstrap)
    return discounted_backup(l, g, bootstrap, gamma)


def minimax_ddqn_targets(
    l: np.ndarray,
    g: np.ndarray,
    l_next: np.ndarray,
    g_next: np.ndarray,
    terminal: np.ndarray,
    q_online_next: np.ndarray,
    q_target_next: np.ndarray,
    gamma: float,
    n_attacker: int,
    n_defender: int,
) -> np.ndarray:
    """Minimax DDQN targets; both the argmax and the argmin come from the online net."""
    rows = np.arange(q_online_next.shape[0])
    online = q_online_next.reshape(-1, n_attacker, n_defender)
    target = q_target_next.reshape(-1, n_attacker, n_defender)
    worst_d = np.argmax(online, axis=2)  # (N, nA)
    worst_vals = np.take_along_axis(online, worst_d[..., None], axis=2)[..., 0]
    best_a = np.argmin(worst_vals, axis=1)
    bootstrap = target[rows, best_a, worst_d[rows, best_a]]
    bootstrap = np.where(terminal, np.maximum(l_next, g_next), bootstrap)
    return discounted_backup(l, g, bootstrap, gamma)


def sum_costs(l_next: np.ndarray, g_next: np.ndarray, rho: float) -> np.ndarray:
    """Sparse cost: ``rho`` on failure, ``-1`` on reaching the target, else 0.

    Failure takes precedence when a successor is in both sets.
    """
    return np.where(g_next > 0, rho, np.where(l_next <= 0, -1.0, 0.0))


def sum_cost_targets(
    l_next: np.ndarray,
    g_next: np.ndarray,
    terminal: np.ndarray,
    q_online_next: np.ndarray,
    q_target_next: np.ndarray,
    gamma: float,
    rho: float,
) -> np.ndarray:
    """Discounted sum-of-costs DDQN targets; terminal rows keep the immediate cost."""
    best = np.argmin(q_online_next, axis=1)
    bootstrap = q_target_next[np.arange(len(best)), best]
    cost = sum_costs(l_next, g_next, rho)
    return cost + gamma * np.where(terminal, 0.0, bootstrap)


def _transition_arrays(transition: Transition):
    next_state = np.asarray(transition.next_state, dtype=float)[None, :]
    return (
        np.array([transition.l]),
        np.array([transition.g]),
        np.array([transition.l_next]),
        np.array([transition.g_next]),
        np.array([bool(transition.terminal)]),
        next_state,
    )


def ddqn_target(transition: Transition, q_online: QFn, q_target: QFn, gamma: float) -> float:
    """DDQN reach-avoid target of one transition.

    ``q_online`` and ``q_target`` map an ``(N, n)`` state batch to ``(N, A)``
    action values.
    """
    gamma = check_gamma(gamma)
    l, g, l_next, g_next, terminal, s_next = _transition_arrays(transition)
    y = ddqn_targets(
        l, g, l_next, g_next, terminal, q_online(s_next), q_target(s_next), gamma
    )
    return float(y[0])


def minimax_ddqn_target(
    transition: Transition,
    q_online: QFn,
    q_target: QFn,
    gamma: float,
    n_attacker: int,
    n_defender: int,
) -> float:
    gamma = check_gamma(gamma)
    l, g, l_next, g_next, terminal, s_next = _transition_arrays(transition)
    y = minimax_ddqn_targets(
        l,
        g,
        l_next,
        g_next,
        terminal,
        q_online(s_next),
        q_target(s_next),
        gamma,
        n_attacker,
        n_defender,
    )
    return float(y[0])


def sum_cost_target(
    transition: Transition, q_online: QFn, q_target: QFn, gamma: float, rho: float
) -> float:
    """Sum-of-costs DDQN target of one transition."""
    gamma = check_gamma(gamma)
    _, _, l_next, g_next, terminal, s_next = _transition_arrays(transition)
    y = sum_cost_targets(
        l_next, g_next, terminal, q_online(s_next), q_target(s_next), gamma, rho
    )
    return float(y[0])
