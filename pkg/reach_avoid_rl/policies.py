"""Deterministic feedback policies over action indices.

Every policy maps a state batch ``(N, n)`` to action indices ``(N,)`` via
``act_batch`` and a single state to one index via ``__call__``. Greedy
policies take the argmin of their values, lowest index first.
"""

import logging
from typing import Callable, Optional

import numpy as np

from reach_avoid_rl.envs import AttackDefense, ReachAvoidEnv
from reach_avoid_rl.network import NetworkParams, forward
from reach_avoid_rl.tabular import QTable, ValueGrid
from reach_avoid_rl.utils import SeedLike, as_generator

logger = logging.getLogger(__name__)


class Policy:
    """Base class; subclasses implement ``act_batch``."""

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, state: np.ndarray) -> int:
        return int(self.act_batch(np.asarray(state, dtype=float)[None, :])[0])


class ConstantPolicy(Policy):
    def __init__(self, action: int):
        self.action = int(action)

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(states).shape[0], self.action, dtype=np.int64)


class RandomPolicy(Policy):
    """Uniformly random actions from its own generator."""

    def __init__(self, n_actions: int, seed: SeedLike = None):
        self.n_actions = int(n_actions)
        self.rng = as_generator(seed)

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return self.rng.integers(self.n_actions, size=np.atleast_2d(states).shape[0])


class ScriptedPolicy(Policy):
    """Wraps a plain ``state -> action index`` function."""

    def __init__(self, fn: Callable[[np.ndarray], int]):
        self.fn = fn

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return np.array([int(self.fn(s)) for s in np.atleast_2d(states)], dtype=np.int64)


class ValueGridPolicy(Policy):
    """One-step lookahead on a value table: argmin over actions of ``V(s')``.

    Successors outside the grid are valued ``max(l, g)`` at the successor.
    """

    def __init__(self, env: ReachAvoidEnv, vg: ValueGrid, interpolate: bool = False):
        self.env = env
        self.vg = vg
        self.interpolate = interpolate

    def successor_values(self, states: np.ndarray) -> np.ndarray:
        batch = np.atleast_2d(states)
        n, A = batch.shape[0], self.env.n_actions
        values = np.empty((n, A))
        for a in range(A):
            succ = self.env.step_batch(batch, a)
            if self.interpolate:
                v = self.vg.interpolate(succ)
            else:
                v = self.vg.lookup(succ)
            _, outside = self.vg.grid.nearest(succ)
            if outside.any():
                l, g = self.env.margins_batch(succ)
                v = np.where(outside, np.maximum(l, g), v)
            values[:, a] = v
        return values

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return np.argmin(self.successor_values(states), axis=1)


class QTablePolicy(Policy):
    """Greedy action of the nearest cell."""

    def __init__(self, table: QTable):
        self.table = table
        self._greedy = table.greedy()

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        cells, _ = self.table.grid.nearest(states)
        return self._greedy[cells]


class NetworkPolicy(Policy):
    """Greedy action of a Q-network."""

    def __init__(self, params: NetworkParams):
        self.params = params

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return np.argmin(forward(self.params, np.atleast_2d(states)), axis=1)


class MinimaxPolicy(Policy):
    """Saddle choice from a joint-action Q-network.

    The network output is a ``(n_attacker, n_defender)`` matrix per state.
    ``role`` selects what ``act_batch`` returns: the attacker's
    ``argmin_a max_d`` index, the defender's best response to it, or the
    joint index ``a * n_defender + d``.
    """

    ROLES = ("attacker", "defender", "joint")

    def __init__(self, params: NetworkParams, env: AttackDefense, role: str = "joint"):
        if role not in self.ROLES:
            raise ValueError(f"Unsupported role: {role}. Valid options: {', '.join(self.ROLES)}")
        if params.n_outputs != env.n_attacker * env.n_defender:
            raise ValueError(
                f"Network has {params.n_outputs} outputs, the game has "
                f"{env.n_attacker}x{env.n_defender} joint actions"
            )
        self.params = params
        self.env = env
        self.role = role

    def choose(self, states: np.ndarray) -> tuple:
        out = forward(self.params, np.atleast_2d(states))
        matrix = out.reshape(-1, self.env.n_attacker, self.env.n_defender)
        worst_d = np.argmax(matrix, axis=2)
        worst = np.take_along_axis(matrix, worst_d[..., None], axis=2)[..., 0]
        attacker = np.argmin(worst, axis=1)
        defender = worst_d[np.arange(len(attacker)), attacker]
        return attacker, defender

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        attacker, defender = self.choose(states)
        if self.role == "attacker":
            return attacker
        if self.role == "defender":
            return defender
        return attacker * self.env.n_defender + defender


class JointPolicy(Policy):
    """Combine separate attacker and defender policies into joint indices."""

    def __init__(self, attacker: Policy, defender: Policy, n_defender: int):
        self.attacker = attacker
        self.defender = defender
        self.n_defender = int(n_defender)

    def act_batch(self, states: np.ndarray) -> np.ndarray:
        return self.attacker.act_batch(states) * self.n_defender + self.defender.act_batch(states)


def greedy_policy(env: ReachAvoidEnv, source, interpolate: bool = False) -> Policy:
    """Greedy policy for a ValueGrid, QTable or network artifact."""
    if isinstance(source, ValueGrid):
        return ValueGridPolicy(env, source, interpolate=interpolate)
    if isinstance(source, QTable):
        return QTablePolicy(source)
    if isinstance(source, NetworkParams):
        if isinstance(env, AttackDefense) and source.n_outputs == env.n_actions:
            return MinimaxPolicy(source, env, role="joint")
        return NetworkPolicy(source)
    raise TypeError(f"Cannot build a policy from {type(source).__name__}")


def value_function(source, interpolate: bool = False, env: Optional[ReachAvoidEnv] = None):
    """State-value handle ``(N, n) -> (N,)`` for a ValueGrid, QTable or network."""
    if isinstance(source, ValueGrid):
        return source.interpolate if interpolate else source.lookup
    if isinstance(source, QTable):
        values = source.values()
        return lambda states: values[source.grid.nearest(states)[0]]
    if isinstance(source, NetworkParams):
        if isinstance(env, AttackDefense) and source.n_outputs == env.n_actions:
            nA, nD = env.n_attacker, env.n_defender
            return lambda states: np.min(
                np.max(forward(source, np.atleast_2d(states)).reshape(-1, nA, nD), axis=2), axis=1
            )
        return lambda states: np.min(forward(source, np.atleast_2d(states)), axis=1)
    raise TypeError(f"Cannot build a value function from {type(source).__name__}")
