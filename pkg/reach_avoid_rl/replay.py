"""Experience replay for the DDQN solvers."""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from reach_avoid_rl.utils import SeedLike, as_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    """One environment step with the margins of both endpoints cached."""

    state: np.ndarray
    action: int
    next_state: np.ndarray
    terminal: bool
    l: float
    g: float
    l_next: float
    g_next: float


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    terminal: np.ndarray
    l: np.ndarray
    g: np.ndarray
    l_next: np.ndarray
    g_next: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform minibatch sampling.

    Storage is one preallocated numpy array per field; once full, the oldest
    transition is overwritten. Within one batch indices are drawn without
    replacement.
    """

    def __init__(self, capacity: int, state_dim: int, seed: SeedLike = None):
        if capacity < 1:
            raise ValueError(f"Replay capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.rng = as_generator(seed)
        self.states = np.zeros((self.capacity, self.state_dim))
        self.next_states = np.zeros((self.capacity, self.state_dim))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.terminal = np.zeros(self.capacity, dtype=bool)
        self.l = np.zeros(self.capacity)
        self.g = np.zeros(self.capacity)
        self.l_next = np.zeros(self.capacity)
        self.g_next = np.zeros(self.capacity)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def full(self) -> bool:
        return self._size == self.capacity

    def add(self, transition: Transition) -> None:
        i = self._cursor
        self.states[i] = transition.state
        self.actions[i] = transition.action
        self.next_states[i] = transition.next_state
        self.terminal[i] = transition.terminal
        self.l[i] = transition.l
        self.g[i] = transition.g
        self.l_next[i] = transition.l_next
        self.g_next[i] = transition.g_next
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if batch_size > self._size:
            raise ValueError(
                f"Cannot sample {batch_size} transitions from a buffer holding {self._size}"
            )
        return self.rng.choice(self._size, size=batch_size, replace=False)

    def sample(self, batch_size: int) -> Batch:
        """Uniform minibatch of ``batch_size`` distinct stored transitions."""
        idx = self.sample_indices(batch_size)
        return Batch(
            states=self.states[idx],
            actions=self.actions[idx],
            next_states=self.next_states[idx],
            terminal=self.terminal[idx],
            l=self.l[idx],
            g=self.g[idx],
            l_next=self.l_next[idx],
            g_next=self.g_next[idx],
        )

    def get(self, index: int) -> Transition:
        if not 0 <= index < self._size:
            raise IndexError(f"Replay index {index} out of range")
        return Transition(
            state=self.states[index].copy(),
            action=int(self.actions[index]),
            next_state=self.next_states[index].copy(),
            terminal=bool(self.terminal[index]),
            l=float(self.l[index]),
            g=float(self.g[index]),
            l_next=float(self.l_next[index]),
            g_next=float(self.g_next[index]),
        )
