"""Grid discretisation, value iteration and tabular Q-learning.

Cells are centred: along a dimension with bounds ``[lo, hi]`` and ``n``
cells the pitch is ``(hi - lo) / n`` and cell ``i`` has centre
``lo + (i + 0.5) * pitch``. Flat cell indices are C-ordered.

The discrete model used everywhere is a ``TransitionModel``: the successor of
every cell centre under every action, snapped to the nearest cell (or, as an
opt-in, interpolated multilinearly). Successors that leave a non-periodic
bound are absorbing; their value is ``max(l, g)`` at the true successor.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from reach_avoid_rl.bellman import check_gamma, discounted_backup, reach_avoid_term, safety_term
from reach_avoid_rl.envs import ReachAvoidEnv
from reach_avoid_rl.errors import DimensionError
from reach_avoid_rl.utils import rng_stream, validate_choice

logger = logging.getLogger(__name__)

SCHEDULE_MODES = ("floor", "ceiling")
BACKUPS = ("reach-avoid", "safety")


# =============================================================================
# Grid
# =============================================================================


@dataclass(frozen=True)
class Grid:
    """Uniform rectilinear cell-centred grid."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    counts: Tuple[int, ...]
    periodic: Tuple[bool, ...]

    def __post_init__(self) -> None:
        n = len(self.counts)
        if not (len(self.lower) == len(self.upper) == len(self.periodic) == n):
            raise DimensionError("Grid bounds, counts and periodic flags must have equal length")
        if n == 0:
            raise DimensionError("Grid needs at least one dimension")
        for i, (lo, hi, c) in enumerate(zip(self.lower, self.upper, self.counts)):
            if int(c) < 2:
                raise ValueError(f"Grid dimension {i} needs at least 2 cells, got {c}")
            if not lo < hi:
                raise ValueError(f"Grid dimension {i} has inverted bounds [{lo}, {hi}]")
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        object.__setattr__(self, "periodic", tuple(bool(v) for v in self.periodic))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def pitch(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.counts)

    def axes(self) -> List[np.ndarray]:
        """Cell-centre coordinates along each dimension."""
        return [
            lo + (np.arange(c) + 0.5) * p
            for lo, c, p in zip(self.lower, self.counts, self.pitch)
        ]

    def centers(self) -> np.ndarray:
        """All cell centres as a ``(size, dim)`` array in flat-index order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def center(self, cell: int) -> np.ndarray:
        multi = np.unravel_index(int(cell), self.shape)
        return np.array([ax[i] for ax, i in zip(self.axes(), multi)])

    def nearest(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest cell per point and an out-of-bounds flag.

        Periodic coordinates wrap; other coordinates outside the bounds clamp
        to the boundary cell and set the flag.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionError(f"Expected {self.dim}-D points, got shape {pts.shape}")
        lower = np.asarray(self.lower)
        upper = np.asarray(self.upper)
        counts = np.asarray(self.counts)
        periodic = np.asarray(self.periodic)
        idx = np.floor((pts - lower) / self.pitch).astype(np.int64)
        outside = ((pts < lower) | (pts > upper)) & ~periodic
        idx = np.where(periodic, np.mod(idx, counts), np.clip(idx, 0, counts - 1))
        flat = np.ravel_multi_index(tuple(idx.T), self.shape)
        return flat, np.any(outside, axis=1)

    def nearest_cell(self, point: Sequence[float]) -> int:
        return int(self.nearest(np.asarray(point, dtype=float)[None, :])[0][0])

    def interpolation_weights(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Multilinear interpolation stencil: ``(N, 2**dim)`` cell indices and weights."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        counts = np.asarray(self.counts)
        periodic = np.asarray(self.periodic)
        pos = (pts - np.asarray(self.lower)) / self.pitch - 0.5
        pos = np.where(periodic, pos, np.clip(pos, 0.0, counts - 1.0))
        base = np.floor(pos).astype(np.int64)
        base = np.where(periodic, base, np.minimum(base, counts - 2))
        frac = pos - base
        lo_idx = np.where(periodic, np.mod(base, counts), base)
        hi_idx = np.where(periodic, np.mod(base + 1, counts), base + 1)

        corners = list(itertools.product((0, 1), repeat=self.dim))
        indices = np.empty((pts.shape[0], len(corners)), dtype=np.int64)
        weights = np.empty((pts.shape[0], len(corners)))
        for k, corner in enumerate(corners):
            upper = np.asarray(corner, dtype=bool)
            multi = np.where(upper, hi_idx, lo_idx)
            indices[:, k] = np.ravel_multi_index(tuple(multi.T), self.shape)
            weights[:, k] = np.prod(np.where(upper, frac, 1.0 - frac), axis=1)
        return indices, weights

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "counts": list(self.counts),
            "periodic": list(self.periodic),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Grid":
        return cls(
            lower=tuple(data["lower"]),
            upper=tuple(data["upper"]),
            counts=tuple(data["counts"]),
            periodic=tuple(data.get("periodic", [False] * len(data["counts"]))),
        )


def build_grid(
    bounds: Sequence[Sequence[float]],
    counts: Sequence[int],
    periodic: Optional[Sequence[bool]] = None,
) -> Grid:
    """Build a grid from ``[(lo, hi), ...]`` bounds and per-dimension cell counts."""
    bounds = [tuple(b) for b in bounds]
    if periodic is None:
        periodic = [False] * len(bounds)
    return Grid(
        lower=tuple(b[0] for b in bounds),
        upper=tuple(b[1] for b in bounds),
        counts=tuple(counts),
        periodic=tuple(periodic),
    )


def grid_for_env(env: ReachAvoidEnv, counts: Sequence[int]) -> Grid:
    """Grid over ``env``'s domain box with its periodic flags."""
    if len(counts) != env.dim:
        raise DimensionError(f"{env.name} is {env.dim}-D but {len(counts)} counts were given")
    return build_grid(env.domain.tolist(), counts, env.periodic)


# =============================================================================
# Value tables
# =============================================================================


@dataclass
class ValueGrid:
    """State values on a grid, with the solver diagnostics that produced them."""

    grid: Grid
    values: np.ndarray
    gamma: float = 0.0
    residual: float = 0.0
    sweeps: int = 0
    converged: bool = True
    residuals: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.grid.size:
            raise DimensionError(
                f"ValueGrid has {self.values.size} values for {self.grid.size} cells"
            )

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def lookup(self, points: np.ndarray) -> np.ndarray:
        """Value of the nearest cell."""
        cells, _ = self.grid.nearest(points)
        return self.values[cells]

    def interpolate(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation between cell centres."""
        indices, weights = self.grid.interpolation_weights(points)
        return np.sum(weights * self.values[indices], axis=1)


@dataclass
class QTable:
    """Action values per cell plus the visit counts that produced them."""

    grid: Grid
    q: np.ndarray
    visits: Optional[np.ndarray] = None
    gamma: float = 0.0

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 2 or self.q.shape[0] != self.grid.size:
            raise DimensionError(
                f"QTable must be (cells={self.grid.size}, actions), got {self.q.shape}"
            )
        if self.visits is None:
            self.visits = np.zeros(self.q.shape, dtype=np.int64)

    @property
    def n_actions(self) -> int:
        return int(self.q.shape[1])

    def values(self) -> np.ndarray:
        return np.min(self.q, axis=1)

    def greedy(self) -> np.ndarray:
        return np.argmin(self.q, axis=1)

    def to_value_grid(self) -> ValueGrid:
        return ValueGrid(grid=self.grid, values=self.values(), gamma=self.gamma)

    def under_visited(self, min_visits: int) -> np.ndarray:
        """Cells whose least-visited action has fewer than ``min_visits`` updates."""
        return np.min(self.visits, axis=1) < min_visits


def extract_ra_mask(vg: ValueGrid) -> np.ndarray:
    """Cells in the (discounted) reach-avoid set, ``V <= 0``, as a flat mask."""
    return vg.values <= 0.0


# =============================================================================
# Schedules
# =============================================================================


@dataclass(frozen=True)
class Schedule:
    """Stage-wise decaying hyperparameter.

    With ``k = floor(stages * x / T)``, ``floor`` mode evaluates
    ``max(initial * decay**k, bound)`` and ``ceiling`` mode evaluates
    ``min(1 - (1 - initial) * decay**k, bound)``.
    """

    initial: float
    decay: float = 1.0
    bound: Optional[float] = None
    stages: int = 20
    mode: str = "floor"

    def __post_init__(self) -> None:
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"Schedule decay must be in (0, 1], got {self.decay}")
        if self.stages < 1:
            raise ValueError(f"Schedule stages must be >= 1, got {self.stages}")
        if self.mode not in SCHEDULE_MODES:
            raise ValueError(
                f"Unsupported schedule mode: {self.mode}. Valid options: {', '.join(SCHEDULE_MODES)}"
            )

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls(initial=value, decay=1.0, bound=None)

    def stage(self, x: float, total: float) -> int:
        if total <= 0:
            raise ValueError(f"Schedule total must be positive, got {total}")
        if not 0 <= x <= total:
            raise ValueError(f"Schedule step {x} outside [0, {total}]")
        return int(math.floor(self.stages * x / total))

    def value(self, x: float, total: float) -> float:
        k = self.stage(x, total)
        if self.mode == "floor":
            v = self.initial * self.decay**k
            return v if self.bound is None else max(v, self.bound)
        v = 1.0 - (1.0 - self.initial) * self.decay**k
        return v if self.bound is None else min(v, self.bound)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "initial": self.initial,
            "decay": self.decay,
            "bound": self.bound,
            "stages": self.stages,
            "mode": self.mode,
        }

    @classmethod
    def from_value(cls, value: Any) -> "Schedule":
        """Accept a number (constant) or a mapping of schedule fields."""
        if isinstance(value, Schedule):
            return value
        if isinstance(value, (int, float)):
            return cls.constant(float(value))
        return cls(**value)


def evaluate_schedule(sched: Schedule, x: float, total: float) -> float:
    """Staged value of ``sched`` at step ``x`` of ``total``."""
    return sched.value(x, total)


LEARNING_RATE_SCHEDULE = Schedule(initial=0.001, decay=0.8, bound=0.0001)
EPSILON_SCHEDULE = Schedule(initial=0.95, decay=0.6, bound=0.05)
GAMMA_SCHEDULE = Schedule(initial=0.8, decay=0.5, bound=0.999999, mode="ceiling")


# =============================================================================
# Discrete transition model
# =============================================================================


@dataclass
class TransitionModel:
    """Precomputed successors of every cell under every action.

    ``next_index`` is ``(S, A)`` for snapped models, ``(S, A, K)`` together
    with ``weights`` for interpolated ones.
    """

    grid: Grid
    l: np.ndarray
    g: np.ndarray
    next_index: np.ndarray
    exits: np.ndarray
    exit_values: np.ndarray
    weights: Optional[np.ndarray] = None

    @property
    def n_cells(self) -> int:
        return int(self.l.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.exits.shape[1])

    @property
    def interpolated(self) -> bool:
        return self.weights is not None

    @classmethod
    def build(cls, env: ReachAvoidEnv, grid: Grid, interpolate: bool = False) -> "TransitionModel":
        if grid.dim != env.dim:
            raise DimensionError(f"{env.name} is {env.dim}-D but the grid is {grid.dim}-D")
        centers = grid.centers()
        l, g = env.margins_batch(centers)
        S, A = grid.size, env.n_actions
        exits = np.zeros((S, A), dtype=bool)
        exit_values = np.zeros((S, A))
        if interpolate:
            K = 2**grid.dim
            next_index = np.zeros((S, A, K), dtype=np.int64)
            weights: Optional[np.ndarray] = np.zeros((S, A, K))
        else:
            next_index = np.zeros((S, A), dtype=np.int64)
            weights = None
        for a in range(A):
            succ = env.step_batch(centers, a)
            cells, outside = grid.nearest(succ)
            l_next, g_next = env.margins_batch(succ)
            exits[:, a] = outside
            exit_values[:, a] = np.maximum(l_next, g_next)
            if weights is not None:
                next_index[:, a], weights[:, a] = grid.interpolation_weights(succ)
            else:
                next_index[:, a] = cells
        logger.debug(
            f"Transition model for {env.name}: {S} cells, {A} actions, "
            f"{int(exits.sum())} absorbing exits"
        )
        return cls(grid, l, g, next_index, exits, exit_values, weights)

    def successor_values(self, values: np.ndarray) -> np.ndarray:
        """``(S, A)`` successor values under the state-value table ``values``."""
        if self.weights is None:
            v = values[self.next_index]
        else:
            v = np.sum(self.weights * values[self.next_index], axis=2)
        return np.where(self.exits, self.exit_values, v)

    def successor_value(self, values: np.ndarray, cell: int, action: int) -> float:
        if self.exits[cell, action]:
            return float(self.exit_values[cell, action])
        if self.weights is None:
            return float(values[self.next_index[cell, action]])
        return float(np.dot(self.weights[cell, action], values[self.next_index[cell, action]]))


def snap_transition(grid: Grid, env: ReachAvoidEnv, cell: int, action: int) -> Tuple[int, bool]:
    """Nearest-cell successor of ``cell``'s centre under ``action`` and its out-of-bounds flag."""
    if not 0 <= cell < grid.size:
        raise IndexError(f"Cell {cell} out of range for a grid of {grid.size} cells")
    succ = env.step_batch(grid.center(cell)[None, :], int(action))
    cells, outside = grid.nearest(succ)
    return int(cells[0]), bool(outside[0])


# =============================================================================
# Value iteration
# =============================================================================


def _sweep(model: TransitionModel, values: np.ndarray, gamma: float, backup: str) -> np.ndarray:
    v_next = np.min(model.successor_values(values), axis=1)
    if backup == "safety":
        return safety_term(model.g, v_next, gamma)
    return discounted_backup(model.l, model.g, v_next, gamma)


def value_iteration(
    env: ReachAvoidEnv,
    grid: Grid,
    gamma: float,
    tol: float = 1e-6,
    max_sweeps: int = 100_000,
    model: Optional[TransitionModel] = None,
    interpolate: bool = False,
    backup: str = "reach-avoid",
    initial: Optional[np.ndarray] = None,
    log_every: int = 500,
) -> ValueGrid:
    """Jacobi value iteration to the discounted fixed point.

    Args:
        env: Environment
        grid: Discretisation of env's state space
        gamma: Discount, must be < 1
        tol: Stop once the sup-norm change of a sweep is at most ``tol``
        max_sweeps: Sweep budget; exhausting it returns an unconverged table
        model: Prebuilt transition model (rebuilt from env and grid if omitted)
        interpolate: Use multilinear successors instead of nearest-cell snapping
        backup: ``"reach-avoid"`` or ``"safety"``
        initial: Initial table, default ``max(l, g)`` (``g`` for safety)

    Returns:
        ValueGrid carrying the residual history and a ``converged`` flag
    """
    gamma = check_gamma(gamma, allow_one=False)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    backup = validate_choice(backup, BACKUPS, "backup")
    if model is None:
        model = TransitionModel.build(env, grid, interpolate=interpolate)

    if initial is not None:
        values = np.asarray(initial, dtype=float).reshape(-1).copy()
    elif backup == "safety":
        values = model.g.copy()
    else:
        values = np.maximum(model.l, model.g)

    residuals: List[float] = []
    converged = False
    for sweep in range(1, max_sweeps + 1):
        updated = _sweep(model, values, gamma, backup)
        residual = float(np.max(np.abs(updated - values)))
        values = updated
        residuals.append(residual)
        if log_every and sweep % log_every == 0:
            logger.info(f"Value iteration sweep {sweep}: residual {residual:.3e}")
        if residual <= tol:
            converged = True
            break

    if not converged:
        logger.warning(
            f"Value iteration did not converge in {max_sweeps} sweeps "
            f"(gamma={gamma}, residual={residuals[-1]:.3e}, tol={tol:.1e})"
        )
    else:
        logger.info(f"Value iteration converged in {len(residuals)} sweeps (gamma={gamma})")

    return ValueGrid(
        grid=grid,
        values=values,
        gamma=gamma,
        residual=residuals[-1],
        sweeps=len(residuals),
        converged=converged,
        residuals=residuals,
    )


def gamma_ladder(
    env: ReachAvoidEnv,
    grid: Grid,
    gammas: Sequence[float],
    tol: float = 1e-6,
    max_sweeps: int = 100_000,
    interpolate: bool = False,
) -> List[ValueGrid]:
    """Fixed points for each discount in ``gammas``, sharing one transition model."""
    model = TransitionModel.build(env, grid, interpolate=interpolate)
    return [
        value_iteration(env, grid, gamma, tol=tol, max_sweeps=max_sweeps, model=model)
        for gamma in gammas
    ]


def finite_horizon_values(
    env: ReachAvoidEnv,
    grid: Grid,
    horizon: int,
    model: Optional[TransitionModel] = None,
) -> np.ndarray:
    """Undiscounted ``horizon``-step values: ``horizon`` sweeps from ``max(l, g)``."""
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if model is None:
        model = TransitionModel.build(env, grid)
    values = np.maximum(model.l, model.g)
    for _ in range(horizon):
        v_next = np.min(model.successor_values(values), axis=1)
        values = reach_avoid_term(model.l, model.g, v_next)
    return values


def exhaustive_horizon_values(
    env: ReachAvoidEnv,
    grid: Grid,
    horizon: int,
    model: Optional[TransitionModel] = None,
    chunk_size: int = 729,
) -> np.ndarray:
    """Best payoff over every action sequence of length ``horizon``, per cell.

    Brute force over ``A**horizon`` sequences on the snapped model, one chunk
    of sequences at a time and vectorised over cells. An absorbing exit ends
    the trace with its exit value.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if model is None:
        model = TransitionModel.build(env, grid)
    if model.interpolated:
        raise ValueError("Exhaustive enumeration needs a snapped (non-interpolated) model")

    S, A = model.n_cells, model.n_actions
    l, g = model.l, model.g
    best = np.maximum(l, g)
    if horizon == 0:
        return best

    sequences = np.array(list(itertools.product(range(A), repeat=horizon)), dtype=np.int64)
    for start in range(0, len(sequences), chunk_size):
        seqs = sequences[start : start + chunk_size]
        cells = np.repeat(np.arange(S)[:, None], len(seqs), axis=1)
        run_g = g[cells]
        pay = np.maximum(l[cells], run_g)
        done = np.zeros(cells.shape, dtype=bool)
        for t in range(horizon):
            actions = np.broadcast_to(seqs[:, t], cells.shape)
            exiting = model.exits[cells, actions] & ~done
            exit_term = np.maximum(run_g, model.exit_values[cells, actions])
            nxt = model.next_index[cells, actions]
            moving = ~done & ~exiting
            cells = np.where(moving, nxt, cells)
            run_g = np.where(moving, np.maximum(run_g, g[cells]), run_g)
            term = np.where(exiting, exit_term, np.maximum(l[cells], run_g))
            pay = np.where(done, pay, np.minimum(pay, term))
            done = done | exiting
        best = np.minimum(best, np.min(pay, axis=1))
    return best


# =============================================================================
# Tabular Q-learning
# =============================================================================


def tabular_q_learning(
    env: ReachAvoidEnv,
    grid: Grid,
    episodes: int,
    seed: int = 0,
    horizon: Optional[int] = None,
    gamma_schedule: Schedule = GAMMA_SCHEDULE,
    epsilon_schedule: Schedule = EPSILON_SCHEDULE,
    lr_schedule: Optional[Schedule] = None,
    lr_exponent: float = 0.51,
    model: Optional[TransitionModel] = None,
    q_init: Optional[np.ndarray] = None,
    min_visits: int = 50,
) -> QTable:
    """Epsilon-greedy tabular Q-learning of the discounted reach-avoid values.

    Episodes start from uniformly random cells and end on an absorbing exit,
    a failure or target cell, or after ``horizon`` steps. Discount and
    exploration rate are staged over episodes. By default every
    (cell, action) pair uses its own rate ``1 / (1 + visits) ** lr_exponent``;
    pass ``lr_schedule`` to use one global staged rate instead.

    Returns:
        QTable with visit counts and the final discount
    """
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    if not 0.5 < lr_exponent <= 1.0:
        raise ValueError(f"lr_exponent must be in (0.5, 1], got {lr_exponent}")
    if model is None:
        model = TransitionModel.build(env, grid)
    if model.interpolated:
        raise ValueError("Tabular Q-learning needs a snapped (non-interpolated) model")
    horizon = horizon or env.horizon
    S, A = model.n_cells, model.n_actions

    if q_init is None:
        q = np.repeat(np.maximum(model.l, model.g)[:, None], A, axis=1)
    else:
        q = np.array(q_init, dtype=float).reshape(S, A)
    visits = np.zeros((S, A), dtype=np.int64)
    reset_rng = rng_stream(seed, "reset")
    explore_rng = rng_stream(seed, "exploration")
    l, g = model.l, model.g
    gamma = gamma_schedule.value(0, episodes)

    for episode in range(episodes):
        gamma = gamma_schedule.value(episode, episodes)
        epsilon = epsilon_schedule.value(episode, episodes)
        global_lr = lr_schedule.value(episode, episodes) if lr_schedule else None
        cell = int(reset_rng.integers(S))
        for _ in range(horizon):
            if explore_rng.random() < epsilon:
                action = int(explore_rng.integers(A))
            else:
                action = int(np.argmin(q[cell]))
            v_next = _successor_value(model, q, cell, action)
            target = (1.0 - gamma) * max(l[cell], g[cell]) + gamma * max(
                g[cell], min(l[cell], v_next)
            )
            if global_lr is None:
                alpha = 1.0 / (1.0 + visits[cell, action]) ** lr_exponent
            else:
                alpha = global_lr
            q[cell, action] += alpha * (target - q[cell, action])
            visits[cell, action] += 1
            if model.exits[cell, action] or g[cell] > 0 or l[cell] <= 0:
                break
            cell = int(model.next_index[cell, action])

        if (episode + 1) % max(1, episodes // 10) == 0:
            logger.info(
                f"Q-learning episode {episode + 1}/{episodes}: gamma={gamma:.6f}, "
                f"epsilon={epsilon:.3f}"
            )

    table = QTable(grid=grid, q=q, visits=visits, gamma=gamma)
    sparse = table.under_visited(min_visits)
    if sparse.any():
        logger.warning(
            f"{int(sparse.sum())}/{S} cells have an action updated fewer than {min_visits} times"
        )
    return table


def _successor_value(model: TransitionModel, q: np.ndarray, cell: int, action: int) -> float:
    if model.exits[cell, action]:
        return float(model.exit_values[cell, action])
    return float(np.min(q[model.next_index[cell, action]]))
