"""Benchmark reach-avoid environments.

Each environment is an immutable description of one dynamical system: its
ordinary differential equation, finite control set, target margin ``l`` and
safety margin ``g``, and the integration step. The conventions are

    l(s) <= 0  <=>  s is in the target set
    g(s) >  0  <=>  s is in the failure set

so a state on the failure boundary (``g == 0``) is still admissible.

Example:
    >>> env = make_environment("dubins-high")
    >>> s = env.step([0.0, 0.0, 0.0], [0.0])
    >>> l, g = env.margins(s)
"""

import dataclasses
import itertools
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from reach_avoid_rl.errors import ActionError, ConfigError, DimensionError
from reach_avoid_rl.geometry import BoxSpec, polygon_signed_distance
from reach_avoid_rl.utils import SeedLike, as_generator

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
INTEGRATORS = ("euler", "rk4")


class ReachAvoidEnv(ABC):
    """Interface shared by all benchmark systems.

    Subclasses are frozen dataclasses; they provide the control set, the
    domain box, the vector field and the margins. Stepping, margin evaluation
    and sampling are implemented here once, for single states and batches.
    """

    name: str
    dt: float
    integrator: str
    horizon: int

    # ------------------------------------------------------------------
    # Subclass contract
    # ------------------------------------------------------------------

    @property
    @abstractmethod
    def controls(self) -> np.ndarray:
        """Control set as an ``(A, m)`` array, one row per action."""

    @property
    @abstractmethod
    def domain(self) -> np.ndarray:
        """Domain box as an ``(n, 2)`` array of ``[low, high]`` rows."""

    @property
    def periodic(self) -> Tuple[bool, ...]:
        return (False,) * self.dim

    @abstractmethod
    def derivative(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        """Vector field ``f(s, u)`` for ``(N, n)`` states and ``(N, m)`` controls."""

    @abstractmethod
    def margins_batch(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Target and safety margins for an ``(N, n)`` batch."""

    # ------------------------------------------------------------------
    # Shared behaviour
    # ------------------------------------------------------------------

    def _check_common(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(
                f"Unsupported integrator: {self.integrator}. Valid options: {', '.join(INTEGRATORS)}"
            )

    @property
    def dim(self) -> int:
        return int(self.domain.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.controls.shape[0])

    def validate_state(self, state: Sequence[float]) -> np.ndarray:
        """Return ``state`` as a float vector, checking dimension and finiteness."""
        s = np.asarray(state, dtype=float)
        if s.shape != (self.dim,):
            raise DimensionError(
                f"{self.name}: expected a state of dimension {self.dim}, got shape {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise ValueError(f"{self.name}: state has non-finite entries: {s}")
        return s

    def validate_states(self, states: np.ndarray) -> np.ndarray:
        batch = np.asarray(states, dtype=float)
        if batch.ndim != 2 or batch.shape[1] != self.dim:
            raise DimensionError(
                f"{self.name}: expected a (N, {self.dim}) state batch, got shape {batch.shape}"
            )
        return batch

    def action_index(self, control: Any) -> int:
        """Index of ``control`` in the control set.

        Raises:
            ActionError: If the control is not a member of the set
        """
        u = np.atleast_1d(np.asarray(control, dtype=float))
        if u.shape != (self.controls.shape[1],):
            raise ActionError(
                f"{self.name}: control must have {self.controls.shape[1]} entries, got {u.shape}"
            )
        matches = np.flatnonzero(np.all(self.controls == u, axis=1))
        if matches.size == 0:
            raise ActionError(f"{self.name}: {u.tolist()} is not in the control set")
        return int(matches[0])

    def wrap(self, states: np.ndarray) -> np.ndarray:
        """Wrap periodic coordinates into their domain interval."""
        periodic = np.asarray(self.periodic)
        if not periodic.any():
            return states
        wrapped = states.copy()
        low = self.domain[periodic, 0]
        width = self.domain[periodic, 1] - low
        wrapped[:, periodic] = low + np.mod(states[:, periodic] - low, width)
        return wrapped

    def _integrate(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        f = self.derivative
        dt = self.dt
        if self.integrator == "euler":
            nxt = states + dt * f(states, controls)
        else:
            k1 = f(states, controls)
            k2 = f(states + 0.5 * dt * k1, controls)
            k3 = f(states + 0.5 * dt * k2, controls)
            k4 = f(states + dt * k3, controls)
            nxt = states + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self.wrap(nxt)

    def step_batch(self, states: np.ndarray, actions: Any) -> np.ndarray:
        """Advance a batch one step; ``actions`` is one index or one per row."""
        batch = self.validate_states(states)
        idx = np.broadcast_to(np.asarray(actions, dtype=int), (batch.shape[0],))
        if np.any(idx < 0) or np.any(idx >= self.n_actions):
            raise ActionError(f"{self.name}: action index out of range 0..{self.n_actions - 1}")
        return self._integrate(batch, self.controls[idx])

    def step(self, state: Sequence[float], control: Any) -> np.ndarray:
        """Advance ``state`` by one integrator step under ``control``."""
        s = self.validate_state(state)
        a = self.action_index(control)
        return self._integrate(s[None, :], self.controls[a : a + 1])[0]

    def step_index(self, state: Sequence[float], action: int) -> np.ndarray:
        s = self.validate_state(state)
        return self.step_batch(s[None, :], int(action))[0]

    def margins(self, state: Sequence[float]) -> Tuple[float, float]:
        """Target margin ``l`` and safety margin ``g`` of one state."""
        s = self.validate_state(state)
        l, g = self.margins_batch(s[None, :])
        return float(l[0]), float(g[0])

    def out_of_domain(self, states: np.ndarray) -> np.ndarray:
        """True for rows outside the (non-periodic part of the) domain box."""
        batch = np.atleast_2d(states)
        bounded = ~np.asarray(self.periodic)
        low = self.domain[bounded, 0]
        high = self.domain[bounded, 1]
        coords = batch[:, bounded]
        return np.any((coords < low) | (coords > high), axis=1)

    def sample_states(self, count: int, seed: SeedLike = None) -> np.ndarray:
        """Uniform samples over the domain box (angles on their full period)."""
        rng = as_generator(seed)
        low, high = self.domain[:, 0], self.domain[:, 1]
        return rng.uniform(low, high, size=(count, self.dim))

    def sample_state(self, seed: SeedLike = None) -> np.ndarray:
        return self.sample_states(1, seed)[0]

    def to_params(self) -> Dict[str, Any]:
        """Plain-data parameters suitable for YAML snapshots."""
        return _plain(dataclasses.asdict(self))  # type: ignore[call-overload]


# =============================================================================
# Point particle
# =============================================================================

DEFAULT_PARTICLE_OBSTACLES = (
    BoxSpec(center=(1.25, 2.0), size=(1.5, 1.5)),
    BoxSpec(center=(-1.25, 2.0), size=(1.5, 1.5)),
    BoxSpec(center=(0.0, 6.0), size=(1.5, 1.5)),
)
THIN_PARTICLE_OBSTACLES = (
    BoxSpec(center=(-0.75, 5.0), size=(2.0, 0.2)),
    BoxSpec(center=(0.75, 3.0), size=(2.0, 0.2)),
)


@dataclass(frozen=True)
class PointParticle(ReachAvoidEnv):
    """Particle drifting upward at ``vy`` with controllable horizontal speed.

    Dynamics ``x' = u * vx``, ``y' = vy`` with ``u`` in ``{-1, 0, 1}``. The
    safety margin is the pointwise maximum of the boundary-box margin and the
    obstacle margins; the target margin is the target-box margin.
    """

    name: str = "particle"
    vx: float = 2.0
    vy: float = 2.0
    boundary: BoxSpec = BoxSpec(center=(0.0, 4.0), size=(4.0, 12.0))
    target: BoxSpec = BoxSpec(center=(0.0, 9.25), size=(1.5, 1.5))
    obstacles: Tuple[BoxSpec, ...] = DEFAULT_PARTICLE_OBSTACLES
    dt: float = 0.05
    integrator: str = "euler"
    horizon: int = 150

    def __post_init__(self) -> None:
        self._check_common()
        if self.vx <= 0 or self.vy <= 0:
            raise ValueError("Particle speeds vx, vy must be positive")

    @cached_property
    def controls(self) -> np.ndarray:
        return np.array([[-1.0], [0.0], [1.0]])

    @cached_property
    def domain(self) -> np.ndarray:
        return np.stack([self.boundary.lower, self.boundary.upper], axis=1)

    def derivative(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        out = np.empty_like(states)
        out[:, 0] = controls[:, 0] * self.vx
        out[:, 1] = self.vy
        return out

    def margins_batch(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        xy = np.atleast_2d(states)[:, :2]
        l = self.target.margin(xy)
        g = self.boundary.margin(xy)
        for box in self.obstacles:
            g = np.maximum(g, -box.margin(xy))
        return l, g


# =============================================================================
# Dubins car
# =============================================================================


@dataclass(frozen=True)
class DubinsCar(ReachAvoidEnv):
    """Constant-speed unicycle that must reach the inner disk inside the outer one.

    ``l(s) = |p| - r`` and ``g(s) = |p| - R`` with ``p`` the planar position.
    """

    name: str = "dubins"
    speed: float = 0.5
    turn_rate: float = 0.833
    inner_radius: float = 0.5
    outer_radius: float = 1.0
    half_width: float = 1.1
    dt: float = 0.05
    integrator: str = "rk4"
    horizon: int = 200

    def __post_init__(self) -> None:
        self._check_common()
        if not 0 < self.inner_radius < self.outer_radius:
            raise ValueError("Dubins car requires 0 < inner_radius < outer_radius")
        if self.half_width < self.outer_radius:
            raise ValueError("Dubins domain must contain the outer circle")

    @cached_property
    def controls(self) -> np.ndarray:
        return np.array([[self.turn_rate], [0.0], [-self.turn_rate]])

    @cached_property
    def domain(self) -> np.ndarray:
        w = self.half_width
        return np.array([[-w, w], [-w, w], [0.0, TWO_PI]])

    @property
    def periodic(self) -> Tuple[bool, ...]:
        return (False, False, True)

    def derivative(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        theta = states[:, 2]
        return np.stack(
            [self.speed * np.cos(theta), self.speed * np.sin(theta), controls[:, 0]], axis=1
        )

    def margins_batch(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        radius = np.linalg.norm(np.atleast_2d(states)[:, :2], axis=1)
        return radius - self.inner_radius, radius - self.outer_radius


# =============================================================================
# Planar lander
# =============================================================================

DEFAULT_TERRAIN = (
    (-10.0, 3.0),
    (-7.0, 4.5),
    (-4.5, 2.5),
    (-2.0, 2.0),
    (2.0, 2.0),
    (4.5, 3.0),
    (7.0, 5.0),
    (10.0, 3.5),
)


@dataclass(frozen=True)
class Lander(ReachAvoidEnv):
    """Simplified planar rigid-body lander, state ``[x, y, theta, vx, vy, omega]``.

    Actions are ``noop``, ``left``, ``right`` and ``main``. The main engine
    accelerates along the body axis; side engines apply an angular
    acceleration plus a small lateral push. The constraint polygon is the
    terrain polyline closed by the left, right and top walls.
    """

    name: str = "lander"
    gravity: float = 1.6
    main_accel: float = 3.0
    side_lateral_accel: float = 0.3
    side_angular_accel: float = 1.0
    terrain: Tuple[Tuple[float, float], ...] = DEFAULT_TERRAIN
    ceiling: float = 12.0
    target: BoxSpec = BoxSpec(center=(0.0, 3.25), size=(3.0, 2.0))
    max_tilt: float = math.pi / 4
    max_speed: float = 2.0
    max_spin: float = 1.0
    dt: float = 0.1
    integrator: str = "rk4"
    horizon: int = 300

    def __post_init__(self) -> None:
        self._check_common()
        if len(self.terrain) < 2:
            raise ValueError("Lander terrain needs at least two vertices")
        xs = [p[0] for p in self.terrain]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("Lander terrain x coordinates must be strictly increasing")
        if max(p[1] for p in self.terrain) >= self.ceiling:
            raise ValueError("Lander terrain must stay below the ceiling")
        object.__setattr__(self, "terrain", tuple((float(x), float(y)) for x, y in self.terrain))

    @cached_property
    def controls(self) -> np.ndarray:
        # columns: main throttle, side engine (+1 left, -1 right)
        return np.array([[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 0.0]])

    @cached_property
    def constraint_polygon(self) -> np.ndarray:
        left, right = self.terrain[0][0], self.terrain[-1][0]
        return np.array(list(self.terrain) + [(right, self.ceiling), (left, self.ceiling)])

    @cached_property
    def domain(self) -> np.ndarray:
        left, right = self.terrain[0][0], self.terrain[-1][0]
        return np.array(
            [
                [left, right],
                [0.0, self.ceiling],
                [-self.max_tilt, self.max_tilt],
                [-self.max_speed, self.max_speed],
                [-self.max_speed, self.max_speed],
                [-self.max_spin, self.max_spin],
            ]
        )

    def derivative(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        theta = states[:, 2]
        main = controls[:, 0] * self.main_accel
        lateral = -controls[:, 1] * self.side_lateral_accel
        sin, cos = np.sin(theta), np.cos(theta)
        ax = -main * sin + lateral * cos
        ay = main * cos + lateral * sin - self.gravity
        alpha = controls[:, 1] * self.side_angular_accel
        return np.stack([states[:, 3], states[:, 4], states[:, 5], ax, ay, alpha], axis=1)

    def margins_batch(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        xy = np.atleast_2d(states)[:, :2]
        l = self.target.signed_distance(xy)
        g = polygon_signed_distance(xy, self.constraint_polygon)
        return l, g


# =============================================================================
# Attack-defense game
# =============================================================================


@dataclass(frozen=True)
class AttackDefense(ReachAvoidEnv):
    """Two identical Dubins cars: the attacker reaches, the defender captures.

    State ``[xA, yA, thA, xD, yD, thD]``. The joint control index is
    ``attacker * n_defender + defender``.
    """

    name: str = "attack-defense"
    speed: float = 0.75
    turn_rate: float = 3.0
    inner_radius: float = 0.5
    outer_radius: float = 1.0
    capture_radius: float = 0.25
    half_width: float = 1.1
    attacker_controls: Optional[Tuple[float, ...]] = None
    defender_controls: Optional[Tuple[float, ...]] = None
    sample_ring: bool = True
    dt: float = 0.05
    integrator: str = "rk4"
    horizon: int = 100

    def __post_init__(self) -> None:
        self._check_common()
        if not 0 < self.inner_radius < self.outer_radius:
            raise ValueError("Attack-defense requires 0 < inner_radius < outer_radius")
        if self.capture_radius <= 0:
            raise ValueError("capture_radius must be positive")
        for name in ("attacker_controls", "defender_controls"):
            value = getattr(self, name)
            if value is not None:
                if len(value) == 0:
                    raise ValueError(f"{name} must not be empty")
                object.__setattr__(self, name, tuple(float(v) for v in value))

    def _player_controls(self, controls: Optional[Tuple[float, ...]]) -> Tuple[float, ...]:
        if controls is None:
            return (self.turn_rate, 0.0, -self.turn_rate)
        return controls

    @property
    def n_attacker(self) -> int:
        return len(self._player_controls(self.attacker_controls))

    @property
    def n_defender(self) -> int:
        return len(self._player_controls(self.defender_controls))

    def joint_index(self, attacker: Any, defender: Any) -> Any:
        return np.asarray(attacker) * self.n_defender + np.asarray(defender)

    @cached_property
    def controls(self) -> np.ndarray:
        pairs = itertools.product(
            self._player_controls(self.attacker_controls),
            self._player_controls(self.defender_controls),
        )
        return np.array([[ua, ud] for ua, ud in pairs])

    @cached_property
    def domain(self) -> np.ndarray:
        w = self.half_width
        return np.array([[-w, w], [-w, w], [0.0, TWO_PI], [-w, w], [-w, w], [0.0, TWO_PI]])

    @property
    def periodic(self) -> Tuple[bool, ...]:
        return (False, False, True, False, False, True)

    def derivative(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        tha, thd = states[:, 2], states[:, 5]
        v = self.speed
        return np.stack(
            [
                v * np.cos(tha),
                v * np.sin(tha),
                controls[:, 0],
                v * np.cos(thd),
                v * np.sin(thd),
                controls[:, 1],
            ],
            axis=1,
        )

    def margins_batch(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        batch = np.atleast_2d(states)
        attacker = batch[:, 0:2]
        defender = batch[:, 3:5]
        radius = np.linalg.norm(attacker, axis=1)
        gap = np.linalg.norm(attacker - defender, axis=1)
        l = radius - self.inner_radius
        g = np.maximum(radius - self.outer_radius, self.capture_radius - gap)
        return l, g

    def sample_states(self, count: int, seed: SeedLike = None) -> np.ndarray:
        """Attacker uniform in the ring ``[r, R]``, defender uniform in the disk ``R``.

        Falls back to the plain domain box when ``sample_ring`` is off.
        """
        if not self.sample_ring:
            return super().sample_states(count, seed)
        rng = as_generator(seed)
        attacker = _rejection_sample(rng, count, self.outer_radius, self.inner_radius)
        defender = _rejection_sample(rng, count, self.outer_radius, 0.0)
        headings = rng.uniform(0.0, TWO_PI, size=(count, 2))
        return np.column_stack([attacker, headings[:, 0], defender, headings[:, 1]])


def _rejection_sample(
    rng: np.random.Generator, count: int, outer: float, inner: float
) -> np.ndarray:
    """Uniform points in the annulus ``inner <= |p| <= outer``."""
    accepted = np.empty((0, 2))
    while accepted.shape[0] < count:
        draws = rng.uniform(-outer, outer, size=(2 * count + 16, 2))
        radius = np.linalg.norm(draws, axis=1)
        keep = draws[(radius >= inner) & (radius <= outer)]
        accepted = np.vstack([accepted, keep])
    return accepted[:count]


# =============================================================================
# Registry
# =============================================================================

ENVIRONMENTS: Dict[str, Tuple[type, Dict[str, Any]]] = {
    "particle": (PointParticle, {}),
    "particle-thin": (
        PointParticle,
        {"name": "particle-thin", "obstacles": THIN_PARTICLE_OBSTACLES},
    ),
    "dubins": (DubinsCar, {}),
    "dubins-high": (
        DubinsCar,
        {"name": "dubins-high", "turn_rate": 0.833, "inner_radius": 0.5},
    ),
    "dubins-low": (
        DubinsCar,
        {"name": "dubins-low", "turn_rate": 0.667, "inner_radius": 0.4},
    ),
    "lander": (Lander, {}),
    "attack-defense": (AttackDefense, {}),
}

_BOX_FIELDS = ("boundary", "target")


def list_environments() -> Tuple[str, ...]:
    return tuple(sorted(ENVIRONMENTS))


def make_environment(name: str, params: Optional[Dict[str, Any]] = None) -> ReachAvoidEnv:
    """Build a registered environment, overriding preset parameters.

    Args:
        name: Registered environment or preset name
        params: Field overrides; boxes may be given as ``{center, size}`` dicts

    Raises:
        ConfigError: On unknown names, unknown fields or invalid values
    """
    if name not in ENVIRONMENTS:
        raise ConfigError(
            f"Unknown environment: {name}. Valid options: {', '.join(list_environments())}",
            field="environment.name",
        )
    cls, preset = ENVIRONMENTS[name]
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs: Dict[str, Any] = dict(preset)
    for key, value in (params or {}).items():
        if key not in known:
            raise ConfigError(f"Unknown parameter for {name}: {key}", field=f"environment.{key}")
        kwargs[key] = _coerce_param(key, value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), field="environment") from e


def _coerce_param(key: str, value: Any) -> Any:
    if key in _BOX_FIELDS and isinstance(value, dict):
        return BoxSpec.from_dict(value)
    if key == "obstacles":
        return tuple(BoxSpec.from_dict(v) if isinstance(v, dict) else v for v in value)
    if key == "terrain":
        return tuple(tuple(p) for p in value)
    if isinstance(value, list):
        return tuple(value)
    return value


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# =============================================================================
# Functional interface
# =============================================================================


def step(env: ReachAvoidEnv, state: Sequence[float], control: Any) -> np.ndarray:
    """One integrator step of ``env`` from ``state`` under ``control``."""
    return env.step(state, control)


def margins(env: ReachAvoidEnv, state: Sequence[float]) -> Tuple[float, float]:
    """Target margin ``l`` and safety margin ``g`` of ``state``."""
    return env.margins(state)


def sample_state(env: ReachAvoidEnv, seed: SeedLike = None) -> np.ndarray:
    """Uniform state over ``env``'s domain, reproducible for a fixed seed."""
    return env.sample_state(seed)


