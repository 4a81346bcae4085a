"""Experiment configuration.

An experiment is one YAML document::

    environment:
      name: dubins-high        # preset; other keys override preset fields
    solver:
      name: value-iteration    # value-iteration | tabular-q | ddqn | minimax-ddqn | sum-baseline
      gamma: 0.9999
    grid:
      counts: [61, 61, 60]
    training: {}               # DDQN hyperparameters, defaults per environment
    certification: {}
    seed: 0
    output_dir: runs/dubins

Only ``environment.name`` and ``solver.name`` are required; the remaining
defaults depend on the environment. ``REACH_AVOID_OUTPUT_DIR`` overrides
``output_dir``.
"""

import copy
import logging
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from reach_avoid_rl.ddqn import TrainConfig
from reach_avoid_rl.envs import ReachAvoidEnv, list_environments, make_environment
from reach_avoid_rl.errors import ConfigError
from reach_avoid_rl.tabular import GAMMA_SCHEDULE, Schedule

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "REACH_AVOID_OUTPUT_DIR"
SOLVERS = ("value-iteration", "tabular-q", "ddqn", "minimax-ddqn", "sum-baseline")
SECTIONS = ("environment", "solver", "grid", "training", "certification", "seed", "output_dir")
RESOLVED_CONFIG_NAME = "config.resolved.yaml"

# Per-family training defaults.
TRAINING_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "particle": {
        "hidden": (100, 20),
        "updates": 400_000,
        "optimizer": "adam",
        "replay_size": 10_000,
        "init": "random",
        "gamma": Schedule.constant(0.9999),
        "validation_grid": (21, 61),
    },
    "dubins": {
        "hidden": (100, 20),
        "updates": 400_000,
        "optimizer": "adamw",
        "replay_size": 10_000,
        "init": "max_lg",
        "gamma": Schedule.constant(0.9999),
    },
    "lander": {
        "hidden": (512, 512, 512),
        "updates": 5_000_000,
        "optimizer": "adamw",
        "replay_size": 50_000,
        "init": "g",
        "gamma": GAMMA_SCHEDULE,
    },
    "attack-defense": {
        "hidden": (512, 512, 512),
        "updates": 4_000_000,
        "optimizer": "adamw",
        "replay_size": 50_000,
        "init": "max_lg",
        "gamma": GAMMA_SCHEDULE,
    },
}
SUM_BASELINE_GAMMA = 0.95
GRID_DEFAULTS: Dict[str, Tuple[int, ...]] = {
    "particle": (81, 241),
    "dubins": (61, 61, 60),
}


def env_family(name: str) -> str:
    """Family of a preset: ``particle-thin`` -> ``particle``, ``dubins-low`` -> ``dubins``."""
    for family in TRAINING_DEFAULTS:
        if name == family or name.startswith(family + "-"):
            return family
    return name


@dataclass
class SolverConfig:
    """Solver choice plus the tabular solver parameters."""

    name: str = "value-iteration"
    gamma: float = 0.9999
    tol: float = 1e-6
    max_sweeps: int = 100_000
    interpolate: bool = False
    backup: str = "reach-avoid"
    episodes: int = 200_000
    lr_exponent: float = 0.51
    use_lr_schedule: bool = False
    min_visits: int = 50


@dataclass
class GridConfig:
    counts: Optional[Tuple[int, ...]] = None
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None


@dataclass
class CertificationConfig:
    """What ``evaluate`` produces besides the confusion report."""

    horizon: Optional[int] = None
    probe_grid: Optional[Tuple[int, ...]] = None
    probe_samples: int = 1_000
    membership: bool = True
    gamma_ladder: Tuple[float, ...] = (0.5, 0.9, 0.99, 0.999, 0.9999)
    shield_episodes: int = 0
    exhaustive_states: int = 0
    intervals: int = 10
    steps_per_interval: int = 5
    rounds: int = 2
    slice: Optional[str] = None


@dataclass
class ExperimentConfig:
    environment: str
    env_params: Dict[str, Any] = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    certification: CertificationConfig = field(default_factory=CertificationConfig)
    seed: int = 0
    output_dir: str = ""

    def make_env(self) -> ReachAvoidEnv:
        return make_environment(self.environment, self.env_params)

    @property
    def family(self) -> str:
        return env_family(self.environment)

    def to_dict(self) -> Dict[str, Any]:
        """Fully resolved, YAML-safe document; loading it reproduces the run."""
        env = self.make_env()
        env_section = {"name": self.environment}
        env_section.update({k: v for k, v in env.to_params().items() if k != "name"})
        training = self.training.to_dict()
        training.pop("seed", None)
        return _plain(
            {
                "environment": env_section,
                "solver": asdict(self.solver),
                "grid": asdict(self.grid),
                "training": training,
                "certification": asdict(self.certification),
                "seed": self.seed,
                "output_dir": self.output_dir,
            }
        )


# YAML 1.1 reads exponent-only numbers such as 1e-6 as strings.
_SCIENTIFIC = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)[eE][+-]?\d+$")


def _coerce_numbers(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _coerce_numbers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_coerce_numbers(v) for v in obj]
    if isinstance(obj, str) and _SCIENTIFIC.match(obj.strip()):
        return float(obj)
    return obj


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


# =============================================================================
# Parsing
# =============================================================================


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"Section must be a mapping, got {type(value).__name__}", field=name)
    return dict(value)


def _build(cls, values: Dict[str, Any], section: str, tuples: Tuple[str, ...] = ()):
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"Unknown key '{key}'", field=f"{section}.{key}")
    converted = {
        k: (tuple(v) if k in tuples and isinstance(v, list) else v) for k, v in values.items()
    }
    try:
        return cls(**converted)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), field=section) from e


def _check_range(
    value: float, low: float, high: float, field_name: str, closed_high: bool = True
) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected a number, got {value!r}", field=field_name)
    ok = low <= value <= high if closed_high else low <= value < high
    if not ok:
        bracket = "]" if closed_high else ")"
        raise ConfigError(f"Value {value} outside [{low}, {high}{bracket}", field=field_name)


def config_from_dict(
    data: Dict[str, Any], output_dir: Optional[str] = None, seed: Optional[int] = None
) -> ExperimentConfig:
    """Validate a parsed config document and fill in per-environment defaults.

    Raises:
        ConfigError: Naming the offending dotted field
    """
    if not isinstance(data, dict):
        raise ConfigError("Config document must be a mapping")
    for key in data:
        if key not in SECTIONS:
            raise ConfigError(f"Unknown section '{key}'", field=key)

    env_section = _section(data, "environment")
    env_name = env_section.pop("name", None)
    if not env_name:
        raise ConfigError("Environment name is required", field="environment.name")
    if env_name not in list_environments():
        raise ConfigError(
            f"Unknown environment: {env_name}. Valid options: {', '.join(list_environments())}",
            field="environment.name",
        )
    env = make_environment(env_name, env_section)
    family = env_family(env_name)

    solver = _build(SolverConfig, _section(data, "solver"), "solver")
    if solver.name not in SOLVERS:
        raise ConfigError(
            f"Unknown solver: {solver.name}. Valid options: {', '.join(SOLVERS)}",
            field="solver.name",
        )
    _check_range(solver.gamma, 0.0, 1.0, "solver.gamma", closed_high=False)
    _check_range(solver.tol, 0.0, float("inf"), "solver.tol")
    if solver.tol == 0:
        raise ConfigError("tol must be positive", field="solver.tol")
    if solver.name == "minimax-ddqn" and family != "attack-defense":
        raise ConfigError("minimax-ddqn requires the attack-defense environment", field="solver.name")
    if solver.name in ("ddqn", "sum-baseline") and family == "attack-defense":
        raise ConfigError("Use minimax-ddqn for the attack-defense game", field="solver.name")

    grid = _build(GridConfig, _section(data, "grid"), "grid", ("counts", "lower", "upper"))
    if grid.counts is None:
        grid.counts = GRID_DEFAULTS.get(family)
    if solver.name in ("value-iteration", "tabular-q"):
        if grid.counts is None:
            raise ConfigError(f"No default grid for {env_name}; set grid.counts", field="grid.counts")
        if len(grid.counts) != env.dim:
            raise ConfigError(
                f"{env_name} is {env.dim}-D but grid.counts has {len(grid.counts)} entries",
                field="grid.counts",
            )

    if seed is None:
        seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"Seed must be a non-negative integer, got {seed!r}", field="seed")

    training_values = copy.deepcopy(TRAINING_DEFAULTS.get(family, {}))
    if solver.name == "sum-baseline":
        training_values.update({"objective": "sum", "gamma": Schedule.constant(SUM_BASELINE_GAMMA)})
    elif solver.name == "minimax-ddqn":
        training_values["objective"] = "minimax"
    user_training = _section(data, "training")
    if "seed" in user_training:
        raise ConfigError("Use the top-level seed", field="training.seed")
    training_values.update(user_training)
    training_values["seed"] = seed
    training = _build(TrainConfig, training_values, "training", ("hidden", "validation_grid"))
    _check_range(training.tau, 0.0, 1.0, "training.tau")
    for name in ("lr", "epsilon", "gamma"):
        sched: Schedule = getattr(training, name)
        if sched.initial < 0 or (sched.bound is not None and sched.bound < 0):
            raise ConfigError("Schedule values must be non-negative", field=f"training.{name}")
    if training.gamma.mode == "ceiling" and training.gamma.bound is not None:
        _check_range(training.gamma.bound, 0.0, 1.0, "training.gamma.bound")

    certification = _build(
        CertificationConfig,
        _section(data, "certification"),
        "certification",
        ("probe_grid", "gamma_ladder"),
    )
    for g in certification.gamma_ladder:
        _check_range(g, 0.0, 1.0, "certification.gamma_ladder", closed_high=False)

    resolved_dir = (
        output_dir
        or os.environ.get(OUTPUT_DIR_ENV)
        or data.get("output_dir")
        or str(Path("runs") / f"{env_name}-{solver.name}-seed{seed}")
    )
    return ExperimentConfig(
        environment=env_name,
        env_params=env_section,
        solver=solver,
        grid=grid,
        training=training,
        certification=certification,
        seed=seed,
        output_dir=str(resolved_dir),
    )


def load_config(
    path: Union[str, Path], output_dir: Optional[str] = None, seed: Optional[int] = None
) -> ExperimentConfig:
    """Read and validate an experiment YAML file.

    Args:
        path: Config file
        output_dir: Explicit output directory (takes precedence over
            ``REACH_AVOID_OUTPUT_DIR`` and the file's ``output_dir``)
        seed: Overrides the document's top-level seed

    Raises:
        ConfigError: If the file is unreadable, not valid YAML or invalid
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"Invalid YAML: {getattr(e, 'problem', None) or e}", line=line) from e
    config = config_from_dict(_coerce_numbers(data or {}), output_dir=output_dir, seed=seed)
    logger.debug(f"Loaded config {path}: {config.environment} / {config.solver.name}")
    return config


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Copy of ``config`` with a different seed."""
    updated = copy.deepcopy(config)
    updated.seed = seed
    updated.training.seed = seed
    return updated


def save_resolved_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)
    return path
