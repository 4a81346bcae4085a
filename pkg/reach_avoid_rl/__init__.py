"""Reach-Avoid RL - discounted reach-avoid solvers with rollout certification.

This package provides:
- Benchmark environments with target and constraint margins
- Discounted reach-avoid Bellman backups and learning targets
- Grid value iteration and tabular Q-learning
- Double deep Q-learning (single player and attack-defense minimax)
- Rollout certification, shielding and exhaustive adversarial validation

Example (grid):
    >>> from reach_avoid_rl import make_environment, grid_for_env, value_iteration, extract_ra_mask
    >>> env = make_environment("particle")
    >>> vg = value_iteration(env, grid_for_env(env, (81, 241)), gamma=0.9999)
    >>> ra = extract_ra_mask(vg)

Example (certification):
    >>> from reach_avoid_rl import greedy_policy, confusion_matrix
    >>> policy = greedy_policy(env, vg)
    >>> states = env.sample_states(1000, seed=0)
    >>> report = confusion_matrix(env, vg.lookup, policy, states)
    >>> print(report.fsr, report.ffr)
"""

from reach_avoid_rl.envs import (
    ReachAvoidEnv,
    PointParticle,
    DubinsCar,
    Lander,
    AttackDefense,
    list_environments,
    make_environment,
)
from reach_avoid_rl.bellman import (
    payoff,
    rabe_backup,
    drabe_backup,
    safety_backup,
    minimax_drabe_backup,
    ddqn_target,
    minimax_ddqn_target,
    sum_cost_target,
)
from reach_avoid_rl.tabular import (
    Grid,
    ValueGrid,
    QTable,
    Schedule,
    TransitionModel,
    build_grid,
    grid_for_env,
    value_iteration,
    gamma_ladder,
    finite_horizon_values,
    exhaustive_horizon_values,
    tabular_q_learning,
    extract_ra_mask,
)
from reach_avoid_rl.network import NetworkParams, forward, backward, soft_update
from reach_avoid_rl.replay import ReplayBuffer, Transition
from reach_avoid_rl.ddqn import TrainConfig, TrainResult, ddqn_train, minimax_ddqn_train
from reach_avoid_rl.policies import greedy_policy, value_function
from reach_avoid_rl.certification import (
    ConfusionReport,
    ShieldedController,
    rollout_value,
    rollout_membership_value,
    confusion_matrix,
    shield_action,
    exhaustive_validate,
    hausdorff_distance,
    nesting_report,
)
from reach_avoid_rl.errors import (
    ReachAvoidError,
    ConfigError,
    DimensionError,
    ActionError,
    DivergenceError,
    ArtifactError,
)

__version__ = "0.1.0"
__all__ = [
    # Environments
    "ReachAvoidEnv",
    "PointParticle",
    "DubinsCar",
    "Lander",
    "AttackDefense",
    "list_environments",
    "make_environment",
    # Bellman operators
    "payoff",
    "rabe_backup",
    "drabe_backup",
    "safety_backup",
    "minimax_drabe_backup",
    "ddqn_target",
    "minimax_ddqn_target",
    "sum_cost_target",
    # Tabular solvers
    "Grid",
    "ValueGrid",
    "QTable",
    "Schedule",
    "TransitionModel",
    "build_grid",
    "grid_for_env",
    "value_iteration",
    "gamma_ladder",
    "finite_horizon_values",
    "exhaustive_horizon_values",
    "tabular_q_learning",
    "extract_ra_mask",
    # Neural solvers
    "NetworkParams",
    "forward",
    "backward",
    "soft_update",
    "ReplayBuffer",
    "Transition",
    "TrainConfig",
    "TrainResult",
    "ddqn_train",
    "minimax_ddqn_train",
    # Certification
    "greedy_policy",
    "value_function",
    "ConfusionReport",
    "ShieldedController",
    "rollout_value",
    "rollout_membership_value",
    "confusion_matrix",
    "shield_action",
    "exhaustive_validate",
    "hausdorff_distance",
    "nesting_report",
    # Errors
    "ReachAvoidError",
    "ConfigError",
    "DimensionError",
    "ActionError",
    "DivergenceError",
    "ArtifactError",
]
