"""Double deep Q-learning of reach-avoid values.

One training loop serves three objectives:

- ``reach-avoid``: discounted reach-avoid targets, argmin over actions
- ``minimax``: joint-action network for the attack-defense game, min over
  attacker of max over defender
- ``sum``: the sparse sum-of-costs baseline (cost -1 at the target, ``rho``
  on failure)

Every iteration takes one environment step, stores it in the replay buffer
and (once the buffer holds a batch) performs one gradient update followed by
a soft target update.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from reach_avoid_rl.bellman import ddqn_targets, minimax_ddqn_targets, sum_cost_targets
from reach_avoid_rl.certification import rollout_batch
from reach_avoid_rl.envs import AttackDefense, ReachAvoidEnv
from reach_avoid_rl.errors import DivergenceError
from reach_avoid_rl.network import (
    NetworkParams,
    action_mse,
    forward,
    full_mse,
    make_optimizer,
    soft_update,
)
from reach_avoid_rl.policies import MinimaxPolicy, NetworkPolicy, Policy
from reach_avoid_rl.replay import ReplayBuffer, Transition
from reach_avoid_rl.tabular import (
    EPSILON_SCHEDULE,
    GAMMA_SCHEDULE,
    LEARNING_RATE_SCHEDULE,
    Schedule,
    build_grid,
)
from reach_avoid_rl.utils import SeedLike, as_generator, rng_streams

logger = logging.getLogger(__name__)

OBJECTIVES = ("reach-avoid", "minimax", "sum")
INIT_MODES = ("random", "max_lg", "g")
SUM_TERMINATIONS = ("end", "fail")


@dataclass
class TrainConfig:
    """Hyperparameters of one DDQN run."""

    updates: int = 400_000
    batch_size: int = 64
    hidden: Tuple[int, ...] = (100, 20)
    optimizer: str = "adam"
    weight_decay: float = 0.01
    lr: Schedule = LEARNING_RATE_SCHEDULE
    epsilon: Schedule = EPSILON_SCHEDULE
    gamma: Schedule = GAMMA_SCHEDULE
    tau: float = 0.01
    replay_size: int = 10_000
    init: str = "random"
    pretrain_samples: int = 10_000
    pretrain_updates: int = 5_000
    pretrain_tol: float = 1e-3
    objective: str = "reach-avoid"
    rho: float = 0.1
    termination: str = "end"
    eval_every: int = 10_000
    validation_grid: Optional[Tuple[int, ...]] = None
    validation_size: int = 1_000
    eval_horizon: Optional[int] = None
    divergence_threshold: float = 1e6
    seed: int = 0

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.validation_grid is not None:
            self.validation_grid = tuple(int(c) for c in self.validation_grid)
        self.lr = Schedule.from_value(self.lr)
        self.epsilon = Schedule.from_value(self.epsilon)
        self.gamma = Schedule.from_value(self.gamma)
        if self.updates <= 0:
            raise ValueError(f"updates must be positive, got {self.updates}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.replay_size < self.batch_size:
            raise ValueError("replay_size must be at least batch_size")
        if self.init not in INIT_MODES:
            raise ValueError(f"Unsupported init: {self.init}. Valid options: {', '.join(INIT_MODES)}")
        if self.objective not in OBJECTIVES:
            raise ValueError(
                f"Unsupported objective: {self.objective}. Valid options: {', '.join(OBJECTIVES)}"
            )
        if self.termination not in SUM_TERMINATIONS:
            raise ValueError(
                f"Unsupported termination: {self.termination}. "
                f"Valid options: {', '.join(SUM_TERMINATIONS)}"
            )
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["hidden"] = list(self.hidden)
        if self.validation_grid is not None:
            data["validation_grid"] = list(self.validation_grid)
        return data


@dataclass
class TrainResult:
    online: NetworkParams
    target: NetworkParams
    metrics: List[Dict[str, Any]] = field(default_factory=list)
    gamma: float = 0.0
    pretrain_converged: Optional[bool] = None


# =============================================================================
# Margin pretraining
# =============================================================================


def margin_targets(env: ReachAvoidEnv, states: np.ndarray, mode: str) -> np.ndarray:
    l, g = env.margins_batch(states)
    return g if mode == "g" else np.maximum(l, g)


def margin_pretrain(
    params: NetworkParams,
    env: ReachAvoidEnv,
    samples: int,
    mode: str = "max_lg",
    seed: SeedLike = None,
    max_updates: int = 5_000,
    tol: float = 1e-3,
    lr: float = 1e-3,
    batch_size: int = 64,
    check_every: int = 100,
) -> Tuple[NetworkParams, bool]:
    """Regress every output toward a margin function on uniformly sampled states.

    Args:
        params: Network to train (a copy is returned)
        env: Environment providing the margins
        samples: Number of uniform states to regress on
        mode: ``"max_lg"`` for ``max(l, g)`` or ``"g"`` for the safety margin
        max_updates: Update budget
        tol: Stop once the mean squared error over all samples is at most ``tol``

    Returns:
        Best network seen and whether ``tol`` was reached
    """
    if mode not in ("max_lg", "g"):
        raise ValueError(f"Unsupported pretraining target: {mode}. Valid options: max_lg, g")
    rng = as_generator(seed)
    states = env.sample_states(samples, rng)
    targets = np.repeat(margin_targets(env, states, mode)[:, None], params.n_outputs, axis=1)
    net = params.copy()
    opt = make_optimizer("adam", net, lr=lr)
    best = net.copy()
    best_loss, _ = full_mse(net, states, targets)
    for update in range(1, max_updates + 1):
        idx = rng.choice(samples, size=min(batch_size, samples), replace=False)
        _, grads = full_mse(net, states[idx], targets[idx])
        opt.step(net, grads)
        if update % check_every == 0 or update == max_updates:
            loss, _ = full_mse(net, states, targets)
            if loss < best_loss:
                best_loss, best = loss, net.copy()
            if loss <= tol:
                logger.info(f"Margin pretraining reached MSE {loss:.2e} after {update} updates")
                return best, True
    logger.warning(
        f"Margin pretraining budget of {max_updates} updates exhausted (best MSE {best_loss:.2e})"
    )
    return best, False


# =============================================================================
# Training loop
# =============================================================================


def validation_states(env: ReachAvoidEnv, config: TrainConfig, seed: SeedLike = None) -> np.ndarray:
    """Fixed validation set: grid cell centres when configured, uniform samples otherwise."""
    if config.validation_grid is not None:
        if len(config.validation_grid) != env.dim:
            raise ValueError(
                f"validation_grid needs {env.dim} counts for {env.name}, "
                f"got {len(config.validation_grid)}"
            )
        return build_grid(env.domain.tolist(), config.validation_grid, env.periodic).centers()
    return env.sample_states(config.validation_size, seed)


def _greedy_policy(env: ReachAvoidEnv, params: NetworkParams, objective: str) -> Policy:
    if objective == "minimax":
        return MinimaxPolicy(params, env, role="joint")  # type: ignore[arg-type]
    return NetworkPolicy(params)


def _is_terminal(
    env: ReachAvoidEnv, objective: str, termination: str, next_state: np.ndarray, l_next: float, g_next: float
) -> bool:
    if objective == "sum" and termination == "end":
        return bool(l_next <= 0 or env.out_of_domain(next_state)[0])
    return bool(g_next > 0 or l_next <= 0 or env.out_of_domain(next_state)[0])


def _train(
    env: ReachAvoidEnv,
    config: TrainConfig,
    on_metrics: Optional[Callable[[Dict[str, Any]], None]] = None,
) -> TrainResult:
    objective = config.objective
    if objective == "minimax" and not isinstance(env, AttackDefense):
        raise ValueError("The minimax objective requires the attack-defense environment")

    streams = rng_streams(config.seed)
    A = env.n_actions
    sizes = (env.dim,) + config.hidden + (A,)
    online = NetworkParams.initialize(sizes, streams["init"])
    pretrain_converged = None
    if config.init != "random":
        online, pretrain_converged = margin_pretrain(
            online,
            env,
            config.pretrain_samples,
            mode=config.init,
            seed=streams["pretrain"],
            max_updates=config.pretrain_updates,
            tol=config.pretrain_tol,
        )
    target = online.copy()
    opt = make_optimizer(
        config.optimizer, online, lr=config.lr.initial, weight_decay=config.weight_decay
    )
    buffer = ReplayBuffer(config.replay_size, env.dim, streams["replay"])
    validation = validation_states(env, config, streams["validation"])
    eval_horizon = config.eval_horizon or env.horizon
    explore = streams["exploration"]
    reset = streams["reset"]
    policy = _greedy_policy(env, online, objective)

    state = env.sample_state(reset)
    episode_steps = 0
    episodes = 0
    losses: List[float] = []
    metrics: List[Dict[str, Any]] = []
    T = config.updates
    gamma = config.gamma.value(0, T)

    logger.info(
        f"Training {objective} DDQN on {env.name}: {T} updates, network {sizes}, "
        f"optimizer {config.optimizer}"
    )
    for step in range(T):
        gamma = config.gamma.value(step, T)
        epsilon = config.epsilon.value(step, T)
        lr = config.lr.value(step, T)

        if explore.random() < epsilon:
            action = int(explore.integers(A))
        else:
            action = policy(state)
        next_state = env.step_index(state, action)
        l, g = env.margins(state)
        l_next, g_next = env.margins(next_state)
        episode_steps += 1
        terminal = _is_terminal(env, objective, config.termination, next_state, l_next, g_next)
        truncated = episode_steps >= env.horizon
        buffer.add(
            Transition(state, action, next_state, terminal or truncated, l, g, l_next, g_next)
        )
        if terminal or truncated:
            state = env.sample_state(reset)
            episode_steps = 0
            episodes += 1
        else:
            state = next_state

        if len(buffer) >= config.batch_size:
            batch = buffer.sample(config.batch_size)
            q_online_next = forward(online, batch.next_states)
            q_target_next = forward(target, batch.next_states)
            if objective == "sum":
                y = sum_cost_targets(
                    batch.l_next, batch.g_next, batch.terminal,
                    q_online_next, q_target_next, gamma, config.rho,
                )
            elif objective == "minimax":
                y = minimax_ddqn_targets(
                    batch.l, batch.g, batch.l_next, batch.g_next, batch.terminal,
                    q_online_next, q_target_next, gamma,
                    env.n_attacker, env.n_defender,  # type: ignore[attr-defined]
                )
            else:
                y = ddqn_targets(
                    batch.l, batch.g, batch.l_next, batch.g_next, batch.terminal,
                    q_online_next, q_target_next, gamma,
                )
            loss, grads = action_mse(online, batch.states, batch.actions, y)
            if not np.isfinite(loss) or loss > config.divergence_threshold:
                raise DivergenceError(
                    f"Loss {loss:.3e} exceeded {config.divergence_threshold:.1e} at update {step}",
                    step=step,
                    loss=loss,
                )
            opt.step(online, grads, lr=lr)
            soft_update(target, online, config.tau)
            losses.append(loss)

        if (step + 1) % config.eval_every == 0 or step + 1 == T:
            ratio = rollout_batch(env, policy, validation, eval_horizon).success_ratio()
            record = {
                "step": step + 1,
                "loss": float(np.mean(losses)) if losses else None,
                "success_ratio": ratio,
                "gamma": gamma,
                "epsilon": epsilon,
                "lr": lr,
                "episodes": episodes,
            }
            losses = []
            metrics.append(record)
            if on_metrics is not None:
                on_metrics(record)
            logger.info(
                f"Update {step + 1}/{T}: loss={record['loss']}, success ratio={ratio:.3f}, "
                f"gamma={gamma:.6f}"
            )

    return TrainResult(
        online=online,
        target=target,
        metrics=metrics,
        gamma=gamma,
        pretrain_converged=pretrain_converged,
    )


def ddqn_train(
    env: ReachAvoidEnv,
    config: TrainConfig,
    on_metrics: Optional[Callable[[Dict[str, Any]], None]] = None,
) -> TrainResult:
    """Train a reach-avoid (or, with ``objective="sum"``, sum-of-costs) Q-network.

    Raises:
        DivergenceError: If the batch loss exceeds ``config.divergence_threshold``
    """
    if config.objective == "minimax":
        raise ValueError("Use minimax_ddqn_train for the minimax objective")
    return _train(env, config, on_metrics)


def minimax_ddqn_train(
    env: AttackDefense,
    config: TrainConfig,
    on_metrics: Optional[Callable[[Dict[str, Any]], None]] = None,
) -> TrainResult:
    """Train a joint-action Q-network for the attack-defense game.

    Raises:
        DivergenceError: If the batch loss exceeds ``config.divergence_threshold``
    """
    if not isinstance(env, AttackDefense):
        raise ValueError("minimax_ddqn_train requires the attack-defense environment")
    config = TrainConfig(**{**_fields(config), "objective": "minimax"})
    return _train(env, config, on_metrics)


def _fields(config: TrainConfig) -> Dict[str, Any]:
    return {name: getattr(config, name) for name in config.__dataclass_fields__}
