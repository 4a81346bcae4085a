"""Experiment runners behind the command line verbs.

Each runner takes a validated ``ExperimentConfig``, writes its artifacts
under the run directory and returns a summary dict of what it produced.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from reach_avoid_rl.artifacts import (
    MetricsWriter,
    export_mask_png,
    export_slice,
    load_artifact,
    save_network,
    save_qtable,
    save_value_grid,
    slice_value_grid,
    write_json,
    write_trajectory_csv,
)
from reach_avoid_rl.certification import (
    REFERENCE_GAMMA,
    confusion_matrix,
    exhaustive_validate,
    nesting_report,
    rollout_membership_value,
    rollout_value,
    shield_monte_carlo,
)
from reach_avoid_rl.config import RESOLVED_CONFIG_NAME, ExperimentConfig, save_resolved_config
from reach_avoid_rl.ddqn import ddqn_train, minimax_ddqn_train
from reach_avoid_rl.envs import AttackDefense, ReachAvoidEnv
from reach_avoid_rl.errors import ArtifactError, ConfigError
from reach_avoid_rl.network import NetworkParams
from reach_avoid_rl.policies import MinimaxPolicy, RandomPolicy, greedy_policy, value_function
from reach_avoid_rl.tabular import (
    LEARNING_RATE_SCHEDULE,
    Grid,
    QTable,
    ValueGrid,
    build_grid,
    extract_ra_mask,
    gamma_ladder,
    tabular_q_learning,
    value_iteration,
)
from reach_avoid_rl.utils import parse_slice_spec, rng_stream

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def experiment_grid(config: ExperimentConfig, env: ReachAvoidEnv) -> Grid:
    """Grid from the config, defaulting bounds to the environment's domain."""
    if config.grid.counts is None:
        raise ConfigError(f"No grid configured for {config.environment}", field="grid.counts")
    lower = config.grid.lower or tuple(env.domain[:, 0])
    upper = config.grid.upper or tuple(env.domain[:, 1])
    bounds = list(zip(lower, upper))
    try:
        return build_grid(bounds, config.grid.counts, env.periodic)
    except ValueError as e:
        raise ConfigError(str(e), field="grid") from e


# =============================================================================
# train
# =============================================================================


def train(config: ExperimentConfig) -> Dict[str, Any]:
    """Run the configured solver and write its artifacts.

    Raises:
        DivergenceError: From the DDQN solvers; metrics written so far are kept
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_resolved_config(config, out / RESOLVED_CONFIG_NAME)
    env = config.make_env()
    solver = config.solver
    summary: Dict[str, Any] = {"solver": solver.name, "environment": config.environment}
    logger.info(f"Training {solver.name} on {config.environment}, output in {out}")

    if solver.name == "value-iteration":
        grid = experiment_grid(config, env)
        vg = value_iteration(
            env,
            grid,
            solver.gamma,
            tol=solver.tol,
            max_sweeps=solver.max_sweeps,
            interpolate=solver.interpolate,
            backup=solver.backup,
        )
        summary["artifact"] = str(save_value_grid(vg, out / "values.csv", config.environment))
        with MetricsWriter(out / "metrics.jsonl") as writer:
            for sweep, residual in enumerate(vg.residuals, start=1):
                writer.write({"sweep": sweep, "residual": residual})
        summary.update({"converged": vg.converged, "sweeps": vg.sweeps, "residual": vg.residual})

    elif solver.name == "tabular-q":
        grid = experiment_grid(config, env)
        table = tabular_q_learning(
            env,
            grid,
            solver.episodes,
            seed=config.seed,
            lr_schedule=LEARNING_RATE_SCHEDULE if solver.use_lr_schedule else None,
            lr_exponent=solver.lr_exponent,
            min_visits=solver.min_visits,
        )
        summary["artifact"] = str(save_qtable(table, out / "qtable.json", config.environment))
        under = int(table.under_visited(solver.min_visits).sum())
        with MetricsWriter(out / "metrics.jsonl") as writer:
            writer.write(
                {
                    "episodes": solver.episodes,
                    "gamma": table.gamma,
                    "under_visited_cells": under,
                    "total_visits": int(table.visits.sum()),
                }
            )
        summary["under_visited_cells"] = under

    else:
        with MetricsWriter(out / "metrics.jsonl") as writer:
            if solver.name == "minimax-ddqn":
                result = minimax_ddqn_train(env, config.training, on_metrics=writer)  # type: ignore[arg-type]
            else:
                result = ddqn_train(env, config.training, on_metrics=writer)
        extra = {"objective": config.training.objective, "gamma": result.gamma}
        path = save_network(result.online, out / "network.json", config.environment, extra)
        summary["artifact"] = str(path)
        if result.metrics:
            summary["final_success_ratio"] = result.metrics[-1]["success_ratio"]

    write_json(summary, out / "summary.json")
    return summary


# =============================================================================
# evaluate
# =============================================================================


def load_compatible(path: PathLike, env: ReachAvoidEnv, env_name: str):
    """Load an artifact and check it fits ``env``.

    Raises:
        ArtifactError: On unknown formats or environment/shape mismatch
    """
    kind, obj, meta = load_artifact(path)
    stored = meta.get("env")
    if stored and stored != env_name:
        raise ArtifactError(f"Artifact was produced for {stored}, config selects {env_name}")
    if kind in ("valuegrid", "qtable"):
        if obj.grid.dim != env.dim:
            raise ArtifactError(f"Artifact grid is {obj.grid.dim}-D, {env_name} is {env.dim}-D")
        if kind == "qtable" and obj.n_actions != env.n_actions:
            raise ArtifactError(
                f"QTable has {obj.n_actions} actions, {env_name} has {env.n_actions}"
            )
    elif kind == "network":
        if obj.n_inputs != env.dim or obj.n_outputs != env.n_actions:
            raise ArtifactError(
                f"Network maps {obj.n_inputs} -> {obj.n_outputs}, {env_name} needs "
                f"{env.dim} -> {env.n_actions}"
            )
    return kind, obj, meta


def probe_states(config: ExperimentConfig, env: ReachAvoidEnv) -> np.ndarray:
    cert = config.certification
    if cert.probe_grid is not None:
        if len(cert.probe_grid) != env.dim:
            raise ConfigError(
                f"probe_grid needs {env.dim} counts", field="certification.probe_grid"
            )
        return build_grid(env.domain.tolist(), cert.probe_grid, env.periodic).centers()
    return env.sample_states(cert.probe_samples, rng_stream(config.seed, "validation"))


def _as_value_grid(kind: str, obj: Any) -> Optional[ValueGrid]:
    if kind == "valuegrid":
        return obj
    if kind == "qtable":
        return obj.to_value_grid()
    return None


def evaluate(
    artifact: PathLike,
    config: ExperimentConfig,
    ladder: Optional[Sequence[float]] = None,
    out: Optional[PathLike] = None,
) -> Dict[str, Any]:
    """Certification report for a trained artifact.

    Writes ``report.json`` plus, where applicable, the RA mask image and the
    exhaustive-validation trajectory into ``out`` (default
    ``<output_dir>/evaluation``).
    """
    env = config.make_env()
    kind, obj, _ = load_compatible(artifact, env, config.environment)
    cert = config.certification
    out_dir = Path(out) if out else Path(config.output_dir) / "evaluation"
    out_dir.mkdir(parents=True, exist_ok=True)
    horizon = cert.horizon or env.horizon

    policy = greedy_policy(env, obj, interpolate=config.solver.interpolate)
    values = value_function(obj, interpolate=config.solver.interpolate, env=env)
    probes = probe_states(config, env)
    report: Dict[str, Any] = {
        "artifact": str(artifact),
        "kind": kind,
        "environment": config.environment,
        "probes": int(len(probes)),
        "horizon": horizon,
    }
    report["confusion"] = confusion_matrix(env, values, policy, probes, horizon).to_dict()
    if cert.membership:
        membership = rollout_membership_value(env, policy, horizon)
        report["membership_confusion"] = confusion_matrix(
            env, membership, policy, probes, horizon
        ).to_dict()

    vg = _as_value_grid(kind, obj)
    if vg is not None:
        mask_path = _export_mask(vg, cert.slice, out_dir / "ra_mask.png")
        if mask_path is not None:
            report["ra_mask"] = str(mask_path)
        report["ra_cells"] = int(extract_ra_mask(vg).sum())

    if ladder is not None:
        if vg is None:
            raise ArtifactError("A gamma ladder needs a grid artifact (value grid or Q-table)")
        gammas = sorted(set(ladder or cert.gamma_ladder))
        grids = gamma_ladder(
            env,
            vg.grid,
            sorted(set(gammas) | {REFERENCE_GAMMA}),
            tol=config.solver.tol,
            max_sweeps=config.solver.max_sweeps,
            interpolate=config.solver.interpolate,
        )
        rungs = [g for g in grids if g.gamma in gammas]
        report["nesting"] = nesting_report(rungs, reference=grids[-1])

    if cert.shield_episodes > 0:
        candidate = RandomPolicy(env.n_actions, rng_stream(config.seed, "exploration"))
        shield = shield_monte_carlo(
            env,
            candidate,
            policy,
            cert.shield_episodes,
            seed=rng_stream(config.seed, "reset"),
            horizon=horizon,
        )
        report["shield"] = shield.to_dict()

    if cert.exhaustive_states > 0:
        report["exhaustive"] = _exhaustive_report(config, env, kind, obj, out_dir)

    path = write_json(report, out_dir / "report.json")
    logger.info(f"Evaluation report written to {path}")
    report["report"] = str(path)
    return report


def _export_mask(vg: ValueGrid, slice_text: Optional[str], path: Path) -> Optional[Path]:
    if vg.grid.dim == 2:
        return export_mask_png(extract_ra_mask(vg).reshape(vg.grid.shape), path)
    if slice_text:
        _, values, _ = slice_value_grid(vg, parse_slice_spec(slice_text))
        return export_mask_png(values <= 0.0, path)
    return None


def _attacker_policy(env: ReachAvoidEnv, kind: str, obj: Any) -> MinimaxPolicy:
    if not isinstance(env, AttackDefense) or kind != "network":
        raise ArtifactError("Exhaustive validation needs an attack-defense network artifact")
    return MinimaxPolicy(obj, env, role="attacker")


def _exhaustive_report(
    config: ExperimentConfig, env: ReachAvoidEnv, kind: str, obj: Any, out_dir: Path
) -> Dict[str, Any]:
    cert = config.certification
    attacker = _attacker_policy(env, kind, obj)
    starts = env.sample_states(cert.exhaustive_states, rng_stream(config.seed, "validation"))
    results = []
    for i, s in enumerate(starts):
        result = exhaustive_validate(
            env,  # type: ignore[arg-type]
            attacker,
            s,
            intervals=cert.intervals,
            steps_per_interval=cert.steps_per_interval,
            rounds=cert.rounds,
        )
        write_trajectory_csv(result.worst, out_dir / f"exhaustive_{i:03d}.csv")
        results.append(result.to_dict())
    payoffs = [r["payoff"] for r in results]
    return {
        "states": len(results),
        "mean_worst_payoff": float(np.mean(payoffs)),
        "attacker_wins": int(sum(r["outcome"] == "success" for r in results)),
        "records": results,
    }


# =============================================================================
# export-grid, rollout, validate-exhaustive
# =============================================================================


def network_value_grid(params: NetworkParams, env: ReachAvoidEnv, grid: Grid) -> ValueGrid:
    """Evaluate a Q-network's state values at every cell centre."""
    values = value_function(params, env=env)(grid.centers())
    return ValueGrid(grid=grid, values=np.asarray(values))


def export_grid(
    artifact: PathLike,
    slice_text: Optional[str],
    out: PathLike,
    config: Optional[ExperimentConfig] = None,
) -> Dict[str, Any]:
    """Export a 2-D slice (and its zero-level contour) of a grid or network artifact."""
    kind, obj, _ = load_artifact(artifact)
    vg = _as_value_grid(kind, obj)
    if vg is None:
        if config is None:
            raise ArtifactError("Exporting a network artifact needs --config for the grid")
        env = config.make_env()
        kind, obj, _ = load_compatible(artifact, env, config.environment)
        vg = network_value_grid(obj, env, experiment_grid(config, env))
    fixed = parse_slice_spec(slice_text)
    csv_path, contour_path = export_slice(vg, fixed, out)
    return {"slice": str(csv_path), "contour": str(contour_path)}


def parse_state(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ValueError(f"Invalid state '{text}': {e}") from e


def rollout(
    artifact: PathLike,
    config: ExperimentConfig,
    state: Sequence[float],
    out: Optional[PathLike] = None,
) -> Dict[str, Any]:
    """Roll the artifact's greedy policy out from ``state`` and save the trajectory."""
    env = config.make_env()
    kind, obj, _ = load_compatible(artifact, env, config.environment)
    policy = greedy_policy(env, obj, interpolate=config.solver.interpolate)
    record = rollout_value(env, policy, state, config.certification.horizon or env.horizon)
    out_path = Path(out) if out else Path(config.output_dir) / "rollout.csv"
    write_trajectory_csv(record, out_path)
    summary = record.to_dict()
    summary["trajectory"] = str(out_path)
    return summary


def validate_exhaustive(
    artifact: PathLike,
    config: ExperimentConfig,
    state: Sequence[float],
    out: Optional[PathLike] = None,
) -> Dict[str, Any]:
    """Exhaustive defender enumeration from one state of the attack-defense game."""
    env = config.make_env()
    kind, obj, _ = load_compatible(artifact, env, config.environment)
    attacker = _attacker_policy(env, kind, obj)
    cert = config.certification
    result = exhaustive_validate(
        env,  # type: ignore[arg-type]
        attacker,
        state,
        intervals=cert.intervals,
        steps_per_interval=cert.steps_per_interval,
        rounds=cert.rounds,
    )
    out_dir = Path(out) if out else Path(config.output_dir) / "exhaustive"
    trajectory = write_trajectory_csv(result.worst, out_dir / "worst.csv")
    summary = result.to_dict()
    summary["trajectory"] = str(trajectory)
    write_json(summary, out_dir / "report.json")
    return summary
