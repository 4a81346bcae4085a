"""Command Line Interface for the reach-avoid toolkit."""

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from reach_avoid_rl.config import ExperimentConfig, load_config
from reach_avoid_rl.errors import (
    ArtifactError,
    ConfigError,
    DimensionError,
    DivergenceError,
    ReachAvoidError,
)
from reach_avoid_rl.experiment import (
    evaluate,
    export_grid,
    parse_state,
    rollout,
    train,
    validate_exhaustive,
)
from reach_avoid_rl.utils import parse_float_list, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_ARTIFACT = 4


def _load(args: argparse.Namespace, out_is_run_dir: bool = False) -> ExperimentConfig:
    output_dir = args.out if out_is_run_dir else None
    return load_config(args.config, output_dir=output_dir, seed=args.seed)


def _print_summary(summary: Dict[str, Any]) -> None:
    print(json.dumps(summary, indent=2, default=str))


def cmd_train(args: argparse.Namespace) -> int:
    """Run the configured solver; ``--out`` names the run directory."""
    config = _load(args, out_is_run_dir=True)
    try:
        summary = train(config)
    except DivergenceError as e:
        print(f"Diverged: {e.message}", file=sys.stderr)
        print(f"Metrics so far are in {config.output_dir}/metrics.jsonl", file=sys.stderr)
        return EXIT_DIVERGENCE
    _print_summary(summary)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load(args)
    ladder: Optional[List[float]] = None
    if args.gamma_ladder is not None:
        try:
            ladder = parse_float_list(args.gamma_ladder) if args.gamma_ladder else []
        except ValueError as e:
            raise ConfigError(str(e), field="--gamma-ladder") from e
        if any(not 0.0 <= g < 1.0 for g in ladder):
            raise ConfigError("Discount factors must lie in [0, 1)", field="--gamma-ladder")
    report = evaluate(args.artifact, config, ladder=ladder, out=args.out)
    summary = {k: report[k] for k in ("confusion", "membership_confusion", "report") if k in report}
    if "nesting" in report:
        summary["nested"] = report["nesting"]["all_nested"]
    _print_summary(summary)
    return EXIT_OK


def cmd_export_grid(args: argparse.Namespace) -> int:
    if not args.out:
        print("Error: export-grid needs --out for the slice CSV", file=sys.stderr)
        return EXIT_CONFIG
    config = _load(args) if args.config else None
    try:
        summary = export_grid(args.artifact, args.slice, args.out, config=config)
    except ValueError as e:
        if isinstance(e, ReachAvoidError):
            raise
        raise ConfigError(str(e), field="--slice") from e
    _print_summary(summary)
    return EXIT_OK


def _state(args: argparse.Namespace):
    try:
        return parse_state(args.state)
    except ValueError as e:
        raise ConfigError(str(e), field="--state") from e


def cmd_rollout(args: argparse.Namespace) -> int:
    config = _load(args)
    _print_summary(rollout(args.artifact, config, _state(args), out=args.out))
    return EXIT_OK


def cmd_validate_exhaustive(args: argparse.Namespace) -> int:
    config = _load(args)
    summary = validate_exhaustive(args.artifact, config, _state(args), out=args.out)
    _print_summary(summary)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "export-grid": cmd_export_grid,
    "rollout": cmd_rollout,
    "validate-exhaustive": cmd_validate_exhaustive,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reach-avoid",
        description="Reach-avoid RL - discounted reach-avoid solvers and rollout certification",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Value iteration on the point particle
  reach-avoid train --config configs/particle_vi.yaml

  # Same experiment with another seed and run directory
  reach-avoid train --config configs/particle_ddqn.yaml --seed 3 --out runs/p3

  # Confusion report plus a discount ladder nesting check
  reach-avoid evaluate runs/p/values.csv --config configs/particle_vi.yaml --gamma-ladder

  # Slice a Dubins value grid at heading 0
  reach-avoid export-grid runs/d/values.csv --slice 2=0 --out slice.csv

  # Closed-loop trajectory from one state
  reach-avoid rollout runs/p/network.json --config configs/particle_ddqn.yaml --state 0,2

  # Exhaustive defender enumeration
  reach-avoid validate-exhaustive runs/ad/network.json --config configs/attack_defense.yaml \\
      --state 0.8,0,3.14,0,0,0
        """,
    )
    parser.add_argument(
        "command",
        type=str,
        choices=list(COMMANDS),
        help="Action to run",
    )

    parser.add_argument(
        "artifact",
        type=str,
        nargs="?",
        help="Artifact file (value grid CSV, Q-table or network JSON)",
    )

    parser.add_argument(
        "--config",
        "-c",
        type=str,
        help="Experiment YAML file",
    )

    parser.add_argument(
        "--seed",
        type=int,
        help="Override the config's seed",
    )

    parser.add_argument(
        "--out",
        "-o",
        type=str,
        help="Run directory (train), report directory or output file",
    )

    parser.add_argument(
        "--gamma-ladder",
        type=str,
        nargs="?",
        const="",
        help="Discount ladder for the nesting report, e.g. 0.5,0.9,0.99 "
        "(no value: the config's ladder)",
    )

    parser.add_argument(
        "--slice",
        type=str,
        help="Fixed coordinates as DIM=VALUE pairs, e.g. 2=0,3=0",
    )

    parser.add_argument(
        "--state",
        type=str,
        help="Comma-separated start state for rollout and validate-exhaustive",
    )

    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Enable verbose logging",
    )
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and run one command, returning its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.verbose else "INFO")

    if args.command != "export-grid" and not args.config:
        parser.error(f"{args.command} requires --config")
    if args.command != "train" and not args.artifact:
        parser.error(f"{args.command} requires an artifact path")
    if args.command in ("rollout", "validate-exhaustive") and not args.state:
        parser.error(f"{args.command} requires --state")

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"Config Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"Diverged: {e.message}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ArtifactError, DimensionError) as e:
        print(f"Artifact Error: {e.message}", file=sys.stderr)
        return EXIT_ARTIFACT
    except ReachAvoidError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    """Main entry point for the CLI."""
    sys.exit(run())


if __name__ == "__main__":
    main()
