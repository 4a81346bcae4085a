"""Shared fixtures for the reach-avoid test suite."""

from pathlib import Path

import pytest
import yaml

from reach_avoid_rl.envs import make_environment
from reach_avoid_rl.tabular import grid_for_env

# Unit-square-ish particle world whose grid pitch equals one step in x and y,
# so every snapped move advances exactly one cell and episodes last at most
# ten steps.
TOY_PARTICLE = {
    "boundary": {"center": [0.0, 0.5], "size": [2.0, 1.0]},
    "target": {"center": [0.0, 0.85], "size": [0.4, 0.3]},
    "obstacles": [{"center": [0.0, 0.45], "size": [0.6, 0.1]}],
    "horizon": 30,
}
TOY_COUNTS = (20, 10)


@pytest.fixture
def toy_env():
    return make_environment("particle", TOY_PARTICLE)


@pytest.fixture
def toy_grid(toy_env):
    return grid_for_env(toy_env, TOY_COUNTS)


@pytest.fixture
def particle():
    return make_environment("particle")


@pytest.fixture
def dubins():
    return make_environment("dubins-high")


@pytest.fixture
def game():
    return make_environment("attack-defense")


@pytest.fixture
def write_config(tmp_path):
    """Write an experiment document to ``tmp_path`` and return its path."""

    def _write(data, name="experiment.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
        return path

    return _write
