"""Utility functions for the reach-avoid toolkit."""

import logging
import zlib
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]

# Named random sub-streams; every component draws from its own.
RNG_STREAMS = ("reset", "exploration", "replay", "init", "pretrain", "validation")


def setup_logging(level: str = "INFO") -> None:
    """Configure logging for the package.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    """
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Derive an independent random generator for a named sub-stream.

    The same ``(seed, name)`` pair always yields the same stream, and streams
    with different names do not share state, so one component can be
    re-seeded without perturbing the others.

    Args:
        seed: Experiment seed
        name: Sub-stream name, e.g. ``"reset"`` or ``"replay"``

    Returns:
        numpy Generator for that stream
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


def rng_streams(seed: int, names: Iterable[str] = RNG_STREAMS) -> Dict[str, np.random.Generator]:
    """Build the full set of named sub-streams for one run."""
    return {name: rng_stream(seed, name) for name in names}


def as_generator(seed: SeedLike) -> np.random.Generator:
    """Return ``seed`` unchanged if it already is a Generator, else seed a new one."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def validate_choice(value: str, options: Iterable[str], field: str) -> str:
    """Validate and normalize a named option.

    Args:
        value: Option name to validate
        options: Accepted names
        field: Name reported in the error message

    Returns:
        Normalized (lower-case, ``_`` replaced by ``-``) option name

    Raises:
        ValueError: If the option is not supported
    """
    normalized = value.lower().replace("_", "-")
    valid = sorted(options)
    if normalized not in valid:
        raise ValueError(f"Unsupported {field}: {value}. Valid options: {', '.join(valid)}")
    return normalized


def parse_float_list(text: str) -> List[float]:
    """Parse ``"0.5,0.9, 0.99"`` into a list of floats."""
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise ValueError("Expected a comma separated list of numbers")
    try:
        return [float(item) for item in items]
    except ValueError as e:
        raise ValueError(f"Invalid number list '{text}': {e}") from e


def parse_slice_spec(text: Optional[str]) -> Dict[int, float]:
    """Parse a slice spec ``"2=0.0,3=0"`` into ``{dimension: coordinate}``.

    An empty or missing spec is the identity slice.
    """
    spec: Dict[int, float] = {}
    if not text:
        return spec
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"Invalid slice entry '{item}', expected DIM=VALUE")
        dim_text, value_text = item.split("=", 1)
        try:
            dim = int(dim_text)
            value = float(value_text)
        except ValueError as e:
            raise ValueError(f"Invalid slice entry '{item}': {e}") from e
        if dim in spec:
            raise ValueError(f"Dimension {dim} fixed twice in slice spec")
        spec[dim] = value
    return spec
