"""Artifact persistence and exports.

Formats:

- ValueGrid: CSV. ``#`` header lines (``key: value``) carry the grid and
  solver diagnostics, followed by the values in C order, one line per run of
  the last dimension, printed with 17 significant digits so that loading
  reproduces every float exactly.
- QTable and network weights: JSON documents with a ``kind`` key.
- Grid slices: CSV of a 2-D slice with 9 significant digits plus a
  ``.contour.csv`` sidecar holding the zero-level polyline(s).
- Metrics: JSON-lines, one record per evaluation.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from reach_avoid_rl.certification import RolloutRecord  # noqa: E402
from reach_avoid_rl.errors import ArtifactError, DimensionError  # noqa: E402
from reach_avoid_rl.network import NetworkParams  # noqa: E402
from reach_avoid_rl.tabular import Grid, QTable, ValueGrid  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ARTIFACT_KINDS = ("valuegrid", "qtable", "network")


def _join(values) -> str:
    return ",".join(repr(v) for v in values)


# =============================================================================
# ValueGrid CSV
# =============================================================================


def save_value_grid(vg: ValueGrid, path: PathLike, env_name: Optional[str] = None) -> Path:
    """Write a ValueGrid as lossless CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = vg.grid
    header = [
        "kind: valuegrid",
        f"env: {env_name or ''}",
        f"lower: {_join(grid.lower)}",
        f"upper: {_join(grid.upper)}",
        f"counts: {_join(grid.counts)}",
        f"periodic: {_join(int(p) for p in grid.periodic)}",
        f"gamma: {vg.gamma!r}",
        f"residual: {vg.residual!r}",
        f"sweeps: {vg.sweeps}",
        f"converged: {int(vg.converged)}",
    ]
    table = vg.values.reshape(-1, grid.counts[-1])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header="\n".join(header), comments="# ")
    logger.debug(f"Wrote value grid to {path}")
    return path


def _read_header(path: Path) -> Dict[str, str]:
    header: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(":")
            header[key.strip()] = value.strip()
    return header


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v)


def load_value_grid(path: PathLike) -> Tuple[ValueGrid, Dict[str, str]]:
    """Read a ValueGrid CSV; returns the grid and its raw header."""
    path = Path(path)
    header = _read_header(path)
    if header.get("kind") != "valuegrid":
        raise ArtifactError(f"{path} is not a value grid CSV")
    try:
        grid = Grid(
            lower=_floats(header["lower"]),
            upper=_floats(header["upper"]),
            counts=tuple(int(v) for v in header["counts"].split(",")),
            periodic=tuple(bool(int(v)) for v in header["periodic"].split(",")),
        )
        values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2).reshape(-1)
        vg = ValueGrid(
            grid=grid,
            values=values,
            gamma=float(header.get("gamma", "0")),
            residual=float(header.get("residual", "0")),
            sweeps=int(header.get("sweeps", "0")),
            converged=bool(int(header.get("converged", "1"))),
        )
    except (KeyError, ValueError, DimensionError) as e:
        raise ArtifactError(f"Malformed value grid {path}: {e}") from e
    return vg, header


# =============================================================================
# JSON artifacts
# =============================================================================


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
    return path


def save_qtable(table: QTable, path: PathLike, env_name: Optional[str] = None) -> Path:
    data = {
        "kind": "qtable",
        "env": env_name,
        "grid": table.grid.to_dict(),
        "gamma": table.gamma,
        "q": table.q.tolist(),
        "visits": table.visits.tolist() if table.visits is not None else None,
    }
    return write_json(data, path)


def save_network(
    params: NetworkParams,
    path: PathLike,
    env_name: Optional[str] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    data = params.to_dict()
    data["env"] = env_name
    if extra:
        data.update(extra)
    return write_json(data, path)


def load_artifact(path: PathLike) -> Tuple[str, Any, Dict[str, Any]]:
    """Load any artifact, detecting its kind from the file content.

    Returns:
        ``(kind, object, metadata)`` where kind is one of ``ARTIFACT_KINDS``

    Raises:
        ArtifactError: If the file is missing or not a recognised artifact
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Artifact not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        head = f.read(1)
    if head == "#":
        vg, header = load_value_grid(path)
        return "valuegrid", vg, {"env": header.get("env") or None}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path} is neither a value grid CSV nor a JSON artifact: {e}") from e
    kind = data.get("kind") if isinstance(data, dict) else None
    bulky = ("weights", "biases", "q", "visits")
    meta = {k: v for k, v in data.items() if k not in bulky} if kind else {}
    try:
        if kind == "qtable":
            visits = data.get("visits")
            table = QTable(
                grid=Grid.from_dict(data["grid"]),
                q=np.asarray(data["q"], dtype=float),
                visits=None if visits is None else np.asarray(visits, dtype=np.int64),
                gamma=float(data.get("gamma", 0.0)),
            )
            return "qtable", table, meta
        if kind == "network":
            return "network", NetworkParams.from_dict(data), meta
    except (KeyError, ValueError, DimensionError) as e:
        raise ArtifactError(f"Malformed {kind} artifact {path}: {e}") from e
    raise ArtifactError(f"Unknown artifact kind in {path}: {kind!r}")


# =============================================================================
# Slices, contours and masks
# =============================================================================


def slice_value_grid(
    vg: ValueGrid, fixed: Dict[int, float]
) -> Tuple[Tuple[int, int], np.ndarray, Dict[int, float]]:
    """2-D slice of ``vg`` with the ``fixed`` dimensions held at their nearest cell.

    Returns:
        ``(free dims, 2-D values, fixed dim -> cell-centre coordinate)``

    Raises:
        DimensionError: If ``fixed`` does not leave exactly two free dimensions
    """
    grid = vg.grid
    bad = [d for d in fixed if not 0 <= d < grid.dim]
    if bad:
        raise DimensionError(f"Slice fixes dimension(s) {bad} outside a {grid.dim}-D grid")
    free = [d for d in range(grid.dim) if d not in fixed]
    if len(free) != 2:
        raise DimensionError(
            f"Slice must leave exactly two free dimensions, got {len(free)} "
            f"for a {grid.dim}-D grid"
        )
    axes = grid.axes()
    index: List[Any] = []
    centres: Dict[int, float] = {}
    for d in range(grid.dim):
        if d in fixed:
            point = np.array(grid.lower, dtype=float)
            point[d] = fixed[d]
            cell = grid.nearest(point[None, :])[0][0]
            i = int(np.unravel_index(cell, grid.shape)[d])
            index.append(i)
            centres[d] = float(axes[d][i])
        else:
            index.append(slice(None))
    values = vg.as_array()[tuple(index)]
    return (free[0], free[1]), values, centres


def zero_contour(x: np.ndarray, y: np.ndarray, values: np.ndarray) -> List[np.ndarray]:
    """Zero-level polylines of ``values[i, j]`` sampled at ``(x[i], y[j])``."""
    if not (values.min() <= 0.0 <= values.max()) or values.min() == values.max():
        return []
    fig, ax = plt.subplots()
    try:
        cs = ax.contour(x, y, values.T, levels=[0.0])
        segments = [np.asarray(seg) for seg in cs.allsegs[0] if len(seg)]
    finally:
        plt.close(fig)
    return segments


def export_slice(vg: ValueGrid, fixed: Dict[int, float], path: PathLike) -> Tuple[Path, Path]:
    """Write a 2-D slice as CSV (9 significant digits) plus a zero-level contour sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    (i, j), values, centres = slice_value_grid(vg, fixed)
    grid = vg.grid
    header = [
        "kind: slice",
        f"dims: {i},{j}",
        f"lower: {grid.lower[i]!r},{grid.lower[j]!r}",
        f"upper: {grid.upper[i]!r},{grid.upper[j]!r}",
        f"counts: {grid.counts[i]},{grid.counts[j]}",
        "fixed: " + ",".join(f"{d}={c!r}" for d, c in sorted(centres.items())),
    ]
    np.savetxt(path, values, fmt="%.9g", delimiter=",", header="\n".join(header), comments="# ")

    axes = grid.axes()
    contour_path = path.with_suffix(".contour.csv")
    rows = []
    for k, seg in enumerate(zero_contour(axes[i], axes[j], values)):
        rows.extend((k, px, py) for px, py in seg)
    table = np.array(rows, dtype=float).reshape(-1, 3)
    np.savetxt(
        contour_path, table, fmt=["%d", "%.9g", "%.9g"], delimiter=",",
        header="segment,x,y", comments="",
    )
    logger.info(f"Exported slice dims ({i}, {j}) to {path}")
    return path, contour_path


def load_slice(path: PathLike) -> Tuple[Dict[str, str], np.ndarray]:
    path = Path(path)
    header = _read_header(path)
    if header.get("kind") != "slice":
        raise ArtifactError(f"{path} is not a slice CSV")
    return header, np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def export_mask_png(mask: np.ndarray, path: PathLike) -> Path:
    """Save a 2-D mask (first index = x) as a black/white PNG with y pointing up."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionError(f"Mask image needs a 2-D mask, got shape {mask.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.flipud(mask.T).astype(np.uint8) * 255
    Image.fromarray(pixels).save(path)
    return path


def write_trajectory_csv(record: RolloutRecord, path: PathLike) -> Path:
    """One row per visited state: step, state coordinates, l, g and the action taken next."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = record.states.shape[1]
    actions = np.append(record.actions, -1)
    table = np.column_stack(
        [np.arange(len(record.l)), record.states, record.l, record.g, actions]
    )
    columns = ["step"] + [f"s{k}" for k in range(n)] + ["l", "g", "action"]
    fmt = ["%d"] + ["%.9g"] * (n + 2) + ["%d"]
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=",".join(columns), comments="")
    return path


# =============================================================================
# Metrics stream
# =============================================================================


class MetricsWriter:
    """JSON-lines writer, flushed after every record.

    An existing file is truncated unless ``append`` is set.
    """

    def __init__(self, path: PathLike, append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "a" if append else "w", encoding="utf-8")

    def write(self, record: Dict[str, Any]) -> None:
        self._file.write(json.dumps(record) + "\n")
        self._file.flush()

    __call__ = write

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metrics(path: PathLike) -> List[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
