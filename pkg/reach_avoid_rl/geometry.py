"""Planar margin geometry: boxes and polygons.

All functions take points as an ``(N, 2)`` array and return one value per
point. Signed quantities are negative inside the set, zero on its boundary
and positive outside.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned box given by its center ``p`` and dimensions ``L``."""

    center: Tuple[float, float]
    size: Tuple[float, float]

    def __post_init__(self) -> None:
        if len(self.center) != 2 or len(self.size) != 2:
            raise ValueError("BoxSpec needs a 2-D center and size")
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise ValueError(f"Box dimensions must be positive, got {self.size}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "size", (float(self.size[0]), float(self.size[1])))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.size) / 2.0

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.size) / 2.0

    @classmethod
    def from_dict(cls, data: dict) -> "BoxSpec":
        return cls(center=tuple(data["center"]), size=tuple(data["size"]))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "size": list(self.size)}

    def margin(self, points: np.ndarray) -> np.ndarray:
        """Max-of-coordinates margin, ``max_i |x_i - p_i| - L_i / 2``.

        Non-positive exactly on the closed box; 1-Lipschitz per coordinate.
        """
        points = np.atleast_2d(points)
        delta = np.abs(points - np.asarray(self.center))
        return np.max(delta - np.asarray(self.size) / 2.0, axis=1)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Exact signed Euclidean distance to the box boundary."""
        points = np.atleast_2d(points)
        q = np.abs(points - np.asarray(self.center)) - np.asarray(self.size) / 2.0
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)


def segment_distances(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Distance from every point to the closed polyline through ``vertices``.

    The polyline is closed (last vertex joins the first).
    """
    points = np.atleast_2d(points)
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    ab = b - a  # (M, 2)
    ap = points[:, None, :] - a[None, :, :]  # (N, M, 2)
    denom = np.sum(ab * ab, axis=1)
    t = np.clip(np.sum(ap * ab[None], axis=2) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.min(np.linalg.norm(points[:, None, :] - closest, axis=2), axis=1)


def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd rule inside test for a simple polygon."""
    points = np.atleast_2d(points)
    x = points[:, 0:1]
    y = points[:, 1:2]
    x1, y1 = vertices[:, 0], vertices[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    straddles = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    crossings = straddles & (x < x_cross)
    return np.count_nonzero(crossings, axis=1) % 2 == 1


def polygon_signed_distance(points: np.ndarray, vertices: Sequence[Sequence[float]]) -> np.ndarray:
    """Minimum signed L2 distance to a polygon boundary, negative inside."""
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
        raise ValueError("A polygon needs at least three 2-D vertices")
    distance = segment_distances(points, verts)
    inside = points_in_polygon(points, verts)
    return np.where(inside, -distance, distance)
