"""Top-down semantic maps: per-robot projection and the shared fused map.

A map holds (K + 4) float32 channels over an (H, W) grid: one layer per
category followed by obstacle, explored, current-position, and past-positions
layers. The shared global map is the only medium through which robots see each
other's observations; merging is cell-wise max, so repeated fusion is
idempotent and the explored area can only grow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .world import Observation, Pose, RAY_STEP_CELLS

N_EXTRA_CHANNELS = 4


@dataclass
class LocalSemanticMap:
    categories: tuple[str, ...]
    grid: np.ndarray  # (K+4, H, W) float32 in [0, 1]

    @property
    def k(self) -> int:
        return len(self.categories)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape[1], self.grid.shape[2]  # (H, W)

    # channel views -------------------------------------------------------
    def category_layer(self, category: str) -> np.ndarray:
        return self.grid[self.categories.index(category)]

    @property
    def obstacle(self) -> np.ndarray:
        return self.grid[self.k]

    @property
    def explored(self) -> np.ndarray:
        return self.grid[self.k + 1]

    @property
    def current_position(self) -> np.ndarray:
        return self.grid[self.k + 2]

    @property
    def past_positions(self) -> np.ndarray:
        return self.grid[self.k + 3]


@dataclass
class GlobalSemanticMap(LocalSemanticMap):
    trajectories: dict[int, list[tuple[float, float]]] = field(default_factory=dict)
    robot_cells: dict[int, tuple[int, int]] = field(default_factory=dict)

    def snapshot(self) -> "GlobalSemanticMap":
        return GlobalSemanticMap(
            self.categories,
            self.grid.copy(),
            {r: list(t) for r, t in self.trajectories.items()},
            dict(self.robot_cells),
        )

    def integrate(self, robot_id: int, delta: LocalSemanticMap, pose: Pose) -> None:
        """Merge one robot's projection; call in ascending robot order per tick.

        All channels merge by max except current-position, which is rebuilt
        from the latest known cell of every robot (the robot's previous cell
        migrates to past-positions first).
        """
        if delta.grid.shape != self.grid.shape:
            raise ValueError(f"map shape mismatch: {delta.grid.shape} vs {self.grid.shape}")
        k = self.k
        prev = self.robot_cells.get(robot_id)
        if prev is not None:
            self.past_positions[prev[1], prev[0]] = 1.0
        np.maximum(self.grid[: k + 2], delta.grid[: k + 2], out=self.grid[: k + 2])
        np.maximum(self.past_positions, delta.past_positions, out=self.past_positions)
        cx, cy = pose.cell
        self.robot_cells[robot_id] = (cx, cy)
        self.current_position[:] = 0.0
        for (x, y) in self.robot_cells.values():
            self.current_position[y, x] = 1.0
        self.trajectories.setdefault(robot_id, []).append((pose.x, pose.y))


def empty_local(categories: tuple[str, ...], height: int, width: int) -> LocalSemanticMap:
    k = len(categories)
    return LocalSemanticMap(categories, np.zeros((k + N_EXTRA_CHANNELS, height, width), dtype=np.float32))


def empty_global(categories: tuple[str, ...], height: int, width: int) -> GlobalSemanticMap:
    k = len(categories)
    return GlobalSemanticMap(categories, np.zeros((k + N_EXTRA_CHANNELS, height, width), dtype=np.float32))


def project(
    obs: Observation,
    pose: Pose,
    categories: tuple[str, ...],
    height: int,
    width: int,
    cell_size_m: float = 0.05,
) -> LocalSemanticMap:
    """Project one scan into a fresh local map delta.

    Cells traversed by a ray become explored; endpoints hitting walls mark the
    obstacle layer, endpoints hitting objects mark both the obstacle layer and
    the reported category's layer at the detection confidence. Traversed cells
    are the rounded positions of samples every RAY_STEP_CELLS along each ray,
    the same rule the sensor uses to march rays.
    """
    local = empty_local(categories, height, width)
    explored = local.explored
    obstacle = local.obstacle

    rx, ry = pose.cell
    if 0 <= rx < width and 0 <= ry < height:
        explored[ry, rx] = 1.0
        local.current_position[ry, rx] = 1.0

    # all rays at once: sample points up to each ray's own hit distance
    bearings = np.array([r.bearing_deg for r in obs.rays])
    dists = np.array([r.distance_m for r in obs.rays]) / cell_size_m
    theta = np.radians(pose.heading - bearings)
    max_n = int(dists.max() / RAY_STEP_CELLS + 1e-9) if len(dists) else 0
    if max_n > 0:
        ts = np.arange(1, max_n + 1) * RAY_STEP_CELLS
        px = pose.x + np.cos(theta)[:, None] * ts[None, :]
        py = pose.y + np.sin(theta)[:, None] * ts[None, :]
        valid = ts[None, :] <= dists[:, None] + 1e-9
        cx = np.rint(px).astype(np.int64)
        cy = np.rint(py).astype(np.int64)
        valid &= (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
        explored[cy[valid], cx[valid]] = 1.0

    for ray in obs.rays:
        if ray.cell is not None:
            cx, cy = ray.cell
            if 0 <= cx < width and 0 <= cy < height:
                explored[cy, cx] = 1.0
                obstacle[cy, cx] = 1.0
                if ray.kind == "object":
                    layer = local.category_layer(ray.category)
                    layer[cy, cx] = max(layer[cy, cx], ray.confidence)
    return local


def fuse(
    maps: list[LocalSemanticMap],
    offsets: list[tuple[int, int]] | None = None,
) -> GlobalSemanticMap:
    """Cell-wise max merge of aligned maps; offsets translate contributors first.

    The merge forms a join-semilattice: commutative, associative, idempotent,
    with the empty map as identity.
    """
    if not maps:
        raise ValueError("fuse requires at least one map")
    shape = maps[0].grid.shape
    categories = maps[0].categories
    for m in maps[1:]:
        if m.grid.shape != shape or m.categories != categories:
            raise ValueError("fused maps must share dimensions and category set")
    out = empty_global(categories, shape[1], shape[2])
    for i, m in enumerate(maps):
        grid = m.grid
        if offsets is not None and offsets[i] != (0, 0):
            grid = translate(m, offsets[i]).grid
        np.maximum(out.grid, grid, out=out.grid)
        if isinstance(m, GlobalSemanticMap):
            for r, traj in m.trajectories.items():
                out.trajectories.setdefault(r, []).extend(traj)
    return out


def translate(m: LocalSemanticMap, offset: tuple[int, int]) -> LocalSemanticMap:
    """Shift a map's content by (dx, dy) cells, zero-filling vacated cells."""
    dx, dy = offset
    shifted = np.zeros_like(m.grid)
    h, w = m.shape
    src_y = slice(max(0, -dy), min(h, h - dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    shifted[:, dst_y, dst_x] = m.grid[:, src_y, src_x]
    return LocalSemanticMap(m.categories, shifted)


def sample_explored_free(gmap: LocalSemanticMap, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform draw over explored, non-obstacle cells."""
    mask = (gmap.explored > 0) & (gmap.obstacle == 0)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("map has no explored free cells")
    i = int(rng.integers(len(xs)))
    return (int(xs[i]), int(ys[i]))
