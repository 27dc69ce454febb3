"""Ground-truth grid world: scenes, robot kinematics, and ray-cast semantic sensing.

Conventions used throughout the package:

* arrays are indexed ``[y, x]``; public coordinates are ``(x, y)`` pairs
* poses live in continuous cell coordinates, headings in degrees ``[0, 360)``
  measured counter-clockwise with 0 along +x
* ray bearings are relative to the heading and positive to the robot's right,
  so a ray at bearing -30 points to the robot's left
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .categories import DEFAULT_CATEGORIES
from .config import SceneGenParams, SensorParams, WorldParams

# Sampling resolution (cells) for ray marching and motion sweeps. Fine enough
# that consecutive samples can never skip an axis-aligned wall cell.
RAY_STEP_CELLS = 0.35
SWEEP_STEP_CELLS = 0.25


class SceneFormatError(ValueError):
    """Scene file does not parse as the documented JSON format."""


class SceneValidationError(ValueError):
    """Scene parsed but violates an invariant (e.g. object on a wall)."""


class InfeasibleSceneError(ValueError):
    """Generation parameters cannot produce a valid scene."""


class Action(Enum):
    MOVE_FORWARD = "move_forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    LOOK_UP = "look_up"
    LOOK_DOWN = "look_down"
    STOP = "stop"


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float  # degrees in [0, 360)

    def __post_init__(self):
        object.__setattr__(self, "heading", self.heading % 360.0)

    @property
    def cell(self) -> tuple[int, int]:
        return (int(round(self.x)), int(round(self.y)))


@dataclass(frozen=True)
class SceneObject:
    instance_id: int
    category: str
    cells: tuple[tuple[int, int], ...]


@dataclass
class SceneGrid:
    width: int
    height: int
    cell_size_m: float
    walls: np.ndarray  # bool (height, width)
    objects: tuple[SceneObject, ...]
    categories: tuple[str, ...] = DEFAULT_CATEGORIES
    _object_index: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def object_index(self) -> np.ndarray:
        """Per-cell object lookup: index into `objects`, -1 where empty."""
        if self._object_index is None:
            idx = np.full((self.height, self.width), -1, dtype=np.int32)
            for i, obj in enumerate(self.objects):
                for (x, y) in obj.cells:
                    idx[y, x] = i
            self._object_index = idx
        return self._object_index

    def in_bounds(self, x: float, y: float) -> bool:
        return 0 <= x <= self.width - 1 and 0 <= y <= self.height - 1

    def goal_cells(self, category: str) -> list[tuple[int, int]]:
        cells = [c for obj in self.objects if obj.category == category for c in obj.cells]
        if not cells:
            raise ValueError(f"category {category!r} not present in scene")
        return cells

    def free_cells(self) -> np.ndarray:
        """(n, 2) array of (x, y) non-wall cells in row-major order."""
        ys, xs = np.nonzero(~self.walls)
        return np.stack([xs, ys], axis=1)


class Ray(NamedTuple):
    bearing_deg: float
    distance_m: float
    kind: str  # "wall" | "object" | "max_range"
    instance_id: Optional[int]
    category: Optional[str]   # reported (possibly misclassified) category
    confidence: Optional[float]
    cell: Optional[tuple[int, int]]


class Detection(NamedTuple):
    category: str
    confidence: float
    instance_id: int
    cell: tuple[int, int]
    distance_m: float
    bearing_deg: float


@dataclass(frozen=True)
class Observation:
    rays: tuple[Ray, ...]
    pose: Pose
    detections: tuple[Detection, ...]


class StepResult(NamedTuple):
    pose: Pose
    collided: bool


# ---------------------------------------------------------------------------
# Scene file I/O
# ---------------------------------------------------------------------------

_SCENE_FIELDS = {"width", "height", "cell_size_m", "walls", "objects"}
_OBJECT_FIELDS = {"id", "category", "cells"}


def _check_cell(entry, what: str, width: int, height: int) -> tuple[int, int]:
    if (
        not isinstance(entry, (list, tuple))
        or len(entry) != 2
        or not all(isinstance(v, int) for v in entry)
    ):
        raise SceneFormatError(f"{what}: expected [x, y] integer pair, got {entry!r}")
    x, y = entry
    if not (0 <= x < width and 0 <= y < height):
        raise SceneFormatError(f"{what}: cell ({x}, {y}) outside {width}x{height} grid")
    return (x, y)


def load_scene(path: str, categories: tuple[str, ...] = DEFAULT_CATEGORIES) -> SceneGrid:
    """Load and validate a scene file (UTF-8 JSON, documented in the README)."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise SceneFormatError(f"{path}: top level must be an object")
    unknown = set(raw) - _SCENE_FIELDS
    if unknown:
        raise SceneFormatError(f"{path}: unknown field(s) {sorted(unknown)}")
    missing = _SCENE_FIELDS - set(raw)
    if missing:
        raise SceneFormatError(f"{path}: missing field(s) {sorted(missing)}")

    width, height = raw["width"], raw["height"]
    if not (isinstance(width, int) and isinstance(height, int) and width > 0 and height > 0):
        raise SceneFormatError(f"{path}: width/height must be positive integers")
    cell_size = raw["cell_size_m"]
    if not isinstance(cell_size, (int, float)) or cell_size <= 0:
        raise SceneFormatError(f"{path}: cell_size_m must be positive")

    walls = np.zeros((height, width), dtype=bool)
    for i, entry in enumerate(raw["walls"]):
        x, y = _check_cell(entry, f"walls[{i}]", width, height)
        walls[y, x] = True

    objects = []
    for i, entry in enumerate(raw["objects"]):
        if not isinstance(entry, dict):
            raise SceneFormatError(f"objects[{i}]: expected an object")
        unknown = set(entry) - _OBJECT_FIELDS
        if unknown:
            raise SceneFormatError(f"objects[{i}]: unknown field(s) {sorted(unknown)}")
        missing = _OBJECT_FIELDS - set(entry)
        if missing:
            raise SceneFormatError(f"objects[{i}]: missing field(s) {sorted(missing)}")
        if entry["category"] not in categories:
            raise SceneValidationError(
                f"objects[{i}] (id {entry['id']}): category {entry['category']!r} "
                f"not in the registered set"
            )
        cells = tuple(
            _check_cell(c, f"objects[{i}].cells[{j}]", width, height)
            for j, c in enumerate(entry["cells"])
        )
        if not cells:
            raise SceneFormatError(f"objects[{i}]: empty footprint")
        objects.append(SceneObject(int(entry["id"]), entry["category"], cells))

    scene = SceneGrid(width, height, float(cell_size), walls, tuple(objects), categories)
    validate_scene(scene)
    return scene


def validate_scene(scene: SceneGrid) -> None:
    for obj in scene.objects:
        for (x, y) in obj.cells:
            if scene.walls[y, x]:
                raise SceneValidationError(
                    f"object id {obj.instance_id} ({obj.category}) occupies wall cell ({x}, {y})"
                )


def save_scene(scene: SceneGrid, path: str) -> None:
    """Write a scene in canonical form (sorted cells) so reloads are byte-stable."""
    ys, xs = np.nonzero(scene.walls)
    walls = sorted([[int(x), int(y)] for x, y in zip(xs, ys)])
    objects = [
        {
            "id": obj.instance_id,
            "category": obj.category,
            "cells": sorted([list(c) for c in obj.cells]),
        }
        for obj in sorted(scene.objects, key=lambda o: o.instance_id)
    ]
    doc = {
        "width": scene.width,
        "height": scene.height,
        "cell_size_m": scene.cell_size_m,
        "walls": walls,
        "objects": objects,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


# ---------------------------------------------------------------------------
# Procedural scenes
# ---------------------------------------------------------------------------


def generate_scene(seed: int, params: SceneGenParams) -> SceneGrid:
    """Deterministic multi-room scene with connected free space.

    Rooms come from recursive splits of the interior with door gaps in each
    dividing wall, so connectivity holds by construction (and is verified).
    Every category in `params.goal_categories` gets at least one instance.
    """
    if params.width < 8 or params.height < 8:
        raise InfeasibleSceneError("scene too small (need at least 8x8)")
    if params.rooms < 1:
        raise InfeasibleSceneError("room count must be >= 1")

    rng = np.random.default_rng(seed)
    categories = params.categories or DEFAULT_CATEGORIES
    for cat in params.goal_categories:
        if cat not in categories:
            raise InfeasibleSceneError(f"goal category {cat!r} not in the category pool")

    walls = np.zeros((params.height, params.width), dtype=bool)
    walls[0, :] = walls[-1, :] = True
    walls[:, 0] = walls[:, -1] = True

    # Interior rectangles as (x0, y0, x1, y1), inclusive.
    rects = [(1, 1, params.width - 2, params.height - 2)]
    min_side = max(3, int(math.isqrt(params.min_room_cells)))
    guard = 0
    while len(rects) < params.rooms:
        guard += 1
        if guard > 200:
            raise InfeasibleSceneError(
                f"cannot split {params.width}x{params.height} interior into {params.rooms} rooms"
            )
        rects.sort(key=lambda r: (r[2] - r[0] + 1) * (r[3] - r[1] + 1), reverse=True)
        x0, y0, x1, y1 = rects[0]
        w, h = x1 - x0 + 1, y1 - y0 + 1
        vertical = w >= h  # split across the longer axis
        span = w if vertical else h
        if span < 2 * min_side + 1:
            raise InfeasibleSceneError(
                f"cannot split {params.width}x{params.height} interior into {params.rooms} rooms"
            )
        lo = (x0 if vertical else y0) + min_side
        hi = (x1 if vertical else y1) - min_side
        cut = int(rng.integers(lo, hi + 1))
        door_w = min(params.door_width_cells, (h if vertical else w))
        if vertical:
            door_lo = int(rng.integers(y0, y1 - door_w + 2))
            walls[y0 : y1 + 1, cut] = True
            walls[door_lo : door_lo + door_w, cut] = False
            rects[0] = (x0, y0, cut - 1, y1)
            rects.append((cut + 1, y0, x1, y1))
        else:
            door_lo = int(rng.integers(x0, x1 - door_w + 2))
            walls[cut, x0 : x1 + 1] = True
            walls[cut, door_lo : door_lo + door_w] = False
            rects[0] = (x0, y0, x1, cut - 1)
            rects.append((x0, cut + 1, x1, y1))

    free = ~walls
    n_free = int(free.sum())
    n_objects = int(round(params.object_density * n_free))
    if n_objects < len(params.goal_categories):
        raise InfeasibleSceneError(
            f"object budget {n_objects} cannot cover {len(params.goal_categories)} "
            f"goal categories (raise object_density)"
        )

    wanted = list(params.goal_categories)
    while len(wanted) < n_objects:
        wanted.append(categories[int(rng.integers(len(categories)))])

    taken = np.zeros_like(walls)
    objects: list[SceneObject] = []
    ys, xs = np.nonzero(free)
    order = rng.permutation(len(xs))
    cursor = 0
    for cat in wanted:
        size = int(rng.integers(1, 3))  # 1x1 or 2x2 footprint
        placed = False
        while cursor < len(order):
            j = order[cursor]
            cursor += 1
            x, y = int(xs[j]), int(ys[j])
            cells = [
                (x + dx, y + dy)
                for dx in range(size)
                for dy in range(size)
            ]
            ok = all(
                0 < cx < params.width - 1
                and 0 < cy < params.height - 1
                and free[cy, cx]
                and not taken[cy, cx]
                for (cx, cy) in cells
            )
            if ok:
                for (cx, cy) in cells:
                    taken[cy, cx] = True
                objects.append(SceneObject(len(objects), cat, tuple(cells)))
                placed = True
                break
        if not placed:
            raise InfeasibleSceneError(
                f"ran out of space placing objects (density {params.object_density} too high)"
            )

    scene = SceneGrid(
        params.width, params.height, 0.05, walls, tuple(objects), categories
    )
    validate_scene(scene)
    if not free_space_connected(scene):
        raise InfeasibleSceneError("generated free space is disconnected")  # pragma: no cover
    return scene


def free_space_connected(scene: SceneGrid) -> bool:
    """Flood-fill check that all non-wall cells form one 4-connected component."""
    free = ~scene.walls
    n_free = int(free.sum())
    if n_free == 0:
        return False
    start = tuple(np.argwhere(free)[0])
    seen = np.zeros_like(free)
    seen[start] = True
    stack = [start]
    while stack:
        y, x = stack.pop()
        for ny, nx in ((y + 1, x), (y - 1, x), (y, x + 1), (y, x - 1)):
            if 0 <= ny < scene.height and 0 <= nx < scene.width and free[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                stack.append((ny, nx))
    return int(seen.sum()) == n_free


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------


def _swept_blocked(scene: SceneGrid, pose: Pose, tx: float, ty: float) -> bool:
    """True if any cell along the segment pose -> (tx, ty) is a wall or out of bounds."""
    dist = math.hypot(tx - pose.x, ty - pose.y)
    n = max(1, int(math.ceil(dist / SWEEP_STEP_CELLS)))
    for i in range(1, n + 1):
        t = i / n
        x = pose.x + (tx - pose.x) * t
        y = pose.y + (ty - pose.y) * t
        cx, cy = int(round(x)), int(round(y))
        if not (0 <= cx < scene.width and 0 <= cy < scene.height):
            return True
        if scene.walls[cy, cx]:
            return True
    return False


def step(
    scene: SceneGrid,
    pose: Pose,
    action: Action,
    others: Sequence[Pose] = (),
    params: WorldParams = WorldParams(),
) -> StepResult:
    """Apply one discrete action. Blocked forward motion is a flagged no-op."""
    if action is Action.MOVE_FORWARD:
        step_cells = params.step_size_m / params.cell_size_m
        theta = math.radians(pose.heading)
        tx = pose.x + step_cells * math.cos(theta)
        ty = pose.y + step_cells * math.sin(theta)
        if _swept_blocked(scene, pose, tx, ty):
            return StepResult(pose, True)
        if params.robot_blocking:
            for other in others:
                if math.hypot(tx - other.x, ty - other.y) < params.robot_block_radius_cells:
                    return StepResult(pose, True)
        return StepResult(Pose(tx, ty, pose.heading), False)
    if action is Action.TURN_LEFT:
        return StepResult(Pose(pose.x, pose.y, pose.heading + params.turn_deg), False)
    if action is Action.TURN_RIGHT:
        return StepResult(Pose(pose.x, pose.y, pose.heading - params.turn_deg), False)
    # look_up / look_down / stop leave the planar pose unchanged
    return StepResult(pose, False)


# ---------------------------------------------------------------------------
# Sensing
# ---------------------------------------------------------------------------


def sense(
    scene: SceneGrid,
    pose: Pose,
    sensor: SensorParams = SensorParams(),
    noise_seed: int = 0,
) -> Observation:
    """Planar semantic scan: one ray per bearing across the horizontal FOV.

    Rays stop at the first wall or object cell (objects occlude). Object hits
    report a category label that is misclassified with probability
    `sensor.noise_rate`, drawn deterministically from `noise_seed`.
    """
    if not (0 < sensor.fov_deg < 360):
        raise ValueError("fov_deg must lie in (0, 360)")
    max_range_cells = sensor.max_range_m / scene.cell_size_m
    bearings = np.linspace(-sensor.fov_deg / 2, sensor.fov_deg / 2, sensor.n_rays)
    theta = np.radians(pose.heading - bearings)  # bearing positive to the right
    ts = np.arange(RAY_STEP_CELLS, max_range_cells + RAY_STEP_CELLS / 2, RAY_STEP_CELLS)

    px = pose.x + np.cos(theta)[:, None] * ts[None, :]
    py = pose.y + np.sin(theta)[:, None] * ts[None, :]
    cx = np.rint(px).astype(np.int64)
    cy = np.rint(py).astype(np.int64)
    oob = (cx < 0) | (cx >= scene.width) | (cy < 0) | (cy >= scene.height)
    cxc = np.clip(cx, 0, scene.width - 1)
    cyc = np.clip(cy, 0, scene.height - 1)
    wall_hit = scene.walls[cyc, cxc] | oob
    obj_idx = scene.object_index[cyc, cxc]
    obj_idx[oob] = -1
    hit = wall_hit | (obj_idx >= 0)

    any_hit = hit.any(axis=1)
    first = np.where(any_hit, hit.argmax(axis=1), len(ts) - 1)

    rng = np.random.default_rng(noise_seed)
    k = len(scene.categories)
    rays: list[Ray] = []
    for i in range(sensor.n_rays):
        j = int(first[i])
        if not any_hit[i]:
            rays.append(Ray(float(bearings[i]), sensor.max_range_m, "max_range", None, None, None, None))
            continue
        dist_m = float(ts[j]) * scene.cell_size_m
        cell = (int(cxc[i, j]), int(cyc[i, j]))
        if obj_idx[i, j] >= 0:
            obj = scene.objects[int(obj_idx[i, j])]
            category = obj.category
            if sensor.noise_rate > 0:
                if rng.random() < sensor.noise_rate:
                    others = [c for c in scene.categories if c != obj.category]
                    category = others[int(rng.integers(len(others)))]
                confidence = float(rng.uniform(0.6, 1.0))
            else:
                confidence = 1.0
            rays.append(
                Ray(float(bearings[i]), dist_m, "object", obj.instance_id, category, confidence, cell)
            )
        else:
            rays.append(Ray(float(bearings[i]), dist_m, "wall", None, None, None, cell))

    detections: dict[int, Detection] = {}
    for ray in rays:
        if ray.kind != "object":
            continue
        prev = detections.get(ray.instance_id)
        if prev is None:
            detections[ray.instance_id] = Detection(
                ray.category, ray.confidence, ray.instance_id, ray.cell, ray.distance_m, ray.bearing_deg
            )
        elif ray.confidence > prev.confidence:
            # keep the first ray's category (one label per instance), raise confidence
            detections[ray.instance_id] = prev._replace(confidence=ray.confidence)
    ordered = tuple(detections[k] for k in detections)  # insertion order = first-hit order

    return Observation(rays=tuple(rays), pose=pose, detections=ordered)


def check_success(
    pose: Pose,
    scene: SceneGrid,
    goal_category: str,
    threshold_m: float = 0.2,
) -> bool:
    """True iff the pose is strictly closer than `threshold_m` to a goal instance."""
    cells = scene.goal_cells(goal_category)
    best = min(math.hypot(pose.x - x, pose.y - y) for (x, y) in cells)
    return best * scene.cell_size_m < threshold_m
