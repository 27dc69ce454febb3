"""Frontier detection and the annotated map renders used as visual prompts.

A frontier cell is explored free space 8-adjacent to unknown space. Clusters
are ranked by size and at most four become lettered options (A-D). Judgment
renders carry the full state (robot arrow, last goal, history letters,
frontier letters); decision renders keep only the frontier letters.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy import ndimage

from .mapping import GlobalSemanticMap
from .world import Pose

_EIGHT = np.ones((3, 3), dtype=bool)


class NoFrontiersError(ValueError):
    """Raised when an operation needs frontiers but none exist."""


@dataclass(frozen=True)
class FrontierPoint:
    coord: tuple[int, int]  # (x, y), an explored-free boundary cell
    cluster_size: int
    label: str  # uppercase letter


@dataclass(frozen=True)
class Marker:
    kind: str  # robot_arrow | last_goal_dot | history_letter | frontier_letter
    coord: tuple[float, float]
    glyph: str
    color: tuple[int, int, int]
    heading: Optional[float] = None  # robot_arrow only


@dataclass(frozen=True)
class AnnotatedMap:
    base: GlobalSemanticMap
    markers: tuple[Marker, ...]
    purpose: str  # "judgment" | "decision"


# One palette table so golden-image tests stay stable.
PALETTE: dict[str, tuple[int, int, int]] = {
    "unknown": (200, 200, 200),
    "free": (255, 255, 255),
    "obstacle": (60, 60, 60),
    "past_positions": (255, 220, 160),
    "robot_arrow": (220, 30, 30),
    "last_goal_dot": (30, 60, 220),
    "history_letter": (20, 120, 20),
    "frontier_letter": (180, 20, 180),
}

CATEGORY_COLORS: tuple[tuple[int, int, int], ...] = (
    (228, 26, 28),
    (55, 126, 184),
    (77, 175, 74),
    (152, 78, 163),
    (255, 127, 0),
    (255, 255, 51),
    (166, 86, 40),
    (247, 129, 191),
    (0, 153, 153),
    (102, 102, 255),
    (153, 204, 0),
    (204, 102, 153),
)


def frontier_mask(gmap: GlobalSemanticMap) -> np.ndarray:
    """Boolean mask of explored-free cells 8-adjacent to unknown cells."""
    explored = gmap.explored > 0
    free = explored & (gmap.obstacle == 0)
    unknown = ~explored
    near_unknown = ndimage.binary_dilation(unknown, structure=_EIGHT)
    return free & near_unknown


def detect_frontiers(
    gmap: GlobalSemanticMap,
    min_cluster: int = 4,
    max_options: int = 4,
) -> list[FrontierPoint]:
    """Cluster frontier cells and return up to `max_options` labeled points.

    Clusters below `min_cluster` cells are dropped; survivors are ranked by
    size (ties broken by cell order) and labeled A, B, C, D. The returned
    coordinate is the cluster member nearest its centroid. An empty list means
    the map is fully explored or has no explored area yet.
    """
    mask = frontier_mask(gmap)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    points: list[tuple[int, tuple[int, int]]] = []
    for lab in range(1, n + 1):
        ys, xs = np.nonzero(labels == lab)
        size = len(xs)
        if size < min_cluster:
            continue
        cx, cy = xs.mean(), ys.mean()
        d2 = (xs - cx) ** 2 + (ys - cy) ** 2
        order = np.lexsort((xs, ys, d2))  # nearest to centroid, ties by (y, x)
        j = order[0]
        points.append((size, (int(xs[j]), int(ys[j]))))
    points.sort(key=lambda p: (-p[0], p[1][1], p[1][0]))
    return [
        FrontierPoint(coord, size, chr(ord("A") + i))
        for i, (size, coord) in enumerate(points[:max_options])
    ]


def history_glyph(index: int) -> str:
    """Chronological history-node glyph: a..z, then letter plus running number."""
    if index < 26:
        return chr(ord("a") + index)
    return chr(ord("a") + (index - 26) % 26) + str(index - 25)


def annotate_judgment(
    gmap: GlobalSemanticMap,
    robot: Pose,
    last_goal: Optional[tuple[float, float]],
    history: Sequence[tuple[float, float]],
    frontiers: Sequence[FrontierPoint],
) -> AnnotatedMap:
    """Visual prompt for the judgment stage: full robot and history context."""
    markers = [
        Marker("robot_arrow", (robot.x, robot.y), "^", PALETTE["robot_arrow"], heading=robot.heading)
    ]
    if last_goal is not None:
        markers.append(Marker("last_goal_dot", last_goal, "o", PALETTE["last_goal_dot"]))
    for i, coord in enumerate(history):
        markers.append(Marker("history_letter", coord, history_glyph(i), PALETTE["history_letter"]))
    for f in frontiers:
        markers.append(Marker("frontier_letter", f.coord, f.label, PALETTE["frontier_letter"]))
    return AnnotatedMap(gmap.snapshot(), tuple(markers), "judgment")


def annotate_decision(gmap: GlobalSemanticMap, frontiers: Sequence[FrontierPoint]) -> AnnotatedMap:
    """Visual prompt for the decision stage: frontier letters only."""
    if not frontiers:
        raise NoFrontiersError("decision prompt needs at least one frontier")
    markers = tuple(
        Marker("frontier_letter", f.coord, f.label, PALETTE["frontier_letter"]) for f in frontiers
    )
    return AnnotatedMap(gmap.snapshot(), markers, "decision")


def _base_image(gmap: GlobalSemanticMap) -> np.ndarray:
    h, w = gmap.shape
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = PALETTE["unknown"]
    explored = gmap.explored > 0
    img[explored] = PALETTE["free"]
    img[(gmap.past_positions > 0) & explored] = PALETTE["past_positions"]
    for i in range(gmap.k):
        color = CATEGORY_COLORS[i % len(CATEGORY_COLORS)]
        img[gmap.grid[i] > 0.2] = color
    img[gmap.obstacle > 0.5] = PALETTE["obstacle"]
    return img


def render(annotated: AnnotatedMap, width: int = 640, height: int = 480) -> bytes:
    """Deterministic PNG of an annotated map: same input, same bytes."""
    if width <= 0 or height <= 0:
        raise ValueError("render dimensions must be positive")
    base = _base_image(annotated.base)
    h, w = base.shape[:2]
    img = Image.fromarray(base).resize((width, height), Image.NEAREST)
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    sx, sy = width / w, height / h

    def to_px(coord: tuple[float, float]) -> tuple[float, float]:
        return ((coord[0] + 0.5) * sx, (coord[1] + 0.5) * sy)

    for marker in annotated.markers:
        px, py = to_px(marker.coord)
        if marker.kind == "robot_arrow":
            theta = math.radians(marker.heading or 0.0)
            tip = (px + 9 * math.cos(theta), py + 9 * math.sin(theta))
            left = (px + 5 * math.cos(theta + 2.5), py + 5 * math.sin(theta + 2.5))
            right = (px + 5 * math.cos(theta - 2.5), py + 5 * math.sin(theta - 2.5))
            draw.polygon([tip, left, right], fill=marker.color)
        elif marker.kind == "last_goal_dot":
            draw.ellipse([px - 4, py - 4, px + 4, py + 4], fill=marker.color)
        else:
            draw.text((px - 3, py - 6), marker.glyph, fill=marker.color, font=font)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
