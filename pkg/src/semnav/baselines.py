"""Reference exploration planners: greedy assignment, cost-utility, random.

These share the frontier detector and local policy with the main planner and
differ only in how the long-term goal is chosen, so benchmark differences come
from goal selection alone.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .frontier import FrontierPoint
from .local_policy import DistanceField
from .mapping import GlobalSemanticMap, sample_explored_free
from .planner import LongTermGoal


def _dist(a: tuple[float, float], b: tuple[int, int]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def greedy_assign(
    robots: Sequence[tuple[float, float]],
    frontiers: Sequence[FrontierPoint],
    set_at: int = 0,
) -> list[Optional[LongTermGoal]]:
    """Conflict-free nearest matching: repeatedly pair the globally closest
    (robot, frontier), remove both; leftover robots reuse their nearest
    frontier. Empty frontier set gives None entries (caller falls back to
    random goals)."""
    goals: list[Optional[LongTermGoal]] = [None] * len(robots)
    if not frontiers:
        return goals
    free_robots = set(range(len(robots)))
    free_frontiers = list(range(len(frontiers)))
    while free_robots and free_frontiers:
        best = None
        for r in sorted(free_robots):
            for fi in free_frontiers:
                d = _dist(robots[r], frontiers[fi].coord)
                if best is None or d < best[0]:
                    best = (d, r, fi)
        _, r, fi = best
        coord = frontiers[fi].coord
        goals[r] = LongTermGoal("frontier", (float(coord[0]), float(coord[1])), set_at)
        free_robots.remove(r)
        free_frontiers.remove(fi)
    for r in sorted(free_robots):  # more robots than frontiers
        fi = min(range(len(frontiers)), key=lambda i: _dist(robots[r], frontiers[i].coord))
        coord = frontiers[fi].coord
        goals[r] = LongTermGoal("frontier", (float(coord[0]), float(coord[1])), set_at)
    return goals


def cost_utility_score(
    frontier: FrontierPoint,
    field_from_robot: DistanceField,
    lam: float = 1.0,
) -> float:
    """utility - lam * cost: utility is the cluster size in cells, cost the
    geodesic cell distance from the robot; unreachable frontiers score -inf."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    fx, fy = frontier.coord
    cost = float(field_from_robot.values[fy, fx])
    if not math.isfinite(cost):
        return -math.inf
    return frontier.cluster_size - lam * cost


def cost_utility_goal(
    frontiers: Sequence[FrontierPoint],
    field_from_robot: DistanceField,
    lam: float = 1.0,
    set_at: int = 0,
) -> Optional[LongTermGoal]:
    """Highest cost-utility frontier, or None when none is reachable."""
    best: Optional[FrontierPoint] = None
    best_score = -math.inf
    for f in frontiers:
        s = cost_utility_score(f, field_from_robot, lam)
        if s > best_score:
            best_score = s
            best = f
    if best is None or best_score == -math.inf:
        return None
    return LongTermGoal("frontier", (float(best.coord[0]), float(best.coord[1])), set_at)


def random_goal(gmap: GlobalSemanticMap, rng: np.random.Generator, set_at: int = 0) -> LongTermGoal:
    """Uniform seeded draw over the explored free cells of the shared map."""
    x, y = sample_explored_free(gmap, rng)
    return LongTermGoal("random_resample", (float(x), float(y)), set_at)
