"""Low-level control: FMM distance fields, descent actions, and the two
logical-analysis rules (goal continuity and stuck recovery).

The distance field solves the unit-speed eikonal equation |grad T| = 1 with a
first-order upwind scheme expanded in fast-marching order, so values are
geodesic distances in cells. The kernel is numba-compiled when available and
falls back to the identical pure-Python implementation otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .config import LocalPolicyParams, WorldParams
from .world import Action, Pose

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _fmm_kernel(blocked: np.ndarray, gy: int, gx: int) -> np.ndarray:
    h, w = blocked.shape
    inf = np.inf
    dist = np.full((h, w), inf)
    state = np.zeros((h, w), np.uint8)  # 0 far, 1 narrow band, 2 frozen
    cap = h * w + 1
    heap_val = np.empty(cap, np.float64)
    heap_idx = np.empty(cap, np.int64)
    n = 0

    def push(val, idx, heap_val, heap_idx, n):
        heap_val[n] = val
        heap_idx[n] = idx
        c = n
        while c > 0:
            p = (c - 1) // 2
            if heap_val[p] > heap_val[c]:
                heap_val[p], heap_val[c] = heap_val[c], heap_val[p]
                heap_idx[p], heap_idx[c] = heap_idx[c], heap_idx[p]
                c = p
            else:
                break
        return n + 1

    dist[gy, gx] = 0.0
    n = push(0.0, gy * w + gx, heap_val, heap_idx, n)
    while n > 0:
        idx = heap_idx[0]
        n -= 1
        heap_val[0] = heap_val[n]
        heap_idx[0] = heap_idx[n]
        c = 0
        while True:
            l = 2 * c + 1
            r = l + 1
            m = c
            if l < n and heap_val[l] < heap_val[m]:
                m = l
            if r < n and heap_val[r] < heap_val[m]:
                m = r
            if m == c:
                break
            heap_val[c], heap_val[m] = heap_val[m], heap_val[c]
            heap_idx[c], heap_idx[m] = heap_idx[m], heap_idx[c]
            c = m
        y = idx // w
        x = idx % w
        if state[y, x] == 2:
            continue
        state[y, x] = 2
        for k in range(4):
            if k == 0:
                ny, nx = y + 1, x
            elif k == 1:
                ny, nx = y - 1, x
            elif k == 2:
                ny, nx = y, x + 1
            else:
                ny, nx = y, x - 1
            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                continue
            if blocked[ny, nx] or state[ny, nx] == 2:
                continue
            a = inf
            if ny > 0 and dist[ny - 1, nx] < a:
                a = dist[ny - 1, nx]
            if ny < h - 1 and dist[ny + 1, nx] < a:
                a = dist[ny + 1, nx]
            b = inf
            if nx > 0 and dist[ny, nx - 1] < b:
                b = dist[ny, nx - 1]
            if nx < w - 1 and dist[ny, nx + 1] < b:
                b = dist[ny, nx + 1]
            if a > b:
                a, b = b, a
            # upwind update: solve (t-a)^2 + (t-b)^2 = 1, or t = a + 1 when the
            # second axis carries no information
            if b - a >= 1.0 or b == inf:
                t = a + 1.0
            else:
                t = 0.5 * (a + b + math.sqrt(2.0 - (b - a) * (b - a)))
            if t < dist[ny, nx]:
                dist[ny, nx] = t
                state[ny, nx] = 1
                n = push(t, ny * w + nx, heap_val, heap_idx, n)
    return dist


if _HAVE_NUMBA:
    _fmm_solve = njit(cache=True)(_fmm_kernel)
else:  # pragma: no cover
    _fmm_solve = _fmm_kernel


@dataclass(frozen=True)
class DistanceField:
    values: np.ndarray  # (H, W) geodesic cell distances, inf where unreachable
    goal: tuple[int, int]  # (x, y)

    def at(self, x: float, y: float) -> float:
        return float(self.values[int(round(y)), int(round(x))])


def fmm_field(blocked: np.ndarray, goal: tuple[int, int]) -> DistanceField:
    """Distance field to `goal` over free cells; inf marks unreachable cells."""
    gx, gy = goal
    h, w = blocked.shape
    if not (0 <= gx < w and 0 <= gy < h):
        raise ValueError(f"goal {goal} outside {w}x{h} grid")
    if blocked[gy, gx]:
        raise ValueError(f"goal {goal} lies on an obstacle cell")
    values = _fmm_solve(np.ascontiguousarray(blocked), gy, gx)
    values[blocked] = np.inf
    return DistanceField(values, (gx, gy))


def inflate_obstacles(blocked: np.ndarray, radius_cells: int = 1) -> np.ndarray:
    """Grow obstacles by a robot radius so descent paths keep clearance."""
    if radius_cells <= 0:
        return blocked
    size = 2 * radius_cells + 1
    return ndimage.binary_dilation(blocked, structure=np.ones((size, size), dtype=bool))


def snap_to_free(blocked: np.ndarray, cell: tuple[int, int]) -> tuple[int, int]:
    """Nearest non-blocked cell by euclidean distance (ties by (y, x) order)."""
    x, y = cell
    h, w = blocked.shape
    x = min(max(x, 0), w - 1)
    y = min(max(y, 0), h - 1)
    if not blocked[y, x]:
        return (x, y)
    ys, xs = np.nonzero(~blocked)
    if len(xs) == 0:
        raise ValueError("no free cells to snap to")
    d2 = (xs - x) ** 2 + (ys - y) ** 2
    j = np.lexsort((xs, ys, d2))[0]
    return (int(xs[j]), int(ys[j]))


def _bilinear(f: np.ndarray, x: float, y: float) -> float:
    h, w = f.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(x), int(y)
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    top = f[y0, x0] * (1 - fx) + f[y0, x1] * fx
    bot = f[y1, x0] * (1 - fx) + f[y1, x1] * fx
    return float(top * (1 - fy) + bot * fy)


def next_action(
    field: DistanceField,
    pose: Pose,
    params: LocalPolicyParams = LocalPolicyParams(),
    world: WorldParams = WorldParams(),
    stop_dist_cells: float | None = None,
) -> Action:
    """Steepest-descent action on the distance field.

    Turns toward the descent direction while the angular error exceeds the
    deadband (half the turn quantum), otherwise moves forward. Emits stop once
    the pose is within `stop_dist_cells` of the field's goal (defaults to the
    success distance).
    """
    if stop_dist_cells is None:
        stop_dist_cells = world.success_dist_m / world.cell_size_m
    gx, gy = field.goal
    if math.hypot(pose.x - gx, pose.y - gy) < stop_dist_cells:
        return Action.STOP

    finite = field.values[np.isfinite(field.values)]
    big = (float(finite.max()) if len(finite) else 0.0) + 1000.0
    f = np.where(np.isfinite(field.values), field.values, big)
    h = 0.5
    grad_x = _bilinear(f, pose.x + h, pose.y) - _bilinear(f, pose.x - h, pose.y)
    grad_y = _bilinear(f, pose.x, pose.y + h) - _bilinear(f, pose.x, pose.y - h)
    if math.hypot(grad_x, grad_y) < 1e-12:
        # flat plateau: head for the lowest 8-neighbor instead
        cx, cy = pose.cell
        best, bx, by = math.inf, cx, cy
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                nx, ny = cx + dx, cy + dy
                if (dx or dy) and 0 <= nx < f.shape[1] and 0 <= ny < f.shape[0] and f[ny, nx] < best:
                    best, bx, by = f[ny, nx], nx, ny
        grad_x, grad_y = -(bx - pose.x), -(by - pose.y)

    desired = math.degrees(math.atan2(-grad_y, -grad_x))
    err = (desired - pose.heading) % 360.0
    if err > 180.0:
        err -= 360.0  # err in (-180, 180]; exactly-behind resolves to turn_left
    if abs(err) > params.align_deadband_deg:
        return Action.TURN_LEFT if err > 0 else Action.TURN_RIGHT
    return Action.MOVE_FORWARD


def continuity_check(
    dist_to_last_goal_cells: float,
    hfovs_value: float,
    continuity_dist_cells: float = 25.0,
) -> bool:
    """True when the robot should keep its previous long-term goal.

    Holds when the robot is still far from the last goal and the current view
    score argues against exploring from here.
    """
    return dist_to_last_goal_cells >= continuity_dist_cells and hfovs_value < 0.5


def stuck_check(displacement_cells: float, stuck_dist_cells: float = 25.0) -> bool:
    """True when per-tick displacement is small enough to count as trapped."""
    return displacement_cells < stuck_dist_cells
