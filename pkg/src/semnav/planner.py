"""Decision core: view-score combination, history-node bookkeeping, and
long-term goal selection between frontiers and history nodes.

Every planner tick scores the robot's current view (exploration score), the
shared map (judgment score), combines them into the horizontal-field-of-view
score (hfovs), records that score in the angular state vector of the nearest
history node, and then either asks the decision stage to pick a frontier
(hfovs >= 0.5) or falls back to the best-scoring history node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import PlannerParams, RenderParams
from .frontier import AnnotatedMap, FrontierPoint, annotate_decision, annotate_judgment, detect_frontiers, render
from .mapping import GlobalSemanticMap
from .oracle import ChainContext, PromptBundle, SelectionDistribution
from .world import Observation, Pose


@dataclass
class HistoryNode:
    coord: tuple[float, float]
    state_vector: np.ndarray = field(default_factory=lambda: np.zeros(360))
    visits: int = 0
    hs: float = 0.0
    created_at: int = 0
    label_index: int = 0

    def refresh_score(self) -> None:
        self.hs = float(self.state_vector.sum()) / self.visits


@dataclass(frozen=True)
class LongTermGoal:
    kind: str  # "frontier" | "history_node" | "random_resample"
    coord: Optional[tuple[float, float]]
    set_at: int


@dataclass(frozen=True)
class ScoreBundle:
    es: float
    js: float
    hfovs: float
    ds: Optional[SelectionDistribution]
    chosen: Optional[LongTermGoal] = None


@dataclass(frozen=True)
class PlanResult:
    goal: LongTermGoal
    scores: ScoreBundle
    bundles: dict
    node: HistoryNode
    frontiers: tuple[FrontierPoint, ...]


def hfovs(es: float, js: float, tau_es: float = 2.0, tau_js: float = 1.0, mode: str = "centered") -> float:
    """Combine exploration and judgment scores into the frontier-vs-history gate.

    "paper_exp" is the literal exponential form exp(tau_es*es + tau_js*js);
    for non-negative scores it never drops below 1, so the 0.5 branch point is
    unreachable there. The default "centered" form maps (0.5, 0.5) to 0.5 via
    a logistic, keeping both branches attainable. Both are strictly increasing
    in each argument.
    """
    if mode == "paper_exp":
        return math.exp(tau_es * es + tau_js * js)
    if mode == "centered":
        z = tau_es * (es - 0.5) + tau_js * (js - 0.5)
        return 1.0 / (1.0 + math.exp(-z))
    raise ValueError(f"unknown hfovs mode {mode!r}")


def angular_window_bins(center_deg: float, fov_deg: float) -> list[int]:
    """Integer degree bins covered by [center - fov/2, center + fov/2].

    Half-integer window bounds are widened to the enclosing integer bins
    (floor below, ceil above), and bins wrap modulo 360.
    """
    lo = center_deg - fov_deg / 2.0
    hi = center_deg + fov_deg / 2.0
    return [b % 360 for b in range(int(math.floor(lo)), int(math.ceil(hi)))]


def update_history(
    nodes: list[HistoryNode],
    position: tuple[float, float],
    heading_deg: float,
    hfovs_value: float,
    fov_deg: float,
    node_radius_cells: float = 25.0,
    tick: int = 0,
) -> HistoryNode:
    """Record one visit in the history-node set and return the touched node.

    If the nearest node is at least `node_radius_cells` away a new node is
    created with a zero 360-bin state vector; otherwise the nearest node
    absorbs the visit. In both cases the view window's bins are overwritten
    (not accumulated) with the hfovs value, the visit count increments once,
    and hs = sum(state_vector) / visits.
    """
    nearest: Optional[HistoryNode] = None
    nearest_d = math.inf
    for node in nodes:
        d = math.hypot(node.coord[0] - position[0], node.coord[1] - position[1])
        if d < nearest_d:
            nearest_d = d
            nearest = node
    if nearest is None or nearest_d >= node_radius_cells:
        node = HistoryNode(coord=position, created_at=tick, label_index=len(nodes))
        nodes.append(node)
    else:
        node = nearest
    bins = angular_window_bins(heading_deg, fov_deg)
    node.state_vector[bins] = hfovs_value
    node.visits += 1
    node.refresh_score()
    return node


def select_goal(
    hfovs_value: float,
    frontiers: Sequence[FrontierPoint],
    ds: Optional[SelectionDistribution],
    nodes: Sequence[HistoryNode],
    set_at: int,
    force_frontier: bool = False,
) -> LongTermGoal:
    """Pick the long-term goal.

    hfovs >= 0.5 (or a forced first tick) takes the frontier with the highest
    decision probability, ties going to the earlier letter. Below 0.5 the
    best-scoring history node wins, ties going to the most recent node. With
    no frontiers and no nodes the goal degrades to a random resample, whose
    coordinate the caller draws from the map.
    """
    frontier_branch = force_frontier or hfovs_value >= 0.5
    if frontier_branch and frontiers:
        if ds is None:
            raise ValueError("frontier branch requires a decision distribution")
        letter = ds.argmax()
        chosen = next(f for f in frontiers if f.label == letter)
        return LongTermGoal("frontier", (float(chosen.coord[0]), float(chosen.coord[1])), set_at)
    if nodes:
        best = max(nodes, key=lambda n: (n.hs, n.label_index))
        return LongTermGoal("history_node", best.coord, set_at)
    return LongTermGoal("random_resample", None, set_at)


def plan_tick(
    obs: Observation,
    pose: Pose,
    gmap: GlobalSemanticMap,
    oracle,
    nodes: list[HistoryNode],
    goal_category: str,
    last_goal: Optional[tuple[float, float]],
    fresh_map: bool,
    fov_deg: float = 79.0,
    params: PlannerParams = PlannerParams(),
    render_params: RenderParams = RenderParams(),
    step_idx: int = 0,
    movement_note: str = "",
) -> PlanResult:
    """One full decision pass for one robot.

    Pipeline: perceive -> exploration score -> (judgment skipped on a freshly
    initialized map, which forces the frontier branch) -> hfovs -> history
    update -> decision scores when exploring -> goal selection. The chain
    context accumulates each stage's output so later prompts embed earlier
    reasoning.
    """
    ctx = ChainContext(
        goal=goal_category, robot_pose=pose, last_goal=last_goal, movement_note=movement_note
    )
    bundles: dict[str, PromptBundle] = {}

    perception = oracle.perceive(obs, ctx)
    ctx.perception_text = perception.text
    bundles["perception"] = perception.bundle

    exploration = oracle.exploration_score(obs, perception.text, ctx)
    ctx.exploration_score = exploration.score
    bundles["exploration"] = exploration.bundle
    es = exploration.score

    frontiers = tuple(
        detect_frontiers(gmap, params.min_frontier_cluster, params.max_frontier_options)
    )

    if fresh_map:
        js = 1.0  # everyone keeps exploring right after map initialization
    else:
        annotated = annotate_judgment(
            gmap, pose, last_goal, [n.coord for n in nodes], frontiers
        )
        image = render(annotated, render_params.width, render_params.height) if oracle.needs_images else None
        judgment = oracle.judgment_score(annotated, ctx, image)
        ctx.judgment_score = judgment.score
        bundles["judgment"] = judgment.bundle
        js = judgment.score

    score = hfovs(es, js, params.tau_es, params.tau_js, params.hfovs_mode)
    touched = update_history(
        nodes,
        (pose.x, pose.y),
        pose.heading,
        score,
        fov_deg=fov_deg,
        node_radius_cells=params.node_radius_cells,
        tick=step_idx,
    )

    ds = None
    frontier_branch = fresh_map or score >= 0.5
    if frontier_branch and frontiers:
        decision_map = annotate_decision(gmap, frontiers)
        image = render(decision_map, render_params.width, render_params.height) if oracle.needs_images else None
        decision = oracle.decision_scores(decision_map, ctx, image)
        ds = decision.distribution
        bundles["decision"] = decision.bundle

    goal = select_goal(score, frontiers, ds, nodes, set_at=step_idx, force_frontier=fresh_map)
    scores = ScoreBundle(es=es, js=js, hfovs=score, ds=ds, chosen=goal)
    return PlanResult(goal=goal, scores=scores, bundles=bundles, node=touched, frontiers=frontiers)
