"""Scoring oracles: everything that turns prompts into normalized probabilities.

The scripted oracle is the default. It assembles the same prompt bundles a
language model would receive, then scores them with documented closed forms
over ground-truth-derived inputs (detections, map statistics, a co-occurrence
prior), so every run is deterministic and needs no network. The remote oracle
is a thin HTTP adapter for any endpoint that exposes first-token logprobs.

Chain threading: the judgment prompt embeds the perception stage's text and
score, and the decision prompt embeds the judgment stage's outcome, mirroring
a reasoning chain carried across images.
"""

from __future__ import annotations

import base64
import json
import math
import os
import zlib
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Optional, Sequence

import numpy as np

from .categories import DEFAULT_CATEGORIES, cooccurrence_prior
from .config import OracleParams, RemoteParams
from .frontier import AnnotatedMap, detect_frontiers, frontier_mask
from .world import Detection, Observation, Pose

ENV_BASE_URL = "SEMNAV_ORACLE_URL"


class OracleError(RuntimeError):
    pass


class OracleTransportError(OracleError):
    """Network-level failure talking to a remote endpoint."""


class OracleContractError(OracleError):
    """Remote endpoint replied with something outside the wire contract."""


@dataclass
class ChainContext:
    """Inputs and prior-stage outputs threaded through one decision chain."""

    goal: str
    robot_pose: Optional[Pose] = None
    last_goal: Optional[tuple[float, float]] = None
    movement_note: str = ""
    perception_text: Optional[str] = None
    exploration_score: Optional[float] = None
    judgment_score: Optional[float] = None


@dataclass(frozen=True)
class PromptBundle:
    instruction: str
    images: tuple[bytes, ...]
    detections_text: str
    context: ChainContext


@dataclass(frozen=True)
class SelectionDistribution:
    options: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.options) != len(self.probs):
            raise ValueError("one probability per option required")
        total = sum(self.probs)
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"probabilities sum to {total}, expected 1")

    def prob(self, option: str) -> float:
        return self.probs[self.options.index(option)]

    def argmax(self) -> str:
        best = max(self.probs)
        for opt, p in zip(self.options, self.probs):  # ties resolve to earlier option
            if p == best:
                return opt
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class PerceptionResult:
    text: str
    bundle: PromptBundle


@dataclass(frozen=True)
class ExplorationResult:
    score: float
    bundle: PromptBundle


@dataclass(frozen=True)
class JudgmentResult:
    score: float
    bundle: PromptBundle


@dataclass(frozen=True)
class DecisionResult:
    distribution: SelectionDistribution
    bundle: PromptBundle
    degraded: bool = False  # remote endpoint lacked logprobs; parsed text instead


def load_template(name: str) -> str:
    return (resources.files("semnav") / "templates" / f"{name}.txt").read_text(encoding="utf-8")


def softmax(scores: Sequence[float], temperature: float = 1.0) -> tuple[float, ...]:
    arr = np.asarray(scores, dtype=np.float64) / temperature
    arr -= arr.max()
    e = np.exp(arr)
    p = e / e.sum()
    return tuple(float(v) for v in p)


# ---------------------------------------------------------------------------
# Prompt assembly (shared by both oracles)
# ---------------------------------------------------------------------------


def _direction_bucket(bearing_deg: float) -> str:
    if bearing_deg < -15.0:
        return "to your left"
    if bearing_deg > 15.0:
        return "to your right"
    return "in front of you"


def _distance_bucket(distance_m: float) -> str:
    if distance_m < 2.0:
        return "close to you"
    if distance_m < 4.0:
        return "a few meters away"
    return "far away"


def describe_detection(det: Detection) -> str:
    return f"a {det.category} is {_direction_bucket(det.bearing_deg)}, {_distance_bucket(det.distance_m)}"


def detections_text(detections: Sequence[Detection]) -> str:
    if not detections:
        return "none"
    return "; ".join(f"{d.category} (confidence {d.confidence:.2f})" for d in detections)


def build_perception_bundle(detections: Sequence[Detection], ctx: ChainContext) -> PromptBundle:
    text = detections_text(detections)
    instruction = load_template("perception").format(
        object_list=text,
        additional_context=f"You are looking for a {ctx.goal}.",
    )
    return PromptBundle(instruction, (), text, ctx)


def build_exploration_bundle(
    detections: Sequence[Detection], description: str, ctx: ChainContext
) -> PromptBundle:
    text = detections_text(detections)
    instruction = load_template("exploration").format(
        goal=ctx.goal,
        object_list=text,
        scene_description=description,
    )
    return PromptBundle(instruction, (), text, ctx)


def _perception_chain(ctx: ChainContext) -> str:
    parts = []
    if ctx.perception_text:
        parts.append(f"Scene description: {ctx.perception_text}")
    if ctx.exploration_score is not None:
        parts.append(f"The current view scored {ctx.exploration_score:.3f} for exploration value.")
    return " ".join(parts) if parts else "none"


def _judgment_chain(ctx: ChainContext) -> str:
    parts = [_perception_chain(ctx)]
    if ctx.judgment_score is not None:
        parts.append(
            f"The shared map scored {ctx.judgment_score:.3f} in favor of exploring new frontiers."
        )
    return " ".join(p for p in parts if p != "none") or "none"


def build_judgment_bundle(
    annotated: AnnotatedMap, ctx: ChainContext, image: Optional[bytes] = None
) -> PromptBundle:
    frontier_letters = [m.glyph for m in annotated.markers if m.kind == "frontier_letter"]
    history_letters = [m.glyph for m in annotated.markers if m.kind == "history_letter"]
    location = ""
    if ctx.robot_pose is not None:
        location = f"You are at cell ({ctx.robot_pose.x:.0f}, {ctx.robot_pose.y:.0f})."
    if ctx.movement_note:
        location = f"{location} {ctx.movement_note}".strip()
    instruction = load_template("judgment").format(
        goal=ctx.goal,
        frontier_points=", ".join(frontier_letters) or "none",
        history_nodes=", ".join(history_letters) or "none",
        location_and_movement=location or "none",
        perception_chain=_perception_chain(ctx),
    )
    return PromptBundle(instruction, (image,) if image else (), "", ctx)


def build_decision_bundle(
    annotated: AnnotatedMap, ctx: ChainContext, image: Optional[bytes] = None
) -> PromptBundle:
    letters = [m.glyph for m in annotated.markers if m.kind == "frontier_letter"]
    instruction = load_template("decision").format(
        goal=ctx.goal,
        options=", ".join(letters),
        judgment_chain=_judgment_chain(ctx),
    )
    return PromptBundle(instruction, (image,) if image else (), "", ctx)


# ---------------------------------------------------------------------------
# Scripted oracle
# ---------------------------------------------------------------------------


class ScriptedOracle:
    """Deterministic stand-in for a vision-language model.

    Every score is a pure function of its inputs and the configured seed:
    the optional perturbation is derived by hashing the inputs, never from
    mutable generator state, so identical calls give identical answers.
    """

    needs_images = False

    def __init__(
        self,
        params: OracleParams = OracleParams(),
        categories: tuple[str, ...] = DEFAULT_CATEGORIES,
    ):
        self.params = params
        self.categories = categories

    # -- perception -----------------------------------------------------
    def perceive(self, obs: Observation, ctx: ChainContext) -> PerceptionResult:
        bundle = build_perception_bundle(obs.detections, ctx)
        if not obs.detections:
            return PerceptionResult("no notable objects are visible", bundle)
        text = "; ".join(describe_detection(d) for d in obs.detections)
        return PerceptionResult(text, bundle)

    # -- exploration score ----------------------------------------------
    def _stable_noise(self, *inputs) -> float:
        if self.params.es_noise_amp <= 0:
            return 0.0
        digest = zlib.crc32(repr(inputs).encode()) ^ (self.params.seed & 0xFFFFFFFF)
        u = np.random.default_rng(digest).uniform(-1.0, 1.0)
        return float(self.params.es_noise_amp * u)

    def exploration_score(
        self, obs: Observation, description: str, ctx: ChainContext
    ) -> ExplorationResult:
        """Co-occurrence prior over detected categories, boosted when the goal
        itself is visible: es = clip(max_d prior(d, goal) * conf(d) + noise),
        then max with the goal detection's confidence."""
        bundle = build_exploration_bundle(obs.detections, description, ctx)
        if ctx.goal not in self.categories:
            raise ValueError(f"goal {ctx.goal!r} not in category set")
        if obs.detections:
            prior = max(
                cooccurrence_prior(d.category, ctx.goal, self.categories) * d.confidence
                for d in obs.detections
            )
        else:
            prior = self.params.es_floor
        noise = self._stable_noise(ctx.goal, tuple((d.category, round(d.confidence, 6)) for d in obs.detections))
        score = min(max(prior + noise, 0.0), 1.0)
        goal_conf = max((d.confidence for d in obs.detections if d.category == ctx.goal), default=None)
        if goal_conf is not None:
            score = max(score, goal_conf)
        return ExplorationResult(min(max(score, 0.0), 1.0), bundle)

    # -- judgment score ---------------------------------------------------
    def judgment_score(
        self, annotated: AnnotatedMap, ctx: ChainContext, image: Optional[bytes] = None
    ) -> JudgmentResult:
        """js = (1 - saturation) * (1 - exp(-boundary_cells / scale)) where
        saturation is the explored fraction within the window around the robot
        and boundary_cells counts all frontier cells on the map."""
        if annotated.purpose != "judgment":
            raise ValueError("judgment_score needs a judgment-purpose annotated map")
        bundle = build_judgment_bundle(annotated, ctx, image)
        arrow = next(m for m in annotated.markers if m.kind == "robot_arrow")
        rx, ry = int(round(arrow.coord[0])), int(round(arrow.coord[1]))
        r = self.params.js_saturation_radius_cells
        h, w = annotated.base.shape
        window = annotated.base.explored[
            max(0, ry - r) : min(h, ry + r + 1), max(0, rx - r) : min(w, rx + r + 1)
        ]
        saturation = float((window > 0).mean()) if window.size else 1.0
        mass = int(frontier_mask(annotated.base).sum())
        score = (1.0 - saturation) * (1.0 - math.exp(-mass / self.params.js_frontier_scale))
        return JudgmentResult(min(max(score, 0.0), 1.0), bundle)

    # -- decision distribution -------------------------------------------
    def decision_scores(
        self, annotated: AnnotatedMap, ctx: ChainContext, image: Optional[bytes] = None
    ) -> DecisionResult:
        """Each frontier scores w_p * proximity + w_s * relative size
        + w_m * goal-correlated semantics nearby; probabilities are the
        softmax of the scores at the configured temperature."""
        if annotated.purpose != "decision":
            raise ValueError("decision_scores needs a decision-purpose annotated map")
        bundle = build_decision_bundle(annotated, ctx, image)
        frontiers = detect_frontiers(annotated.base)
        glyphs = {m.glyph for m in annotated.markers if m.kind == "frontier_letter"}
        frontiers = [f for f in frontiers if f.label in glyphs]
        if not frontiers:
            raise ValueError("decision map has no recognizable frontier options")
        if ctx.robot_pose is None:
            raise ValueError("decision scoring needs the robot pose in the chain context")
        p = self.params
        max_size = max(f.cluster_size for f in frontiers)
        base = annotated.base
        h, w = base.shape
        scores = []
        for f in frontiers:
            fx, fy = f.coord
            dist = math.hypot(ctx.robot_pose.x - fx, ctx.robot_pose.y - fy)
            proximity = 1.0 / (1.0 + dist / p.ds_dist_scale_cells)
            size = f.cluster_size / max_size
            rr = p.ds_semantic_radius_cells
            win = base.grid[
                : base.k, max(0, fy - rr) : min(h, fy + rr + 1), max(0, fx - rr) : min(w, fx + rr + 1)
            ]
            semantic = 0.0
            for ci, cat in enumerate(base.categories):
                peak = float(win[ci].max()) if win[ci].size else 0.0
                if peak > 0:
                    semantic = max(semantic, peak * cooccurrence_prior(cat, ctx.goal, self.categories))
            scores.append(
                p.ds_weight_proximity * proximity
                + p.ds_weight_size * size
                + p.ds_weight_semantics * semantic
            )
        probs = softmax(scores, p.ds_temperature)
        dist = SelectionDistribution(tuple(f.label for f in frontiers), probs)
        return DecisionResult(dist, bundle)


# ---------------------------------------------------------------------------
# Remote oracle
# ---------------------------------------------------------------------------


def _default_post(url: str, payload: dict, timeout: float) -> dict:
    import requests

    resp = requests.post(url, json=payload, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


class RemoteOracle:
    """HTTP adapter speaking the documented JSON wire contract.

    Request: {purpose, instruction, images (base64 PNG), options, temperature,
    top_p, max_tokens}. Response: {text, token_logprobs: [{token, logprob}]}.
    Option probabilities are the softmax over the returned logprobs restricted
    to the option tokens; when none are present the plain text answer is
    parsed into a one-hot distribution and the result is flagged degraded.
    """

    needs_images = True

    def __init__(
        self,
        params: RemoteParams = RemoteParams(),
        post_fn: Callable[[str, dict, float], dict] | None = None,
    ):
        url = params.base_url or os.environ.get(ENV_BASE_URL, "")
        if not url:
            raise OracleError(f"remote oracle needs a base URL (set {ENV_BASE_URL})")
        self.url = url
        self.params = params
        self._post = post_fn or _default_post

    def _call(self, purpose: str, instruction: str, images: tuple[bytes, ...], options: list[str]) -> dict:
        payload = {
            "purpose": purpose,
            "instruction": instruction,
            "images": [base64.b64encode(b).decode("ascii") for b in images],
            "options": options,
            "temperature": self.params.temperature,
            "top_p": self.params.top_p,
            "max_tokens": self.params.max_tokens,
        }
        last_exc: Exception | None = None
        for _ in range(2):  # one retry
            try:
                resp = self._post(self.url, payload, self.params.timeout_s)
                break
            except Exception as exc:  # transport-level failure
                last_exc = exc
        else:
            raise OracleTransportError(f"remote oracle unreachable: {last_exc}") from last_exc
        if not isinstance(resp, dict) or "text" not in resp:
            raise OracleContractError(f"response missing 'text': {resp!r}")
        return resp

    @staticmethod
    def _option_probs(resp: dict, options: list[str]) -> tuple[tuple[float, ...], bool]:
        logprobs = {}
        for entry in resp.get("token_logprobs", []) or []:
            if not isinstance(entry, dict) or "token" not in entry or "logprob" not in entry:
                raise OracleContractError(f"bad token_logprobs entry: {entry!r}")
            logprobs[str(entry["token"]).strip().lower()] = float(entry["logprob"])
        found = [logprobs.get(o.lower()) for o in options]
        if all(v is None for v in found):
            # degraded mode: one-hot from the text answer
            text = str(resp["text"]).strip().lower()
            hot = 0
            for i, o in enumerate(options):
                if text.startswith(o.lower()):
                    hot = i
                    break
            probs = tuple(1.0 if i == hot else 0.0 for i in range(len(options)))
            return probs, True
        floor = min(v for v in found if v is not None) - 20.0
        return softmax([v if v is not None else floor for v in found]), False

    def perceive(self, obs: Observation, ctx: ChainContext) -> PerceptionResult:
        bundle = build_perception_bundle(obs.detections, ctx)
        resp = self._call("perception", bundle.instruction, bundle.images, [])
        return PerceptionResult(str(resp["text"]), bundle)

    def exploration_score(self, obs: Observation, description: str, ctx: ChainContext) -> ExplorationResult:
        bundle = build_exploration_bundle(obs.detections, description, ctx)
        resp = self._call("exploration", bundle.instruction, bundle.images, ["Yes", "No"])
        probs, _ = self._option_probs(resp, ["Yes", "No"])
        return ExplorationResult(probs[0], bundle)

    def judgment_score(self, annotated: AnnotatedMap, ctx: ChainContext, image: Optional[bytes] = None) -> JudgmentResult:
        bundle = build_judgment_bundle(annotated, ctx, image)
        resp = self._call("judgment", bundle.instruction, bundle.images, ["Yes", "No"])
        probs, _ = self._option_probs(resp, ["Yes", "No"])
        return JudgmentResult(probs[0], bundle)

    def decision_scores(self, annotated: AnnotatedMap, ctx: ChainContext, image: Optional[bytes] = None) -> DecisionResult:
        bundle = build_decision_bundle(annotated, ctx, image)
        letters = [m.glyph for m in annotated.markers if m.kind == "frontier_letter"]
        resp = self._call("decision", bundle.instruction, bundle.images, letters)
        probs, degraded = self._option_probs(resp, letters)
        dist = SelectionDistribution(tuple(letters), probs)
        return DecisionResult(dist, bundle, degraded)
