"""Parameter dataclasses with the published defaults.

Distances suffixed `_m` are meters; everything suffixed `_cells` is grid cells.
The default cell size of 0.05 m makes 25 cells equal 1.25 m, which keeps the
cell-denominated thresholds (history-node radius, stuck distance, goal
continuity) meaningful alongside metric quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class WorldParams:
    cell_size_m: float = 0.05
    step_size_m: float = 0.25
    turn_deg: float = 30.0
    success_dist_m: float = 0.2
    robot_blocking: bool = True   # robots block each other's forward motion within one cell
    robot_block_radius_cells: float = 1.0


@dataclass(frozen=True)
class SensorParams:
    fov_deg: float = 79.0
    n_rays: int = 79              # odd count keeps one ray exactly on the heading
    max_range_m: float = 5.0
    noise_rate: float = 0.0       # per-ray misclassification probability; 0 = ground-truth labels


@dataclass(frozen=True)
class PlannerParams:
    tau_es: float = 2.0
    tau_js: float = 1.0
    hfovs_mode: str = "centered"          # "centered" or "paper_exp"
    goal_update_interval: int = 25        # simulation steps between planner ticks
    node_radius_cells: float = 25.0       # history node attach/create radius
    continuity_dist_cells: float = 25.0   # keep previous goal beyond this distance when hfovs < 0.5
    stuck_dist_cells: float = 25.0        # per-tick displacement below this triggers resampling
    min_frontier_cluster: int = 4
    max_frontier_options: int = 4


@dataclass(frozen=True)
class OracleParams:
    """Constants of the scripted oracle's closed-form scores."""

    es_floor: float = 0.1            # exploration score with nothing detected
    es_noise_amp: float = 0.0        # amplitude of seeded perturbation on the exploration score
    js_saturation_radius_cells: int = 25
    js_frontier_scale: float = 60.0  # boundary-cell count that saturates the frontier-mass term
    ds_dist_scale_cells: float = 40.0
    ds_weight_proximity: float = 1.0
    ds_weight_size: float = 1.0
    ds_weight_semantics: float = 1.5
    ds_semantic_radius_cells: int = 8
    ds_temperature: float = 0.25
    seed: int = 0


@dataclass(frozen=True)
class LocalPolicyParams:
    align_deadband_deg: float = 15.0  # half the turn quantum
    inflate_radius_cells: int = 1


@dataclass(frozen=True)
class RenderParams:
    width: int = 640
    height: int = 480


@dataclass(frozen=True)
class RemoteParams:
    base_url: str = ""            # empty means take SEMNAV_ORACLE_URL from the environment
    timeout_s: float = 30.0
    max_inflight: int = 2
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 256


@dataclass(frozen=True)
class SceneGenParams:
    width: int = 96
    height: int = 96
    rooms: int = 4
    object_density: float = 0.004     # objects per free cell
    door_width_cells: int = 9
    min_room_cells: int = 18
    goal_categories: tuple[str, ...] = ()   # each gets at least one instance
    categories: tuple[str, ...] = ()        # object pool; empty means the default registry


@dataclass(frozen=True)
class Params:
    """Bundle of every tunable group, with published values as defaults."""

    world: WorldParams = field(default_factory=WorldParams)
    sensor: SensorParams = field(default_factory=SensorParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    oracle: OracleParams = field(default_factory=OracleParams)
    local: LocalPolicyParams = field(default_factory=LocalPolicyParams)
    render: RenderParams = field(default_factory=RenderParams)

    @property
    def step_cells(self) -> float:
        return self.world.step_size_m / self.world.cell_size_m

    @property
    def success_dist_cells(self) -> float:
        return self.world.success_dist_m / self.world.cell_size_m
