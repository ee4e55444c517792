"""Episode orchestration: capture -> map -> plan loop, ablation variants,
reconstruction metrics and artifact export.

Variants mirror the ablation structure:

  V1  exploration tasks only, viewpoints forced level (no pitch)
  V2  exploration tasks only, full pitch
  V3  reconstruction tasks only
  V4  exploration and reconstruction merged every iteration, no switching
  V5  full adaptive mode switching

Episodes are fully deterministic for a given config: depth noise is
seeded per captured view and all planning tie-breaks are fixed. Timing
fields are measured wall-clock and therefore live outside the bit-stable
artifact set (they are exported to a separate timings CSV).
"""

import csv
import enum
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import scene as scene_mod
from .errors import EmptyMesh, NoTasksAvailable
from .esdf import compute_esdf
from .geometry import CameraModel, Pose

BOOTSTRAP_SWEEP_VIEWS = 8
from .mapping import (
    FrontierClusterTracker,
    OccupancyGrid,
    UNKNOWN,
    certify_free_bubble,
    cluster_frontiers,
    detect_frontiers,
    integrate_depth_scan,
)
from .planner import Mode, PlanConfig, PlanSnapshot, SwitchParams, plan_iteration
from .surface import (
    TriangleMesh,
    UncertaintyField,
    extract_mesh,
    save_mesh,
    surface_elements,
    update_uncertainty,
)
from .taskgen import GenParams, TaskKind


class Variant(enum.Enum):
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"
    V4 = "V4"
    V5 = "V5"


_VARIANT_GATING = {
    Variant.V1: (Mode.EXPLORATION_ONLY, frozenset({TaskKind.EXPLORATION})),
    Variant.V2: (Mode.EXPLORATION_ONLY, frozenset({TaskKind.EXPLORATION})),
    Variant.V3: (Mode.MERGED, frozenset({TaskKind.RECONSTRUCTION})),
    Variant.V4: (Mode.MERGED, frozenset({TaskKind.EXPLORATION, TaskKind.RECONSTRUCTION})),
    Variant.V5: (None, frozenset({TaskKind.EXPLORATION, TaskKind.RECONSTRUCTION})),
}


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything needed to reproduce one scanning episode exactly."""

    scene_path: str = None
    scene_seed: int = 1
    scene_rooms: int = 1
    scene_extent: tuple = (4.0, 4.0, 3.0)
    scene_resolution: float = 0.1
    gen_params: GenParams = field(default_factory=lambda: GenParams(1.0, 2.0))
    switch_params: SwitchParams = field(default_factory=lambda: SwitchParams(2.0))
    camera: CameraModel = field(default_factory=lambda: CameraModel(
        np.deg2rad(90.0), np.deg2rad(70.0), 80, 60, 5.0, 0.0))
    exec_budget: float = 6.0
    path_step: float = 0.2
    view_budget: int = 150
    variant: Variant = Variant.V5
    rng_seed: int = 0
    cluster_split_extent: float = 1.0
    min_cluster_cells: int = 1  # drop frontier clusters below this size
    sigma_init: float = 1.0
    sigma_floor: float = 0.01
    decay_rate: float = 0.4
    metric_samples: int = 30000

    def __post_init__(self):
        if self.view_budget < 1:
            raise ValueError("view_budget must be >= 1")


@dataclass
class IterationRecord:
    iteration: int
    mode: str
    n_exploration: int
    n_reconstruction: int
    n_executed: int
    views_after: int
    path_length_m: float
    coverage_ratio: float
    mean_sigma: float
    t_task: float
    t_atsp: float
    t_switch: float

    @property
    def t_sp(self):
        return self.t_task + self.t_atsp + self.t_switch


@dataclass
class EpisodeMetrics:
    accuracy_cm: float
    completion_cm: float
    recall: float
    coverage_ratio: float
    path_length_m: float
    views_used: int
    t_gp: float
    records: list


@dataclass
class EpisodeResult:
    config: EpisodeConfig
    scene: object
    grid: OccupancyGrid
    uncertainty: UncertaintyField
    mesh: TriangleMesh
    mesh_sigmas: np.ndarray
    trajectory: list
    metrics: EpisodeMetrics


def load_config_scene(config):
    if config.scene_path:
        return scene_mod.read_scene(config.scene_path)
    return scene_mod.generate_floorplan(
        config.scene_seed, config.scene_rooms,
        config.scene_extent, config.scene_resolution)


def _coverage(grid, reachable):
    observed = (grid.state != UNKNOWN) & reachable
    total = int(reachable.sum())
    return float(observed.sum()) / total if total else 0.0


def run_episode(config, scene=None, on_iteration=None):
    """Run one full episode and return the result bundle.

    on_iteration, when given, is called with (record, snapshot, sequence)
    after each planning pass; tests use it to audit mode decisions."""
    if scene is None:
        scene = load_config_scene(config)
    cam = config.camera
    grid = OccupancyGrid(scene.spec)
    field_ = UncertaintyField(
        scene.spec, sigma_init=config.sigma_init, sigma_floor=config.sigma_floor,
        decay_rate=config.decay_rate,
        preferred_range=(config.gen_params.radius_min + config.gen_params.radius_max) / 2.0)
    plan_cfg = PlanConfig(gen_params=config.gen_params,
                          switch_params=config.switch_params,
                          exec_budget=config.exec_budget,
                          path_step=config.path_step)
    mode_override, enabled_kinds = _VARIANT_GATING[config.variant]
    if config.variant is Variant.V1:
        plan_cfg = replace(plan_cfg, gen_params=replace(config.gen_params, level_pitch=True))

    reachable = scene_mod.reachable_free_mask(scene)
    tracker = FrontierClusterTracker()
    trajectory = []
    records = []
    path_length = 0.0
    agent = scene.spawn

    needs_surface = TaskKind.RECONSTRUCTION in enabled_kinds

    def capture(pose):
        nonlocal agent, path_length
        img = scene_mod.render_depth(scene, pose, cam,
                                     rng_seed=(config.rng_seed, len(trajectory)))
        integrate_depth_scan(grid, pose, cam, img)
        update_uncertainty(field_, pose, cam, grid)
        if trajectory:
            path_length += float(np.linalg.norm(
                pose.position - trajectory[-1].position))
        trajectory.append(pose)
        agent = pose

    # bootstrap: the agent's collision-free body certifies its clearance
    # ball, then a full turn in place (alternating pitch to shrink the
    # polar blind cones) observes the surroundings, so the planner starts
    # inside a connected traversable region
    certify_free_bubble(grid, scene.spawn.position, scene_mod.SPAWN_CLEARANCE)
    sweep_pitch = (0.0, np.deg2rad(40.0), 0.0, np.deg2rad(-40.0))
    for k in range(BOOTSTRAP_SWEEP_VIEWS):
        if len(trajectory) >= config.view_budget:
            break
        yaw = scene.spawn.yaw + 2.0 * np.pi * k / BOOTSTRAP_SWEEP_VIEWS
        capture(Pose(scene.spawn.position, sweep_pitch[k % len(sweep_pitch)], yaw))

    iteration = 0
    while len(trajectory) < config.view_budget:
        esdf_grid = compute_esdf(grid)
        frontier_cells = detect_frontiers(grid)
        clusters = cluster_frontiers(grid.spec, frontier_cells,
                                     config.cluster_split_extent, tracker)
        if config.min_cluster_cells > 1:
            # chase substantial frontiers first; sliver clusters only become
            # targets once nothing bigger is left, so the frontier set still
            # empties and the final reconstruction phase can engage
            big = [c for c in clusters if len(c.cells) >= config.min_cluster_cells]
            clusters = big if big else clusters
        if needs_surface:
            elements = surface_elements(extract_mesh(grid), field_)
        else:
            elements = []
        snapshot = PlanSnapshot(grid=grid, esdf=esdf_grid,
                                frontier_cells=frontier_cells,
                                frontier_clusters=clusters,
                                surface_elements=elements,
                                agent=agent, cam=cam)

        # final-phase convergence: stop once surface uncertainty bottoms out
        if (len(frontier_cells) == 0 and config.variant is Variant.V5
                and field_.band_mean(grid) < 1.1 * config.sigma_floor):
            break

        try:
            seq, timing, tasks = plan_iteration(
                snapshot, plan_cfg, mode_override=mode_override,
                enabled_kinds=enabled_kinds)
        except NoTasksAvailable:
            break

        executed = 0
        for pose in seq.poses:
            if len(trajectory) >= config.view_budget:
                break
            capture(pose)
            executed += 1

        n_exp = sum(1 for t in tasks if t.kind is TaskKind.EXPLORATION)
        n_rec = sum(1 for t in tasks if t.kind is TaskKind.RECONSTRUCTION)
        record = IterationRecord(
            iteration=iteration, mode=seq.mode.value,
            n_exploration=n_exp, n_reconstruction=n_rec,
            n_executed=executed, views_after=len(trajectory),
            path_length_m=path_length,
            coverage_ratio=_coverage(grid, reachable),
            mean_sigma=field_.band_mean(grid),
            t_task=timing.t_task, t_atsp=timing.t_atsp, t_switch=timing.t_switch)
        records.append(record)
        if on_iteration is not None:
            on_iteration(record, snapshot, seq)
        iteration += 1

    mesh = extract_mesh(grid)
    sigmas = field_.sigma_at_points(mesh.vertices) if len(mesh.vertices) else np.zeros(0)
    if mesh.is_empty:
        acc = comp = float("nan")
        recall = 0.0
    else:
        acc, comp, recall = compute_metrics(mesh, scene, config.metric_samples)
    metrics = EpisodeMetrics(
        accuracy_cm=acc, completion_cm=comp, recall=recall,
        coverage_ratio=_coverage(grid, reachable),
        path_length_m=path_length, views_used=len(trajectory),
        t_gp=sum(r.t_sp for r in records), records=records)
    return EpisodeResult(config=config, scene=scene, grid=grid,
                         uncertainty=field_, mesh=mesh, mesh_sigmas=sigmas,
                         trajectory=trajectory, metrics=metrics)


def ground_truth_surface_samples(scene, n_samples, seed=0):
    """Uniform area samples on solid/non-solid boundary faces.

    Faces on the outer grid edge do not count: beyond the sealed shell
    there is no non-solid side."""
    solid = scene.solid
    faces = []  # (axis, +1/-1, solid-voxel index)
    for axis in range(3):
        for sign in (-1, 1):
            shifted = np.roll(solid, -sign, axis=axis)
            edge = [slice(None)] * 3
            edge[axis] = -1 if sign == 1 else 0
            shifted[tuple(edge)] = True  # pretend solid beyond the grid edge
            exposed = solid & ~shifted
            for idx in np.argwhere(exposed):
                faces.append((axis, sign, idx))
    if not faces:
        raise EmptyMesh("scene has no exposed surface")

    res = scene.spec.resolution
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(faces), size=n_samples)
    uv = rng.random(size=(n_samples, 2))
    out = np.empty((n_samples, 3))
    for k, (pick, (u, v)) in enumerate(zip(picks, uv)):
        axis, sign, idx = faces[pick]
        center = scene.spec.index_to_world(idx)
        point = center.copy()
        point[axis] += sign * res / 2.0
        other = [a for a in range(3) if a != axis]
        point[other[0]] += (u - 0.5) * res
        point[other[1]] += (v - 0.5) * res
        out[k] = point
    return out


def mesh_surface_samples(mesh, n_samples, seed=0):
    """Uniform area samples over mesh triangles."""
    if mesh.is_empty:
        raise EmptyMesh("cannot sample an empty mesh")
    v = mesh.vertices
    tris = mesh.triangles
    a, b, c = v[tris[:, 0]], v[tris[:, 1]], v[tris[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    total = areas.sum()
    if total <= 0:
        raise EmptyMesh("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(tris), size=n_samples, p=areas / total)
    r1 = np.sqrt(rng.random(n_samples))
    r2 = rng.random(n_samples)
    w0 = 1.0 - r1
    w1 = r1 * (1.0 - r2)
    w2 = r1 * r2
    return (a[picks] * w0[:, None] + b[picks] * w1[:, None] + c[picks] * w2[:, None])


def compute_metrics(mesh, scene, n_samples, seed=0):
    """(accuracy_cm, completion_cm, recall) against the voxel ground truth.

    Accuracy: mean nearest-neighbor distance from mesh samples to ground
    truth samples. Completion: the reverse direction. Recall: fraction of
    ground-truth samples within 5 cm of a mesh sample."""
    from scipy.spatial import cKDTree

    if mesh.is_empty:
        raise EmptyMesh("metrics need a non-empty mesh")
    rec = mesh_surface_samples(mesh, n_samples, seed=seed)
    gt = ground_truth_surface_samples(scene, n_samples, seed=seed + 1)
    d_rec_to_gt, _ = cKDTree(gt).query(rec, workers=-1)
    d_gt_to_rec, _ = cKDTree(rec).query(gt, workers=-1)
    accuracy_cm = float(d_rec_to_gt.mean() * 100.0)
    completion_cm = float(d_gt_to_rec.mean() * 100.0)
    recall = float((d_gt_to_rec < 0.05).mean())
    return accuracy_cm, completion_cm, recall


_MAP_HEADER = struct.Struct("<4sH3I d 3d")


def save_map(path, grid):
    """Map dump: scene-style container with one state byte per voxel."""
    nx, ny, nz = grid.spec.dims
    header = _MAP_HEADER.pack(scene_mod.MAP_MAGIC, 1, nx, ny, nz,
                              grid.spec.resolution, *grid.spec.origin)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.state.ravel(order="F").tobytes())


def load_map(path):
    from .errors import FormatError
    from .geometry import GridSpec

    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _MAP_HEADER.size:
        raise FormatError("truncated map header")
    magic, version, nx, ny, nz, res, ox, oy, oz = _MAP_HEADER.unpack_from(data, 0)
    if magic != scene_mod.MAP_MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    n = nx * ny * nz
    if len(data) != _MAP_HEADER.size + n:
        raise FormatError("map body length mismatch")
    state = np.frombuffer(data, dtype=np.uint8, offset=_MAP_HEADER.size)
    spec = GridSpec(origin=np.array([ox, oy, oz]), resolution=res, dims=(nx, ny, nz))
    grid = OccupancyGrid(spec)
    grid.state = state.reshape((nx, ny, nz), order="F").copy()
    return grid


def export_artifacts(result, out_dir):
    """Write the episode artifact set into out_dir.

    iterations.csv, trajectory.csv, final mesh, and the map dump are
    bit-stable across runs of the same config; timings.csv holds the
    wall-clock planning times and is excluded from that guarantee."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "iterations.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "mode", "n_exploration", "n_reconstruction",
                    "n_executed", "views_after", "path_length_m",
                    "coverage_ratio", "mean_sigma"])
        for r in result.metrics.records:
            w.writerow([r.iteration, r.mode, r.n_exploration, r.n_reconstruction,
                        r.n_executed, r.views_after, repr(r.path_length_m),
                        repr(r.coverage_ratio), repr(r.mean_sigma)])
    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "t_task", "t_atsp", "t_switch", "t_sp"])
        for r in result.metrics.records:
            w.writerow([r.iteration, repr(r.t_task), repr(r.t_atsp),
                        repr(r.t_switch), repr(r.t_sp)])
    with open(os.path.join(out_dir, "trajectory.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["view", "x", "y", "z", "pitch", "yaw"])
        for k, pose in enumerate(result.trajectory):
            w.writerow([k, repr(pose.position[0]), repr(pose.position[1]),
                        repr(pose.position[2]), repr(pose.pitch), repr(pose.yaw)])
    if not result.mesh.is_empty:
        save_mesh(os.path.join(out_dir, "mesh.txt"), result.mesh, result.mesh_sigmas)
    save_map(os.path.join(out_dir, "map.vmap"), result.grid)
