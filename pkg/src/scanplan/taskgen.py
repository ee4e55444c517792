"""Exploration and reconstruction task generation.

Exploration tasks: per frontier cluster, sample candidate viewpoints on a
deterministic spherical-shell lattice around the cluster center and keep
the candidate seeing the largest number of cluster cells. Reconstruction
tasks: decimate the current surface, cluster the local high-uncertainty
elements, and per cluster keep the candidate with the highest
alignment-weighted uncertainty gain.

Every argmax breaks ties toward the smallest candidate index, so task
output is deterministic regardless of evaluation order.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .esdf import clearance
from .geometry import Pose, in_frustum_mask, look_at_angles
from .mapping import EMPTY, OCCUPIED
from .surface import downsample_surface

DECIMATION_ROUNDS = 5


class TaskKind(enum.Enum):
    EXPLORATION = "exploration"
    RECONSTRUCTION = "reconstruction"


@dataclass(frozen=True)
class Task:
    """A planned viewpoint tagged with its origin and score.

    gain holds the visible-cell count for exploration tasks and the
    surface-uncertainty gain for reconstruction tasks."""

    kind: TaskKind
    view: Pose
    source_id: int
    gain: float


@dataclass(frozen=True)
class SurfaceCluster:
    """Surface elements grouped around a max-uncertainty seed element."""

    elements: list
    center: np.ndarray
    id: int


@dataclass(frozen=True)
class GenParams:
    """Scene-dependent task generation knobs.

    radius_min/radius_max bound the shell sampling radius, safe_distance
    is the minimum obstacle clearance for any viewpoint, local_radius
    restricts reconstruction work around the agent, cluster_radius sizes
    surface clusters, max_clusters caps them, and min_visible is the
    visible-element threshold a reconstruction candidate must meet."""

    radius_min: float
    radius_max: float
    safe_distance: float = 0.3
    local_radius: float = 2.5
    cluster_radius: float = 1.3
    max_clusters: int = 10
    min_visible: int = 5
    n_radial: int = 3
    n_azimuth: int = 16
    n_polar: int = 5
    level_pitch: bool = False  # zero viewpoint pitch (2D-style exploration)

    def __post_init__(self):
        if not 0.0 < self.radius_min < self.radius_max:
            raise ValueError("need 0 < radius_min < radius_max")
        if self.safe_distance <= 0.0:
            raise ValueError("safe_distance must be positive")
        if self.max_clusters < 1 or self.min_visible < 1:
            raise ValueError("max_clusters and min_visible must be >= 1")
        if min(self.n_radial, self.n_azimuth, self.n_polar) < 1:
            raise ValueError("shell lattice counts must be >= 1")

    def scaled(self, factor):
        """Copy with the local/cluster radii and cluster cap amplified."""
        return GenParams(
            radius_min=self.radius_min, radius_max=self.radius_max,
            safe_distance=self.safe_distance,
            local_radius=factor * self.local_radius,
            cluster_radius=factor * self.cluster_radius,
            max_clusters=max(1, int(round(factor * self.max_clusters))),
            min_visible=self.min_visible,
            n_radial=self.n_radial, n_azimuth=self.n_azimuth,
            n_polar=self.n_polar, level_pitch=self.level_pitch)


# polar lattice keeps look-at pitch comfortably inside (-pi/2, pi/2)
POLAR_LIMIT = np.deg2rad(75.0)


def shell_lattice(center, params):
    """Deterministic candidate positions: radius x elevation x azimuth."""
    center = np.asarray(center, dtype=np.float64)
    radii = np.linspace(params.radius_min, params.radius_max, params.n_radial)
    if params.n_polar == 1:
        elevations = np.array([0.0])
    else:
        elevations = np.linspace(-POLAR_LIMIT, POLAR_LIMIT, params.n_polar)
    azimuths = -np.pi + 2.0 * np.pi * np.arange(params.n_azimuth) / params.n_azimuth
    out = np.empty((len(radii) * len(elevations) * len(azimuths), 3))
    k = 0
    for r in radii:
        for el in elevations:
            for az in azimuths:
                out[k, 0] = center[0] + r * np.cos(el) * np.cos(az)
                out[k, 1] = center[1] + r * np.cos(el) * np.sin(az)
                out[k, 2] = center[2] + r * np.sin(el)
                k += 1
    return out


def sample_shell_viewpoints(center, params, grid, esdf_grid):
    """Valid candidate poses on the shell around a target center.

    A lattice position survives when it is in bounds, lies in observed
    EMPTY space, and clears obstacles by more than safe_distance, both at
    the query point and at its voxel center (the latter keeps every kept
    pose reachable for the clearance-constrained path search). Kept poses
    look at the center."""
    center = np.asarray(center, dtype=np.float64)
    positions = shell_lattice(center, params)
    poses = []
    for p in positions:
        if not grid.spec.in_bounds_point(p):
            continue
        idx = grid.spec.world_to_index(p)
        if grid.state[idx[0], idx[1], idx[2]] != EMPTY:
            continue
        if not esdf_grid.distance[idx[0], idx[1], idx[2]] > params.safe_distance:
            continue
        if not clearance(esdf_grid, p) > params.safe_distance:
            continue
        if np.array_equal(p, center):
            continue
        pitch, yaw = look_at_angles(p, center)
        if params.level_pitch:
            pitch = 0.0
        poses.append(Pose(p, pitch, yaw))
    return poses


def count_visible_cells(view, targets, grid, cam):
    """Targets inside the frustum with an occlusion-free ray through EMPTY."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    if len(targets) == 0:
        return 0
    vis = in_frustum_mask(view, cam, targets)
    if not vis.any():
        return 0
    blocked = kernels.rays_blocked(
        (grid.state == EMPTY).astype(np.uint8),
        grid.spec.origin, grid.spec.resolution,
        np.asarray(view.position, dtype=np.float64), targets[vis])
    return int(np.count_nonzero(blocked == 0))


def gen_exploration_tasks(clusters, params, grid, esdf_grid, cam):
    """One task per frontier cluster: the candidate seeing the most cells.

    Returns (tasks, dormant_ids); clusters with no valid candidate or a
    best count of zero are dormant and produce no task."""
    tasks = []
    dormant = set()
    for cluster in clusters:
        candidates = sample_shell_viewpoints(cluster.center, params, grid, esdf_grid)
        if not candidates:
            dormant.add(cluster.id)
            continue
        cell_centers = grid.spec.index_to_world(cluster.cells)
        best_count = 0
        best_pose = None
        for pose in candidates:
            count = count_visible_cells(pose, cell_centers, grid, cam)
            if count > best_count:
                best_count = count
                best_pose = pose
        if best_pose is None:
            dormant.add(cluster.id)
            continue
        tasks.append(Task(kind=TaskKind.EXPLORATION, view=best_pose,
                          source_id=cluster.id, gain=float(best_count)))
    return tasks, dormant


def local_surface_clustering(elements, p0, params):
    """Uncertainty-guided greedy clustering of nearby surface elements.

    Restricted to elements within local_radius of p0; repeatedly seeds at
    the remaining element of highest sigma (ties: smallest index) and
    absorbs everything within cluster_radius of the seed, until elements
    run out or max_clusters clusters exist."""
    p0 = np.asarray(p0, dtype=np.float64)
    if not elements:
        return []
    positions = np.array([e.position for e in elements])
    near = np.flatnonzero(np.linalg.norm(positions - p0, axis=1) <= params.local_radius)
    if len(near) == 0:
        return []
    sigmas = np.array([elements[i].sigma for i in near])
    remaining = list(range(len(near)))
    clusters = []
    while remaining and len(clusters) < params.max_clusters:
        rem = np.array(remaining)
        seed_slot = rem[int(np.argmax(sigmas[rem]))]  # argmax keeps first on ties
        seed_pos = positions[near[seed_slot]]
        dist = np.linalg.norm(positions[near[rem]] - seed_pos, axis=1)
        member_slots = rem[dist <= params.cluster_radius]
        members = [elements[near[s]] for s in member_slots]
        center = positions[near[member_slots]].mean(axis=0)
        clusters.append(SurfaceCluster(elements=members, center=center,
                                       id=len(clusters)))
        taken = set(member_slots.tolist())
        remaining = [s for s in remaining if s not in taken]
    return clusters


def visible_element_mask(view, cluster_elements, grid, cam):
    """Frustum plus occlusion visibility per surface element."""
    positions = np.array([e.position for e in cluster_elements])
    vis = in_frustum_mask(view, cam, positions)
    if vis.any():
        blocked = kernels.rays_blocked(
            (grid.state == EMPTY).astype(np.uint8),
            grid.spec.origin, grid.spec.resolution,
            np.asarray(view.position, dtype=np.float64), positions[vis])
        out = np.zeros(len(positions), dtype=bool)
        out[np.flatnonzero(vis)[blocked == 0]] = True
        return out
    return np.zeros(len(positions), dtype=bool)


def _gain_from_mask(view, elements, visible):
    total = 0.0
    for e, vis in zip(elements, visible):
        if not vis:
            continue
        rel = e.position - view.position
        dist = np.linalg.norm(rel)
        if dist == 0.0:
            continue
        total += abs(float(np.dot(rel / dist, e.normal))) * e.sigma
    return total


def surface_gain(view, cluster, grid, cam):
    """Sum over visible elements of |view direction . normal| * sigma."""
    if not cluster.elements:
        return 0.0
    visible = visible_element_mask(view, cluster.elements, grid, cam)
    return _gain_from_mask(view, cluster.elements, visible)


def volumetric_gain(view, field, grid, cam, n_rays, n_samples):
    """Frustum-integrated squared uncertainty, the NBV-style baseline.

    Rays follow a deterministic square sub-lattice of the pixel grid;
    each carries n_samples midpoints out to max_range. Sample weight is 1
    until the ray's first OCCUPIED voxel and 0 after; sigma reads 0
    outside the surface band."""
    if n_rays < 1 or n_samples < 1:
        raise ValueError("n_rays and n_samples must be >= 1")
    from .geometry import pixel_ray_directions

    all_dirs = pixel_ray_directions(view, cam)
    side = int(np.ceil(np.sqrt(n_rays)))
    rows = np.linspace(0, cam.image_height - 1, side).round().astype(int)
    cols = np.linspace(0, cam.image_width - 1, side).round().astype(int)
    flat = (rows[:, None] * cam.image_width + cols[None, :]).reshape(-1)[:n_rays]
    dirs = all_dirs[flat]

    pos = np.asarray(view.position, dtype=np.float64)
    hit = kernels.raycast_depths(
        (grid.state == OCCUPIED).astype(np.uint8),
        grid.spec.origin, grid.spec.resolution, pos, dirs, cam.max_range)

    t = (np.arange(n_samples) + 0.5) * (cam.max_range / n_samples)
    points = pos[None, None, :] + dirs[:, None, :] * t[None, :, None]  # (R, N, 3)
    band = grid.surface_band_mask()
    idx = grid.spec.world_to_index(points.reshape(-1, 3))
    ok = grid.spec.in_bounds_index(idx)
    sigma = np.zeros(len(idx))
    sel = idx[ok]
    in_band = band[sel[:, 0], sel[:, 1], sel[:, 2]]
    rows_ok = np.flatnonzero(ok)[in_band]
    sigma[rows_ok] = field.sigma[sel[in_band, 0], sel[in_band, 1], sel[in_band, 2]]
    sigma = sigma.reshape(len(dirs), n_samples)
    weight = t[None, :] < hit[:, None]
    return float((weight * sigma ** 2).sum() / len(dirs))


def gen_reconstruction_tasks(grid, esdf_grid, elements, p0, params, cam,
                             decimation_rounds=DECIMATION_ROUNDS):
    """Surface-refinement tasks around the agent position.

    Pipeline: decimate the surface elements, keep those within
    local_radius of p0, cluster them seeded by uncertainty, then per
    cluster sample shell candidates, drop any seeing fewer than
    min_visible cluster elements, and emit the max-gain survivor."""
    decimated = downsample_surface(elements, decimation_rounds, grid.spec.resolution,
                                   origin=grid.spec.origin)
    clusters = local_surface_clustering(decimated, p0, params)
    tasks = []
    for cluster in clusters:
        candidates = sample_shell_viewpoints(cluster.center, params, grid, esdf_grid)
        best_gain = -1.0
        best_pose = None
        for pose in candidates:
            visible = visible_element_mask(pose, cluster.elements, grid, cam)
            if int(visible.sum()) < params.min_visible:
                continue
            gain = _gain_from_mask(pose, cluster.elements, visible)
            if gain > best_gain:
                best_gain = gain
                best_pose = pose
        if best_pose is None:
            continue
        tasks.append(Task(kind=TaskKind.RECONSTRUCTION, view=best_pose,
                          source_id=cluster.id, gain=best_gain))
    return tasks
