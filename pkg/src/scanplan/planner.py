"""Adaptive view-path planning: mode switching, A* path costs, open ATSP
tours, execution-prefix truncation and along-path pose sampling.

The open tour reduces to a standard ATSP by giving every node a zero-cost
edge back to the agent start, so the solver's closing edge is free and the
reported total is the open-path length. Small instances solve exactly with
a Held-Karp subset DP; larger ones use multi-start nearest-neighbor
construction polished by Or-opt segment moves (lengths 1-3), which never
degrades the construction cost.
"""

import enum
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import MatrixNotSquare, NoPath, NoTasksAvailable
from .geometry import Pose, wrap_yaw
from .mapping import EMPTY
from .taskgen import TaskKind, gen_exploration_tasks, gen_reconstruction_tasks

UNREACHABLE_COST = 1.0e6
EXACT_SOLVER_MAX_TASKS = 12
HEURISTIC_MULTISTARTS = 8
MULTISTART_MAX_TASKS = 40


class Mode(enum.Enum):
    EXPLORATION_ONLY = "exploration_only"
    MERGED = "merged"
    FINAL_RECON = "final_recon"


@dataclass(frozen=True)
class SwitchParams:
    """Mode-switch thresholds and the final-phase amplification factor."""

    near_radius: float
    near_count_threshold: int = 3
    near_fraction_threshold: float = 0.2
    final_phase_scale: float = 3.0

    def __post_init__(self):
        if min(self.near_radius, self.near_fraction_threshold,
               self.final_phase_scale) <= 0 or self.near_count_threshold <= 0:
            raise ValueError("all switch parameters must be positive")


@dataclass(frozen=True)
class Tour:
    """Visit order over task indices with per-leg A* costs."""

    order: tuple
    leg_costs: tuple
    total: float


@dataclass(frozen=True)
class ExecutionSequence:
    """The executable tour prefix and the poses sampled along its paths."""

    tasks: tuple
    poses: tuple
    cumulative_length: float
    mode: Mode


@dataclass(frozen=True)
class IterationTiming:
    t_task: float
    t_atsp: float
    t_switch: float

    @property
    def t_sp(self):
        return self.t_task + self.t_atsp + self.t_switch


def select_mode(frontier_cells, spec, p0, params):
    """Mode from the frontier census around the agent.

    Exploration-only requires strictly more than near_count_threshold
    frontier cells within near_radius AND their fraction of all frontier
    cells strictly above near_fraction_threshold. No frontiers at all
    puts the planner into the final reconstruction phase."""
    cells = np.asarray(frontier_cells).reshape(-1, 3)
    if len(cells) == 0:
        return Mode.FINAL_RECON
    centers = spec.index_to_world(cells)
    p0 = np.asarray(p0, dtype=np.float64)
    n_near = int(np.count_nonzero(
        np.linalg.norm(centers - p0, axis=1) <= params.near_radius))
    fraction = n_near / len(cells)
    if n_near > params.near_count_threshold and fraction > params.near_fraction_threshold:
        return Mode.EXPLORATION_ONLY
    return Mode.MERGED


def passable_mask(grid, esdf_grid, safe_distance):
    """EMPTY voxels whose center clearance strictly exceeds safe_distance."""
    return ((grid.state == EMPTY) & (esdf_grid.distance > safe_distance)).astype(np.uint8)


def _shortcut(mask, spec, points):
    """Greedy line-of-sight shortcutting of a polyline.

    Matches the kernel-side rule: each anchor skips forward to just
    before the first blocked segment."""
    if len(points) <= 2:
        return points
    pts = np.asarray(points, dtype=np.float64)
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = i + 1
        later = pts[i + 2:]
        if len(later):
            blocked = kernels.rays_blocked(mask, spec.origin, spec.resolution,
                                           pts[i], later)
            hit = np.flatnonzero(blocked)
            j = (i + 1 + int(hit[0])) if len(hit) else len(pts) - 1
        out.append(pts[j])
        i = j
    return out


def astar_path(start, goal, grid, esdf_grid, safe_distance, mask=None):
    """Shortest clearance-respecting path between two world positions.

    Runs 26-connected grid A* over EMPTY voxels with clearance strictly
    above safe_distance (the start voxel is always admitted so the agent
    can plan out of tight spots), then applies greedy line-of-sight
    shortcutting. Returns (polyline points, length in meters)."""
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    spec = grid.spec
    if mask is None:
        mask = passable_mask(grid, esdf_grid, safe_distance)
        mask[tuple(spec.world_to_index(start))] = 1
    s_idx = spec.world_to_index(start)
    g_idx = spec.world_to_index(goal)
    if not (spec.in_bounds_index(s_idx) and spec.in_bounds_index(g_idx)):
        raise NoPath("start or goal outside the grid")

    voxel_path = kernels.astar_grid(mask, s_idx, g_idx, spec.resolution)
    if len(voxel_path) == 0:
        raise NoPath(f"no clearance-safe path from {start} to {goal}")

    points = [start]
    for row in voxel_path[1:-1]:
        points.append(spec.index_to_world(row))
    if not np.array_equal(s_idx, g_idx):
        points.append(goal)
    elif not np.array_equal(start, goal):
        points.append(goal)
    points = _shortcut(mask, spec, points)
    length = float(sum(np.linalg.norm(points[i + 1] - points[i])
                       for i in range(len(points) - 1)))
    return points, length


def build_cost_matrix(p0, tasks, grid, esdf_grid, safe_distance):
    """(n+1)^2 travel costs: row/col 0 is the agent start.

    Column 0 is zero (free return edge, making the open tour an ATSP);
    unreachable pairs carry a large finite penalty so the matrix stays
    square and the solver pushes them to the tour tail. Each row comes
    from one multi-goal shortest-path search whose leg values match
    per-pair search plus shortcutting."""
    if not tasks:
        raise ValueError("need at least one task")
    spec = grid.spec
    mask = passable_mask(grid, esdf_grid, safe_distance)
    p0 = np.asarray(p0, dtype=np.float64)
    mask[tuple(spec.world_to_index(p0))] = 1

    positions = np.array([p0] + [t.view.position for t in tasks])
    # crop to the passable bounding box: paths cannot leave it, and the
    # searches get much better memory locality on young, small maps
    occ = np.argwhere(mask > 0)
    lo = occ.min(axis=0)
    hi = occ.max(axis=0) + 1
    sub = np.ascontiguousarray(mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]])
    sub_origin = spec.origin + lo * spec.resolution
    costs = kernels.cost_matrix(sub, sub_origin, spec.resolution, positions)
    costs[~np.isfinite(costs)] = UNREACHABLE_COST
    costs[:, 0] = 0.0  # free return edge to the agent node
    return costs


def _held_karp(costs):
    """Exact open-path DP over task subsets; start node is 0."""
    m = costs.shape[0] - 1
    full = (1 << m) - 1
    dp = np.full((1 << m, m), np.inf)
    parent = np.full((1 << m, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = costs[0, j + 1]
    for mask in range(1, full + 1):
        for j in range(m):
            bit = 1 << j
            if not mask & bit:
                continue
            cur = dp[mask, j]
            if not np.isfinite(cur):
                continue
            rest = mask
            for k in range(m):
                if mask & (1 << k):
                    continue
                cand = cur + costs[j + 1, k + 1]
                nxt = mask | (1 << k)
                if cand < dp[nxt, k]:
                    dp[nxt, k] = cand
                    parent[nxt, k] = j
    end = int(np.argmin(dp[full]))
    order = [end]
    mask = full
    while parent[mask, order[-1]] >= 0:
        j = order[-1]
        order.append(int(parent[mask, j]))
        mask ^= 1 << j
    order.reverse()
    return order


def _nearest_neighbor(costs, first=None):
    m = costs.shape[0] - 1
    unvisited = set(range(m))
    order = []
    cur = 0
    if first is not None:
        order.append(first)
        unvisited.remove(first)
        cur = first + 1
    while unvisited:
        nxt = min(unvisited, key=lambda k: (costs[cur, k + 1], k))
        order.append(nxt)
        unvisited.remove(nxt)
        cur = nxt + 1
    return order


def _tour_cost(costs, order):
    total = costs[0, order[0] + 1]
    for a, b in zip(order, order[1:]):
        total += costs[a + 1, b + 1]
    return total


def _or_opt(costs, order):
    """Or-opt to convergence: relocate segments of length 1-3.

    Each pass evaluates every (segment, insertion gap) move with O(1)
    edge deltas, vectorized over gaps, and applies the best strictly
    improving move; ties break toward the smallest (length, position,
    gap) triple so the result is deterministic."""
    order = list(order)
    while True:
        m = len(order)
        ext = np.empty(m + 1, dtype=np.int64)
        ext[0] = 0
        ext[1:] = np.asarray(order) + 1  # matrix node ids, 0 = agent
        best = (-1e-12, None)
        for seg_len in (1, 2, 3):
            if seg_len >= m:
                continue
            for i in range(1, m - seg_len + 2):  # segment = ext[i : i+seg_len]
                p, s0 = ext[i - 1], ext[i]
                s1, q = ext[i + seg_len - 1], ext[i + seg_len] if i + seg_len <= m else None
                if q is None:
                    removal = -costs[p, s0]
                else:
                    removal = costs[p, q] - costs[p, s0] - costs[s1, q]
                # candidate gaps (a, b) in the tour with the segment removed
                rest = np.concatenate([ext[:i], ext[i + seg_len:]])
                a = rest[:-1]
                b = rest[1:]
                insert_mid = costs[a, s0] + costs[s1, b] - costs[a, b]
                insert_end = np.array([costs[rest[-1], s0]])
                deltas = removal + np.concatenate([insert_mid, insert_end])
                deltas[i - 1] = np.inf  # reinserting in place is a no-op
                g = int(np.argmin(deltas))
                if deltas[g] < best[0]:
                    best = (deltas[g], (seg_len, i, g))
        if best[1] is None:
            return order
        seg_len, i, g = best[1]
        segment = order[i - 1:i - 1 + seg_len]
        rest = order[:i - 1] + order[i - 1 + seg_len:]
        order = rest[:g] + segment + rest[g:]


def solve_atsp(costs, method="auto"):
    """Open tour over the cost matrix, starting at node 0.

    method: "auto" picks exact Held-Karp up to EXACT_SOLVER_MAX_TASKS
    tasks and the heuristic beyond; "exact"/"heuristic" force a solver."""
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
        raise MatrixNotSquare(f"cost matrix shape {costs.shape}")
    n = costs.shape[0]
    if n < 2:
        raise ValueError("need the agent plus at least one task")
    m = n - 1

    if method == "auto":
        method = "exact" if m <= EXACT_SOLVER_MAX_TASKS else "heuristic"
    if method == "exact":
        order = _held_karp(costs)
    elif method == "heuristic":
        candidates = [_or_opt(costs, _nearest_neighbor(costs))]
        if m <= MULTISTART_MAX_TASKS:
            starts = sorted(range(m), key=lambda k: (costs[0, k + 1], k))
            for first in starts[:HEURISTIC_MULTISTARTS]:
                candidates.append(_or_opt(costs, _nearest_neighbor(costs, first=first)))
        order = min(candidates, key=lambda o: (_tour_cost(costs, o), tuple(o)))
    else:
        raise ValueError(f"unknown method {method!r}")

    legs = [float(costs[0, order[0] + 1])]
    for a, b in zip(order, order[1:]):
        legs.append(float(costs[a + 1, b + 1]))
    return Tour(order=tuple(order), leg_costs=tuple(legs), total=float(sum(legs)))


def sample_leg_poses(points, step, end_pose):
    """Poses spaced at most `step` apart along a polyline, endpoints included.

    Intermediate poses face along the direction of travel with zero
    pitch; the final pose adopts the task's own orientation."""
    pts = [np.asarray(p, dtype=np.float64) for p in points]
    seg_vecs = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
    seg_lens = [float(np.linalg.norm(v)) for v in seg_vecs]
    total = sum(seg_lens)
    if total == 0.0:
        return [end_pose]
    n_steps = max(1, int(np.ceil(total / step - 1e-12)))
    arc_points = np.linspace(0.0, total, n_steps + 1)

    poses = []
    cum = np.concatenate([[0.0], np.cumsum(seg_lens)])
    for k, s in enumerate(arc_points):
        if k == len(arc_points) - 1:
            poses.append(end_pose)
            break
        seg = int(np.searchsorted(cum, s, side="right")) - 1
        seg = min(seg, len(seg_vecs) - 1)
        local = s - cum[seg]
        frac = local / seg_lens[seg] if seg_lens[seg] > 0 else 0.0
        pos = pts[seg] + seg_vecs[seg] * frac
        heading = seg_vecs[seg]
        yaw = wrap_yaw(np.arctan2(heading[1], heading[0])) if (heading[0] or heading[1]) else 0.0
        poses.append(Pose(pos, 0.0, yaw))
    return poses


@dataclass(frozen=True)
class PlanConfig:
    """Planner-level knobs shared across iterations."""

    gen_params: object
    switch_params: SwitchParams
    exec_budget: float          # tour-prefix path length cap, meters
    path_step: float = 0.2     # along-path pose sampling resolution, meters
    solver: str = "auto"


@dataclass(frozen=True)
class PlanSnapshot:
    """Immutable planning inputs captured at iteration start."""

    grid: object
    esdf: object
    frontier_cells: np.ndarray
    frontier_clusters: list
    surface_elements: list
    agent: Pose
    cam: object


ALL_KINDS = frozenset((TaskKind.EXPLORATION, TaskKind.RECONSTRUCTION))


def plan_iteration(snapshot, config, mode_override=None, enabled_kinds=ALL_KINDS):
    """One full planning pass: mode, tasks, tour, truncation, sampling.

    enabled_kinds lets ablation variants disable a task family on top of
    the mode's own gating. Returns (ExecutionSequence, IterationTiming,
    tasks); raises NoTasksAvailable when every eligible generator comes
    back empty."""
    t0 = time.perf_counter()
    mode = select_mode(snapshot.frontier_cells, snapshot.grid.spec,
                       snapshot.agent.position, config.switch_params)
    t_switch = time.perf_counter() - t0
    if mode_override is not None:
        mode = mode_override

    gen = config.gen_params
    exec_budget = config.exec_budget
    path_step = config.path_step
    if mode is Mode.FINAL_RECON:
        scale = config.switch_params.final_phase_scale
        gen = gen.scaled(scale)
        exec_budget = scale * exec_budget
        path_step = scale * path_step

    t0 = time.perf_counter()
    tasks = []
    if mode in (Mode.EXPLORATION_ONLY, Mode.MERGED) and TaskKind.EXPLORATION in enabled_kinds:
        exp_tasks, _ = gen_exploration_tasks(
            snapshot.frontier_clusters, gen, snapshot.grid, snapshot.esdf,
            snapshot.cam)
        tasks.extend(exp_tasks)
    if mode in (Mode.MERGED, Mode.FINAL_RECON) and TaskKind.RECONSTRUCTION in enabled_kinds:
        tasks.extend(gen_reconstruction_tasks(
            snapshot.grid, snapshot.esdf, snapshot.surface_elements,
            snapshot.agent.position, gen, snapshot.cam))
    if not tasks:
        raise NoTasksAvailable(f"no tasks in mode {mode.value}")

    costs = build_cost_matrix(snapshot.agent.position, tasks, snapshot.grid,
                              snapshot.esdf, gen.safe_distance)
    t_task = time.perf_counter() - t0

    t0 = time.perf_counter()
    tour = solve_atsp(costs, method=config.solver)
    t_atsp = time.perf_counter() - t0

    # truncate to the prefix within the execution budget; the first task
    # always executes, but unreachable (penalty-cost) legs never do
    chosen = []
    cum = 0.0
    for task_idx, leg in zip(tour.order, tour.leg_costs):
        if leg >= UNREACHABLE_COST:
            break
        if chosen and cum + leg > exec_budget:
            break
        chosen.append(task_idx)
        cum += leg
    if not chosen:
        raise NoTasksAvailable("every planned task is unreachable")

    mask = passable_mask(snapshot.grid, snapshot.esdf, gen.safe_distance)
    mask[tuple(snapshot.grid.spec.world_to_index(snapshot.agent.position))] = 1
    poses = []
    prev = snapshot.agent.position
    for task_idx in chosen:
        task = tasks[task_idx]
        points, _ = astar_path(prev, task.view.position, snapshot.grid,
                               snapshot.esdf, gen.safe_distance, mask=mask)
        leg_poses = sample_leg_poses(points, path_step, task.view)
        if poses and len(leg_poses) > 1 and np.array_equal(
                poses[-1].position, leg_poses[0].position):
            leg_poses = leg_poses[1:]
        poses.extend(leg_poses)
        prev = task.view.position

    seq = ExecutionSequence(tasks=tuple(tasks[i] for i in chosen),
                            poses=tuple(poses), cumulative_length=cum, mode=mode)
    return seq, IterationTiming(t_task=t_task, t_atsp=t_atsp, t_switch=t_switch), tasks
