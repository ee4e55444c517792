"""The agent's volumetric map: tri-state occupancy with a co-registered
TSDF, incremental frontier detection, and PCA-split frontier clustering.

Frontier predicate: an EMPTY voxel with at least one face-adjacent UNKNOWN
neighbor. Detection is incremental over the dirty box left by depth
integration; clustering groups frontier cells by 26-connectivity and
recursively bisects any group whose principal-axis extent exceeds the
split threshold.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import PoseOutOfBounds
from .geometry import pixel_ray_directions

UNKNOWN = 0
EMPTY = 1
OCCUPIED = 2

DEFAULT_SPLIT_EXTENT = 1.0


class OccupancyGrid:
    """Mutable agent map over a GridSpec; all voxels start UNKNOWN.

    truncation is the TSDF clamp band in meters (default 3 voxels)."""

    def __init__(self, spec, truncation=None):
        self.spec = spec
        self.truncation = 3.0 * spec.resolution if truncation is None else float(truncation)
        self.state = np.zeros(spec.dims, dtype=np.uint8)
        self.tsdf_value = np.zeros(spec.dims, dtype=np.float64)
        self.tsdf_weight = np.zeros(spec.dims, dtype=np.float64)
        self._frontier_mask = np.zeros(spec.dims, dtype=bool)
        self._dirty_lo = None
        self._dirty_hi = None

    @property
    def dirty_box(self):
        if self._dirty_lo is None:
            return None
        return self._dirty_lo.copy(), self._dirty_hi.copy()

    def _absorb_dirty(self, lo, hi):
        if self._dirty_lo is None:
            self._dirty_lo = lo.copy()
            self._dirty_hi = hi.copy()
        else:
            np.minimum(self._dirty_lo, lo, out=self._dirty_lo)
            np.maximum(self._dirty_hi, hi, out=self._dirty_hi)

    def surface_band_mask(self):
        """Voxels carrying near-surface TSDF evidence."""
        return (self.tsdf_weight > 0.0) & (np.abs(self.tsdf_value) < self.truncation)


def integrate_depth_scan(grid, pose, cam, img):
    """Fuse one depth image into the map; returns the changed-index box.

    Rays carve EMPTY up to the hit (or max_range when nothing was hit),
    the hit voxel becomes OCCUPIED, and near-surface voxels accumulate a
    weighted running TSDF average. Nothing ever reverts to UNKNOWN."""
    pos = np.asarray(pose.position, dtype=np.float64)
    if not grid.spec.in_bounds_point(pos):
        raise PoseOutOfBounds(f"pose {pos} outside the mapped volume")
    dirs = pixel_ray_directions(pose, cam)
    depths = np.ascontiguousarray(img.depths, dtype=np.float64).reshape(-1)
    dirty = kernels.integrate_rays(
        grid.state, grid.tsdf_value, grid.tsdf_weight,
        grid.spec.origin, grid.spec.resolution,
        pos, dirs, depths, cam.max_range, grid.truncation)
    if dirty[0] < 0:
        return None
    lo, hi = dirty[:3], dirty[3:]
    grid._absorb_dirty(lo, hi)
    return lo.copy(), hi.copy()


def certify_free_bubble(grid, center, radius):
    """Mark UNKNOWN voxels within radius of center as EMPTY.

    Models knowledge the agent gets for free from occupying a position:
    its collision-free body certifies the surrounding ball. OCCUPIED
    voxels are never touched."""
    center = np.asarray(center, dtype=np.float64)
    res = grid.spec.resolution
    r_vox = int(np.ceil(radius / res)) + 1
    c_idx = grid.spec.world_to_index(center)
    lo = np.maximum(c_idx - r_vox, 0)
    hi = np.minimum(c_idx + r_vox, np.asarray(grid.spec.dims) - 1)
    box = tuple(slice(int(a), int(b) + 1) for a, b in zip(lo, hi))
    sub = grid.state[box]
    idx = np.argwhere(sub == UNKNOWN) + lo
    if len(idx) == 0:
        return
    centers = grid.spec.index_to_world(idx)
    inside = np.linalg.norm(centers - center, axis=1) < radius
    sel = idx[inside]
    if len(sel) == 0:
        return
    grid.state[sel[:, 0], sel[:, 1], sel[:, 2]] = EMPTY
    grid._absorb_dirty(sel.min(axis=0), sel.max(axis=0))


def _frontier_predicate(state):
    """Brute-force frontier mask: EMPTY with a face-adjacent UNKNOWN."""
    empty = state == EMPTY
    unknown = state == UNKNOWN
    near_unknown = np.zeros_like(empty)
    near_unknown[1:, :, :] |= unknown[:-1, :, :]
    near_unknown[:-1, :, :] |= unknown[1:, :, :]
    near_unknown[:, 1:, :] |= unknown[:, :-1, :]
    near_unknown[:, :-1, :] |= unknown[:, 1:, :]
    near_unknown[:, :, 1:] |= unknown[:, :, :-1]
    near_unknown[:, :, :-1] |= unknown[:, :, 1:]
    return empty & near_unknown


def detect_frontiers(grid):
    """Current frontier cells as a lexicographically sorted (N, 3) array.

    Only the dirty box (padded by one voxel) is re-evaluated; results
    elsewhere are reused from the previous pass. Clears the dirty box."""
    if grid._dirty_lo is not None:
        lo = np.maximum(grid._dirty_lo - 1, 0)
        hi = np.minimum(grid._dirty_hi + 1, np.asarray(grid.spec.dims) - 1)
        # pad once more so the face-neighbor stencil sees true context
        slo = np.maximum(lo - 1, 0)
        shi = np.minimum(hi + 1, np.asarray(grid.spec.dims) - 1)
        region = tuple(slice(int(a), int(b) + 1) for a, b in zip(slo, shi))
        local = _frontier_predicate(grid.state[region])
        inner = tuple(slice(int(a - sa), int(b - sa) + 1)
                      for a, b, sa in zip(lo, hi, slo))
        target = tuple(slice(int(a), int(b) + 1) for a, b in zip(lo, hi))
        grid._frontier_mask[target] = local[inner]
        grid._dirty_lo = None
        grid._dirty_hi = None
    return np.argwhere(grid._frontier_mask)


@dataclass(frozen=True)
class FrontierCluster:
    """Connected frontier cell group with its principal-axis summary."""

    cells: np.ndarray           # (N, 3) voxel indices, lexicographically sorted
    center: np.ndarray          # centroid of cell centers, meters
    principal_axes: np.ndarray  # rows are orthonormal axes, largest first
    extents: np.ndarray         # projection spread along each axis, meters
    id: int


def jacobi_eigh_3x3(matrix, tol=1e-15, max_sweeps=64):
    """Eigen-decomposition of a symmetric 3x3 by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as rows) with each
    vector's largest-magnitude component made positive for determinism."""
    a = np.array(matrix, dtype=np.float64)
    v = np.eye(3)
    for _ in range(max_sweeps):
        off = np.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off < tol:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(3)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(-np.diag(a), kind="stable")
    vals = np.diag(a)[order]
    vecs = v[:, order].T
    for i in range(3):
        j = int(np.argmax(np.abs(vecs[i])))
        if vecs[i, j] < 0:
            vecs[i] = -vecs[i]
    return vals, vecs


class FrontierClusterTracker:
    """Keeps cluster ids stable across iterations for unchanged cell sets."""

    def __init__(self):
        self._ids = {}
        self._next = 0

    def assign(self, signature):
        if signature not in self._ids:
            self._ids[signature] = self._next
            self._next += 1
        return self._ids[signature]

    def retain(self, signatures):
        self._ids = {s: i for s, i in self._ids.items() if s in signatures}


def _pca_summary(spec, cells):
    centers = spec.index_to_world(cells)
    centroid = centers.mean(axis=0)
    rel = centers - centroid
    if len(cells) == 1:
        return centroid, np.eye(3), np.zeros(3)
    cov = rel.T @ rel / len(cells)
    _, axes = jacobi_eigh_3x3(cov)
    proj = rel @ axes.T
    extents = proj.max(axis=0) - proj.min(axis=0)
    return centroid, axes, extents


def _split_cluster(spec, cells, split_extent, out):
    centroid, axes, extents = _pca_summary(spec, cells)
    if extents.max() <= split_extent:
        out.append((cells, centroid, axes, extents))
        return
    proj = (spec.index_to_world(cells) - centroid) @ axes[0]
    low = cells[proj <= 0.0]
    high = cells[proj > 0.0]
    _split_cluster(spec, low, split_extent, out)
    _split_cluster(spec, high, split_extent, out)


def cluster_frontiers(spec, cells, split_extent=DEFAULT_SPLIT_EXTENT, tracker=None):
    """Group frontier cells (26-connectivity) and split oversized groups.

    Ids are stable across calls for unchanged clusters when the same
    tracker object is passed in."""
    from scipy import ndimage

    if tracker is None:
        tracker = FrontierClusterTracker()
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    if len(cells) == 0:
        tracker.retain(set())
        return []

    lo = cells.min(axis=0)
    hi = cells.max(axis=0)
    local = np.zeros(tuple(hi - lo + 1), dtype=np.uint8)
    local[tuple((cells - lo).T)] = 1
    labels, n_groups = ndimage.label(local, structure=np.ones((3, 3, 3)))

    pieces = []
    for g in range(1, n_groups + 1):
        group = np.argwhere(labels == g) + lo
        _split_cluster(spec, group, split_extent, pieces)

    clusters = []
    signatures = set()
    for piece_cells, centroid, axes, extents in pieces:
        order = np.lexsort((piece_cells[:, 2], piece_cells[:, 1], piece_cells[:, 0]))
        sorted_cells = np.ascontiguousarray(piece_cells[order])
        sig = sorted_cells.tobytes()
        signatures.add(sig)
        clusters.append(FrontierCluster(
            cells=sorted_cells, center=centroid,
            principal_axes=axes, extents=extents,
            id=tracker.assign(sig)))
    tracker.retain(signatures)
    return clusters
