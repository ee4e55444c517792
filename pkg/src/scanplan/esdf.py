"""Euclidean distance field over the occupancy grid.

UNKNOWN counts as an obstacle alongside OCCUPIED: viewpoints and paths may
only rely on space the agent has actually observed to be free. The field
is recomputed exactly per planning iteration; desk-scale grids make that
cheaper than maintaining an incremental transform.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import OutOfBounds
from .mapping import EMPTY


@dataclass(frozen=True)
class EsdfGrid:
    """Per-voxel distance (meters) to the nearest obstacle voxel center."""

    spec: object
    distance: np.ndarray


def compute_esdf(grid):
    """Exact distance transform; +inf everywhere when no obstacle exists."""
    obstacle = (grid.state != EMPTY).astype(np.uint8)
    d2 = kernels.edt_sq(obstacle)
    distance = np.where(
        d2 >= kernels.INF_D2, np.inf,
        np.sqrt(d2.astype(np.float64)) * grid.spec.resolution)
    return EsdfGrid(spec=grid.spec, distance=distance)


def clearance(esdf, point):
    """Trilinear interpolation of the stored distances at a world point."""
    point = np.asarray(point, dtype=np.float64).reshape(3)
    spec = esdf.spec
    if not spec.in_bounds_point(point):
        raise OutOfBounds(f"clearance query {point} outside the grid")
    if np.isinf(esdf.distance.flat[0]):
        return float("inf")

    g = (point - spec.origin) / spec.resolution - 0.5
    dims = np.asarray(spec.dims)
    base = np.floor(g).astype(np.int64)
    base = np.clip(base, 0, np.maximum(dims - 2, 0))
    frac = np.clip(g - base, 0.0, 1.0)
    upper = np.minimum(base + 1, dims - 1)

    d = esdf.distance
    value = 0.0
    for cx in (0, 1):
        wx = frac[0] if cx else 1.0 - frac[0]
        ix = upper[0] if cx else base[0]
        for cy in (0, 1):
            wy = frac[1] if cy else 1.0 - frac[1]
            iy = upper[1] if cy else base[1]
            for cz in (0, 1):
                wz = frac[2] if cz else 1.0 - frac[2]
                iz = upper[2] if cz else base[2]
                value += wx * wy * wz * d[ix, iy, iz]
    return float(value)


def clearance_at_indices(esdf, indices):
    """Stored distance at voxel centers, vectorized over (N, 3) indices."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    return esdf.distance[idx[:, 0], idx[:, 1], idx[:, 2]]
