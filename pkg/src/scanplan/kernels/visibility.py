"""Batched occlusion tests: is the straight segment to a target clear?

A segment is blocked when any voxel strictly between the origin voxel and
the target voxel is non-traversable. Both endpoints' voxels are excluded
from the check, so a target sitting inside an occupied surface voxel is
still considered visible from free space.
"""

import numpy as np

from ._compat import njit


@njit(cache=True)
def segment_blocked_nb(traversable, grid_origin, res, ax, ay, az, bx, by, bz):
    """Scalar strictly-between occlusion test from point a to point b."""
    nx, ny, nz = traversable.shape
    ix = int(np.floor((ax - grid_origin[0]) / res))
    iy = int(np.floor((ay - grid_origin[1]) / res))
    iz = int(np.floor((az - grid_origin[2]) / res))
    tx = int(np.floor((bx - grid_origin[0]) / res))
    ty = int(np.floor((by - grid_origin[1]) / res))
    tz = int(np.floor((bz - grid_origin[2]) / res))
    if tx == ix and ty == iy and tz == iz:
        return np.uint8(0)
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0.0:
        return np.uint8(0)
    dx, dy, dz = dx / dist, dy / dist, dz / dist

    tmax = np.full(3, np.inf)
    tdelta = np.full(3, np.inf)
    step = np.zeros(3, dtype=np.int64)
    for k in range(3):
        dk = dx if k == 0 else (dy if k == 1 else dz)
        lo = ix if k == 0 else (iy if k == 1 else iz)
        if dk > 0.0:
            step[k] = 1
            tmax[k] = (grid_origin[k] + (lo + 1) * res - (ax if k == 0 else (ay if k == 1 else az))) / dk
            tdelta[k] = res / dk
        elif dk < 0.0:
            step[k] = -1
            tmax[k] = (grid_origin[k] + lo * res - (ax if k == 0 else (ay if k == 1 else az))) / dk
            tdelta[k] = res / -dk

    while True:
        axis = 0
        if tmax[1] < tmax[axis]:
            axis = 1
        if tmax[2] < tmax[axis]:
            axis = 2
        if tmax[axis] > dist:
            return np.uint8(0)
        if axis == 0:
            ix += step[0]
        elif axis == 1:
            iy += step[1]
        else:
            iz += step[2]
        if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
            return np.uint8(1)
        tmax[axis] += tdelta[axis]
        if ix == tx and iy == ty and iz == tz:
            return np.uint8(0)
        if traversable[ix, iy, iz] == 0:
            return np.uint8(1)


@njit(cache=True)
def rays_blocked_nb(traversable, grid_origin, res, origin, targets):
    n = targets.shape[0]
    blocked = np.zeros(n, dtype=np.uint8)
    for r in range(n):
        blocked[r] = segment_blocked_nb(
            traversable, grid_origin, res,
            origin[0], origin[1], origin[2],
            targets[r, 0], targets[r, 1], targets[r, 2])
    return blocked


def rays_blocked_np(traversable, grid_origin, res, origin, targets):
    """Lockstep-vectorized equivalent of rays_blocked_nb."""
    dims = np.asarray(traversable.shape, dtype=np.int64)
    n = targets.shape[0]
    blocked = np.zeros(n, dtype=np.uint8)

    idx0 = np.floor((origin - grid_origin) / res).astype(np.int64)
    tgt = np.floor((targets - grid_origin) / res).astype(np.int64)
    diff = targets - origin
    dist = np.linalg.norm(diff, axis=1)
    pending = ~(np.all(tgt == idx0, axis=1) | (dist == 0.0))
    if not np.any(pending):
        return blocked

    with np.errstate(invalid="ignore", divide="ignore"):
        dirs = diff / dist[:, None]
    idx = np.broadcast_to(idx0, (n, 3)).copy()
    step = np.sign(dirs).astype(np.int64)
    tmax = np.full((n, 3), np.inf)
    tdelta = np.full((n, 3), np.inf)
    pos = dirs > 0.0
    neg = dirs < 0.0
    rel_pos = np.broadcast_to(grid_origin + (idx0 + 1) * res - origin, dirs.shape)
    rel_neg = np.broadcast_to(grid_origin + idx0 * res - origin, dirs.shape)
    tmax[pos] = rel_pos[pos] / dirs[pos]
    tmax[neg] = rel_neg[neg] / dirs[neg]
    tdelta[pos] = res / dirs[pos]
    tdelta[neg] = res / -dirs[neg]

    alive = np.flatnonzero(pending)
    while alive.size:
        axis = np.argmin(tmax[alive], axis=1)
        t = tmax[alive, axis]
        keep = t <= dist[alive]
        alive, axis = alive[keep], axis[keep]
        if not alive.size:
            break
        idx[alive, axis] += step[alive, axis]
        moved = idx[alive, axis]
        oob = (moved < 0) | (moved >= dims[axis])
        blocked[alive[oob]] = 1
        alive, axis = alive[~oob], axis[~oob]
        if not alive.size:
            break
        tmax[alive, axis] += tdelta[alive, axis]
        reached = np.all(idx[alive] == tgt[alive], axis=1)
        alive = alive[~reached]
        if not alive.size:
            break
        hit = traversable[idx[alive, 0], idx[alive, 1], idx[alive, 2]] == 0
        blocked[alive[hit]] = 1
        alive = alive[~hit]
    return blocked
