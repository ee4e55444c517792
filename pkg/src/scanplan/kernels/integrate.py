"""Depth-scan integration: occupancy carving plus truncated-SDF averaging.

Rays are processed strictly in pixel order so results are reproducible.
State codes match mapping: 0 unknown, 1 empty, 2 occupied. Evidence rules:

  * voxels fully in front of the hit (exit <= depth) carry empty evidence,
  * the voxel containing the hit point becomes occupied,
  * no-hit rays carve empty up to max_range,
  * an occupied voxel only flips to empty when its TSDF sits on the free
    side (value > 0) or it has never received a TSDF observation,
  * nothing ever returns to unknown.

TSDF updates apply to voxels whose center projection lies within the
truncation band of the hit; the walk continues one band past the surface.
Returns the inclusive index box of changed voxels, lo_x = -1 when clean.
"""

import numpy as np

from ._compat import njit

UNKNOWN = 0
EMPTY = 1
OCCUPIED = 2


@njit(cache=True)
def integrate_rays_nb(state, tsdf, weight, grid_origin, res, origin, dirs,
                      depths, max_range, tau):
    nx, ny, nz = state.shape
    dirty = np.empty(6, dtype=np.int64)
    dirty[0] = dirty[1] = dirty[2] = 2 ** 62
    dirty[3] = dirty[4] = dirty[5] = -1

    ix0 = int(np.floor((origin[0] - grid_origin[0]) / res))
    iy0 = int(np.floor((origin[1] - grid_origin[1]) / res))
    iz0 = int(np.floor((origin[2] - grid_origin[2]) / res))

    for r in range(dirs.shape[0]):
        d = depths[r]
        has_hit = np.isfinite(d)
        walk_limit = d + tau if has_hit else max_range

        ix, iy, iz = ix0, iy0, iz0
        tmax = np.full(3, np.inf)
        tdelta = np.full(3, np.inf)
        step = np.zeros(3, dtype=np.int64)
        for k in range(3):
            dk = dirs[r, k]
            lo = ix0 if k == 0 else (iy0 if k == 1 else iz0)
            if dk > 0.0:
                step[k] = 1
                tmax[k] = (grid_origin[k] + (lo + 1) * res - origin[k]) / dk
                tdelta[k] = res / dk
            elif dk < 0.0:
                step[k] = -1
                tmax[k] = (grid_origin[k] + lo * res - origin[k]) / dk
                tdelta[k] = res / -dk

        t_entry = 0.0
        while True:
            axis = 0
            if tmax[1] < tmax[axis]:
                axis = 1
            if tmax[2] < tmax[axis]:
                axis = 2
            t_exit = tmax[axis]

            changed = False
            if has_hit:
                cx = grid_origin[0] + (ix + 0.5) * res
                cy = grid_origin[1] + (iy + 0.5) * res
                cz = grid_origin[2] + (iz + 0.5) * res
                t_center = ((cx - origin[0]) * dirs[r, 0]
                            + (cy - origin[1]) * dirs[r, 1]
                            + (cz - origin[2]) * dirs[r, 2])
                sdf = d - t_center
                if -tau <= sdf <= tau:
                    w = weight[ix, iy, iz]
                    tsdf[ix, iy, iz] = (tsdf[ix, iy, iz] * w + sdf) / (w + 1.0)
                    weight[ix, iy, iz] = w + 1.0
                    changed = True

            s = state[ix, iy, iz]
            if has_hit and t_entry <= d < t_exit:
                if s != OCCUPIED:
                    state[ix, iy, iz] = OCCUPIED
                    changed = True
            elif (not has_hit) or t_exit <= d:
                if s == OCCUPIED:
                    if weight[ix, iy, iz] == 0.0 or tsdf[ix, iy, iz] > 0.0:
                        state[ix, iy, iz] = EMPTY
                        changed = True
                elif s != EMPTY:
                    state[ix, iy, iz] = EMPTY
                    changed = True

            if changed:
                if ix < dirty[0]:
                    dirty[0] = ix
                if iy < dirty[1]:
                    dirty[1] = iy
                if iz < dirty[2]:
                    dirty[2] = iz
                if ix > dirty[3]:
                    dirty[3] = ix
                if iy > dirty[4]:
                    dirty[4] = iy
                if iz > dirty[5]:
                    dirty[5] = iz

            if t_exit >= walk_limit:
                break
            if axis == 0:
                ix += step[0]
                if ix < 0 or ix >= nx:
                    break
            elif axis == 1:
                iy += step[1]
                if iy < 0 or iy >= ny:
                    break
            else:
                iz += step[2]
                if iz < 0 or iz >= nz:
                    break
            tmax[axis] += tdelta[axis]
            t_entry = t_exit

    if dirty[3] < 0:
        dirty[0] = dirty[1] = dirty[2] = -1
    return dirty


# The fallback runs the identical per-ray walk uncompiled; integration has
# order-dependent accumulation, so lockstep vectorization would reorder
# float sums and break cross-backend parity.
integrate_rays_np = integrate_rays_nb.py_func if hasattr(integrate_rays_nb, "py_func") else integrate_rays_nb
