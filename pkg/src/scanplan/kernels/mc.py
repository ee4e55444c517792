"""Zero-level marching cubes over a weight-masked TSDF volume.

Grid points are voxel centers; a cube participates only when all eight of
its corners carry TSDF weight. Corners strictly below zero count as
inside. Edge vertices are interpolated from the corner with the smaller
grid coordinate, so shared edges produce bit-identical positions in every
adjacent cube and deduplicate exactly. Vertex normals follow the TSDF
gradient (positive values sit on the free side, so +gradient is outward).

The numpy fallback classifies cubes vectorized, then walks the active ones
with the same scalar emission code the numba kernel runs.
"""

import numpy as np

from ._compat import HAS_NUMBA, njit
from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_COUNTS, TRI_TABLE

if HAS_NUMBA:
    from numba import types
    from numba.typed import Dict
else:  # plain-dict stand-ins keep the uncompiled kernel importable
    class types:
        int64 = None

    class Dict(dict):
        @staticmethod
        def empty(key_type=None, value_type=None):
            return {}


@njit(cache=True)
def _corner_gradient(tsdf, weight, x, y, z, res, out):
    """Weight-aware central-difference TSDF gradient at a grid point."""
    nx, ny, nz = tsdf.shape
    for axis in range(3):
        if axis == 0:
            ip, im = x + 1, x - 1
            has_p = ip < nx and weight[ip, y, z] > 0.0
            has_m = im >= 0 and weight[im, y, z] > 0.0
            vp = tsdf[ip, y, z] if has_p else 0.0
            vm = tsdf[im, y, z] if has_m else 0.0
        elif axis == 1:
            ip, im = y + 1, y - 1
            has_p = ip < ny and weight[x, ip, z] > 0.0
            has_m = im >= 0 and weight[x, im, z] > 0.0
            vp = tsdf[x, ip, z] if has_p else 0.0
            vm = tsdf[x, im, z] if has_m else 0.0
        else:
            ip, im = z + 1, z - 1
            has_p = ip < nz and weight[x, y, ip] > 0.0
            has_m = im >= 0 and weight[x, y, im] > 0.0
            vp = tsdf[x, y, ip] if has_p else 0.0
            vm = tsdf[x, y, im] if has_m else 0.0
        here = tsdf[x, y, z]
        if has_p and has_m:
            out[axis] = (vp - vm) / (2.0 * res)
        elif has_p:
            out[axis] = (vp - here) / res
        elif has_m:
            out[axis] = (here - vm) / res
        else:
            out[axis] = 0.0


@njit(cache=True)
def _emit_cube(tsdf, weight, origin, res, x, y, z, ci, edge_to_vid,
               verts, norms, n_verts, vid12, grad_lo, grad_hi):
    """Create or look up the vertex on every flagged edge of one cube."""
    nx, ny, nz = tsdf.shape
    flags = EDGE_TABLE[ci]
    for e in range(12):
        if flags & (1 << e) == 0:
            vid12[e] = -1
            continue
        ca = EDGE_CORNERS[e, 0]
        cb = EDGE_CORNERS[e, 1]
        ax_, ay, az = x + CORNER_OFFSETS[ca, 0], y + CORNER_OFFSETS[ca, 1], z + CORNER_OFFSETS[ca, 2]
        bx, by, bz = x + CORNER_OFFSETS[cb, 0], y + CORNER_OFFSETS[cb, 1], z + CORNER_OFFSETS[cb, 2]
        # edges are axis aligned; canonicalize to the lower corner
        if ax_ != bx:
            axis = 0
            swap = ax_ > bx
        elif ay != by:
            axis = 1
            swap = ay > by
        else:
            axis = 2
            swap = az > bz
        if swap:
            lx, ly, lz = bx, by, bz
            ux, uy, uz = ax_, ay, az
        else:
            lx, ly, lz = ax_, ay, az
            ux, uy, uz = bx, by, bz
        key = ((axis * nx + lx) * ny + ly) * nz + lz
        if key in edge_to_vid:
            vid12[e] = edge_to_vid[key]
            continue

        v_lo = tsdf[lx, ly, lz]
        v_hi = tsdf[ux, uy, uz]
        t = v_lo / (v_lo - v_hi)
        px = origin[0] + (lx + 0.5) * res
        py = origin[1] + (ly + 0.5) * res
        pz = origin[2] + (lz + 0.5) * res
        if axis == 0:
            px += t * res
        elif axis == 1:
            py += t * res
        else:
            pz += t * res

        _corner_gradient(tsdf, weight, lx, ly, lz, res, grad_lo)
        _corner_gradient(tsdf, weight, ux, uy, uz, res, grad_hi)
        gx = grad_lo[0] + t * (grad_hi[0] - grad_lo[0])
        gy = grad_lo[1] + t * (grad_hi[1] - grad_lo[1])
        gz = grad_lo[2] + t * (grad_hi[2] - grad_lo[2])
        norm = np.sqrt(gx * gx + gy * gy + gz * gz)
        if norm < 1e-12:
            gx, gy, gz = 0.0, 0.0, 1.0
        else:
            gx, gy, gz = gx / norm, gy / norm, gz / norm

        verts[n_verts, 0] = px
        verts[n_verts, 1] = py
        verts[n_verts, 2] = pz
        norms[n_verts, 0] = gx
        norms[n_verts, 1] = gy
        norms[n_verts, 2] = gz
        edge_to_vid[key] = n_verts
        vid12[e] = n_verts
        n_verts += 1
    return n_verts


@njit(cache=True)
def _cube_index(tsdf, weight, x, y, z):
    """Case index for a cube, or -1 when a corner lacks TSDF weight."""
    ci = 0
    for c in range(8):
        cx = x + CORNER_OFFSETS[c, 0]
        cy = y + CORNER_OFFSETS[c, 1]
        cz = z + CORNER_OFFSETS[c, 2]
        if weight[cx, cy, cz] <= 0.0:
            return -1
        if tsdf[cx, cy, cz] < 0.0:
            ci |= 1 << c
    return ci


@njit(cache=True)
def mc_extract_nb(tsdf, weight, origin, res):
    nx, ny, nz = tsdf.shape
    n_tris = 0
    for x in range(nx - 1):
        for y in range(ny - 1):
            for z in range(nz - 1):
                ci = _cube_index(tsdf, weight, x, y, z)
                if ci > 0:
                    n_tris += TRI_COUNTS[ci]

    verts = np.empty((3 * n_tris, 3), dtype=np.float64)
    norms = np.empty((3 * n_tris, 3), dtype=np.float64)
    tris = np.empty((n_tris, 3), dtype=np.int64)
    edge_to_vid = Dict.empty(key_type=types.int64, value_type=types.int64)
    vid12 = np.empty(12, dtype=np.int64)
    grad_lo = np.empty(3, dtype=np.float64)
    grad_hi = np.empty(3, dtype=np.float64)

    n_verts = 0
    k = 0
    for x in range(nx - 1):
        for y in range(ny - 1):
            for z in range(nz - 1):
                ci = _cube_index(tsdf, weight, x, y, z)
                if ci <= 0 or TRI_COUNTS[ci] == 0:
                    continue
                n_verts = _emit_cube(tsdf, weight, origin, res, x, y, z, ci,
                                     edge_to_vid, verts, norms, n_verts,
                                     vid12, grad_lo, grad_hi)
                for t in range(TRI_COUNTS[ci]):
                    tris[k, 0] = vid12[TRI_TABLE[ci, 3 * t]]
                    tris[k, 1] = vid12[TRI_TABLE[ci, 3 * t + 1]]
                    tris[k, 2] = vid12[TRI_TABLE[ci, 3 * t + 2]]
                    k += 1
    return verts[:n_verts], norms[:n_verts], tris[:k]


_emit_cube_py = _emit_cube.py_func if hasattr(_emit_cube, "py_func") else _emit_cube


def mc_extract_np(tsdf, weight, origin, res):
    w = weight > 0.0
    inside = tsdf < 0.0
    sl = {0: np.s_[:-1], 1: np.s_[1:]}
    valid = np.ones(tuple(d - 1 for d in tsdf.shape), dtype=bool)
    ci = np.zeros(valid.shape, dtype=np.int64)
    for c in range(8):
        ox, oy, oz = CORNER_OFFSETS[c]
        corner = (sl[ox], sl[oy], sl[oz])
        valid &= w[corner]
        ci |= inside[corner].astype(np.int64) << c

    counts = TRI_COUNTS[ci]
    active = valid & (counts > 0)
    cubes = np.argwhere(active)  # lexicographic, same order as the numba loops
    n_tris = int(counts[active].sum())

    verts = np.empty((3 * n_tris, 3), dtype=np.float64)
    norms = np.empty((3 * n_tris, 3), dtype=np.float64)
    tris = np.empty((n_tris, 3), dtype=np.int64)
    edge_to_vid = {}
    vid12 = np.empty(12, dtype=np.int64)
    grad_lo = np.empty(3, dtype=np.float64)
    grad_hi = np.empty(3, dtype=np.float64)

    n_verts = 0
    k = 0
    for x, y, z in cubes:
        case = int(ci[x, y, z])
        n_verts = _emit_cube_py(tsdf, weight, origin, res, int(x), int(y), int(z),
                                case, edge_to_vid, verts, norms, n_verts,
                                vid12, grad_lo, grad_hi)
        for t in range(TRI_COUNTS[case]):
            tris[k, 0] = vid12[TRI_TABLE[case, 3 * t]]
            tris[k, 1] = vid12[TRI_TABLE[case, 3 * t + 1]]
            tris[k, 2] = vid12[TRI_TABLE[case, 3 * t + 2]]
            k += 1
    return verts[:n_verts], norms[:n_verts], tris[:k]
