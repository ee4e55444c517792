"""Exact 3D squared Euclidean distance transform in voxel units.

Distances are kept as int64 squared offsets so the numba pass (separable
lower-envelope method) and the numpy fallback (per-axis min-convolution)
agree exactly. INF_D2 marks voxels with no obstacle anywhere.
"""

import numpy as np

from ._compat import njit

INF_D2 = np.int64(2) ** 62


@njit(cache=True)
def _dt1d(f, v, z, out):
    """1D transform: out[i] = min_j f[j] + (i-j)^2, skipping INF parabolas."""
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq >= INF_D2:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        s = ((fq + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        while s <= z[k]:
            k -= 1
            if k < 0:
                break
            s = ((fq + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for i in range(n):
            out[i] = INF_D2
        return
    j = 0
    for i in range(n):
        while z[j + 1] < i:
            j += 1
        dq = i - v[j]
        out[i] = dq * dq + f[v[j]]


@njit(cache=True)
def edt_sq_nb(obstacle):
    nx, ny, nz = obstacle.shape
    d2 = np.empty((nx, ny, nz), dtype=np.int64)
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                d2[x, y, z] = 0 if obstacle[x, y, z] else INF_D2

    nmax = max(nx, max(ny, nz))
    f = np.empty(nmax, dtype=np.int64)
    out = np.empty(nmax, dtype=np.int64)
    v = np.empty(nmax, dtype=np.int64)
    zb = np.empty(nmax + 1, dtype=np.float64)

    for x in range(nx):  # along z
        for y in range(ny):
            for z in range(nz):
                f[z] = d2[x, y, z]
            _dt1d(f[:nz], v, zb, out[:nz])
            for z in range(nz):
                d2[x, y, z] = out[z]
    for x in range(nx):  # along y
        for z in range(nz):
            for y in range(ny):
                f[y] = d2[x, y, z]
            _dt1d(f[:ny], v, zb, out[:ny])
            for y in range(ny):
                d2[x, y, z] = out[y]
    for y in range(ny):  # along x
        for z in range(nz):
            for x in range(nx):
                f[x] = d2[x, y, z]
            _dt1d(f[:nx], v, zb, out[:nx])
            for x in range(nx):
                d2[x, y, z] = out[x]
    return d2


def _pass_np(d2, axis, chunk_bytes=32 << 20):
    moved = np.moveaxis(d2, axis, 0)
    n = moved.shape[0]
    flat = np.ascontiguousarray(moved.reshape(n, -1))
    offs = (np.arange(n, dtype=np.int64)[:, None] - np.arange(n, dtype=np.int64)[None, :]) ** 2
    cols = max(1, chunk_bytes // (n * n * 8))
    out = np.empty_like(flat)
    for start in range(0, flat.shape[1], cols):
        block = flat[:, start:start + cols]  # (n_in, c)
        out[:, start:start + cols] = (offs[:, :, None] + block[None, :, :]).min(axis=1)
    np.moveaxis(d2, axis, 0)[...] = out.reshape(moved.shape)


def edt_sq_np(obstacle):
    d2 = np.where(obstacle != 0, np.int64(0), INF_D2)
    for axis in (2, 1, 0):
        _pass_np(d2, axis)
    return d2
