"""Grid A* over a passability mask, 26-connected, Euclidean edge costs.

The heap orders entries by (f, node index) so expansion order, and with it
any tie-broken path, is fully deterministic. The fallback path simply runs
the same code uncompiled; a heap is not vectorizable.
"""

import numpy as np

from ._compat import njit, prange
from .visibility import segment_blocked_nb

_OFFSETS = []
for _dx in (-1, 0, 1):
    for _dy in (-1, 0, 1):
        for _dz in (-1, 0, 1):
            if _dx or _dy or _dz:
                _OFFSETS.append((_dx, _dy, _dz))
NEIGHBOR_OFFSETS = np.array(_OFFSETS, dtype=np.int64)
NEIGHBOR_COSTS = np.sqrt((NEIGHBOR_OFFSETS.astype(np.float64) ** 2).sum(axis=1))


@njit(cache=True)
def _heap_push(heap_f, heap_n, size, f, node):
    if size >= heap_f.shape[0]:
        new_f = np.empty(heap_f.shape[0] * 2, dtype=np.float64)
        new_n = np.empty(heap_n.shape[0] * 2, dtype=np.int64)
        new_f[:size] = heap_f[:size]
        new_n[:size] = heap_n[:size]
        heap_f, heap_n = new_f, new_n
    i = size
    heap_f[i] = f
    heap_n[i] = node
    while i > 0:
        parent = (i - 1) // 2
        if heap_f[parent] > heap_f[i] or (heap_f[parent] == heap_f[i] and heap_n[parent] > heap_n[i]):
            heap_f[parent], heap_f[i] = heap_f[i], heap_f[parent]
            heap_n[parent], heap_n[i] = heap_n[i], heap_n[parent]
            i = parent
        else:
            break
    return heap_f, heap_n, size + 1


@njit(cache=True)
def _heap_pop(heap_f, heap_n, size):
    top_f = heap_f[0]
    top_n = heap_n[0]
    size -= 1
    heap_f[0] = heap_f[size]
    heap_n[0] = heap_n[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        best = i
        if left < size and (heap_f[left] < heap_f[best] or (heap_f[left] == heap_f[best] and heap_n[left] < heap_n[best])):
            best = left
        if right < size and (heap_f[right] < heap_f[best] or (heap_f[right] == heap_f[best] and heap_n[right] < heap_n[best])):
            best = right
        if best == i:
            break
        heap_f[best], heap_f[i] = heap_f[i], heap_f[best]
        heap_n[best], heap_n[i] = heap_n[i], heap_n[best]
        i = best
    return top_f, top_n, size


@njit(cache=True)
def astar_grid_nb(passable, start, goal, res):
    """Shortest 26-connected path between voxel indices.

    Returns a (K, 3) index array from start to goal inclusive; (0, 3) when
    no path exists. Start and goal voxels must be marked passable."""
    nx, ny, nz = passable.shape
    n = nx * ny * nz
    s = (start[0] * ny + start[1]) * nz + start[2]
    t = (goal[0] * ny + goal[1]) * nz + goal[2]
    empty = np.empty((0, 3), dtype=np.int64)
    if passable[start[0], start[1], start[2]] == 0 or passable[goal[0], goal[1], goal[2]] == 0:
        return empty
    if s == t:
        out = np.empty((1, 3), dtype=np.int64)
        out[0] = start
        return out

    g = np.full(n, np.inf)
    came = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.uint8)
    heap_f = np.empty(1024, dtype=np.float64)
    heap_n = np.empty(1024, dtype=np.int64)
    size = 0

    gx, gy, gz = goal[0], goal[1], goal[2]
    g[s] = 0.0
    dx0 = float(start[0] - gx)
    dy0 = float(start[1] - gy)
    dz0 = float(start[2] - gz)
    h0 = res * np.sqrt(dx0 * dx0 + dy0 * dy0 + dz0 * dz0)
    heap_f, heap_n, size = _heap_push(heap_f, heap_n, size, h0, s)

    found = False
    while size > 0:
        _, node, size = _heap_pop(heap_f, heap_n, size)
        if closed[node]:
            continue
        closed[node] = 1
        if node == t:
            found = True
            break
        x = node // (ny * nz)
        rem = node % (ny * nz)
        y = rem // nz
        z = rem % nz
        for k in range(26):
            px = x + NEIGHBOR_OFFSETS[k, 0]
            py = y + NEIGHBOR_OFFSETS[k, 1]
            pz = z + NEIGHBOR_OFFSETS[k, 2]
            if px < 0 or px >= nx or py < 0 or py >= ny or pz < 0 or pz >= nz:
                continue
            if passable[px, py, pz] == 0:
                continue
            nb = (px * ny + py) * nz + pz
            if closed[nb]:
                continue
            ng = g[node] + res * NEIGHBOR_COSTS[k]
            if ng < g[nb]:
                g[nb] = ng
                came[nb] = node
                ddx = float(px - gx)
                ddy = float(py - gy)
                ddz = float(pz - gz)
                h = res * np.sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
                heap_f, heap_n, size = _heap_push(heap_f, heap_n, size, ng + h, nb)

    if not found:
        return empty
    length = 0
    node = t
    while node != -1:
        length += 1
        node = came[node]
    out = np.empty((length, 3), dtype=np.int64)
    node = t
    for i in range(length - 1, -1, -1):
        out[i, 0] = node // (ny * nz)
        rem = node % (ny * nz)
        out[i, 1] = rem // nz
        out[i, 2] = rem % nz
        node = came[node]
    return out


astar_grid_np = astar_grid_nb.py_func if hasattr(astar_grid_nb, "py_func") else astar_grid_nb


@njit(cache=True)
def _polyline_shortcut_length(passable, grid_origin, res, pts, n_pts):
    """Greedy line-of-sight shortcut length over a world polyline.

    From each anchor the skip extends forward until the first blocked
    segment; the following polyline vertex becomes the next anchor."""
    total = 0.0
    i = 0
    while i < n_pts - 1:
        j = i + 1
        while j + 1 < n_pts:
            if segment_blocked_nb(passable, grid_origin, res,
                                  pts[i, 0], pts[i, 1], pts[i, 2],
                                  pts[j + 1, 0], pts[j + 1, 1], pts[j + 1, 2]):
                break
            j += 1
        dx = pts[j, 0] - pts[i, 0]
        dy = pts[j, 1] - pts[i, 1]
        dz = pts[j, 2] - pts[i, 2]
        total += np.sqrt(dx * dx + dy * dy + dz * dz)
        i = j
    return total


@njit(cache=True)
def _legs_from_source(passable, grid_origin, res, positions, src_idx, lengths):
    """Fill lengths with shortcut path distances from one tour node.

    One Dijkstra over the passability grid (terminating once every goal
    voxel is settled), then per goal the voxel chain is walked back,
    converted to a world polyline through voxel centers and greedily
    shortcut. Unreachable goals report inf; entry src_idx reports 0."""
    nx, ny, nz = passable.shape
    n = nx * ny * nz
    n_pos = positions.shape[0]
    lengths[:] = np.inf
    lengths[src_idx] = 0.0

    sx = int(np.floor((positions[src_idx, 0] - grid_origin[0]) / res))
    sy = int(np.floor((positions[src_idx, 1] - grid_origin[1]) / res))
    sz = int(np.floor((positions[src_idx, 2] - grid_origin[2]) / res))
    s = (sx * ny + sy) * nz + sz
    if passable[sx, sy, sz] == 0:
        return

    goal_flat = np.empty(n_pos, dtype=np.int64)
    is_goal = np.zeros(n, dtype=np.uint8)
    remaining = 0
    for gidx in range(n_pos):
        if gidx == src_idx:
            goal_flat[gidx] = -1
            continue
        gx = int(np.floor((positions[gidx, 0] - grid_origin[0]) / res))
        gy = int(np.floor((positions[gidx, 1] - grid_origin[1]) / res))
        gz = int(np.floor((positions[gidx, 2] - grid_origin[2]) / res))
        flat = (gx * ny + gy) * nz + gz
        goal_flat[gidx] = flat
        if passable[gx, gy, gz] == 0:
            goal_flat[gidx] = -1
            continue
        if is_goal[flat] == 0:
            is_goal[flat] = 1
            remaining += 1

    g = np.full(n, np.inf)
    came = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.uint8)
    heap_f = np.empty(4096, dtype=np.float64)
    heap_n = np.empty(4096, dtype=np.int64)
    size = 0
    g[s] = 0.0
    heap_f, heap_n, size = _heap_push(heap_f, heap_n, size, 0.0, s)

    while size > 0 and remaining > 0:
        _, node, size = _heap_pop(heap_f, heap_n, size)
        if closed[node]:
            continue
        closed[node] = 1
        if is_goal[node]:
            is_goal[node] = 0
            remaining -= 1
        x = node // (ny * nz)
        rem = node % (ny * nz)
        y = rem // nz
        z = rem % nz
        for k in range(26):
            px = x + NEIGHBOR_OFFSETS[k, 0]
            py = y + NEIGHBOR_OFFSETS[k, 1]
            pz = z + NEIGHBOR_OFFSETS[k, 2]
            if px < 0 or px >= nx or py < 0 or py >= ny or pz < 0 or pz >= nz:
                continue
            if passable[px, py, pz] == 0:
                continue
            nb = (px * ny + py) * nz + pz
            if closed[nb]:
                continue
            ng = g[node] + res * NEIGHBOR_COSTS[k]
            if ng < g[nb]:
                g[nb] = ng
                came[nb] = node
                heap_f, heap_n, size = _heap_push(heap_f, heap_n, size, ng, nb)

    pts = np.empty((nx + ny + nz + 2, 3), dtype=np.float64)
    for gidx in range(n_pos):
        flat = goal_flat[gidx]
        if flat < 0 or not closed[flat]:
            continue
        if flat == s:
            dx = positions[gidx, 0] - positions[src_idx, 0]
            dy = positions[gidx, 1] - positions[src_idx, 1]
            dz = positions[gidx, 2] - positions[src_idx, 2]
            lengths[gidx] = np.sqrt(dx * dx + dy * dy + dz * dz)
            continue
        chain_len = 0
        node = flat
        while node != -1:
            chain_len += 1
            node = came[node]
        n_pts = chain_len  # start world + (chain_len - 2) centers + goal world
        if n_pts > pts.shape[0]:
            pts = np.empty((n_pts, 3), dtype=np.float64)
        pts[0, 0] = positions[src_idx, 0]
        pts[0, 1] = positions[src_idx, 1]
        pts[0, 2] = positions[src_idx, 2]
        pts[n_pts - 1, 0] = positions[gidx, 0]
        pts[n_pts - 1, 1] = positions[gidx, 1]
        pts[n_pts - 1, 2] = positions[gidx, 2]
        node = came[flat]
        for slot in range(n_pts - 2, 0, -1):
            x = node // (ny * nz)
            rem = node % (ny * nz)
            pts[slot, 0] = grid_origin[0] + (x + 0.5) * res
            pts[slot, 1] = grid_origin[1] + (rem // nz + 0.5) * res
            pts[slot, 2] = grid_origin[2] + (rem % nz + 0.5) * res
            node = came[node]
        lengths[gidx] = _polyline_shortcut_length(passable, grid_origin, res, pts, n_pts)


@njit(cache=True, parallel=True)
def cost_matrix_nb(passable, grid_origin, res, positions):
    """All-pairs shortcut path lengths between tour node positions.

    Row i comes from one multi-goal search seeded at positions[i]; rows
    are independent and computed in parallel. inf marks unreachable."""
    n = positions.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for i in prange(n):
        _legs_from_source(passable, grid_origin, res, positions, i, out[i])
    return out


def cost_matrix_np(passable, grid_origin, res, positions):
    n = positions.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    legs = _legs_from_source.py_func if hasattr(_legs_from_source, "py_func") else _legs_from_source
    for i in range(n):
        legs(passable, grid_origin, res, positions, i, out[i])
    return out
