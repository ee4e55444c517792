"""Surface extraction and the surface-quality uncertainty field.

The uncertainty field replaces a learned per-point quality estimate with a
deterministic observation-decay model: every near-surface voxel starts at
sigma_init and each informative observation multiplies sigma by
(1 - decay_rate * alignment * range_quality), floored at sigma_floor.
Alignment is |surface normal . viewing direction|; range quality peaks at
the preferred viewing distance and falls off as a Gaussian in relative
range error. Uncertainty therefore stays high exactly on surfaces that
were seen rarely, obliquely, or from poor distances, which is the signal
the reconstruction task generator consumes.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import FormatError
from .geometry import in_frustum_mask
from .mapping import EMPTY


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray        # (N, 3) float64
    triangles: np.ndarray       # (M, 3) int64
    vertex_normals: np.ndarray  # (N, 3) unit float64

    @property
    def is_empty(self):
        return len(self.triangles) == 0


@dataclass
class SurfaceElement:
    """A surface sample: position, outward unit normal, uncertainty."""

    position: np.ndarray
    normal: np.ndarray
    sigma: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.normal = np.asarray(self.normal, dtype=np.float64)
        self.sigma = float(self.sigma)


def extract_mesh(grid):
    """Marching cubes over the zero level of the weighted TSDF."""
    verts, norms, tris = kernels.mc_extract(
        grid.tsdf_value, grid.tsdf_weight, grid.spec.origin, grid.spec.resolution)
    return TriangleMesh(vertices=verts, triangles=tris, vertex_normals=norms)


class UncertaintyField:
    """Per-voxel surface uncertainty over the map's near-surface band."""

    def __init__(self, spec, sigma_init=1.0, sigma_floor=0.01, decay_rate=0.4,
                 preferred_range=1.5):
        if not 0.0 < sigma_floor <= sigma_init:
            raise ValueError("need 0 < sigma_floor <= sigma_init")
        self.spec = spec
        self.sigma_init = float(sigma_init)
        self.sigma_floor = float(sigma_floor)
        self.decay_rate = float(decay_rate)
        self.preferred_range = float(preferred_range)
        self.sigma = np.full(spec.dims, self.sigma_init, dtype=np.float64)

    def sigma_at_points(self, points):
        """Sigma of the voxel containing each point; sigma_init outside."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        idx = self.spec.world_to_index(pts)
        ok = self.spec.in_bounds_index(idx)
        out = np.full(len(pts), self.sigma_init)
        sel = idx[ok]
        out[ok] = self.sigma[sel[:, 0], sel[:, 1], sel[:, 2]]
        return out

    def band_mean(self, grid):
        band = grid.surface_band_mask()
        if not band.any():
            return self.sigma_init
        return float(self.sigma[band].mean())


def tsdf_normals_at(grid, indices):
    """Outward unit surface normals from the TSDF gradient at voxels.

    Zero rows are returned where no gradient information exists."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    dims = np.asarray(grid.spec.dims)
    res = grid.spec.resolution
    tsdf, weight = grid.tsdf_value, grid.tsdf_weight
    grad = np.zeros((len(idx), 3))
    for axis in range(3):
        up = idx.copy()
        up[:, axis] += 1
        dn = idx.copy()
        dn[:, axis] -= 1
        has_up = (up[:, axis] < dims[axis])
        has_dn = (dn[:, axis] >= 0)
        up_c = np.clip(up, 0, dims - 1)
        dn_c = np.clip(dn, 0, dims - 1)
        has_up &= weight[up_c[:, 0], up_c[:, 1], up_c[:, 2]] > 0
        has_dn &= weight[dn_c[:, 0], dn_c[:, 1], dn_c[:, 2]] > 0
        v_up = tsdf[up_c[:, 0], up_c[:, 1], up_c[:, 2]]
        v_dn = tsdf[dn_c[:, 0], dn_c[:, 1], dn_c[:, 2]]
        v_here = tsdf[idx[:, 0], idx[:, 1], idx[:, 2]]
        central = has_up & has_dn
        only_up = has_up & ~has_dn
        only_dn = has_dn & ~has_up
        grad[central, axis] = (v_up[central] - v_dn[central]) / (2.0 * res)
        grad[only_up, axis] = (v_up[only_up] - v_here[only_up]) / res
        grad[only_dn, axis] = (v_here[only_dn] - v_dn[only_dn]) / res
    norm = np.linalg.norm(grad, axis=1)
    ok = norm > 1e-12
    grad[ok] /= norm[ok, None]
    grad[~ok] = 0.0
    return grad


def update_uncertainty(field, pose, cam, grid):
    """Decay sigma on every surface-band voxel visible from the pose.

    Visibility requires the voxel center inside the frustum and the ray
    from the camera clear of non-EMPTY voxels (the target voxel itself is
    exempt). Non-visible voxels are left untouched; sigma never rises."""
    band = np.argwhere(grid.surface_band_mask())
    if len(band) == 0:
        return field
    centers = grid.spec.index_to_world(band)
    vis = in_frustum_mask(pose, cam, centers)
    if vis.any():
        targets = centers[vis]
        blocked = kernels.rays_blocked(
            (grid.state == EMPTY).astype(np.uint8),
            grid.spec.origin, grid.spec.resolution,
            np.asarray(pose.position, dtype=np.float64), targets)
        vis_idx = np.flatnonzero(vis)[blocked == 0]
    else:
        vis_idx = np.empty(0, dtype=np.int64)
    if len(vis_idx) == 0:
        return field

    seen = band[vis_idx]
    seen_centers = centers[vis_idx]
    rel = seen_centers - pose.position
    dist = np.linalg.norm(rel, axis=1)
    ok = dist > 0
    seen, seen_centers, rel, dist = seen[ok], seen_centers[ok], rel[ok], dist[ok]
    view_dir = rel / dist[:, None]
    normals = tsdf_normals_at(grid, seen)
    alignment = np.abs(np.sum(view_dir * normals, axis=1))
    quality = np.exp(-(((dist - field.preferred_range) / field.preferred_range) ** 2))
    factor = 1.0 - field.decay_rate * alignment * quality
    sel = (seen[:, 0], seen[:, 1], seen[:, 2])
    field.sigma[sel] = np.maximum(field.sigma_floor, field.sigma[sel] * factor)
    return field


def surface_elements(mesh, field):
    """One element per mesh vertex, sigma sampled from the field."""
    if len(mesh.vertices) == 0:
        return []
    sigmas = field.sigma_at_points(mesh.vertices)
    return [SurfaceElement(p, n, s)
            for p, n, s in zip(mesh.vertices, mesh.vertex_normals, sigmas)]


def downsample_surface(elements, n_rounds, resolution, origin=(0.0, 0.0, 0.0)):
    """Repeated voxel-grid decimation keeping the max-sigma element per bin.

    Round r (0-based) bins at cell size 2**r * resolution, so the first
    round deduplicates at grid resolution and each further round doubles
    the cell. Ties keep the element with the smallest index in the
    original input sequence."""
    if n_rounds < 0:
        raise ValueError("n_rounds must be >= 0")
    if n_rounds == 0 or not elements:
        return list(elements)
    origin = np.asarray(origin, dtype=np.float64)
    survivors = list(range(len(elements)))
    positions = np.array([e.position for e in elements])
    sigmas = np.array([e.sigma for e in elements])
    for r in range(n_rounds):
        cell = (2.0 ** r) * resolution
        keys = np.floor((positions[survivors] - origin) / cell).astype(np.int64)
        best = {}
        for slot, orig in enumerate(survivors):
            key = (keys[slot, 0], keys[slot, 1], keys[slot, 2])
            cur = best.get(key)
            if cur is None or sigmas[orig] > sigmas[cur] or (
                    sigmas[orig] == sigmas[cur] and orig < cur):
                best[key] = orig
        survivors = sorted(best.values())
    return [elements[i] for i in survivors]


def save_mesh(path, mesh, sigmas=None):
    """ASCII mesh export: header with counts, vertex then face lines.

    Vertex lines hold x y z nx ny nz sigma; faces are index triples.
    Floats are written with repr so re-export is byte-identical."""
    if sigmas is None:
        sigmas = np.zeros(len(mesh.vertices))
    lines = [f"mesh {len(mesh.vertices)} {len(mesh.triangles)}"]
    for v, n, s in zip(mesh.vertices, mesh.vertex_normals, sigmas):
        lines.append(f"{v[0]!r} {v[1]!r} {v[2]!r} {n[0]!r} {n[1]!r} {n[2]!r} {s!r}")
    for t in mesh.triangles:
        lines.append(f"{t[0]} {t[1]} {t[2]}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path):
    """Parse the ASCII mesh format; returns (mesh, sigmas)."""
    with open(path) as fh:
        tokens = fh.readline().split()
        if len(tokens) != 3 or tokens[0] != "mesh":
            raise FormatError(f"bad mesh header in {path}")
        nv, nt = int(tokens[1]), int(tokens[2])
        verts = np.zeros((nv, 3))
        norms = np.zeros((nv, 3))
        sigmas = np.zeros(nv)
        for i in range(nv):
            parts = fh.readline().split()
            if len(parts) != 7:
                raise FormatError(f"bad vertex line {i + 2} in {path}")
            vals = [float(p) for p in parts]
            verts[i] = vals[0:3]
            norms[i] = vals[3:6]
            sigmas[i] = vals[6]
        tris = np.zeros((nt, 3), dtype=np.int64)
        for i in range(nt):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise FormatError(f"bad face line {nv + i + 2} in {path}")
            tris[i] = [int(p) for p in parts]
    if nt and (tris.min() < 0 or tris.max() >= max(nv, 1)):
        raise FormatError(f"face indices out of range in {path}")
    return TriangleMesh(vertices=verts, triangles=tris, vertex_normals=norms), sigmas
