"""Ground-truth environments and the simulated depth camera.

Scenes are sealed voxel volumes: every boundary voxel is solid, so rays
can never escape and visibility, metrics and coverage stay exactly
computable. The file format is binary little-endian, magic "VSCN":

    magic 4s | version u16 | dims 3*u32 | resolution f64 | origin 3*f64 |
    spawn 5*f64 (x y z pitch yaw) | solid-voxel count u64 |
    bit-packed solid mask, x-fastest order, little bit order

The header's solid count doubles as a manifest checked on load.
"""

import io
import struct

import numpy as np
from dataclasses import dataclass

from . import kernels
from .errors import (
    FormatError,
    InfeasibleLayout,
    InvariantError,
    OriginOutsideGrid,
    PoseInsideSolid,
)
from .geometry import CameraModel, GridSpec, Pose, pixel_ray_directions

SCENE_MAGIC = b"VSCN"
SCENE_VERSION = 1
MAP_MAGIC = b"VMAP"

NO_HIT = np.inf

# minimum obstacle clearance required around the spawn position, meters
SPAWN_CLEARANCE = 0.3

_HEADER = struct.Struct("<4sH3I d 3d 5d Q")


@dataclass(frozen=True)
class GroundTruthScene:
    """Immutable voxel environment: solid mask plus a safe spawn pose."""

    spec: GridSpec
    solid: np.ndarray
    spawn: Pose

    @property
    def free_count(self):
        return int(self.solid.size - np.count_nonzero(self.solid))


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel range image; NO_HIT (inf) marks rays that hit nothing."""

    width: int
    height: int
    depths: np.ndarray


def _check_scene_invariants(scene):
    solid = scene.solid
    boundary_ok = (
        solid[0, :, :].all() and solid[-1, :, :].all()
        and solid[:, 0, :].all() and solid[:, -1, :].all()
        and solid[:, :, 0].all() and solid[:, :, -1].all()
    )
    if not boundary_ok:
        raise InvariantError("scene boundary is not sealed")
    pos = scene.spawn.position
    if not scene.spec.in_bounds_point(pos):
        raise InvariantError(f"spawn {pos} outside the grid")
    idx = scene.spec.world_to_index(pos)
    if solid[idx[0], idx[1], idx[2]]:
        raise InvariantError(f"spawn {pos} lies inside a solid voxel")
    # every solid voxel center within the clearance radius violates spawn safety
    res = scene.spec.resolution
    r = int(np.ceil(SPAWN_CLEARANCE / res)) + 1
    lo = np.maximum(idx - r, 0)
    hi = np.minimum(idx + r + 1, scene.spec.dims)
    block = solid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    occ = np.argwhere(block) + lo
    if occ.size:
        centers = scene.spec.index_to_world(occ)
        if np.linalg.norm(centers - pos, axis=1).min() < SPAWN_CLEARANCE:
            raise InvariantError("spawn clearance below the required minimum")


def save_scene(scene):
    """Serialize a scene to bytes (canonical form, round-trip stable)."""
    nx, ny, nz = scene.spec.dims
    header = _HEADER.pack(
        SCENE_MAGIC, SCENE_VERSION, nx, ny, nz,
        scene.spec.resolution,
        *scene.spec.origin,
        *scene.spawn.position, scene.spawn.pitch, scene.spawn.yaw,
        int(np.count_nonzero(scene.solid)),
    )
    bits = scene.solid.astype(np.uint8).ravel(order="F")
    body = np.packbits(bits, bitorder="little").tobytes()
    return header + body


def load_scene(data):
    """Parse scene bytes, validating the manifest and all invariants."""
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {_HEADER.size}")
    fields = _HEADER.unpack_from(data, 0)
    magic, version = fields[0], fields[1]
    if magic != SCENE_MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if version != SCENE_VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    nx, ny, nz = fields[2:5]
    resolution = fields[5]
    origin = np.array(fields[6:9])
    sx, sy, sz, pitch, yaw = fields[9:14]
    solid_count = fields[14]

    n = nx * ny * nz
    expected = _HEADER.size + (n + 7) // 8
    if len(data) != expected:
        raise FormatError(f"body length {len(data) - _HEADER.size} at offset "
                          f"{_HEADER.size}, expected {expected - _HEADER.size}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size),
                         bitorder="little", count=n)
    solid = bits.reshape((nx, ny, nz), order="F").astype(bool)
    if int(np.count_nonzero(solid)) != solid_count:
        raise FormatError(f"solid-count manifest mismatch: header {solid_count}, "
                          f"body {int(np.count_nonzero(solid))}")
    spec = GridSpec(origin=origin, resolution=resolution, dims=(nx, ny, nz))
    scene = GroundTruthScene(spec=spec, solid=solid, spawn=Pose(np.array([sx, sy, sz]), pitch, yaw))
    _check_scene_invariants(scene)
    return scene


def write_scene(path, scene):
    with open(path, "wb") as fh:
        fh.write(save_scene(scene))


def read_scene(path):
    with open(path, "rb") as fh:
        return load_scene(fh.read())


def _carve_rooms(solid, rng, rooms, min_side, door_voxels):
    """Recursive axis-aligned splits; each new wall gets one door gap.

    Regions are (x0, x1, y0, y1) half-open interior footprints."""
    nx, ny, nz = solid.shape
    regions = [(1, nx - 1, 1, ny - 1)]
    while len(regions) < rooms:
        # split the largest remaining region
        areas = [(r[1] - r[0]) * (r[3] - r[2]) for r in regions]
        pick = int(np.argmax(areas))
        x0, x1, y0, y1 = regions.pop(pick)
        w, h = x1 - x0, y1 - y0
        axes = []
        if w >= 2 * min_side + 1:
            axes.append(0)
        if h >= 2 * min_side + 1:
            axes.append(1)
        if not axes:
            raise InfeasibleLayout(
                f"cannot split a {w}x{h} voxel region into more rooms")
        axis = axes[0] if len(axes) == 1 else (0 if w >= h else 1)
        if axis == 0:
            cut = int(rng.integers(x0 + min_side, x1 - min_side))
            gap0 = int(rng.integers(y0, y1 - door_voxels + 1))
            for y in range(y0, y1):
                if gap0 <= y < gap0 + door_voxels:
                    continue
                solid[cut, y, 1:nz - 1] = True
            regions.append((x0, cut, y0, y1))
            regions.append((cut + 1, x1, y0, y1))
        else:
            cut = int(rng.integers(y0 + min_side, y1 - min_side))
            gap0 = int(rng.integers(x0, x1 - door_voxels + 1))
            for x in range(x0, x1):
                if gap0 <= x < gap0 + door_voxels:
                    continue
                solid[x, cut, 1:nz - 1] = True
            regions.append((x0, x1, y0, cut))
            regions.append((x0, x1, cut + 1, y1))
    return regions


def _place_furniture(solid, rng, regions, resolution):
    """Drop a box or cylinder into roughly half the rooms.

    Obstacles keep a wide margin from walls and never reach the ceiling,
    so all free space stays connected."""
    nx, ny, nz = solid.shape
    margin = max(2, int(np.ceil(0.4 / resolution)))
    head_room = max(2, int(np.ceil(0.9 / resolution)))
    max_h = nz - 2 - head_room
    for x0, x1, y0, y1 in regions:
        if rng.random() >= 0.5:
            continue
        w, h = x1 - x0, y1 - y0
        if w <= 2 * margin + 3 or h <= 2 * margin + 3 or max_h < 2:
            continue
        height = int(rng.integers(2, max_h + 1))
        r_max = min(3, (min(w, h) - 2 * margin - 1) // 2)
        if rng.random() < 0.5 or r_max < 2:
            bw = int(rng.integers(2, min(6, w - 2 * margin) + 1))
            bh = int(rng.integers(2, min(6, h - 2 * margin) + 1))
            bx = int(rng.integers(x0 + margin, x1 - margin - bw + 1))
            by = int(rng.integers(y0 + margin, y1 - margin - bh + 1))
            solid[bx:bx + bw, by:by + bh, 1:1 + height] = True
        else:
            radius = int(rng.integers(2, r_max + 1))
            cx = int(rng.integers(x0 + margin + radius, x1 - margin - radius + 1))
            cy = int(rng.integers(y0 + margin + radius, y1 - margin - radius + 1))
            xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
            disk = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
            solid[:, :, 1:1 + height] |= disk[:, :, None]


def generate_floorplan(seed, rooms, extent, resolution):
    """Deterministic multi-room scene with sealed walls and furniture.

    extent is the (x, y, z) size in meters. Rooms are split recursively
    with door gaps wide enough to path through at standard clearance, so
    every non-solid voxel is reachable from the spawn."""
    if rooms < 1:
        raise ValueError("rooms must be >= 1")
    extent = np.asarray(extent, dtype=np.float64).reshape(3)
    dims = tuple(int(round(e / resolution)) for e in extent)
    if any(d < 8 for d in dims):
        raise ValueError(f"extent/resolution give dims {dims}; need >= 8 per axis")

    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    solid = np.zeros(dims, dtype=bool)
    solid[0, :, :] = solid[-1, :, :] = True
    solid[:, 0, :] = solid[:, -1, :] = True
    solid[:, :, 0] = solid[:, :, -1] = True

    door_voxels = max(3, int(np.ceil(0.9 / resolution)))
    min_side = door_voxels + 2
    regions = _carve_rooms(solid, rng, rooms, min_side, door_voxels)
    _place_furniture(solid, rng, regions, resolution)

    # spawn at the free voxel with the largest obstacle clearance
    d2 = kernels.edt_sq(solid.astype(np.uint8))
    best = np.unravel_index(int(np.argmax(d2)), dims)
    spec = GridSpec(origin=np.zeros(3), resolution=resolution, dims=dims)
    clearance = float(np.sqrt(d2[best])) * resolution
    if clearance < SPAWN_CLEARANCE + resolution:
        raise InfeasibleLayout("no spawn position with sufficient clearance")
    spawn = Pose(spec.index_to_world(np.array(best)), 0.0, 0.0)
    scene = GroundTruthScene(spec=spec, solid=solid, spawn=spawn)
    _check_scene_invariants(scene)
    return scene


def render_depth(scene, pose, cam, rng_seed=0):
    """Simulate one depth capture with exact per-pixel voxel ray marching.

    Depth is the entry distance into the first solid voxel along each
    pixel ray. With depth_noise_sigma > 0, pixel k receives the k-th
    draw from a generator seeded by rng_seed, clipped to (0, max_range].
    """
    pos = np.asarray(pose.position, dtype=np.float64)
    if not scene.spec.in_bounds_point(pos):
        raise OriginOutsideGrid(f"camera position {pos} outside the scene")
    idx = scene.spec.world_to_index(pos)
    if scene.solid[idx[0], idx[1], idx[2]]:
        raise PoseInsideSolid(f"camera position {pos} inside solid matter")

    dirs = pixel_ray_directions(pose, cam)
    depths = kernels.raycast_depths(
        scene.solid.astype(np.uint8), scene.spec.origin, scene.spec.resolution,
        pos, dirs, cam.max_range)
    if cam.depth_noise_sigma > 0.0:
        gen = np.random.Generator(np.random.PCG64(rng_seed))
        noise = gen.normal(0.0, cam.depth_noise_sigma, size=depths.shape)
        finite = np.isfinite(depths)
        depths[finite] = np.clip(depths[finite] + noise[finite], 1e-9, cam.max_range)
    return DepthImage(width=cam.image_width, height=cam.image_height,
                      depths=depths.reshape(cam.image_height, cam.image_width))


def reachable_free_mask(scene):
    """Free voxels flood-fill reachable (6-connectivity) from the spawn."""
    from scipy import ndimage

    free = ~scene.solid
    labels, _ = ndimage.label(free)
    idx = scene.spec.world_to_index(scene.spawn.position)
    return labels == labels[idx[0], idx[1], idx[2]]


def scene_summary(scene):
    nx, ny, nz = scene.spec.dims
    return {
        "dims": (nx, ny, nz),
        "resolution": scene.spec.resolution,
        "origin": tuple(scene.spec.origin),
        "solid_voxels": int(np.count_nonzero(scene.solid)),
        "free_voxels": scene.free_count,
        "spawn": (*scene.spawn.position, scene.spawn.pitch, scene.spawn.yaw),
    }
