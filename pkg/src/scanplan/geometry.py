"""Shared geometric primitives: poses, camera frustum math, voxel indexing
and exact voxel-ray traversal.

Camera convention: yaw rotates about world +z, pitch about the camera's
local lateral axis; the forward axis at (pitch=0, yaw=0) is world +x and
positive pitch looks up. There is no roll.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, OriginOutsideGrid

PITCH_LIMIT = np.pi / 2
PITCH_EPS = 1e-6


def wrap_yaw(angle):
    """Wrap an angle into [-pi, pi)."""
    return float((angle + np.pi) % (2.0 * np.pi) - np.pi)


@dataclass(frozen=True)
class Pose:
    """Camera pose: world position plus pitch/yaw viewing angles."""

    position: np.ndarray
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        object.__setattr__(self, "position", pos)
        if not abs(self.pitch) < PITCH_LIMIT:
            raise ValueError(f"pitch {self.pitch} must be strictly inside (-pi/2, pi/2)")
        object.__setattr__(self, "yaw", wrap_yaw(self.yaw))

    def forward(self):
        return forward_vector(self.pitch, self.yaw)

    def rotation(self):
        return rotation_matrix(self.pitch, self.yaw)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole-style depth camera with angular FOV limits and a hard range cap.

    depth_noise_sigma is the stddev of additive Gaussian range noise in
    meters; 0 disables noise entirely.
    """

    horizontal_fov: float
    vertical_fov: float
    image_width: int
    image_height: int
    max_range: float
    depth_noise_sigma: float = 0.0

    def __post_init__(self):
        for name, fov in (("horizontal_fov", self.horizontal_fov),
                          ("vertical_fov", self.vertical_fov)):
            if not 0.0 < fov < np.pi:
                raise ValueError(f"{name} must be in (0, pi), got {fov}")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")
        if self.depth_noise_sigma < 0.0:
            raise ValueError("depth_noise_sigma must be >= 0")


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel grid: world origin, cubic voxel size, integer dims.

    World-to-index conversion floors; index-to-world returns voxel centers,
    so the two are a bijection on in-bounds indices.
    """

    origin: np.ndarray
    resolution: float
    dims: tuple

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        object.__setattr__(self, "origin", origin)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if self.resolution <= 0.0:
            raise ValueError("resolution must be positive")
        if any(d < 1 for d in dims):
            raise ValueError("all dims must be >= 1")

    @property
    def shape(self):
        return self.dims

    @property
    def n_voxels(self):
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def extent(self):
        return np.asarray(self.dims, dtype=np.float64) * self.resolution

    def world_to_index(self, points):
        """Voxel index containing each point (floor convention)."""
        pts = np.asarray(points, dtype=np.float64)
        return np.floor((pts - self.origin) / self.resolution).astype(np.int64)

    def index_to_world(self, indices):
        """World position of each voxel center."""
        idx = np.asarray(indices, dtype=np.float64)
        return self.origin + (idx + 0.5) * self.resolution

    def in_bounds_index(self, indices):
        idx = np.asarray(indices)
        dims = np.asarray(self.dims)
        return np.all((idx >= 0) & (idx < dims), axis=-1)

    def in_bounds_point(self, points):
        pts = np.asarray(points, dtype=np.float64)
        hi = self.origin + self.extent
        return np.all((pts >= self.origin) & (pts < hi), axis=-1)


def forward_vector(pitch, yaw):
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array([cp * cy, cp * sy, sp])


def rotation_matrix(pitch, yaw):
    """Camera-to-world rotation; camera frame is x forward, y left, z up."""
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    fwd = np.array([cp * cy, cp * sy, sp])
    left = np.array([-sy, cy, 0.0])
    up = np.array([-sp * cy, -sp * sy, cp])
    return np.column_stack([fwd, left, up])


def look_at_angles(eye, target):
    """Pitch/yaw that point the camera forward axis from eye toward target.

    Pitch is clamped strictly inside (-pi/2, pi/2); straight up/down keeps
    whatever yaw atan2 yields for the (0, 0) horizontal component.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    diff = target - eye
    if not np.any(diff):
        raise DegenerateDirection("look-at target equals eye position")
    yaw = wrap_yaw(np.arctan2(diff[1], diff[0]))
    horiz = float(np.hypot(diff[0], diff[1]))
    pitch = float(np.arctan2(diff[2], horiz))
    limit = PITCH_LIMIT - PITCH_EPS
    pitch = min(max(pitch, -limit), limit)
    return pitch, yaw


def in_frustum(pose, cam, point):
    """True iff point is within max_range and inside both angular half-FOVs."""
    return bool(in_frustum_mask(pose, cam, np.asarray(point, dtype=np.float64).reshape(1, 3))[0])


def in_frustum_mask(pose, cam, points):
    """Vectorized frustum test for an (N, 3) array of points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rel = pts - pose.position
    rot = rotation_matrix(pose.pitch, pose.yaw)
    local = rel @ rot  # camera-frame coordinates
    dist = np.linalg.norm(rel, axis=1)
    ahead = local[:, 0] > 0.0
    with np.errstate(invalid="ignore"):
        h_ok = np.arctan2(np.abs(local[:, 1]), local[:, 0]) <= cam.horizontal_fov / 2.0
        v_ok = np.arctan2(np.abs(local[:, 2]), local[:, 0]) <= cam.vertical_fov / 2.0
    inside = ahead & h_ok & v_ok & (dist <= cam.max_range)
    inside[dist == 0.0] = True
    return inside


def pixel_ray_directions(pose, cam):
    """Unit world-frame ray directions for every pixel, row-major order.

    Pixel centers map through the pinhole tangent model; the image center
    looks exactly along the pose forward axis, column 0 is the left edge
    and row 0 the top edge.
    """
    tan_h = np.tan(cam.horizontal_fov / 2.0)
    tan_v = np.tan(cam.vertical_fov / 2.0)
    cols = (2.0 * (np.arange(cam.image_width) + 0.5) / cam.image_width - 1.0) * tan_h
    rows = (1.0 - 2.0 * (np.arange(cam.image_height) + 0.5) / cam.image_height) * tan_v
    u, v = np.meshgrid(cols, rows)  # (H, W)
    local = np.stack([np.ones_like(u), -u, v], axis=-1).reshape(-1, 3)
    local /= np.linalg.norm(local, axis=1, keepdims=True)
    return local @ rotation_matrix(pose.pitch, pose.yaw).T


def traverse_ray(spec, origin, direction, max_len):
    """Exact voxel walk from origin along a unit direction.

    Returns the ordered (N, 3) array of voxel indices whose entry distance
    is strictly below max_len, starting with the origin voxel. Consecutive
    indices are face-adjacent; the walk stops at max_len or the grid
    boundary, whichever comes first.
    """
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(direction)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must be unit length, |d| = {norm}")
    if not spec.in_bounds_point(origin):
        raise OriginOutsideGrid(f"origin {origin} outside grid")

    res = spec.resolution
    dims = spec.dims
    idx = spec.world_to_index(origin)
    step = np.zeros(3, dtype=np.int64)
    tmax = np.full(3, np.inf)
    tdelta = np.full(3, np.inf)
    for k in range(3):
        d = direction[k]
        if d > 0.0:
            step[k] = 1
            boundary = spec.origin[k] + (idx[k] + 1) * res
            tmax[k] = (boundary - origin[k]) / d
            tdelta[k] = res / d
        elif d < 0.0:
            step[k] = -1
            boundary = spec.origin[k] + idx[k] * res
            tmax[k] = (boundary - origin[k]) / d
            tdelta[k] = res / -d

    out = [idx.copy()]
    while True:
        axis = 0
        if tmax[1] < tmax[axis]:
            axis = 1
        if tmax[2] < tmax[axis]:
            axis = 2
        t_cross = tmax[axis]
        if not t_cross < max_len:
            break
        idx[axis] += step[axis]
        if idx[axis] < 0 or idx[axis] >= dims[axis]:
            break
        tmax[axis] += tdelta[axis]
        out.append(idx.copy())
    return np.array(out, dtype=np.int64)
