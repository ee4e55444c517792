"""Backend parity: the numba kernels and their numpy fallbacks must agree
bit for bit, and the env flag must drive selection."""

import os
import subprocess
import sys

import numpy as np

from scanplan.kernels import BACKEND, HAS_NUMBA
from scanplan.kernels.astar import astar_grid_nb, astar_grid_np
from scanplan.kernels.edt import INF_D2, edt_sq_nb, edt_sq_np
from scanplan.kernels.integrate import integrate_rays_nb, integrate_rays_np
from scanplan.kernels.mc import mc_extract_nb, mc_extract_np
from scanplan.kernels.raycast import raycast_depths_nb, raycast_depths_np
from scanplan.kernels.visibility import rays_blocked_nb, rays_blocked_np


def random_dirs(rng, n):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def test_raycast_parity():
    rng = np.random.default_rng(0)
    solid = (rng.random((24, 20, 16)) < 0.04).astype(np.uint8)
    solid[5, 8, 6] = 0
    origin = np.array([0.55, 0.85, 0.65])
    dirs = random_dirs(rng, 300)
    a = raycast_depths_nb(solid, np.zeros(3), 0.1, origin, dirs, 3.0)
    b = raycast_depths_np(solid, np.zeros(3), 0.1, origin, dirs, 3.0)
    np.testing.assert_array_equal(a, b)
    assert np.isfinite(a).any()


def test_raycast_solid_origin_is_zero():
    solid = np.ones((4, 4, 4), dtype=np.uint8)
    dirs = np.array([[1.0, 0.0, 0.0]])
    a = raycast_depths_nb(solid, np.zeros(3), 0.1, np.array([0.15, 0.15, 0.15]), dirs, 1.0)
    b = raycast_depths_np(solid, np.zeros(3), 0.1, np.array([0.15, 0.15, 0.15]), dirs, 1.0)
    assert a[0] == 0.0 and b[0] == 0.0


def test_edt_parity_and_inf():
    rng = np.random.default_rng(1)
    for density in (0.0, 0.02, 0.3):
        obs = (rng.random((18, 14, 11)) < density).astype(np.uint8)
        a = edt_sq_nb(obs)
        b = edt_sq_np(obs)
        np.testing.assert_array_equal(a, b)
        if density == 0.0:
            assert np.all(a == INF_D2)


def test_integrate_parity():
    rng = np.random.default_rng(2)
    shape = (20, 16, 12)
    s1 = np.zeros(shape, dtype=np.uint8)
    t1 = np.zeros(shape)
    w1 = np.zeros(shape)
    s2, t2, w2 = s1.copy(), t1.copy(), w1.copy()
    origin = np.array([0.45, 0.75, 0.55])
    dirs = random_dirs(rng, 120)
    depths = rng.uniform(0.2, 1.6, 120)
    depths[::4] = np.inf
    d1 = integrate_rays_nb(s1, t1, w1, np.zeros(3), 0.1, origin, dirs, depths, 2.0, 0.3)
    d2 = integrate_rays_np(s2, t2, w2, np.zeros(3), 0.1, origin, dirs, depths, 2.0, 0.3)
    np.testing.assert_array_equal(s1, s2)
    np.testing.assert_array_equal(t1, t2)
    np.testing.assert_array_equal(w1, w2)
    np.testing.assert_array_equal(d1, d2)


def test_mc_parity():
    rng = np.random.default_rng(3)
    tsdf = rng.normal(size=(12, 11, 10))
    weight = (rng.random(tsdf.shape) > 0.2).astype(np.float64)
    v1, n1, t1 = mc_extract_nb(tsdf, weight, np.zeros(3), 0.1)
    v2, n2, t2 = mc_extract_np(tsdf, weight, np.zeros(3), 0.1)
    np.testing.assert_array_equal(v1, v2)
    np.testing.assert_array_equal(n1, n2)
    np.testing.assert_array_equal(t1, t2)
    assert len(t1) > 0


def test_visibility_parity():
    rng = np.random.default_rng(4)
    trav = (rng.random((15, 13, 12)) > 0.25).astype(np.uint8)
    origin = np.array([0.75, 0.65, 0.55])
    targets = rng.uniform(0.05, 1.1, size=(400, 3))
    a = rays_blocked_nb(trav, np.zeros(3), 0.1, origin, targets)
    b = rays_blocked_np(trav, np.zeros(3), 0.1, origin, targets)
    np.testing.assert_array_equal(a, b)
    assert 0 < a.sum() < len(a)


def test_astar_parity():
    passable = np.ones((12, 12, 4), dtype=np.uint8)
    passable[6, :9, :] = 0
    start = np.array([2, 2, 1])
    goal = np.array([10, 2, 2])
    p1 = astar_grid_nb(passable, start, goal, 0.1)
    p2 = astar_grid_np(passable, start, goal, 0.1)
    np.testing.assert_array_equal(p1, p2)
    assert len(p1) > 0


def test_env_flag_selects_backend():
    code = ("import scanplan.kernels as k; print(k.BACKEND)")
    for flag, expected in (("numpy", "numpy"), ("", BACKEND)):
        env = dict(os.environ, SCANPLAN_BACKEND=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == expected


def test_default_backend_uses_numba_when_available():
    if HAS_NUMBA and not os.environ.get("SCANPLAN_BACKEND"):
        assert BACKEND == "numba"
