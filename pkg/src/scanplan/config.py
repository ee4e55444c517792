"""Episode config files: INI-style key = value under nested sections.

Keys in [gen] and [switch] mirror the scene-dependent parameter table
(d_r, d_f, d_s, r_loc, r_clu, n_rec, n_min, d_near, l_exec). Example:

    [scene]
    seed = 7
    rooms = 3
    extent = 10.0 8.0 3.0
    resolution = 0.1

    [gen]
    d_r = 1.0
    d_f = 2.0
    ...
"""

import configparser

import numpy as np

from .errors import FormatError
from .geometry import CameraModel
from .harness import EpisodeConfig, Variant
from .planner import SwitchParams
from .taskgen import GenParams


def _floats(raw):
    return tuple(float(tok) for tok in raw.split())


def parse_config(text):
    """Build an EpisodeConfig from config file text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise FormatError(f"bad config syntax: {exc}") from exc

    scene = parser["scene"] if parser.has_section("scene") else {}
    gen = parser["gen"] if parser.has_section("gen") else {}
    switch = parser["switch"] if parser.has_section("switch") else {}
    cam = parser["camera"] if parser.has_section("camera") else {}
    episode = parser["episode"] if parser.has_section("episode") else {}
    unc = parser["uncertainty"] if parser.has_section("uncertainty") else {}

    gen_params = GenParams(
        radius_min=float(gen.get("d_r", 1.0)),
        radius_max=float(gen.get("d_f", 2.0)),
        safe_distance=float(gen.get("d_s", 0.3)),
        local_radius=float(gen.get("r_loc", 2.5)),
        cluster_radius=float(gen.get("r_clu", 1.3)),
        max_clusters=int(gen.get("n_rec", 10)),
        min_visible=int(gen.get("n_min", 5)),
        n_radial=int(gen.get("n_radial", 3)),
        n_azimuth=int(gen.get("n_azimuth", 16)),
        n_polar=int(gen.get("n_polar", 5)),
    )
    switch_params = SwitchParams(
        near_radius=float(switch.get("d_near", 2.0)),
        near_count_threshold=int(switch.get("n_near_threshold", 3)),
        near_fraction_threshold=float(switch.get("beta_threshold", 0.2)),
        final_phase_scale=float(switch.get("alpha", 3.0)),
    )
    camera = CameraModel(
        horizontal_fov=np.deg2rad(float(cam.get("hfov_deg", 90.0))),
        vertical_fov=np.deg2rad(float(cam.get("vfov_deg", 70.0))),
        image_width=int(cam.get("width", 80)),
        image_height=int(cam.get("height", 60)),
        max_range=float(cam.get("max_range", 5.0)),
        depth_noise_sigma=float(cam.get("noise_sigma", 0.0)),
    )
    try:
        variant = Variant(str(episode.get("variant", "V5")).upper())
    except ValueError as exc:
        raise FormatError(f"unknown variant {episode.get('variant')!r}") from exc

    return EpisodeConfig(
        scene_path=scene.get("file") or None,
        scene_seed=int(scene.get("seed", 1)),
        scene_rooms=int(scene.get("rooms", 1)),
        scene_extent=_floats(scene.get("extent", "4.0 4.0 3.0")),
        scene_resolution=float(scene.get("resolution", 0.1)),
        gen_params=gen_params,
        switch_params=switch_params,
        camera=camera,
        exec_budget=float(switch.get("l_exec", 6.0)),
        path_step=float(switch.get("l_res", 0.2)),
        view_budget=int(episode.get("view_budget", 150)),
        variant=variant,
        rng_seed=int(episode.get("rng_seed", 0)),
        cluster_split_extent=float(gen.get("cluster_split_extent", 1.0)),
        min_cluster_cells=int(gen.get("min_cluster_cells", 1)),
        sigma_init=float(unc.get("sigma0", 1.0)),
        sigma_floor=float(unc.get("sigma_min", 0.01)),
        decay_rate=float(unc.get("eta", 0.4)),
        metric_samples=int(episode.get("metric_samples", 30000)),
    )


def read_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
