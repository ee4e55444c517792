"""Command line interface.

    scanplan scene gen --seed 7 --rooms 3 --extent 10 8 3 --res 0.1 --out s.vscn
    scanplan scene info s.vscn
    scanplan run --config configs/threeroom.cfg --variant V5 --out out/
    scanplan sweep --configs configs/ --out out/
    scanplan metrics --mesh out/mesh.txt --scene s.vscn
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np


def _cmd_scene_gen(args):
    from .scene import generate_floorplan, write_scene

    scene = generate_floorplan(args.seed, args.rooms, tuple(args.extent), args.res)
    write_scene(args.out, scene)
    print(f"wrote {args.out}: dims {scene.spec.dims}, "
          f"{int(np.count_nonzero(scene.solid))} solid voxels")
    return 0


def _cmd_scene_info(args):
    from .scene import read_scene, scene_summary

    info = scene_summary(read_scene(args.file))
    for key, value in info.items():
        print(f"{key}: {value}")
    return 0


def _cmd_run(args):
    from .config import read_config
    from .harness import Variant, export_artifacts, run_episode

    config = read_config(args.config)
    if args.variant:
        config = replace(config, variant=Variant(args.variant.upper()))
    result = run_episode(config)
    export_artifacts(result, args.out)
    m = result.metrics
    print(f"variant={config.variant.value} views={m.views_used} "
          f"coverage={m.coverage_ratio:.3f} recall={m.recall:.3f} "
          f"accuracy_cm={m.accuracy_cm:.2f} completion_cm={m.completion_cm:.2f} "
          f"path_m={m.path_length_m:.1f} t_gp={m.t_gp:.2f}")
    return 0


def _cmd_sweep(args):
    from .config import read_config
    from .harness import export_artifacts, run_episode

    configs = sorted(f for f in os.listdir(args.configs) if f.endswith(".cfg"))
    if not configs:
        print(f"no .cfg files in {args.configs}", file=sys.stderr)
        return 1
    for name in configs:
        config = read_config(os.path.join(args.configs, name))
        result = run_episode(config)
        out_dir = os.path.join(args.out, os.path.splitext(name)[0])
        export_artifacts(result, out_dir)
        m = result.metrics
        print(f"{name}: variant={config.variant.value} views={m.views_used} "
              f"coverage={m.coverage_ratio:.3f} recall={m.recall:.3f}")
    return 0


def _cmd_metrics(args):
    from .harness import compute_metrics
    from .scene import read_scene
    from .surface import load_mesh

    mesh, _ = load_mesh(args.mesh)
    scene = read_scene(args.scene)
    acc, comp, recall = compute_metrics(mesh, scene, args.samples)
    print(f"accuracy_cm={acc:.3f} completion_cm={comp:.3f} recall={recall:.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="scanplan",
                                     description="indoor scanning simulator and planner")
    sub = parser.add_subparsers(dest="command", required=True)

    scene = sub.add_parser("scene", help="scene file tools")
    scene_sub = scene.add_subparsers(dest="scene_command", required=True)
    gen = scene_sub.add_parser("gen", help="generate a procedural floorplan")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--rooms", type=int, required=True)
    gen.add_argument("--extent", type=float, nargs=3, required=True,
                     metavar=("X", "Y", "Z"))
    gen.add_argument("--res", type=float, required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_scene_gen)
    info = scene_sub.add_parser("info", help="print a scene file summary")
    info.add_argument("file")
    info.set_defaults(func=_cmd_scene_info)

    run = sub.add_parser("run", help="run one episode from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--variant", choices=["V1", "V2", "V3", "V4", "V5"])
    run.add_argument("--out", required=True)
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="run every config in a directory")
    sweep.add_argument("--configs", required=True)
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=_cmd_sweep)

    metrics = sub.add_parser("metrics", help="score a mesh against a scene")
    metrics.add_argument("--mesh", required=True)
    metrics.add_argument("--scene", required=True)
    metrics.add_argument("--samples", type=int, default=30000)
    metrics.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
