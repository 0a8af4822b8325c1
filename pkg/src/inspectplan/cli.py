"""Command line entry point (``inspectplan``)."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .bridge import BridgeParams, generate_bridge
from .config import RunConfig, SweepSpec, parse_override
from .mesh import MeshError, save_mesh
from .paths import PathError, path_from_dict
from .poses import PoseParams, dump_mission, greedy_poses
from .runner import (EXIT_ERROR, EXIT_FEASIBLE, EXIT_INFEASIBLE, build_scene, emit_heatmap,
                     face_visits, run_plan, run_sweep, visibility_cache_path)
from .viewpoints import ConfigurationError
from .visibility import CacheFormatError, StaleCacheError

log = logging.getLogger("inspectplan")


def _config(args):
    overrides = [parse_override(s) for s in args.set or ()]
    if getattr(args, "seed", None) is not None:
        overrides.append(("seed", args.seed))
    if getattr(args, "out", None):
        overrides.append(("output_dir", os.path.abspath(args.out)))
    if getattr(args, "workers", None):
        overrides.append(("workers", args.workers))
    if args.config:
        return RunConfig.load(args.config, overrides)
    return RunConfig.from_dict({}, os.getcwd(), overrides)


def _load_path(cfg, scene, path_file):
    with open(path_file, encoding="utf-8") as fh:
        return path_from_dict(json.load(fh), scene.graph)


def cmd_plan(args):
    cfg = _config(args)
    summary = run_plan(cfg, recompute=args.recompute_visibility)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_FEASIBLE if summary["feasible"] else EXIT_INFEASIBLE


def cmd_visibility(args):
    cfg = _config(args)
    scene = build_scene(cfg, recompute=args.recompute)
    if args.graph_json:
        with open(args.graph_json, "w", encoding="utf-8") as fh:
            fh.write(scene.graph.to_json())
    n_vp, n_f = scene.vm.shape
    print(f"{visibility_cache_path(cfg)}: {n_vp} viewpoints x {n_f} faces, "
          f"{int(scene.vm.bits.sum())} visible pairs")
    return EXIT_FEASIBLE


def cmd_poses(args):
    cfg = _config(args)
    scene = build_scene(cfg)
    path = _load_path(cfg, scene, args.path)
    fov = args.fov if args.fov is not None else cfg.raw["poses"]["fov"]
    literal = cfg.raw["poses"]["fov_literal"] if args.fov_literal is None else args.fov_literal
    params = PoseParams(float(fov), literal)
    poses = greedy_poses(path, scene.vm, scene.mesh, scene.graph, params)
    out = args.mission or os.path.join(cfg.output_dir, "mission.json")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        dump_mission(poses, params, fh)
    print(f"{len(poses)} poses -> {out}")
    return EXIT_FEASIBLE


def cmd_heatmap(args):
    cfg = _config(args)
    scene = build_scene(cfg)
    path = _load_path(cfg, scene, args.path)
    params = cfg.pose_params()
    poses = greedy_poses(path, scene.vm, scene.mesh, scene.graph, params)
    csv_path, ply_path = emit_heatmap(face_visits(path, poses, scene, params), scene.mesh,
                                      args.out_dir or cfg.output_dir)
    print(f"{csv_path}\n{ply_path}")
    return EXIT_FEASIBLE


def cmd_sweep(args):
    cfg = _config(args)
    values = [parse_override(f"v={v}")[1] for v in args.values]
    sweep = SweepSpec(args.param, tuple(values), args.reps)
    rows, failures = run_sweep(cfg, sweep, workers=args.workers or 1)
    print(f"{len(rows)} rows, {len(failures)} failures -> {os.path.join(cfg.output_dir, 'sweep.csv')}")
    return EXIT_ERROR if failures else EXIT_FEASIBLE


def cmd_gen_bridge(args):
    overrides = {k: v for k, v in vars(args).items()
                 if k in BridgeParams.__dataclass_fields__ and v is not None}
    bridge = generate_bridge(**overrides)
    save_mesh(bridge.mesh, args.output)
    print(f"{bridge.mesh.n_faces} faces, deck top at z = {bridge.deck_top:g} m -> {args.output}")
    return EXIT_FEASIBLE


def build_parser():
    p = argparse.ArgumentParser(prog="inspectplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("config", nargs="?", help="YAML run configuration")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. ga.generations=50")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int)
        return sp

    sp = with_config(sub.add_parser("plan", help="optimise a path and its camera poses"))
    sp.add_argument("--recompute-visibility", action="store_true")
    sp.set_defaults(func=cmd_plan)

    sp = with_config(sub.add_parser("visibility", help="precompute the visibility cache"))
    sp.add_argument("--recompute", action="store_true")
    sp.add_argument("--graph-json", help="also export the viewpoint graph as JSON")
    sp.set_defaults(func=cmd_visibility)

    sp = with_config(sub.add_parser("poses", help="re-solve poses on an existing path"))
    sp.add_argument("--path", required=True, help="path.json from a previous plan")
    sp.add_argument("--fov", type=float)
    sp.add_argument("--fov-literal", dest="fov_literal", action="store_true", default=None)
    sp.add_argument("--fov-half", dest="fov_literal", action="store_false")
    sp.add_argument("--mission", help="output mission JSON")
    sp.set_defaults(func=cmd_poses)

    sp = with_config(sub.add_parser("heatmap", help="per-face visit counts for a path"))
    sp.add_argument("--path", required=True)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_heatmap)

    sp = with_config(sub.add_parser("sweep", help="parameter sweep with repetitions"))
    sp.add_argument("--param", required=True)
    sp.add_argument("--values", nargs="+", required=True)
    sp.add_argument("--reps", type=int, default=10)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("gen-bridge", help="write the synthetic bridge mesh")
    sp.add_argument("output", help="mesh file (.stl, .obj, .ply, .off)")
    for name, f in BridgeParams.__dataclass_fields__.items():
        sp.add_argument("--" + name.replace("_", "-"), dest=name, type=type(f.default))
    sp.set_defaults(func=cmd_gen_bridge)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, MeshError, PathError, StaleCacheError, CacheFormatError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
