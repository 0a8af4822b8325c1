"""End-to-end orchestration: scene -> visibility -> GA -> poses -> reports."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import mesh as meshmod
from .bridge import Bridge, generate_bridge
from .ga import evolve, write_stats
from .mesh import MeshRole, apply_weights, load_mesh, save_mesh
from .paths import CoverageModel, SpanTemplate, dump_path
from .poses import dump_mission, greedy_poses, pose_visible_set
from .viewpoints import ConfigurationError, GridSpec, NoFlyZone, build_graph
from .visibility import (CacheFormatError, StaleCacheError, compute_visibility,
                         load_matrix, mesh_hash, save_matrix)

log = logging.getLogger(__name__)

EXIT_FEASIBLE, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


@dataclass
class Scene:
    mesh: meshmod.TriMesh
    environment: list
    bridge: Bridge
    graph: object
    vm: object
    template: SpanTemplate

    @property
    def obstacles(self):
        return [self.mesh, *self.environment]


def build_mesh(cfg):
    """Inspection mesh (weights applied), environment meshes and bridge info."""
    model = cfg.raw["model"]
    bridge = None
    if cfg.uses_bridge:
        bridge = generate_bridge(cfg.bridge_params())
        mesh = bridge.mesh
    else:
        mesh = load_mesh(cfg.resolve(model["mesh"]), model["format"])
    env = [load_mesh(cfg.resolve(p), role=MeshRole.ENVIRONMENT_OBSTACLE) for p in model["environment"]]
    regions = []
    for r in cfg.regions_spec():
        if isinstance(r, tuple):
            if bridge is None or r[1] != "midspan":
                raise ConfigurationError(f"region preset {r[1]!r} needs the synthetic bridge")
            regions.extend(bridge.midspan_regions(r[2], r[3]))
        else:
            regions.append(r)
    if regions:
        mesh = apply_weights(mesh, regions)
    return mesh, env, bridge


def grid_spec(cfg, mesh, bridge):
    g = cfg.raw["grid"]
    interval = float(g["grid_interval"])
    if g["origin"] is not None:
        return GridSpec(tuple(g["origin"]), tuple(g["extents"]), interval)
    padding = g["padding"]
    if padding is None:
        padding = cfg.raw["visibility"]["visible_distance"]
    z_floor = g["z_floor"]
    if z_floor is None and bridge is not None:
        z_floor = float(cfg.raw["safety_distance"])  # bridge ground sits at z = 0
    lo, hi = mesh.bounds
    return GridSpec.around(lo, hi, interval, float(padding), z_floor)


def zones(cfg, bridge, grid):
    out = []
    for z in cfg.zones_spec():
        if z == "above_deck":
            if bridge is None:
                raise ConfigurationError("'above_deck' zone needs the synthetic bridge")
            lo, hi = bridge.above_deck_zone()
            top = grid.origin[2] + grid.extents[2] + 1.0
            out.append(NoFlyZone(lo, (hi[0], hi[1], max(top, lo[2]))))
        else:
            out.append(z)
    return out


def span_template(cfg, mesh, bridge):
    t = cfg.raw["model"]["template"]
    loops = int(cfg.raw["ga"]["loops_per_span"])
    if t is not None:
        return SpanTemplate(tuple(map(tuple, t["spans"])), float(t["deck_height"]),
                            int(t.get("loops_per_span", loops)), int(t.get("axis", 0)))
    if bridge is None:
        return None
    iv = bridge.span_intervals()
    spans = [(-math.inf if k == 0 else a, math.inf if k == len(iv) - 1 else b)
             for k, (a, b) in enumerate(iv)]
    return SpanTemplate(tuple(spans), bridge.deck_top, loops)


def visibility_cache_path(cfg):
    c = cfg.raw["visibility"]["cache"]
    return cfg.resolve(c) if c else os.path.join(cfg.output_dir, "visibility.bin")


def load_or_compute_visibility(cfg, graph, mesh, env, recompute=False, cache=True):
    params = cfg.visibility_params()
    occluders = env if cfg.raw["visibility"]["occlude_with_environment"] else ()
    expect = (params.params_hash, mesh_hash(mesh, occluders), graph.graph_hash)
    path = visibility_cache_path(cfg)
    if cache and not recompute and os.path.exists(path):
        try:
            vm = load_matrix(path, expect)
            log.info("reusing visibility cache %s", path)
            return vm
        except (StaleCacheError, CacheFormatError) as exc:
            log.warning("recomputing visibility: %s", exc)
    vm = compute_visibility(graph, mesh, params, occluders)
    if cache:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        save_matrix(vm, path)
    return vm


def build_scene(cfg, recompute=False, cache=True):
    mesh, env, bridge = build_mesh(cfg)
    grid = grid_spec(cfg, mesh, bridge)
    graph = build_graph(grid, [mesh, *env], float(cfg.raw["safety_distance"]), zones(cfg, bridge, grid))
    vm = load_or_compute_visibility(cfg, graph, mesh, env, recompute, cache)
    return Scene(mesh, env, bridge, graph, vm, span_template(cfg, mesh, bridge))


@dataclass
class FaceVisitReport:
    """Per-face counts: distinct path viewpoints seeing the face, and the
    number of planned poses whose cone captures it."""

    path_visits: np.ndarray
    pose_hits: np.ndarray


def face_visits(path, poses, scene, pose_params):
    counts = CoverageModel(scene.vm, scene.mesh).counts(path)
    hits = np.zeros(scene.mesh.n_faces, np.int64)
    for p in poses:
        for k in pose_visible_set(p, scene.vm, scene.mesh, pose_params):
            hits[k] += 1
    return FaceVisitReport(counts, hits)


def emit_heatmap(report, mesh, out_dir, stem="face_visits"):
    """CSV of per-face counts plus a PLY carrying them as face properties."""
    if len(report.path_visits) != mesh.n_faces or len(report.pose_hits) != mesh.n_faces:
        raise ValueError("visit report does not match the mesh")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, stem + ".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["face", "cx", "cy", "cz", "weight", "visits", "pose_hits"])
        for j, c in enumerate(mesh.centroids):
            w.writerow([j, f"{c[0]:.6f}", f"{c[1]:.6f}", f"{c[2]:.6f}", int(mesh.weights[j]),
                        int(report.path_visits[j]), int(report.pose_hits[j])])
    ply_path = os.path.join(out_dir, stem + ".ply")
    save_mesh(mesh, ply_path, {"visits": np.asarray(report.path_visits, np.int64),
                               "pose_hits": np.asarray(report.pose_hits, np.int64),
                               "weight": np.asarray(mesh.weights, np.int64)})
    return csv_path, ply_path


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_plan(cfg, scene=None, recompute=False, workers=None):
    """Plan one mission and write its artifacts; returns the summary dict."""
    t0 = time.perf_counter()
    if scene is None:
        scene = build_scene(cfg, recompute)
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    ga_cfg = cfg.ga_config()
    restrict = bool(cfg.raw["coverage"]["restrict_to_visible"])
    best, stats = evolve(ga_cfg, scene.graph, scene.vm, scene.mesh, scene.template,
                         restrict, workers or int(cfg.raw["workers"]))
    pose_params = cfg.pose_params()
    poses = greedy_poses(best.path, scene.vm, scene.mesh, scene.graph, pose_params)

    with open(os.path.join(out, "path.json"), "w", encoding="utf-8") as fh:
        dump_path(best.path, scene.graph, fh, coverage=best.coverage, length=best.length,
                  feasible=best.feasible)
    with open(os.path.join(out, "mission.json"), "w", encoding="utf-8") as fh:
        dump_mission(poses, pose_params, fh)
    with open(os.path.join(out, "stats.csv"), "w", newline="", encoding="utf-8") as fh:
        write_stats(stats, fh)
    emit_heatmap(face_visits(best.path, poses, scene, pose_params), scene.mesh, out)

    summary = {
        "seed": ga_cfg.seed,
        "feasible": bool(best.feasible),
        "coverage": round(best.coverage, 12),
        "coverage_goal": ga_cfg.coverage_goal,
        "length": round(best.length, 9),
        "path_points": len(best.path.collapsed()),
        "pose_count": len(poses),
        "generations": ga_cfg.generations,
        "faces": scene.mesh.n_faces,
        "viewpoints": len(scene.graph),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    log.info("plan %s: coverage %.4f length %.2f poses %d", out, best.coverage, best.length, len(poses))
    return summary


SWEEP_FIELDS = ("param", "value", "rep", "length", "coverage", "poses", "runtime", "feasible")

_SWEEP_SCENE = None


def _sweep_cell(args):
    cfg, param, value, rep = args
    try:
        s = run_plan(cfg, _SWEEP_SCENE, workers=1)
    except Exception as exc:  # one bad cell must not stop the sweep
        return param, value, rep, None, f"{type(exc).__name__}: {exc}"
    return param, value, rep, s, None


def run_sweep(cfg, sweep, workers=1, out_dir=None):
    """Run every value x repetition; seed = base seed + repetition index.

    Writes ``sweep.csv`` (one row per successful cell) and, if any cell
    failed, ``sweep_failures.csv``.  Returns the successful rows.
    """
    global _SWEEP_SCENE
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    # swept parameters never change the geometry, so one scene serves all cells
    base = cfg.with_overrides(**{"visibility.cache": os.path.join(out_dir, "visibility.bin")})
    _SWEEP_SCENE = build_scene(base)
    jobs, bad = [], []
    for value in sweep.values:
        for rep in range(sweep.repetitions):
            try:
                cell = base.with_overrides(**{
                    sweep.key: value,
                    "seed": cfg.seed + rep,
                    "output_dir": os.path.join(out_dir, f"{sweep.parameter}={value}", f"rep{rep}"),
                })
            except ConfigurationError as exc:
                bad.append((sweep.parameter, value, rep, None, f"ConfigurationError: {exc}"))
                continue
            jobs.append((cell, sweep.parameter, value, rep))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    results += bad

    rows, failures = [], []
    for param, value, rep, s, err in results:
        if err:
            failures.append((param, value, rep, err))
            continue
        rows.append({"param": param, "value": value, "rep": rep, "length": s["length"],
                     "coverage": s["coverage"], "poses": s["pose_count"],
                     "runtime": s["wall_time_s"], "feasible": s["feasible"]})
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    if failures:
        with open(os.path.join(out_dir, "sweep_failures.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param", "value", "rep", "error"])
            w.writerows(failures)
    return rows, failures
