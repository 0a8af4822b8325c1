"""Camera poses along a fixed path via greedy max-area cone selection."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .paths import InspectionPath, as_vertices

_TIE_REL = 1e-12


@dataclass(frozen=True)
class PoseParams:
    """Camera field of view in degrees.

    With ``fov_literal`` the cone test compares the angle to ``fov`` itself;
    otherwise to ``fov / 2`` (the usual half-angle reading).
    """

    fov: float = 90.0
    fov_literal: bool = True

    def __post_init__(self):
        if not 0 < self.half_angle < 180:
            raise ValueError("cone angle must lie strictly between 0 and 180 degrees")

    @property
    def half_angle(self):
        return float(self.fov) if self.fov_literal else float(self.fov) / 2.0


@dataclass(frozen=True)
class CameraPose:
    viewpoint: int
    position: tuple
    sight: tuple

    @property
    def yaw_deg(self):
        return math.degrees(math.atan2(self.sight[1], self.sight[0]))

    @property
    def pitch_deg(self):
        return math.degrees(math.asin(max(-1.0, min(1.0, self.sight[2]))))

    def to_record(self):
        x, y, z = self.position
        sx, sy, sz = self.sight
        return {"viewpoint": self.viewpoint,
                "x": round(x, 6), "y": round(y, 6), "z": round(z, 6),
                "sight_x": round(sx, 9), "sight_y": round(sy, 9), "sight_z": round(sz, 9),
                "yaw_deg": round(self.yaw_deg, 6), "pitch_deg": round(self.pitch_deg, 6),
                "roll_deg": 0.0}


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def candidate_poses(path, vm, mesh, g, prune=True):
    """One pose per (distinct path vertex, target face).

    With ``prune`` only faces visible from the vertex are targeted.
    """
    bits = vm.bits if hasattr(vm, "bits") else np.asarray(vm, bool)
    poses = []
    for v in InspectionPath(as_vertices(path)).distinct():
        targets = np.flatnonzero(bits[v]) if prune else np.arange(mesh.n_faces)
        pos = g.points[v]
        for j, s in zip(targets, _unit(mesh.centroids[targets] - pos)):
            poses.append(CameraPose(int(v), tuple(pos.tolist()), tuple(s.tolist())))
    return poses


def pose_visible_set(pose, vm, mesh, params):
    """Faces visible from the pose's viewpoint that fall inside its cone."""
    bits = vm.bits if hasattr(vm, "bits") else np.asarray(vm, bool)
    faces = np.flatnonzero(bits[pose.viewpoint])
    if not len(faces):
        return set()
    seg = _unit(mesh.centroids[faces] - np.asarray(pose.position))
    inside = seg @ np.asarray(pose.sight) >= math.cos(math.radians(params.half_angle))
    return set(faces[inside].tolist())


def _cover_matrix(poses, vm, mesh, params):
    bits = vm.bits if hasattr(vm, "bits") else np.asarray(vm, bool)
    cos_lim = math.cos(math.radians(params.half_angle))
    cover = np.zeros((len(poses), mesh.n_faces), bool)
    by_vertex = {}
    for k, p in enumerate(poses):
        by_vertex.setdefault(p.viewpoint, []).append(k)
    for v, ks in by_vertex.items():
        faces = np.flatnonzero(bits[v])
        if not len(faces):
            continue
        seg = _unit(mesh.centroids[faces] - np.asarray(poses[ks[0]].position))
        sights = np.array([poses[k].sight for k in ks])
        cover[np.ix_(ks, faces)] = sights @ seg.T >= cos_lim
    return cover


def greedy_poses(path, vm, mesh, g, params, prune=True):
    """Greedy cone cover of every face visible from the path.

    Each round takes the pose adding the most uncovered area (ties: lower
    viewpoint index, then lexicographically smaller sight).  The result is
    ordered by first appearance of its viewpoint along the path.
    """
    bits = vm.bits if hasattr(vm, "bits") else np.asarray(vm, bool)
    order = InspectionPath(as_vertices(path)).distinct()
    remaining = bits[order].any(axis=0)
    poses = candidate_poses(path, vm, mesh, g, prune)
    if not poses or not remaining.any():
        return []
    cover = _cover_matrix(poses, vm, mesh, params)
    areas = mesh.areas
    keys = [(p.viewpoint, p.sight) for p in poses]
    weights = cover.astype(np.float64)
    chosen = []
    while remaining.any():
        score = weights @ (areas * remaining)
        top = score.max()
        if top <= 0:
            break
        ties = np.flatnonzero(score >= top * (1 - _TIE_REL))
        k = min(ties, key=lambda t: keys[t])
        chosen.append(poses[k])
        remaining &= ~cover[k]
    rank = {v: i for i, v in enumerate(order)}
    # sorted() is stable, so poses sharing a viewpoint keep selection order
    return sorted(chosen, key=lambda p: rank[p.viewpoint])


def covered_faces(poses, vm, mesh, params):
    out = set()
    for p in poses:
        out |= pose_visible_set(p, vm, mesh, params)
    return out


def mission_dict(poses, params):
    return {"fov": params.fov, "fov_literal": params.fov_literal,
            "poses": [p.to_record() for p in poses]}


def dump_mission(poses, params, fh):
    json.dump(mission_dict(poses, params), fh, indent=2)
    fh.write("\n")
