"""Triangle meshes for the inspected structure and its surroundings."""
from __future__ import annotations

import hashlib
import io
import logging
import os
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .geometry import SEGMENT_EPS, TriangleIndex

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12
MESH_FORMATS = ("stl", "obj", "ply", "off")


class MeshError(ValueError):
    pass


class MeshFormatError(MeshError):
    pass


class EmptyModelError(MeshError):
    pass


class DegenerateFaceError(MeshError):
    pass


class MeshRole(str, Enum):
    INSPECTION_OBJECT = "inspection_object"
    ENVIRONMENT_OBSTACLE = "environment_obstacle"


@dataclass(frozen=True)
class Face:
    vertex_indices: tuple
    centroid: np.ndarray
    normal: np.ndarray
    area: float
    weight: int = 1


def triangle_metrics(v0, v1, v2):
    """Centroid, unit normal (from winding) and area of one triangle."""
    v0, v1, v2 = (np.asarray(v, dtype=float) for v in (v0, v1, v2))
    cross = np.cross(v1 - v0, v2 - v0)
    norm = float(np.linalg.norm(cross))
    area = 0.5 * norm
    if area < DEGENERATE_AREA:
        raise DegenerateFaceError(f"triangle area {area:g} below {DEGENERATE_AREA:g}")
    return (v0 + v1 + v2) / 3.0, cross / norm, area


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable triangle mesh.

    ``faces`` holds vertex indices, ``weights`` the per-face inspection
    weight (number of distinct viewpoints a face must be seen from).
    Derived quantities are computed once and cached.
    """

    vertices: np.ndarray
    faces: np.ndarray
    role: MeshRole = MeshRole.INSPECTION_OBJECT
    weights: np.ndarray = None
    dropped_faces: int = 0
    name: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "role", MeshRole(self.role))
        if len(f) == 0:
            raise EmptyModelError("mesh has no faces")
        if f.min() < 0 or f.max() >= len(v):
            raise MeshError("face references a vertex index out of range")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise DegenerateFaceError("face with repeated vertex index")
        bad = np.flatnonzero(self.areas < DEGENERATE_AREA)
        if len(bad):
            raise DegenerateFaceError(f"{len(bad)} zero-area faces, first is {bad[0]}")
        w = np.ones(len(f), np.int64) if self.weights is None else np.asarray(self.weights, np.int64)
        if w.shape != (len(f),) or w.min() < 1:
            raise MeshError("weights must be one positive integer per face")
        w.setflags(write=False)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def triangles(self):
        t = self.vertices[self.faces]
        t.setflags(write=False)
        return t

    @cached_property
    def _cross(self):
        t = self.triangles
        return np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])

    @cached_property
    def areas(self):
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self):
        return self._cross / np.linalg.norm(self._cross, axis=1, keepdims=True)

    @cached_property
    def centroids(self):
        return self.triangles.mean(axis=1)

    @property
    def total_area(self):
        return float(self.areas.sum())

    @property
    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @cached_property
    def index(self):
        return TriangleIndex(self.triangles)

    def face(self, j):
        return Face(tuple(int(i) for i in self.faces[j]), self.centroids[j],
                    self.normals[j], float(self.areas[j]), int(self.weights[j]))

    def with_weights(self, weights):
        return TriMesh(self.vertices, self.faces, self.role, weights,
                       self.dropped_faces, self.name)

    def flipped(self):
        return TriMesh(self.vertices, self.faces[:, ::-1], self.role,
                       self.weights, self.dropped_faces, self.name)

    @cached_property
    def geometry_hash(self):
        h = hashlib.blake2b(digest_size=8)
        h.update(self.vertices.astype("<f8").tobytes())
        h.update(self.faces.astype("<i8").tobytes())
        return int.from_bytes(h.digest(), "little")


def face_metrics(j, mesh):
    """(centroid, unit normal, area) of face ``j`` recomputed from its vertices."""
    a, b, c = mesh.vertices[mesh.faces[j]]
    return triangle_metrics(a, b, c)


def segment_occluded(p, q, mesh, exclude=-1, eps=SEGMENT_EPS, brute=False):
    """True when a face other than ``exclude`` cuts the open segment (p, q)."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if np.array_equal(p, q):
        raise ValueError("segment endpoints coincide")
    return mesh.index.segment_blocked(p, q, exclude, eps, brute)


def from_arrays(vertices, faces, role=MeshRole.INSPECTION_OBJECT, name=""):
    """Build a mesh, silently dropping faces that are degenerate."""
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(f) == 0:
        raise EmptyModelError("model contains no faces")
    if f.min() < 0 or f.max() >= len(v):
        raise MeshFormatError("face references a vertex index out of range")
    t = v[f]
    area = 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)
    distinct = (f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])
    keep = distinct & (area >= DEGENERATE_AREA)
    dropped = int((~keep).sum())
    if dropped:
        log.warning("dropped %d degenerate faces from %s", dropped, name or "mesh")
    if not keep.any():
        raise EmptyModelError("model contains no valid faces")
    return TriMesh(v, f[keep], role, None, dropped, name)


def _check_stl(data):
    if data.lstrip()[:5].lower() == b"solid" and b"facet" in data:
        return
    if len(data) < 84:
        raise MeshFormatError("STL data too short for a binary header")
    n = int.from_bytes(data[80:84], "little")
    if len(data) < 84 + 50 * n:
        raise MeshFormatError(f"binary STL truncated: header promises {n} facets")


def load_mesh(source, fmt=None, role=MeshRole.INSPECTION_OBJECT):
    """Load a triangle mesh from a path or binary stream.

    ``fmt`` is one of stl/obj/ply/off and may be omitted for paths, in which
    case the file extension decides.
    """
    import trimesh

    name = ""
    if isinstance(source, (str, os.PathLike)):
        name = os.fspath(source)
        fmt = fmt or os.path.splitext(name)[1].lstrip(".")
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    fmt = (fmt or "").lower()
    if fmt not in MESH_FORMATS:
        raise MeshFormatError(f"unsupported mesh format {fmt!r}")
    if fmt == "stl":
        _check_stl(data)
    try:
        loaded = trimesh.load(io.BytesIO(data), file_type=fmt, process=False,
                              force="mesh", maintain_order=True)
        vertices = np.asarray(loaded.vertices)
        faces = np.asarray(loaded.faces)
    except Exception as exc:  # trimesh raises a zoo of exception types
        raise MeshFormatError(f"could not parse {fmt} data: {exc}") from exc
    if faces.ndim != 2 or len(faces) == 0:
        raise EmptyModelError("model contains no faces")
    if faces.shape[1] != 3:
        raise MeshFormatError("only triangle faces are supported")
    return from_arrays(vertices, faces, role, name)


def save_mesh(mesh, path, face_scalars=None):
    """Write ``mesh``; ``face_scalars`` (name -> array) go into PLY face data."""
    import trimesh

    tm = trimesh.Trimesh(mesh.vertices, mesh.faces, process=False)
    fmt = os.path.splitext(os.fspath(path))[1].lstrip(".").lower()
    if face_scalars:
        for key, values in face_scalars.items():
            tm.face_attributes[key] = np.asarray(values)
    if fmt == "ply":
        data = trimesh.exchange.ply.export_ply(tm, encoding="ascii",
                                               include_attributes=bool(face_scalars))
    else:
        data = tm.export(file_type=fmt)
    if isinstance(data, str):
        data = data.encode()
    with open(path, "wb") as fh:
        fh.write(data)


@dataclass(frozen=True)
class RegionSpec:
    """Faces selected by an axis-aligned box (on centroids) or by index."""

    weight: int
    box_min: tuple = None
    box_max: tuple = None
    face_indices: tuple = None

    def __post_init__(self):
        if int(self.weight) != self.weight or self.weight < 1:
            raise ValueError("region weight must be a positive integer")
        has_box = self.box_min is not None or self.box_max is not None
        if has_box == (self.face_indices is not None):
            raise ValueError("region needs exactly one of a box or a face list")
        if has_box:
            lo = np.asarray(self.box_min, float)
            hi = np.asarray(self.box_max, float)
            if lo.shape != (3,) or hi.shape != (3,) or np.any(lo > hi):
                raise ValueError("region box needs min <= max on all three axes")

    def select(self, mesh):
        if self.face_indices is not None:
            idx = np.asarray(self.face_indices, dtype=np.int64)
            if len(idx) and (idx.min() < 0 or idx.max() >= mesh.n_faces):
                raise ValueError("region face index out of range")
            mask = np.zeros(mesh.n_faces, bool)
            mask[idx] = True
            return mask
        c = mesh.centroids
        return np.all((c >= np.asarray(self.box_min)) & (c <= np.asarray(self.box_max)), axis=1)


def apply_weights(mesh, regions):
    """Return a copy of ``mesh`` with region weights; later regions win."""
    weights = np.ones(mesh.n_faces, np.int64)
    for k, region in enumerate(regions):
        mask = region.select(mesh)
        if not mask.any():
            log.warning("weight region %d selects no faces", k)
        weights[mask] = int(region.weight)
    return mesh.with_weights(weights)
