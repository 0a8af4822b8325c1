"""Viewpoint x face visibility: distance, inclination and occlusion tests."""
from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .geometry import TriangleIndex

MAGIC = b"UVIS"
VERSION = 1
_HEADER = struct.Struct("<4sHHQQQQQ")
_CHUNK = 256


class CacheFormatError(ValueError):
    pass


class StaleCacheError(ValueError):
    pass


@dataclass(frozen=True)
class VisibilityParams:
    vis_dist: float = 10.0
    vis_angle: float = 45.0
    occlusion: bool = True

    def __post_init__(self):
        if self.vis_dist <= 0:
            raise ValueError("vis_dist must be positive")
        if not 0 < self.vis_angle <= 90:
            raise ValueError("vis_angle must lie in (0, 90] degrees")

    @property
    def params_hash(self):
        key = f"{float(self.vis_dist)!r}|{float(self.vis_angle)!r}|{bool(self.occlusion)}"
        return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


@dataclass(frozen=True, eq=False)
class VisibilityMatrix:
    bits: np.ndarray
    params_hash: int = 0
    mesh_hash: int = 0
    graph_hash: int = 0

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise ValueError("visibility matrix must be 2-D")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def shape(self):
        return self.bits.shape

    def __eq__(self, other):
        return (isinstance(other, VisibilityMatrix)
                and self.hashes == other.hashes
                and np.array_equal(self.bits, other.bits))

    @property
    def hashes(self):
        return (self.params_hash, self.mesh_hash, self.graph_hash)


def _occluder_index(mesh, occluders):
    if not occluders:
        return mesh.index, mesh.geometry_hash
    tris = np.concatenate([mesh.triangles] + [m.triangles for m in occluders])
    h = hashlib.blake2b(digest_size=8)
    for m in (mesh, *occluders):
        h.update(m.geometry_hash.to_bytes(8, "little"))
    return TriangleIndex(tris), int.from_bytes(h.digest(), "little")


def mesh_hash(mesh, occluders=()):
    return _occluder_index(mesh, occluders)[1] if occluders else mesh.geometry_hash


def face_visible(vp, j, mesh, params, occluders=()):
    """Whether face ``j`` of ``mesh`` is visible from the point ``vp``."""
    vp = np.asarray(vp, float)
    sight = mesh.centroids[j] - vp
    dist = float(np.linalg.norm(sight))
    if dist == 0 or dist > params.vis_dist:
        return False
    cos_normal = abs(float(sight @ mesh.normals[j])) / dist
    if cos_normal < math.cos(math.radians(params.vis_angle)) or cos_normal <= 0:
        return False
    if params.occlusion:
        index, _ = _occluder_index(mesh, occluders)
        return not index.segment_blocked(vp, mesh.centroids[j], exclude=j)
    return True


def compute_visibility(points, mesh, params, occluders=(), graph_hash=0):
    """Visibility bits for every (viewpoint, face) pair.

    ``points`` is either a :class:`ViewpointGraph` or an (n, 3) array.
    Rows are computed independently, so the result does not depend on how
    the work is chunked or threaded.
    """
    if hasattr(points, "points"):
        graph_hash = points.graph_hash
        points = points.points
    P = np.asarray(points, float).reshape(-1, 3)
    C, N = mesh.centroids, mesh.normals
    index, mhash = _occluder_index(mesh, occluders)
    cos_lim = math.cos(math.radians(params.vis_angle))
    bits = np.zeros((len(P), mesh.n_faces), bool)
    for s in range(0, len(P), _CHUNK):
        block = P[s:s + _CHUNK]
        sight = C[None, :, :] - block[:, None, :]
        dist = np.linalg.norm(sight, axis=2)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_normal = np.abs(np.einsum("ijk,jk->ij", sight, N)) / dist
        ok = (dist > 0) & (dist <= params.vis_dist) & (cos_normal >= cos_lim) & (cos_normal > 0)
        if params.occlusion:
            ii, jj = np.nonzero(ok)
            if len(ii):
                blocked = index.segments_blocked(block[ii], C[jj], exclude=jj)
                ok[ii[blocked], jj[blocked]] = False
        bits[s:s + len(block)] = ok
    return VisibilityMatrix(bits, params.params_hash, mhash, graph_hash)


def save_matrix(m, sink):
    """Write a packed, row-major bitset with a fixed header."""
    n_vp, n_f = m.shape
    header = _HEADER.pack(MAGIC, VERSION, 0, n_vp, n_f, m.params_hash, m.mesh_hash, m.graph_hash)
    payload = np.packbits(m.bits, axis=1).tobytes() if n_vp else b""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(header + payload)
    else:
        sink.write(header + payload)


def load_matrix(source, expect=None):
    """Read a matrix written by :func:`save_matrix`.

    ``expect`` is an optional (params_hash, mesh_hash, graph_hash) triple;
    any mismatch raises :class:`StaleCacheError`.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if len(data) < _HEADER.size:
        raise CacheFormatError("visibility cache shorter than its header")
    magic, version, _, n_vp, n_f, ph, mh, gh = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise CacheFormatError("not a visibility cache (bad magic or version)")
    row_bytes = (n_f + 7) // 8
    body = data[_HEADER.size:]
    if len(body) != n_vp * row_bytes:
        raise CacheFormatError(f"visibility cache body has {len(body)} bytes, expected {n_vp * row_bytes}")
    packed = np.frombuffer(body, dtype=np.uint8).reshape(n_vp, row_bytes)
    bits = np.unpackbits(packed, axis=1, count=n_f).astype(bool)
    m = VisibilityMatrix(bits, ph, mh, gh)
    if expect is not None and tuple(expect) != m.hashes:
        names = [n for n, a, b in zip(("params", "mesh", "graph"), expect, m.hashes) if a != b]
        raise StaleCacheError(f"visibility cache is stale ({', '.join(names)} changed)")
    return m
