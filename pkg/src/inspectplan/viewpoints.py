"""Discretised flight space: lattice viewpoints with 26-connectivity."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

SAFETY_TOL = 1e-9
OFFSETS = np.array([o for o in product((-1, 0, 1), repeat=3) if o != (0, 0, 0)])


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    origin: tuple
    extents: tuple
    interval: float = 1.0

    def __post_init__(self):
        if self.interval <= 0:
            raise ConfigurationError("grid interval must be positive")
        if len(self.origin) != 3 or len(self.extents) != 3:
            raise ConfigurationError("grid origin and extents need three components")
        if any(e < self.interval for e in self.extents):
            raise ConfigurationError("grid extents must be at least one interval on every axis")

    @classmethod
    def around(cls, lo, hi, interval=1.0, padding=0.0, z_floor=None):
        """Grid covering the box [lo, hi] grown by ``padding`` on every side.

        ``z_floor`` clips the bottom of the grid (e.g. to stay above ground).
        """
        lo = np.asarray(lo, float) - padding
        hi = np.asarray(hi, float) + padding
        if z_floor is not None:
            lo[2] = max(lo[2], z_floor)
        ext = np.maximum(hi - lo, interval)
        return cls(tuple(lo.tolist()), tuple(ext.tolist()), float(interval))

    @property
    def shape(self):
        return tuple(int(np.floor(e / self.interval + 1e-9)) + 1 for e in self.extents)

    def lattice(self):
        """Integer lattice coordinates and positions of every grid point."""
        ijk = np.array(list(np.ndindex(*self.shape)), dtype=np.int64).reshape(-1, 3)
        return ijk, np.asarray(self.origin) + ijk * self.interval


@dataclass(frozen=True)
class NoFlyZone:
    box_min: tuple
    box_max: tuple

    def __post_init__(self):
        if np.any(np.asarray(self.box_min, float) > np.asarray(self.box_max, float)):
            raise ConfigurationError("no-fly zone needs min <= max on all axes")

    def contains(self, points):
        pts = np.atleast_2d(points)
        return np.all((pts >= np.asarray(self.box_min)) & (pts <= np.asarray(self.box_max)), axis=1)


class ViewpointGraph:
    """Surviving lattice points plus their 26-connectivity adjacency.

    ``lattice`` holds integer grid coordinates, so two vertices are
    neighbours exactly when their Chebyshev lattice distance is 1.
    """

    def __init__(self, points, lattice, interval):
        self.points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        self.lattice = np.ascontiguousarray(lattice, dtype=np.int64).reshape(-1, 3)
        self.interval = float(interval)
        self.points.setflags(write=False)
        self.lattice.setflags(write=False)
        self.indptr, self.indices = _adjacency(self.lattice)

    def __len__(self):
        return len(self.points)

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i):
        return int(self.indptr[i + 1] - self.indptr[i])

    @cached_property
    def lattice32(self):
        return self.lattice.astype(np.int32)

    @cached_property
    def closed_neighborhoods(self):
        """Per-vertex frozenset of neighbours including the vertex itself."""
        return [frozenset(self.neighbors(i).tolist()) | {i} for i in range(len(self))]

    def are_neighbors(self, a, b):
        if a == b:
            return True
        return int(np.abs(self.lattice[a] - self.lattice[b]).max()) == 1

    @cached_property
    def weighted_adjacency(self):
        """Sparse matrix of Euclidean edge lengths."""
        rows = np.repeat(np.arange(len(self)), np.diff(self.indptr))
        w = np.linalg.norm(self.points[rows] - self.points[self.indices], axis=1)
        return sparse.csr_matrix((w, self.indices, self.indptr), shape=(len(self), len(self)))

    @cached_property
    def graph_hash(self):
        h = hashlib.blake2b(digest_size=8)
        h.update(self.points.astype("<f8").tobytes())
        h.update(np.float64(self.interval).tobytes())
        return int.from_bytes(h.digest(), "little")

    def to_json(self):
        return json.dumps({
            "interval": self.interval,
            "points": self.points.tolist(),
            "lattice": self.lattice.tolist(),
            "adjacency": [self.neighbors(i).tolist() for i in range(len(self))],
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["points"], d["lattice"], d["interval"])


def _adjacency(lattice):
    n = len(lattice)
    if n == 0:
        return np.zeros(1, np.int64), np.zeros(0, np.int64)
    base = lattice.min(axis=0) - 1
    shape = lattice.max(axis=0) - base + 2
    lookup = np.full(tuple(shape), -1, dtype=np.int64)
    local = lattice - base
    lookup[tuple(local.T)] = np.arange(n)
    nbrs = np.stack([lookup[tuple((local + o).T)] for o in OFFSETS], axis=1)
    nbrs.sort(axis=1)
    counts = (nbrs >= 0).sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = nbrs[nbrs >= 0].astype(np.int64)
    return indptr, indices


def build_graph(grid, scene, safety_distance, zones=(), check_containment=True):
    """Lattice points outside every mesh, clear of every face by at least
    ``safety_distance``, and outside every no-fly zone."""
    if safety_distance < 0:
        raise ConfigurationError("safety distance must be non-negative")
    ijk, pts = grid.lattice()
    keep = np.ones(len(pts), bool)
    removed = {}

    inside = np.zeros(len(pts), bool)
    if check_containment:
        for mesh in scene:
            inside |= mesh.index.inside(pts)
    removed["containment"] = int(inside.sum())
    keep &= ~inside

    too_close = np.zeros(len(pts), bool)
    if scene and safety_distance > 0:
        cand = np.flatnonzero(keep)
        for mesh in scene:
            d = mesh.index.distances(pts[cand])
            too_close[cand[d < safety_distance - SAFETY_TOL]] = True
    removed["safety distance"] = int((too_close & keep).sum())
    keep &= ~too_close

    zoned = np.zeros(len(pts), bool)
    for zone in zones:
        zoned |= zone.contains(pts)
    removed["no-fly zone"] = int((zoned & keep).sum())
    keep &= ~zoned

    log.info("viewpoint grid %s: %d points, removed %s", grid.shape, len(pts), removed)
    if not keep.any():
        dominant = max(removed, key=removed.get)
        raise ConfigurationError(
            f"no viewpoints left after filtering; {dominant} removed {removed[dominant]} "
            f"of {len(pts)} grid points")
    return ViewpointGraph(pts[keep], ijk[keep], grid.interval)
