"""Inspection paths on the viewpoint graph: metrics and initialisers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

MAX_RETRIES = 100


class PathError(ValueError):
    pass


@dataclass(frozen=True)
class InspectionPath:
    """Ordered graph vertex indices (the optimiser's genome)."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(map(int, self.vertices)))
        if len(self.vertices) < 2:
            raise PathError("a path needs at least two vertices")

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]

    def distinct(self):
        """Distinct vertices in order of first visit."""
        return list(dict.fromkeys(self.vertices))

    def collapsed(self):
        """Vertices with consecutive repeats removed."""
        out = [self.vertices[0]]
        for v in self.vertices[1:]:
            if v != out[-1]:
                out.append(v)
        return out


def as_vertices(p):
    return p.vertices if isinstance(p, InspectionPath) else tuple(p)


def is_continuous(p, g):
    idx = np.asarray(as_vertices(p), dtype=np.int64)
    if len(idx) < 2 or idx.min() < 0 or idx.max() >= len(g):
        return False
    step = np.abs(np.diff(g.lattice[idx], axis=0)).max(axis=1)
    return bool(np.all(step <= 1))


def path_length(p, g):
    """Sum of Euclidean hops between consecutive distinct viewpoints."""
    idx = np.asarray(as_vertices(p), dtype=np.int64)
    if not is_continuous(idx, g):
        raise PathError("path is not continuous on the viewpoint graph")
    return float(np.linalg.norm(np.diff(g.points[idx], axis=0), axis=1).sum())


class CoverageModel:
    """Area-weighted coverage of a set of viewpoints.

    A face counts once it is seen from at least ``weight`` distinct path
    vertices.  With ``restrict_to_visible`` the denominator only holds faces
    that the whole viewpoint space can satisfy.
    """

    def __init__(self, vm, mesh, restrict_to_visible=False):
        bits = vm.bits if hasattr(vm, "bits") else np.asarray(vm, bool)
        if bits.shape[1] != mesh.n_faces:
            raise ValueError("visibility matrix and mesh disagree on face count")
        self.bits = bits.astype(np.uint8)
        self.areas = mesh.areas
        self.weights = mesh.weights
        if restrict_to_visible:
            self.mask = bits.sum(axis=0) >= self.weights
        else:
            self.mask = np.ones(mesh.n_faces, bool)
        self.denominator = float(self.areas[self.mask].sum())

    def counts(self, vertices):
        idx = np.unique(np.asarray(as_vertices(vertices), dtype=np.int64))
        return self.bits[idx].sum(axis=0, dtype=np.int64)

    def covered(self, vertices):
        return (self.counts(vertices) >= self.weights) & self.mask

    def __call__(self, vertices):
        if self.denominator == 0:
            return 0.0
        return float(self.areas[self.covered(vertices)].sum() / self.denominator)


def path_coverage(p, vm, mesh, restrict_to_visible=False):
    return CoverageModel(vm, mesh, restrict_to_visible)(p)


def random_init(g, n_points, rng):
    """Random walk of ``n_points`` vertices along uniformly chosen edges."""
    if n_points < 2:
        raise PathError("n_points must be at least 2")
    degrees = np.diff(g.indptr)
    if not degrees.any():
        raise PathError("viewpoint graph has no edges")
    for _ in range(MAX_RETRIES):
        start = int(rng.integers(len(g)))
        if degrees[start]:
            break
    else:
        raise PathError(f"no connected start vertex after {MAX_RETRIES} draws")
    walk = [start]
    for _ in range(n_points - 1):
        nbrs = g.neighbors(walk[-1])
        walk.append(int(nbrs[rng.integers(len(nbrs))]))
    return InspectionPath(walk)


@dataclass(frozen=True)
class SpanTemplate:
    """Span-by-span loop layout for rule-based initial paths.

    ``spans`` are ordered (lo, hi) intervals along ``axis``; each loop visits
    two random viewpoints above ``deck_height`` and two at or below it.
    """

    spans: tuple
    deck_height: float
    loops_per_span: int = 1
    axis: int = 0

    def __post_init__(self):
        spans = tuple((float(a), float(b)) for a, b in self.spans)
        object.__setattr__(self, "spans", spans)
        if not spans:
            raise ValueError("template needs at least one span")
        for (a, b), nxt in zip(spans, spans[1:] + ((math.inf, math.inf),)):
            if not a < b or b > nxt[0]:
                raise ValueError("spans must be ordered and non-overlapping")
        if self.loops_per_span < 1:
            raise ValueError("loops_per_span must be at least 1")


class _ShortestPaths:
    def __init__(self, g):
        self.g = g
        self._cache = {}

    def route(self, a, b):
        """Vertices after ``a`` up to and including ``b``; None if unreachable."""
        if a == b:
            return []
        if a not in self._cache:
            _, pred = dijkstra(self.g.weighted_adjacency, indices=a, return_predecessors=True)
            self._cache[a] = pred
        pred = self._cache[a]
        if pred[b] < 0:
            return None
        out = [b]
        while out[-1] != a:
            out.append(int(pred[out[-1]]))
        out.reverse()
        return out[1:]


def _loop_points(g, members, template, rng):
    z = g.points[members, 2]
    above = members[z > template.deck_height]
    below = members[z <= template.deck_height]
    if len(above) < 2 or len(below) < 2:
        return None
    pick = np.concatenate([rng.choice(above, 2, replace=False), rng.choice(below, 2, replace=False)])
    # order around the span axis so the loop wraps the deck
    perp = [a for a in range(3) if a != template.axis]
    rel = g.points[pick][:, perp] - g.points[pick][:, perp].mean(axis=0)
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    return [int(v) for v in pick[np.argsort(ang, kind="stable")]]


def rule_based_init(g, template, rng, router=None):
    """Loops around each span in order, joined by shortest graph routes."""
    router = router or _ShortestPaths(g)
    coord = g.points[:, template.axis]
    path = []
    for s, (lo, hi) in enumerate(template.spans):
        members = np.flatnonzero((coord >= lo) & (coord < hi))
        for _ in range(template.loops_per_span):
            for _ in range(MAX_RETRIES):
                pts = _loop_points(g, members, template, rng)
                if pts is None:
                    raise PathError(f"span {s} lacks viewpoints above and below the deck")
                stops = pts + [pts[0]]
                cur = path[-1] if path else stops[0]
                legs = []
                ok = True
                for target in stops:
                    leg = router.route(cur, target)
                    if leg is None:
                        ok = False
                        break
                    legs.extend(leg)
                    cur = target
                if ok:
                    if not path:
                        path.append(stops[0])
                    path.extend(legs)
                    break
            else:
                raise PathError(f"span {s}: loop points unreachable after {MAX_RETRIES} tries")
    if len(path) < 2:
        path.append(int(g.neighbors(path[0])[0]))
    return InspectionPath(path)


def default_path_points(mesh, interval):
    """Perimeter of the model's bounding box at mid-height, in grid steps."""
    lo, hi = mesh.bounds
    return max(2, int(math.ceil(2 * ((hi[0] - lo[0]) + (hi[1] - lo[1])) / interval)))


def path_to_dict(p, g, coverage=None, length=None, feasible=None):
    verts = InspectionPath(as_vertices(p)).collapsed()
    out = {
        "vertex_indices": verts,
        "waypoints": [[round(float(c), 6) for c in g.points[v]] for v in verts],
    }
    if length is not None:
        out["length"] = round(float(length), 9)
    if coverage is not None:
        out["coverage"] = round(float(coverage), 12)
    if feasible is not None:
        out["feasible"] = bool(feasible)
    return out


def dump_path(p, g, fh, **metrics):
    json.dump(path_to_dict(p, g, **metrics), fh, indent=2)
    fh.write("\n")


def path_from_dict(d, g=None):
    """Rebuild a path from exported JSON; waypoints are matched to ``g`` if given."""
    if g is not None and "waypoints" in d:
        lookup = {tuple(np.round(pt, 6)): i for i, pt in enumerate(g.points.tolist())}
        try:
            return InspectionPath([lookup[tuple(np.round(w, 6))] for w in d["waypoints"]])
        except KeyError as exc:
            raise PathError(f"waypoint {exc.args[0]} is not a viewpoint of this graph") from None
    return InspectionPath(d["vertex_indices"])
