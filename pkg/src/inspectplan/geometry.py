"""Low-level triangle geometry kernels: ray/segment intersection, a BVH over
triangles, parity containment and exact point-to-triangle distance.

Everything here works on flat float64 arrays so the hot loops can run under
numba.  The Python-facing entry point is :class:`TriangleIndex`.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

SEGMENT_EPS = 1e-6
_DET_EPS = 1e-14
# barycentric slack: rays through a shared edge or vertex count as hits on
# both neighbouring triangles instead of slipping between them
EDGE_EPS = 1e-9
_BOX_PAD = 1e-9
_LEAF_SIZE = 4
_STACK_DEPTH = 64

# fixed, slightly skewed direction for parity tests; keeps rays off mesh edges
# on axis-aligned lattices
PARITY_DIRECTION = np.array([0.9986295, 0.0348995, 0.0392598])
PARITY_DIRECTION = PARITY_DIRECTION / np.linalg.norm(PARITY_DIRECTION)


@njit(cache=True)
def ray_triangle_t(ox, oy, oz, dx, dy, dz, tri):
    """Moller-Trumbore with closed edges.  Returns the ray parameter of the
    hit or inf."""
    e1x = tri[1, 0] - tri[0, 0]
    e1y = tri[1, 1] - tri[0, 1]
    e1z = tri[1, 2] - tri[0, 2]
    e2x = tri[2, 0] - tri[0, 0]
    e2y = tri[2, 1] - tri[0, 1]
    e2z = tri[2, 2] - tri[0, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < _DET_EPS:
        return np.inf
    inv = 1.0 / det
    sx = ox - tri[0, 0]
    sy = oy - tri[0, 1]
    sz = oz - tri[0, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < -EDGE_EPS or u > 1.0 + EDGE_EPS:
        return np.inf
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -EDGE_EPS or u + v > 1.0 + EDGE_EPS:
        return np.inf
    return (e2x * qx + e2y * qy + e2z * qz) * inv


@njit(cache=True)
def _box_hit(ox, oy, oz, dx, dy, dz, bmin, bmax, t0, t1):
    # slab test restricted to [t0, t1]
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    lo = t0
    hi = t1
    for k in range(3):
        if abs(d[k]) < 1e-300:
            if o[k] < bmin[k] or o[k] > bmax[k]:
                return False
        else:
            inv = 1.0 / d[k]
            ta = (bmin[k] - o[k]) * inv
            tb = (bmax[k] - o[k]) * inv
            if ta > tb:
                ta, tb = tb, ta
            if ta > lo:
                lo = ta
            if tb < hi:
                hi = tb
            if lo > hi:
                return False
    return True


@njit(cache=True)
def _segment_blocked_bvh(p, q, exclude, eps, tris, node_min, node_max,
                         node_left, node_right, node_start, node_count, prim):
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    dz = q[2] - p[2]
    stack = np.empty(_STACK_DEPTH, np.int64)
    top = 0
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _box_hit(p[0], p[1], p[2], dx, dy, dz,
                        node_min[node], node_max[node], 0.0, 1.0):
            continue
        if node_count[node] > 0:
            s = node_start[node]
            for k in range(s, s + node_count[node]):
                f = prim[k]
                if f == exclude:
                    continue
                t = ray_triangle_t(p[0], p[1], p[2], dx, dy, dz, tris[f])
                if eps < t < 1.0 - eps:
                    return True
        else:
            stack[top] = node_left[node]
            stack[top + 1] = node_right[node]
            top += 2
    return False


@njit(cache=True)
def _segment_blocked_brute(p, q, exclude, eps, tris):
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    dz = q[2] - p[2]
    for f in range(tris.shape[0]):
        if f == exclude:
            continue
        t = ray_triangle_t(p[0], p[1], p[2], dx, dy, dz, tris[f])
        if eps < t < 1.0 - eps:
            return True
    return False


@njit(cache=True)
def _ray_crossings_bvh(o, d, tris, node_min, node_max, node_left,
                       node_right, node_start, node_count, prim):
    stack = np.empty(_STACK_DEPTH, np.int64)
    stack[0] = 0
    top = 1
    hits = 0
    while top > 0:
        top -= 1
        node = stack[top]
        if not _box_hit(o[0], o[1], o[2], d[0], d[1], d[2],
                        node_min[node], node_max[node], 0.0, np.inf):
            continue
        if node_count[node] > 0:
            s = node_start[node]
            for k in range(s, s + node_count[node]):
                t = ray_triangle_t(o[0], o[1], o[2], d[0], d[1], d[2],
                                   tris[prim[k]])
                if 0.0 < t < np.inf:
                    hits += 1
        else:
            stack[top] = node_left[node]
            stack[top + 1] = node_right[node]
            top += 2
    return hits


@njit(parallel=True, cache=True)
def _segments_blocked(P, Q, exclude, eps, tris, node_min, node_max,
                      node_left, node_right, node_start, node_count, prim):
    n = P.shape[0]
    out = np.zeros(n, np.bool_)
    for i in prange(n):
        out[i] = _segment_blocked_bvh(P[i], Q[i], exclude[i], eps, tris,
                                      node_min, node_max, node_left,
                                      node_right, node_start, node_count, prim)
    return out


@njit(parallel=True, cache=True)
def _segments_blocked_brute(P, Q, exclude, eps, tris):
    n = P.shape[0]
    out = np.zeros(n, np.bool_)
    for i in prange(n):
        out[i] = _segment_blocked_brute(P[i], Q[i], exclude[i], eps, tris)
    return out


@njit(parallel=True, cache=True)
def _parity_inside(points, d, tris, node_min, node_max, node_left,
                   node_right, node_start, node_count, prim):
    n = points.shape[0]
    out = np.zeros(n, np.bool_)
    for i in prange(n):
        c = _ray_crossings_bvh(points[i], d, tris, node_min, node_max,
                               node_left, node_right, node_start, node_count,
                               prim)
        out[i] = (c % 2) == 1
    return out


@njit(cache=True)
def point_triangle_distance_sq(px, py, pz, tri):
    """Squared distance from a point to a solid triangle (Ericson, RTCD 5.1.5)."""
    ax, ay, az = tri[0, 0], tri[0, 1], tri[0, 2]
    abx, aby, abz = tri[1, 0] - ax, tri[1, 1] - ay, tri[1, 2] - az
    acx, acy, acz = tri[2, 0] - ax, tri[2, 1] - ay, tri[2, 2] - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        cx, cy, cz = ax, ay, az
    else:
        bpx, bpy, bpz = px - tri[1, 0], py - tri[1, 1], pz - tri[1, 2]
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        cpx, cpy, cpz = px - tri[2, 0], py - tri[2, 1], pz - tri[2, 2]
        d5 = abx * cpx + aby * cpy + abz * cpz
        d6 = acx * cpx + acy * cpy + acz * cpz
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            cx, cy, cz = tri[1, 0], tri[1, 1], tri[1, 2]
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v = d1 / (d1 - d3)
            cx, cy, cz = ax + v * abx, ay + v * aby, az + v * abz
        elif d6 >= 0.0 and d5 <= d6:
            cx, cy, cz = tri[2, 0], tri[2, 1], tri[2, 2]
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            w = d2 / (d2 - d6)
            cx, cy, cz = ax + w * acx, ay + w * acy, az + w * acz
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            bx, by, bz = tri[1, 0], tri[1, 1], tri[1, 2]
            cx = bx + w * (tri[2, 0] - bx)
            cy = by + w * (tri[2, 1] - by)
            cz = bz + w * (tri[2, 2] - bz)
        else:
            denom = 1.0 / (va + vb + vc)
            v = vb * denom
            w = vc * denom
            cx = ax + abx * v + acx * w
            cy = ay + aby * v + acy * w
            cz = az + abz * v + acz * w
    ex, ey, ez = px - cx, py - cy, pz - cz
    return ex * ex + ey * ey + ez * ez


@njit(parallel=True, cache=True)
def min_distances(points, tris):
    """Exact distance from every point to the nearest triangle."""
    n = points.shape[0]
    out = np.empty(n)
    for i in prange(n):
        best = np.inf
        for f in range(tris.shape[0]):
            d = point_triangle_distance_sq(points[i, 0], points[i, 1],
                                           points[i, 2], tris[f])
            if d < best:
                best = d
        out[i] = np.sqrt(best)
    return out


def _build_bvh(tris):
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    cen = tris.mean(axis=1)
    node_min, node_max = [], []
    left, right, start, count = [], [], [], []
    order = []

    def new_node():
        node_min.append(None)
        node_max.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(left) - 1

    root = new_node()
    work = [(root, np.arange(len(tris)))]
    while work:
        node, idx = work.pop()
        node_min[node] = lo[idx].min(axis=0) - _BOX_PAD
        node_max[node] = hi[idx].max(axis=0) + _BOX_PAD
        if len(idx) <= _LEAF_SIZE:
            start[node] = len(order)
            count[node] = len(idx)
            order.extend(idx.tolist())
            continue
        c = cen[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        srt = idx[np.argsort(c[:, axis], kind="stable")]
        mid = len(srt) // 2
        a, b = new_node(), new_node()
        left[node], right[node] = a, b
        work.append((b, srt[mid:]))
        work.append((a, srt[:mid]))
    return (np.array(node_min), np.array(node_max),
            np.array(left, np.int64), np.array(right, np.int64),
            np.array(start, np.int64), np.array(count, np.int64),
            np.array(order, np.int64))


class TriangleIndex:
    """BVH over a fixed triangle soup answering segment/ray queries.

    ``tris`` has shape (m, 3, 3).  Queries with ``brute=True`` scan every
    triangle and exist so the tree can be checked against a plain loop.
    """

    def __init__(self, tris):
        self.tris = np.ascontiguousarray(tris, dtype=np.float64)
        if len(self.tris):
            self._bvh = _build_bvh(self.tris)
        else:
            self._bvh = None

    def __len__(self):
        return len(self.tris)

    def segments_blocked(self, P, Q, exclude=None, eps=SEGMENT_EPS, brute=False):
        P = np.ascontiguousarray(np.atleast_2d(P), dtype=np.float64)
        Q = np.ascontiguousarray(np.atleast_2d(Q), dtype=np.float64)
        P, Q = np.broadcast_arrays(P, Q)
        P, Q = np.ascontiguousarray(P), np.ascontiguousarray(Q)
        if exclude is None:
            exclude = -1
        exclude = np.ascontiguousarray(
            np.broadcast_to(np.asarray(exclude, dtype=np.int64), (len(P),)))
        if self._bvh is None:
            return np.zeros(len(P), bool)
        if brute:
            return _segments_blocked_brute(P, Q, exclude, eps, self.tris)
        return _segments_blocked(P, Q, exclude, eps, self.tris, *self._bvh)

    def segment_blocked(self, p, q, exclude=-1, eps=SEGMENT_EPS, brute=False):
        return bool(self.segments_blocked(p, q, exclude, eps, brute)[0])

    def inside(self, points, direction=PARITY_DIRECTION):
        """Odd crossing count along a fixed ray means the point is enclosed."""
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if self._bvh is None:
            return np.zeros(len(pts), bool)
        d = np.ascontiguousarray(direction, dtype=np.float64)
        return _parity_inside(pts, d, self.tris, *self._bvh)

    def distances(self, points):
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if not len(self.tris):
            return np.full(len(pts), np.inf)
        return min_distances(pts, self.tris)
