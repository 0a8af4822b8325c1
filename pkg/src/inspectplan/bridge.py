"""Synthetic multi-span slab bridge used as a stand-in inspection target.

The deck is a closed box resting on wall piers.  Deck bottom cells under a
pier are left out and the pier walls meet the deck along shared edges, so
the surface is closed except for the pier bottoms at ground level.  x runs
along the bridge, y across it, z up; ground is z = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import MeshRole, RegionSpec, TriMesh


@dataclass(frozen=True)
class BridgeParams:
    spans: int = 3
    span_length: float = 8.0
    deck_width: float = 6.0
    deck_thickness: float = 0.5
    clearance: float = 4.0
    pier_thickness: float = 1.0
    pier_inset: float = 0.5
    skew_deg: float = 0.0
    cell_length: float = 1.0
    cell_width: float = 0.0  # 0 keeps one strip between pier edges
    cell_height: float = 1.0

    def __post_init__(self):
        if self.spans < 1:
            raise ValueError("need at least one span")
        for name in ("span_length", "deck_width", "deck_thickness", "clearance",
                     "pier_thickness", "cell_length", "cell_height"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.pier_inset < self.deck_width / 2:
            raise ValueError("pier_inset must leave a pier of positive width")
        if self.pier_thickness >= self.span_length:
            raise ValueError("piers thicker than a span")
        if abs(self.skew_deg) >= 60:
            raise ValueError("skew must be below 60 degrees")

    @property
    def length(self):
        return self.spans * self.span_length

    @property
    def deck_bottom(self):
        return self.clearance

    @property
    def deck_top(self):
        return self.clearance + self.deck_thickness


def _breaks(lo, hi, step, extra=()):
    pts = list(np.arange(lo, hi, step)) + [hi] + [e for e in extra if lo <= e <= hi]
    return np.unique(np.round(pts, 9))


class _Builder:
    def __init__(self):
        self.vertex_ids = {}
        self.vertices = []
        self.faces = []

    def vid(self, p):
        key = tuple(round(float(c), 9) for c in p)
        if key not in self.vertex_ids:
            self.vertex_ids[key] = len(self.vertices)
            self.vertices.append(key)
        return self.vertex_ids[key]

    def patch(self, fixed_axis, value, us, vs, outward, keep=None):
        """Grid of quads on the plane coord[fixed_axis] = value."""
        u_axis, v_axis = [a for a in range(3) if a != fixed_axis]
        # e_u x e_v points along +fixed_axis for the cyclic axis order
        flip = outward < 0
        for i in range(len(us) - 1):
            for j in range(len(vs) - 1):
                if keep is not None and not keep(0.5 * (us[i] + us[i + 1]), 0.5 * (vs[j] + vs[j + 1])):
                    continue
                corners = []
                for a, b in ((us[i], vs[j]), (us[i + 1], vs[j]),
                             (us[i + 1], vs[j + 1]), (us[i], vs[j + 1])):
                    p = [0.0, 0.0, 0.0]
                    p[fixed_axis] = value
                    p[u_axis] = a
                    p[v_axis] = b
                    corners.append(self.vid(p))
                if (fixed_axis == 1) != flip:  # x cross z = -y
                    corners.reverse()
                a, b, c, d = corners
                self.faces.append((a, b, c))
                self.faces.append((a, c, d))


@dataclass(frozen=True)
class Bridge:
    params: BridgeParams
    mesh: TriMesh
    pier_boxes: tuple = field(default=())

    @property
    def deck_top(self):
        return self.params.deck_top

    def span_intervals(self):
        L = self.params.span_length
        return [(k * L, (k + 1) * L) for k in range(self.params.spans)]

    def span_centers(self):
        return [0.5 * (a + b) for a, b in self.span_intervals()]

    def footprint(self):
        """(xmin, ymin), (xmax, ymax) of the deck outline."""
        lo, hi = self.mesh.bounds
        return (float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1]))

    def above_deck_zone(self, top=1e6):
        (x0, y0), (x1, y1) = self.footprint()
        return (x0, y0, self.deck_top), (x1, y1, top)

    def midspan_regions(self, half_width=1.0, weight=2):
        lo, hi = self.mesh.bounds
        return [RegionSpec(weight, (c - half_width, lo[1] - 1, lo[2] - 1),
                           (c + half_width, hi[1] + 1, hi[2] + 1))
                for c in self.span_centers()]


def generate_bridge(params=None, **overrides):
    """Build the bridge mesh.  Keyword overrides patch :class:`BridgeParams`."""
    if params is None:
        params = BridgeParams(**overrides)
    elif overrides:
        params = BridgeParams(**{**params.__dict__, **overrides})
    p = params
    L, W = p.length, p.deck_width
    zb, zt = p.deck_bottom, p.deck_top
    piers = []
    for k in range(1, p.spans):
        xc = k * p.span_length
        piers.append((xc - p.pier_thickness / 2, xc + p.pier_thickness / 2,
                      p.pier_inset, W - p.pier_inset))
    x_extra = [v for pr in piers for v in pr[:2]]
    y_extra = [p.pier_inset, W - p.pier_inset] if piers else []
    xs = _breaks(0.0, L, p.cell_length, x_extra)
    ys = _breaks(0.0, W, p.cell_width or W, y_extra)
    zs_deck = np.array([zb, zt])
    zs_pier = _breaks(0.0, zb, p.cell_height)

    def off_piers(x, y):
        return not any(x0 < x < x1 and y0 < y < y1 for x0, x1, y0, y1 in piers)

    b = _Builder()
    b.patch(2, zt, xs, ys, +1)
    b.patch(2, zb, xs, ys, -1, keep=off_piers)
    b.patch(1, 0.0, xs, zs_deck, -1)
    b.patch(1, W, xs, zs_deck, +1)
    b.patch(0, 0.0, ys, zs_deck, -1)
    b.patch(0, L, ys, zs_deck, +1)
    for x0, x1, y0, y1 in piers:
        pys = ys[(ys >= y0 - 1e-9) & (ys <= y1 + 1e-9)]
        pxs = xs[(xs >= x0 - 1e-9) & (xs <= x1 + 1e-9)]
        b.patch(0, x0, pys, zs_pier, -1)
        b.patch(0, x1, pys, zs_pier, +1)
        b.patch(1, y0, pxs, zs_pier, -1)
        b.patch(1, y1, pxs, zs_pier, +1)

    verts = np.array(b.vertices, dtype=float)
    shear = math.tan(math.radians(p.skew_deg))
    verts[:, 0] += verts[:, 1] * shear
    mesh = TriMesh(verts, np.array(b.faces), MeshRole.INSPECTION_OBJECT, name="synthetic-bridge")
    boxes = tuple(((x0, y0, 0.0), (x1, y1, zb)) for x0, x1, y0, y1 in piers)
    return Bridge(params, mesh, boxes)
