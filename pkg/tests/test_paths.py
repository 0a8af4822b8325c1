import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inspectplan.mesh import TriMesh
from inspectplan.paths import (CoverageModel, InspectionPath, PathError, SpanTemplate,
                               dump_path, is_continuous, path_coverage, path_from_dict,
                               path_length, random_init, rule_based_init)
from inspectplan.viewpoints import GridSpec, build_graph
from inspectplan.visibility import VisibilityMatrix

OPEN = build_graph(GridSpec((0, 0, 0), (4, 4, 4), 1.0), [], 0.0)
TWO = TriMesh([[0, 0, 0], [1, 0, 0], [0, 2, 0], [5, 0, 0], [8, 0, 0], [5, 2, 0]],
              [[0, 1, 2], [3, 4, 5]])  # areas 1 and 3


def vid(g, *xyz):
    return int(np.flatnonzero((g.lattice == xyz).all(axis=1))[0])


def test_path_needs_two_vertices():
    with pytest.raises(PathError):
        InspectionPath([3])
    p = InspectionPath([1, 1, 2, 2, 1])
    assert p.collapsed() == [1, 2, 1]
    assert p.distinct() == [1, 2]


def test_length_collinear_and_diagonal():
    p = InspectionPath([vid(OPEN, 0, 0, 0), vid(OPEN, 1, 0, 0), vid(OPEN, 2, 0, 0)])
    assert path_length(p, OPEN) == pytest.approx(2.0, abs=1e-12)
    q = InspectionPath([vid(OPEN, 0, 0, 0), vid(OPEN, 1, 1, 1)])
    assert path_length(q, OPEN) == pytest.approx(math.sqrt(3), abs=1e-12)
    r = InspectionPath([vid(OPEN, 0, 0, 0), vid(OPEN, 0, 0, 0), vid(OPEN, 1, 0, 0)])
    assert path_length(r, OPEN) == pytest.approx(1.0)


def test_discontinuous_length_raises():
    p = InspectionPath([vid(OPEN, 0, 0, 0), vid(OPEN, 2, 0, 0)])
    assert not is_continuous(p, OPEN)
    with pytest.raises(PathError):
        path_length(p, OPEN)


def test_random_walk_length_matches_resum():
    rng = np.random.default_rng(11)
    p = random_init(OPEN, 21, rng)
    pts = [OPEN.points[v] for v in p]
    want = sum(math.dist(a, b) for a, b in zip(pts, pts[1:]))
    assert path_length(p, OPEN) == pytest.approx(want, rel=1e-12)


def _vm(rows):
    return VisibilityMatrix(np.array(rows, bool))


def test_coverage_area_weighting():
    vm = _vm([[0, 1], [0, 0]])
    assert path_coverage([0, 1], vm, TWO) == pytest.approx(0.75, abs=1e-15)
    assert path_coverage([1, 1], vm, TWO) == 0.0
    assert path_coverage([0, 1], _vm([[1, 0], [0, 1]]), TWO) == 1.0


def test_weight_two_needs_distinct_vertices():
    m = TWO.with_weights([2, 1])
    vm = _vm([[1, 1], [0, 0], [1, 0]])
    assert path_coverage([0, 1], vm, m) == pytest.approx(0.75, abs=1e-15)
    assert path_coverage([0, 1, 0], vm, m) == pytest.approx(0.75, abs=1e-15)
    assert path_coverage([0, 2], vm, m) == pytest.approx(1.0, abs=1e-15)


def test_restrict_to_visible_denominator():
    vm = _vm([[0, 1], [0, 1]])
    assert path_coverage([0, 1], vm, TWO) == pytest.approx(0.75)
    assert path_coverage([0, 1], vm, TWO, restrict_to_visible=True) == 1.0
    cm = CoverageModel(vm, TWO.with_weights([1, 3]), restrict_to_visible=True)
    assert cm.denominator == 0 and cm([0, 1]) == 0.0


def test_coverage_shape_mismatch():
    with pytest.raises(ValueError):
        CoverageModel(_vm([[1, 0, 1]]), TWO)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_coverage_properties(seed):
    rng = np.random.default_rng(seed)
    n_vp, n_f = 8, 6
    bits = rng.random((n_vp, n_f)) < 0.3
    v = rng.uniform(0, 5, (3 * n_f, 3))
    mesh = TriMesh(v, np.arange(3 * n_f).reshape(-1, 3))
    w = rng.integers(1, 3, n_f)
    vm = _vm(bits)
    path = rng.integers(0, n_vp, 4).tolist()
    more = path + rng.integers(0, n_vp, 3).tolist()
    weighted = mesh.with_weights(w)
    base = path_coverage(path, vm, weighted)
    assert 0.0 <= base <= 1.0
    assert path_coverage(more, vm, weighted) >= base
    assert path_coverage(path, vm, mesh.with_weights(2 * w)) <= base
    # direct evaluation
    counts = bits[sorted(set(path))].sum(axis=0)
    want = mesh.areas[counts >= w].sum() / mesh.areas.sum()
    assert base == pytest.approx(want, abs=1e-15)
    if bits[sorted(set(more))].any(axis=0).all():
        assert path_coverage(more, vm, mesh) == 1.0


def test_random_init_basics(cube_graph):
    p = random_init(cube_graph, 2, np.random.default_rng(0))
    assert len(p) == 2 and cube_graph.are_neighbors(p[0], p[1])
    a = random_init(cube_graph, 30, np.random.default_rng(4))
    b = random_init(cube_graph, 30, np.random.default_rng(4))
    assert a == b
    with pytest.raises(PathError):
        random_init(cube_graph, 1, np.random.default_rng(0))


def test_thousand_walks_are_valid(cube, cube_graph):
    rng = np.random.default_rng(99)
    for _ in range(1000):
        p = random_init(cube_graph, int(rng.integers(2, 30)), rng)
        assert is_continuous(p, cube_graph)
    d = cube.index.distances(cube_graph.points)
    assert d.min() >= 0.5 - 1e-9


def test_template_validation():
    with pytest.raises(ValueError):
        SpanTemplate(((0, 5), (4, 8)), 1.0)
    with pytest.raises(ValueError):
        SpanTemplate(((0, 5),), 1.0, 0)
    with pytest.raises(ValueError):
        SpanTemplate((), 1.0)


def test_rule_based_single_span_loop():
    t = SpanTemplate(((-math.inf, math.inf),), 1.5)
    p = rule_based_init(OPEN, t, np.random.default_rng(2))
    assert is_continuous(p, OPEN)
    assert p[0] == p[-1]
    z = OPEN.points[list(p), 2]
    assert (z > 1.5).any() and (z <= 1.5).any()


def test_rule_based_visits_spans_in_order(bridge, bridge_graph, bridge_template):
    p = rule_based_init(bridge_graph, bridge_template, np.random.default_rng(3))
    assert is_continuous(p, bridge_graph)
    x = bridge_graph.points[list(p), 0]
    iv = bridge.span_intervals()
    # the path reaches each span before leaving the previous one for good
    first = [np.flatnonzero((x >= a) & (x < b))[0] for a, b in iv[1:]]
    assert first == sorted(first)
    last_before = [np.flatnonzero(x < a)[-1] for a, _ in iv[1:]]
    assert all(l < f2 for l, f2 in zip(last_before[:-1], first[1:]))
    q = rule_based_init(bridge_graph, bridge_template, np.random.default_rng(3))
    assert p == q


def test_rule_based_needs_both_levels():
    t = SpanTemplate(((-math.inf, math.inf),), 10.0)
    with pytest.raises(PathError, match="span 0"):
        rule_based_init(OPEN, t, np.random.default_rng(0))


def test_json_round_trip(cube_graph):
    p = random_init(cube_graph, 12, np.random.default_rng(1))
    buf = io.StringIO()
    dump_path(p, cube_graph, buf, length=path_length(p, cube_graph), coverage=0.5)
    d = json.loads(buf.getvalue())
    assert len(d["waypoints"]) == len(p.collapsed())
    back = path_from_dict(d, cube_graph)
    assert list(back) == p.collapsed()
    assert path_from_dict(d) == back


def test_json_rejects_foreign_waypoints(cube_graph):
    with pytest.raises(PathError):
        path_from_dict({"waypoints": [[0.5, 0.5, 0.5], [0, 0, 0]]}, cube_graph)
