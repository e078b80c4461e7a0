import json
import math

import numpy as np
import pytest

from sandstone import circles, fractal, symmat
from sandstone.circles import GenCircle, circle_to_matrix, downward_packing
from sandstone.errors import CollinearError, GeometryError
from sandstone.fractal import build_triangulation, curve_points, initial_patches, triangle_from_vertices

from conftest import random_triple, tangent_triple

BAND = [GenCircle.circle((1, 0), 1), GenCircle.circle((1, 2), 1), GenCircle.circle((0.25, 1), 0.25)]


def cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def mats(cs):
    return [circle_to_matrix(c) for c in cs]


@pytest.fixture(scope="module")
def band_T():
    return build_triangulation(*mats(BAND), 4, depth=10)


@pytest.fixture(scope="module")
def congruent_T():
    return build_triangulation(*mats(tangent_triple(1, 1, 1)), 3, depth=10)


def _meet(p, d, q, e):
    t = np.linalg.solve(np.column_stack([d, -e]), q - p)
    return p + t[0] * d


def bezier_oracle(p1, p2, apex, depth):
    """Refinement written out on a stack, with the control points found by line intersection."""
    out = [np.asarray(p1, float)]
    stack = [(np.asarray(p1, float), np.asarray(apex, float), np.asarray(p2, float), depth)]
    while stack:
        a, c, b, d = stack.pop()
        if d == 0:
            out.append(b)
            continue
        s = (a + b + c) / 3
        c1 = _meet(a, c - a, s, b - a)
        c2 = _meet(b, c - b, s, b - a)
        stack.append((s, c2, b, d - 1))
        stack.append((a, c1, s, d - 1))
    return np.array(out)


def test_curve_examples():
    c = curve_points((0, 0), (1, 0), (0.5, 0.75), 1)
    assert c.points[1] == pytest.approx((0.5, 0.25))
    c0 = curve_points((0, 0), (1, 0), (0.5, 0.75), 0)
    assert np.allclose(c0.points, [(0, 0), (1, 0)])
    with pytest.raises(CollinearError):
        curve_points((0, 0), (1, 0), (2, 0), 3)


def test_curve_matches_oracle(rng):
    for _ in range(20):
        p1, p2, apex = rng.uniform(-3, 3, (3, 2))
        if abs(fractal.triangle_area(p1, p2, apex)) < 0.1:
            continue
        c = curve_points(p1, p2, apex, 7)
        assert len(c.points) == 2**7 + 1
        assert np.allclose(c.points, bezier_oracle(p1, p2, apex, 7), atol=1e-12)


def test_split_point_two_thirds_along_medians(rng):
    p1, p2, apex = rng.uniform(-3, 3, (3, 2))
    s = curve_points(p1, p2, apex, 1).points[1]
    for v, (a, b) in ((p1, (p2, apex)), (p2, (p1, apex)), (apex, (p1, p2))):
        mid = (a + b) / 2
        assert s == pytest.approx(v + 2 / 3 * (mid - v))


def test_curve_convex_and_inside(rng):
    for _ in range(20):
        p1, p2, apex = rng.uniform(-3, 3, (3, 2))
        if abs(fractal.triangle_area(p1, p2, apex)) < 0.1:
            continue
        c = curve_points(p1, p2, apex, 9)
        assert c.is_convex()
        inside = fractal.points_in_polygon(np.array([p1, apex, p2]), c.points[1:-1])
        assert inside.all()


def test_curve_tangent_directions_rotate_monotonically(rng):
    p1, p2, apex = np.array([0.0, 0.0]), np.array([3.0, 0.5]), np.array([1.0, 2.0])
    c = curve_points(p1, p2, apex, 10)
    seg = np.diff(c.points, axis=0)
    ang = np.unwrap(np.arctan2(seg[:, 1], seg[:, 0]))
    d = np.diff(ang)
    assert (d <= 1e-15).all() or (d >= -1e-15).all()


def test_triangle_equilateral_symmetry():
    V = [np.array([math.cos(t), math.sin(t)]) for t in (0.3, 0.3 + 2 * math.pi / 3, 0.3 + 4 * math.pi / 3)]
    T = triangle_from_vertices(*V, 8)
    rot = np.array([[math.cos(2 * math.pi / 3), -math.sin(2 * math.pi / 3)],
                    [math.sin(2 * math.pi / 3), math.cos(2 * math.pi / 3)]])
    rotated = [set(map(tuple, np.round(c.points @ rot.T, 9))) for c in T.curves]
    originals = [set(map(tuple, np.round(c.points, 9))) for c in T.curves]
    for r in rotated:
        assert r in originals


def test_triangle_area_four_sevenths(rng):
    for _ in range(3):
        V = rng.uniform(-2, 2, (3, 2))
        if abs(fractal.triangle_area(*V)) < 0.3:
            continue
        T = triangle_from_vertices(*V, 12)
        assert T.area() / T.vertex_triangle_area() == pytest.approx(4 / 7, abs=1e-3)


def test_triangle_affine_equivariance(rng):
    V = rng.uniform(-2, 2, (3, 2))
    M = rng.uniform(-1, 1, (2, 2)) + 2 * np.eye(2)
    t = rng.uniform(-1, 1, 2)
    A = triangle_from_vertices(*V, 6)
    B = triangle_from_vertices(*(V @ M.T + t), 6)
    for ca, cb in zip(A.curves, B.curves):
        assert np.allclose(ca.points @ M.T + t, cb.points, atol=1e-12)


def test_triangle_vertex_cusps():
    T = triangle_from_vertices((0, 0), (4, 0), (1, 3), 10)
    g = T.centroid
    # both curves leaving a vertex start along the median towards the centroid
    for i, v in enumerate(T.vertices):
        for c in T.curves:
            if np.allclose(c.p1, v):
                d = c.apex - c.p1
                assert abs(cross2(d, g - v)) <= 1e-12 * np.linalg.norm(d) * np.linalg.norm(g - v)


def test_initial_patches_congruent():
    D = initial_patches(*mats(tangent_triple(1, 1, 1)))
    p = D.points
    sides = [np.linalg.norm(p[i] - p[(i + 1) % 3]) for i in range(3)]
    assert max(sides) - min(sides) <= 1e-12
    assert np.allclose(p.mean(axis=0), 0, atol=1e-14)


def test_initial_patches_structure(rng):
    for _ in range(20):
        C = random_triple(rng)
        A = mats(C)
        D = initial_patches(*A)
        A4m = symmat.reflect_trace2(D.A4)
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            H = D.patches[i].hessian
            assert np.allclose(H.params, A[i].params, atol=1e-9)
            assert np.allclose((A4m + symmat.outer(tuple(D.v[i]))).params, A[i].params, atol=1e-9)
            assert abs(D.v[i] @ (D.points[j] - D.points[k])) <= 1e-12
            scale = 1 + abs(D.patches[j].value(D.points[i]))
            assert symmat.patches_agree(D.patches[j], D.patches[k], D.points[i]) <= 1e-12 * scale
        assert abs(fractal._circumradius(D.points) - 0.5) <= 1e-12
        assert np.allclose(D.points.mean(axis=0), 0, atol=1e-14)


def test_fit_symmetric_region(congruent_T):
    node = congruent_T.nodes[0]
    assert np.allclose(node.fit.X0, node.region.points.mean(axis=0), atol=1e-12)
    for s in range(3):
        # y_s lies on the median from the centroid towards p_s
        d = node.fit.y[s] - node.fit.X0
        m = node.region.points[s] - node.fit.X0
        assert abs(cross2(d, m)) <= 1e-12


def test_fit_residuals_and_oracle(band_T):
    for node in band_T.nodes:
        diag = node.fit.diagnostics
        assert diag["match_residual"] <= 1e-9
        assert diag["oracle_disagreement"] <= 1e-9
        assert diag["trilinear_error"] <= 1e-12
        assert diag["splitting_point_error"] <= 1e-9


def test_meeting_points_on_curves(band_T):
    for node in band_T.nodes[:13]:
        for s in range(3):
            c = node.region.curves[s]
            fine = curve_points(c.p1, c.p2, c.apex, 14)
            assert fine.distance_to(node.fit.y[s]) <= 1e-6


def test_counts_by_level(congruent_T):
    assert congruent_T.count_by_level() == {1: 1, 2: 3, 3: 9}
    assert len(congruent_T.nodes) == 13
    T1 = build_triangulation(*mats(tangent_triple(1, 1, 1)), 1, depth=6)
    assert len(T1.nodes) == 1 and len(T1.initial.triangles) == 3


def test_area_ratio_four_twentyfirsts(band_T):
    assert np.abs(fractal.area_ratios(band_T) - 4 / 21).max() <= 1e-3


def test_c11_meeting_points(band_T):
    rep = fractal.verify_c11(band_T)
    assert rep["max_relative_mismatch"] <= 1e-9
    assert rep["meeting_points"] == 3 + 3 * len(band_T.nodes)


def test_hessians_in_downward_packing(band_T):
    P = downward_packing(*BAND, band_T.max_level)
    seen = set()
    for rec in band_T.patches:
        idx = P.find(circles.matrix_to_circle(rec.patch.hessian))
        assert idx is not None
        assert P.levels[idx] == rec.level
        seen.add(idx)
    assert len(seen) == len(band_T.patches) == len(P)


def test_central_patch_is_successor(band_T):
    H = band_T.patches[band_T.nodes[0].patch_id].patch.hessian
    S = circles.successor_circle(*BAND)
    C = circles.matrix_to_circle(H)
    assert math.dist(C.center, S.center) <= 1e-9 and abs(C.radius - S.radius) <= 1e-9


def test_trace_range(band_T):
    top = max(A.trace for A in mats(BAND))
    for rec in band_T.patches:
        assert 2 < rec.patch.hessian.trace <= top + 1e-12


def test_rank1_cross_check(band_T):
    assert max(n.rank1_error for n in band_T.nodes) <= 1e-6


def test_triangle_angle_bounds(band_T):
    rep = fractal.triangle_angle_checks(band_T)
    assert rep["min_vertex_angle"] > math.atan(3 / 4)
    lo, hi = rep["median_angle_range"]
    assert math.pi / 2 < lo and hi < 3 * math.pi / 4


def test_meeting_angles_orthogonal():
    T = build_triangulation(*mats(BAND), 2, depth=14)
    ang = fractal.meeting_angles(T, 14)
    assert np.abs(ang - math.pi / 2).max() <= 1e-6


def test_coverage_increases(band_T):
    cov = fractal.coverage(band_T)
    levels = sorted(cov)
    vals = [cov[l] for l in levels]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1
    # geometric lower bound with a measured rate
    kappa = min(1 - (1 - cov[l]) / (1 - cov[l - 1]) for l in levels[1:])
    assert kappa > 0
    for l in levels:
        assert cov[l] >= 1 - (1 - kappa) ** l - 1e-12


def test_evaluate(band_T):
    node = band_T.nodes[0]
    e = fractal.evaluate(band_T, node.triangle.centroid)
    assert e.patch_id == node.patch_id and e.resolved
    q = band_T.patches[node.patch_id].patch
    x = node.triangle.centroid
    assert e.value == pytest.approx(float(q.value(x)))
    with pytest.raises(GeometryError):
        fractal.evaluate(band_T, (100.0, 100.0))
    rep = fractal.verify_c11(band_T, samples=200, seed=3)
    assert rep["samples_inside"] > 0 and rep["samples_resolved"] <= rep["samples_inside"]


def test_evaluate_continuity_across_meeting_points(band_T):
    for node in band_T.nodes[:4]:
        for s in range(3):
            y = node.fit.y[s]
            qa = band_T.patches[node.patch_id].patch
            qb = band_T.patches[node.region.patch_ids[s]].patch
            assert qa.value(y) == pytest.approx(qb.value(y), rel=1e-9, abs=1e-12)


def test_exports(band_T):
    doc = json.loads(fractal.to_json(band_T))
    assert len(doc["patches"]) == len(band_T.patches)
    assert all(len(p["coefficients"]) == 6 for p in doc["patches"])
    assert doc["nodes"][0]["children"] == band_T.nodes[0].children
    svg = fractal.to_svg(band_T)
    assert svg.startswith("<svg") and svg.count("<path") >= len(band_T.nodes) + 3
