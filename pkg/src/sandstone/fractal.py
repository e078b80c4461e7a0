"""Apollonian curves, triangles and triangulations carrying C^{1,1} quadratics.

A *region* is the curvilinear gap bounded by three patches.  Slot ``s`` of a
region holds a quadratic patch, the point where the other two patches meet
(``points[s]``) and the boundary curve of patch ``s`` facing the gap
(``curves[s]``, joining the two points other than ``points[s]``).  Filling a
region produces the successor patch on an Apollonian triangle and three
child regions.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import symmat
from .errors import CollinearError, FitResidualError, GeometryError
from .symmat import QuadraticPatch, Sym2

FIT_TOL = 1e-9


def _cross(u, v) -> float:
    return u[0] * v[1] - u[1] * v[0]


def _signed_area(pts) -> float:
    p = np.asarray(pts, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def triangle_area(a, b, c) -> float:
    return abs(_signed_area([a, b, c]))


def _line_intersection(p, d, q, e):
    den = _cross(d, e)
    if abs(den) <= 1e-14 * math.hypot(*d) * math.hypot(*e):
        raise CollinearError("parallel tangent lines")
    s = _cross((q[0] - p[0], q[1] - p[1]), e) / den
    return np.array([p[0] + s * d[0], p[1] + s * d[1]])


@dataclass
class ApollonianCurve:
    p1: np.ndarray
    p2: np.ndarray
    apex: np.ndarray
    depth: int
    points: np.ndarray  # (2**depth + 1, 2)
    controls: np.ndarray  # apex of each finest segment, (2**depth, 2)

    @property
    def splitting_point(self) -> np.ndarray:
        return (self.p1 + self.p2 + self.apex) / 3

    def tangent_at(self, i: int) -> np.ndarray:
        """Unit tangent at polyline vertex ``i``, read off the finest control triangles."""
        if i < len(self.controls):
            t = self.controls[i] - self.points[i]
        else:
            t = self.points[i] - self.controls[i - 1]
        return t / np.hypot(*t)

    def split(self) -> tuple["ApollonianCurve", "ApollonianCurve"]:
        s = self.splitting_point
        left = curve_points(self.p1, s, (2 * self.p1 + self.apex) / 3, self.depth)
        right = curve_points(s, self.p2, (2 * self.p2 + self.apex) / 3, self.depth)
        return left, right

    def reversed(self) -> "ApollonianCurve":
        return ApollonianCurve(self.p2, self.p1, self.apex, self.depth, self.points[::-1].copy(),
                               self.controls[::-1].copy())

    def distance_to(self, x) -> float:
        """Distance from ``x`` to the polyline."""
        a, b = self.points[:-1], self.points[1:]
        d = b - a
        t = np.clip(np.einsum("ij,ij->i", np.asarray(x) - a, d) / np.einsum("ij,ij->i", d, d), 0, 1)
        proj = a + t[:, None] * d
        return float(np.hypot(*(proj - np.asarray(x)).T).min())

    def is_convex(self) -> bool:
        seg = np.diff(self.points, axis=0)
        cr = seg[:-1, 0] * seg[1:, 1] - seg[:-1, 1] * seg[1:, 0]
        return bool((cr >= -1e-15).all() or (cr <= 1e-15).all())


def curve_points(p1, p2, apex, depth: int) -> ApollonianCurve:
    """Refine the curve from ``p1`` to ``p2`` with endpoint tangents meeting at ``apex``.

    Each step replaces a control triangle ``(a, c, b)`` by ``(a, (2a+c)/3, s)``
    and ``(s, (2b+c)/3, b)`` with ``s`` the centroid of ``a, b, c``.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    p1, p2, apex = (np.asarray(v, dtype=float) for v in (p1, p2, apex))
    scale = max(np.hypot(*(p2 - p1)), np.hypot(*(apex - p1)), 1e-300)
    if abs(_cross(p2 - p1, apex - p1)) <= 1e-14 * scale * scale:
        raise CollinearError("collinear input")
    A, C, B = p1[None, :], apex[None, :], p2[None, :]
    for _ in range(depth):
        S = (A + B + C) / 3
        C1 = (2 * A + C) / 3
        C2 = (2 * B + C) / 3
        nA = np.empty((2 * len(A), 2))
        nC = np.empty_like(nA)
        nB = np.empty_like(nA)
        nA[0::2], nC[0::2], nB[0::2] = A, C1, S
        nA[1::2], nC[1::2], nB[1::2] = S, C2, B
        A, C, B = nA, nC, nB
    points = np.vstack([A, B[-1:]])
    return ApollonianCurve(p1, p2, apex, depth, points, C.copy())


@dataclass
class ApollonianTriangle:
    vertices: np.ndarray  # (3, 2)
    curves: list  # proper: curve v_i -> v_{i+1}; degenerate: one curve
    proper: bool = True

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def polygon(self) -> np.ndarray:
        if self.proper:
            return np.vstack([c.points[:-1] for c in self.curves])
        c = self.curves[0]
        return np.vstack([c.points, c.apex[None, :]])

    def area(self) -> float:
        return abs(_signed_area(self.polygon()))

    def vertex_triangle_area(self) -> float:
        return triangle_area(*self.vertices)


def triangle_from_vertices(v1, v2, v3, depth: int) -> ApollonianTriangle:
    """The Apollonian triangle with the given vertices; each side's apex is the centroid."""
    V = np.array([v1, v2, v3], dtype=float)
    scale = max(np.hypot(*(V[1] - V[0])), np.hypot(*(V[2] - V[0])), 1e-300)
    if abs(_cross(V[1] - V[0], V[2] - V[0])) <= 1e-14 * scale * scale:
        raise CollinearError("collinear vertices")
    g = V.mean(axis=0)
    curves = [curve_points(V[i], V[(i + 1) % 3], g, depth) for i in range(3)]
    return ApollonianTriangle(V, curves, True)


def degenerate_triangle(curve: ApollonianCurve) -> ApollonianTriangle:
    """Region between a curve and its two endpoint tangents."""
    V = np.array([curve.p1, curve.apex, curve.p2])
    return ApollonianTriangle(V, [curve], False)


def points_in_polygon(poly: np.ndarray, pts) -> np.ndarray:
    """Even-odd rule, vectorized over query points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    a = poly
    b = np.roll(poly, -1, axis=0)
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    cond = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (y - ay) * (bx - ax) / (by - ay)
    return ((cond & (x < xint)).sum(axis=1) % 2) == 1


# ---------------------------------------------------------------- patches


def _centre(A: Sym2) -> np.ndarray:
    a, b = symmat.rho_bar(A)
    return np.array([float(a), float(b)])


def _sqrt_dir(u) -> np.ndarray:
    return np.array(symmat.sqrt_vector((float(u[0]), float(u[1]))))


@dataclass
class InitialData:
    A: tuple
    A4: Sym2
    v: np.ndarray  # (3, 2)
    points: np.ndarray  # (3, 2), p_i opposite patch i
    patches: tuple
    curves: list  # curve i from p_k to p_j
    triangles: list


def initial_patches(A1: Sym2, A2: Sym2, A3: Sym2, depth: int = 10) -> InitialData:
    """Three compatible patches with Hessians ``A_i`` meeting at ``p1, p2, p3``.

    Patch ``i`` is ``x^t A4^- x / 2 + (v_i . (x - p_j))^2 / 2`` with ``A4`` the
    successor and ``A_i = A4^- + v_i v_i^t``.  The points have centroid 0 and
    circumradius 1/2.
    """
    A = (A1, A2, A3)
    A4 = symmat.successor_matrix(A1, A2, A3)
    A4m = symmat.reflect_trace2(A4).to_float()
    c4 = _centre(A4)
    v = np.array([_sqrt_dir(_centre(Ai) - c4) for Ai in A])
    lam = [_cross(v[1], v[2]), _cross(v[2], v[0]), _cross(v[0], v[1])]
    d = [lam[i] * np.array(symmat.perp(v[i])) for i in range(3)]  # d_i = p_j - p_k
    p = np.zeros((3, 2))
    p[1] = p[0] - d[2]
    p[2] = p[0] + d[1]
    p -= p.mean(axis=0)
    R = _circumradius(p)
    if not R > 0 or not np.isfinite(R):
        raise GeometryError("degenerate meeting-point triangle")
    p *= 0.5 / R

    patches = []
    for i in range(3):
        vi, pj = v[i], p[(i + 1) % 3]
        vp = float(vi @ pj)
        hess = A4m + symmat.outer((float(vi[0]), float(vi[1])))
        err = max(abs(x - y) for x, y in zip(hess.params, A[i].to_float().params))
        if err > 1e-9 * (1 + A[i].to_float().norm()):
            raise GeometryError(f"A_{i + 1} - A4^- is not v v^t (error {err:.3g})")
        patches.append(QuadraticPatch(hess, (-vp * vi[0], -vp * vi[1]), 0.5 * vp * vp))

    centres = [_centre(Ai) for Ai in A]
    curves = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        tk = _sqrt_dir(centres[j] - centres[i])
        tj = _sqrt_dir(centres[k] - centres[i])
        apex = _line_intersection(p[k], tk, p[j], tj)
        curves.append(curve_points(p[k], p[j], apex, depth))
    tris = [degenerate_triangle(c) for c in curves]
    return InitialData(A, A4, v, p, tuple(patches), curves, tris)


def _circumradius(p) -> float:
    a = np.hypot(*(p[1] - p[2]))
    b = np.hypot(*(p[2] - p[0]))
    c = np.hypot(*(p[0] - p[1]))
    area = triangle_area(*p)
    return a * b * c / (4 * area) if area > 0 else math.inf


# ---------------------------------------------------------------- regions


@dataclass
class Region:
    hessians: tuple
    patch_ids: tuple
    points: np.ndarray  # (3, 2)
    curves: list  # curves[s] joins the two points other than points[s]
    level: int  # level of the successor placed in this region
    parent: int | None = None

    def polygon(self) -> np.ndarray:
        """Boundary loop ``points[0] -> points[1] -> points[2]``."""
        loop = []
        order = [(2, 0, 1), (0, 1, 2), (1, 2, 0)]  # (curve slot, from point, to point)
        for s, a, b in order:
            c = self.curves[s]
            if np.hypot(*(c.p1 - self.points[a])) <= np.hypot(*(c.p2 - self.points[a])):
                loop.append(c.points[:-1])
            else:
                loop.append(c.points[::-1][:-1])
        return np.vstack(loop)

    def meeting_area(self) -> float:
        return triangle_area(*self.points)


@dataclass
class FitResult:
    B0: Sym2
    X0: np.ndarray
    y: np.ndarray  # (3, 2)
    patch: QuadraticPatch
    v: np.ndarray
    h: np.ndarray
    t: np.ndarray
    diagnostics: dict


def fit_successor_patch(region: Region, patches, tol: float = FIT_TOL) -> FitResult:
    """Place the successor patch in ``region``.

    ``patches[s]`` is the quadratic of slot ``s``.  The patch is
    ``x^t B0^- x / 2 + k |x - X0|^2 / 2 + b.x + c`` with ``k = tr(B0) - 2``;
    ``X0`` has trilinear coordinates ``sqrt(r_s / (r_s + r0))`` in the
    meeting-point triangle (``r`` are circle radii) and ``b, c`` come from
    value and gradient matching at ``y_0``, then are checked at ``y_1, y_2``.
    """
    H = region.hessians
    p = region.points
    B0 = symmat.successor_matrix(*H)
    B0f = B0.to_float()
    k = float(B0f.trace) - 2.0
    radii = np.array([float(h.trace) - 2.0 for h in H])
    if not k > 0:
        raise FitResidualError("degenerate successor")
    if not (radii > k).all():
        raise FitResidualError(f"successor radius {k:.3g} not below parent radii {radii}")
    c0 = _centre(B0f)
    diag: dict = {}

    # outward unit normals of the sides, and the v_s they must be parallel to
    side_len = np.empty(3)
    normals = np.empty((3, 2))
    centroid = p.mean(axis=0)
    for s in range(3):
        a, b = p[(s + 1) % 3], p[(s + 2) % 3]
        e = b - a
        side_len[s] = np.hypot(*e)
        n = np.array(symmat.perp(e)) / side_len[s]
        if n @ (a - centroid) < 0:
            n = -n
        normals[s] = n
    v = np.array([_sqrt_dir(_centre(h) - c0) for h in H])
    perp_err = 0.0
    for s in range(3):
        vs = v[s] / np.hypot(*v[s])
        perp_err = max(perp_err, abs(_cross(vs, normals[s])))
        if vs @ normals[s] < 0:
            v[s] = -v[s]
    diag["normal_alignment"] = perp_err
    if perp_err > 1e-7:
        raise FitResidualError(f"v_s not perpendicular to the sides (error {perp_err:.3g})")
    a_s = np.einsum("ij,ij->i", v, v)  # = r_s + r0

    ratio = np.sqrt((a_s - k) / a_s)
    area = triangle_area(*p)
    scale_h = 2 * area / float(side_len @ ratio)
    h = ratio * scale_h
    X0 = np.array([(side_len * h * p[:, 0]).sum(), (side_len * h * p[:, 1]).sum()]) / float(side_len @ h)
    t = k * h / (a_s - k)
    y = X0 + (h + t)[:, None] * normals

    # distances of X0 to the sides must be the h_s
    dist = np.array([abs(_cross(p[(s + 2) % 3] - p[(s + 1) % 3], X0 - p[(s + 1) % 3])) / side_len[s]
                     for s in range(3)])
    diag["trilinear_error"] = float(np.abs(dist - h).max())

    B0m = symmat.reflect_trace2(B0f)
    Hmat = Sym2(B0m.m11 + k, B0m.m12, B0m.m22 + k)
    quad = QuadraticPatch(Hmat)

    def solve_at(s):
        q = patches[s]
        g = np.array(q.gradient(y[s])) - np.array(quad.gradient(y[s]))
        c = q.value(y[s]) - quad.value(y[s]) - g @ y[s]
        return g, c

    sols = [solve_at(s) for s in range(3)]
    b, c = sols[0]
    phi0 = QuadraticPatch(Hmat, (float(b[0]), float(b[1])), float(c))
    scale = 1.0 + max(abs(patches[s].value(y[s])) for s in range(3)) + max(
        float(np.hypot(*patches[s].gradient(y[s]))) for s in range(3))
    mism = max(symmat.patches_agree(phi0, patches[s], y[s]) for s in range(3))
    oracle = max(float(np.abs(sols[s][0] - b).max()) + abs(sols[s][1] - c) for s in (1, 2))
    diag["match_residual"] = mism / scale
    diag["oracle_disagreement"] = oracle / scale
    diag["hessian_trace_closed_form"] = float(Hmat.trace)
    if mism > tol * scale or oracle > tol * scale:
        raise FitResidualError(f"fit residual exceeded: {mism:.3g} (oracle {oracle:.3g}, scale {scale:.3g})")

    # y_s must be the splitting point of curve s; X0 the centroid of the y_s
    split_err = max(float(np.hypot(*(region.curves[s].splitting_point - y[s]))) for s in range(3))
    diag["splitting_point_error"] = split_err
    diag["centroid_error"] = float(np.hypot(*(y.mean(axis=0) - X0)))
    diam = max(side_len)
    if split_err > 1e-7 * diam or diag["centroid_error"] > 1e-7 * diam:
        raise FitResidualError(f"meeting points off the boundary curves (error {split_err:.3g})")
    return FitResult(B0, X0, y, phi0, v, h, t, diag)


def check_rank1(region: Region, patches, tol: float = 1e-7) -> float:
    """Distance between the rank-one recovered matrix and the region's successor."""
    B, _ = symmat.rank1_recover(list(map(tuple, region.points)), patches, tol=tol)
    S = symmat.successor_matrix(*region.hessians)
    return float(max(abs(x - y) for x, y in zip(B.to_float().params, S.to_float().params)))


@dataclass
class Node:
    region: Region
    fit: FitResult
    patch_id: int
    triangle: ApollonianTriangle
    level: int
    children: list = field(default_factory=list)
    rank1_error: float = 0.0


@dataclass
class PatchRecord:
    patch: QuadraticPatch
    level: int
    kind: str  # "initial" or "fitted"


@dataclass
class Triangulation:
    generators: tuple
    initial: InitialData
    patches: list
    nodes: list
    leaves: list  # unresolved regions below the level bound
    max_level: int
    depth: int

    @property
    def points(self) -> np.ndarray:
        return self.initial.points

    def proper_triangles(self) -> list:
        return [n.triangle for n in self.nodes]

    def count_by_level(self) -> dict:
        out: dict = {}
        for n in self.nodes:
            out[n.level] = out.get(n.level, 0) + 1
        return out

    def hull(self) -> np.ndarray:
        """Convex hexagon of the meeting points and the apexes of the initial curves."""
        curves = list(self.initial.curves)
        loop = [curves[0].p1, curves[0].apex]
        end = curves[0].p2
        rest = curves[1:]
        while rest:
            for c in rest:
                if np.hypot(*(c.p1 - end)) < 1e-12:
                    loop.extend([c.p1, c.apex])
                    end = c.p2
                    rest = [r for r in rest if r is not c]
                    break
                if np.hypot(*(c.p2 - end)) < 1e-12:
                    loop.extend([c.p2, c.apex])
                    end = c.p1
                    rest = [r for r in rest if r is not c]
                    break
            else:
                raise GeometryError("initial curves do not form a loop")
        pts = np.array(loop)
        if _signed_area(pts) < 0:
            pts = pts[::-1]
        return pts


def _root_region(init: InitialData) -> Region:
    return Region(tuple(A.to_float() for A in init.A), (0, 1, 2), init.points.copy(), list(init.curves), 1)


def _children(region: Region, fit: FitResult, new_id: int, depth: int) -> list[Region]:
    out = []
    y = fit.y
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        left_j, right_j = region.curves[j].split()
        left_k, right_k = region.curves[k].split()
        pi = region.points[i]
        # sub-curve of curve j between p_i and y_j, and of curve k between p_i and y_k
        sub_j = left_j if np.hypot(*(left_j.p1 - pi)) < 1e-12 or np.hypot(*(left_j.p2 - pi)) < 1e-12 else right_j
        sub_k = left_k if np.hypot(*(left_k.p1 - pi)) < 1e-12 or np.hypot(*(left_k.p2 - pi)) < 1e-12 else right_k
        side = curve_points(y[k], y[j], fit.X0, depth)
        out.append(Region(
            hessians=(fit.B0.to_float(), region.hessians[j], region.hessians[k]),
            patch_ids=(new_id, region.patch_ids[j], region.patch_ids[k]),
            points=np.array([pi, y[k], y[j]]),
            curves=[side, sub_j, sub_k],
            level=region.level + 1,
        ))
    return out


def build_triangulation(A1: Sym2, A2: Sym2, A3: Sym2, max_level: int, depth: int = 10,
                        tol: float = FIT_TOL, check_rank1_tol: float | None = 1e-6) -> Triangulation:
    """Breadth-first fill of the region tree up to ``max_level``."""
    if max_level < 0:
        raise ValueError("max_level must be >= 0")
    init = initial_patches(A1, A2, A3, depth)
    patches = [PatchRecord(q, 0, "initial") for q in init.patches]
    nodes: list = []
    leaves: list = []
    queue = deque([_root_region(init)])
    while queue:
        region = queue.popleft()
        if region.level > max_level:
            leaves.append(region)
            continue
        qs = [patches[i].patch for i in region.patch_ids]
        r1 = check_rank1(region, qs) if check_rank1_tol is not None else 0.0
        if check_rank1_tol is not None and r1 > check_rank1_tol:
            raise FitResidualError(f"rank-one recovery disagrees with the successor by {r1:.3g}")
        fit = fit_successor_patch(region, qs, tol)
        new_id = len(patches)
        patches.append(PatchRecord(fit.patch, region.level, "fitted"))
        tri = triangle_from_vertices(*fit.y, depth)
        node = Node(region, fit, new_id, tri, region.level, rank1_error=r1)
        node_id = len(nodes)
        nodes.append(node)
        for child in _children(region, fit, new_id, depth):
            child.parent = node_id
            queue.append(child)
    T = Triangulation((A1, A2, A3), init, patches, nodes, leaves, max_level, depth)
    _link_children(T)
    return T


# ---------------------------------------------------------------- evaluation


@dataclass
class Evaluation:
    value: float
    gradient: tuple
    patch_id: int
    resolved: bool


def evaluate(T: Triangulation, x) -> Evaluation:
    """Value and gradient at ``x`` by descent through the region tree.

    Points in gaps below the level bound are evaluated with the largest of the
    enclosing region's three patches and flagged as unresolved.
    """
    x = np.asarray(x, dtype=float)
    if not points_in_polygon(T.hull(), x)[0]:
        raise GeometryError("outside domain")
    for i, tri in enumerate(T.initial.triangles):
        if points_in_polygon(tri.polygon(), x)[0]:
            return _eval_patch(T, i, x, True)
    root = _root_region(T.initial)
    node_id = 0 if T.nodes else None
    region = root
    while node_id is not None:
        node = T.nodes[node_id]
        if points_in_polygon(node.triangle.polygon(), x)[0]:
            return _eval_patch(T, node.patch_id, x, True)
        nxt = None
        for cid in node.children:
            if points_in_polygon(T.nodes[cid].region.polygon(), x)[0]:
                nxt = cid
                break
        if nxt is None:
            for leaf in T.leaves:
                if leaf.parent == node_id and points_in_polygon(leaf.polygon(), x)[0]:
                    region = leaf
                    break
            break
        node_id = nxt
        region = T.nodes[nxt].region
    vals = [(T.patches[pid].patch.value(x), pid) for pid in region.patch_ids]
    _, pid = max(vals)
    return _eval_patch(T, pid, x, False)


def _eval_patch(T: Triangulation, pid: int, x, resolved: bool) -> Evaluation:
    q = T.patches[pid].patch
    g = q.gradient(x)
    return Evaluation(float(q.value(x)), (float(g[0]), float(g[1])), pid, resolved)


def meeting_points(T: Triangulation):
    """``(point, patch_id_a, patch_id_b)`` for every place two patches touch."""
    init = T.initial
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        yield init.points[i], j, k
    for node in T.nodes:
        for s in range(3):
            yield node.fit.y[s], node.patch_id, node.region.patch_ids[s]


def verify_c11(T: Triangulation, samples: int = 0, seed: int = 0) -> dict:
    """Value/gradient mismatch at meeting points, relative to the local scale."""
    worst_abs = 0.0
    worst_rel = 0.0
    count = 0
    for x, a, b in meeting_points(T):
        qa, qb = T.patches[a].patch, T.patches[b].patch
        m = symmat.patches_agree(qa, qb, x)
        scale = 1.0 + abs(qa.value(x)) + float(np.hypot(*qa.gradient(x)))
        worst_abs = max(worst_abs, m)
        worst_rel = max(worst_rel, m / scale)
        count += 1
    report = {"meeting_points": count, "max_mismatch": worst_abs, "max_relative_mismatch": worst_rel}
    if samples:
        rng = np.random.default_rng(seed)
        hull = T.hull()
        lo, hi = hull.min(axis=0), hull.max(axis=0)
        pts = lo + rng.random((samples, 2)) * (hi - lo)
        resolved = 0
        inside = 0
        for x in pts:
            try:
                e = evaluate(T, x)
            except GeometryError:
                continue
            inside += 1
            resolved += e.resolved
        report["samples_inside"] = inside
        report["samples_resolved"] = resolved
    return report


def area_ratios(T: Triangulation) -> np.ndarray:
    """Triangle area over the meeting-point triangle area of its region."""
    return np.array([n.triangle.area() / n.region.meeting_area() for n in T.nodes])


def meeting_angles(T: Triangulation, depth: int | None = None) -> np.ndarray:
    """Angle at each ``y_s`` between the bounding curve and the new triangle's cusp.

    Curves are re-refined to ``depth`` (default: the triangulation's depth) and
    both tangents are read from the refined polylines.
    """
    depth = T.depth if depth is None else depth
    out = []
    for node in T.nodes:
        tri = triangle_from_vertices(*node.fit.y, depth)
        for s in range(3):
            c = node.region.curves[s]
            curve = curve_points(c.p1, c.p2, c.apex, depth)
            ys = node.fit.y[s]
            idx = int(np.argmin(np.hypot(*(curve.points - ys).T)))
            t_curve = curve.tangent_at(idx)
            # the two triangle sides leaving y_s start along the cusp direction
            side = tri.curves[s] if np.hypot(*(tri.curves[s].p1 - ys)) < 1e-12 else tri.curves[(s + 2) % 3].reversed()
            cusp = side.tangent_at(0)
            out.append(math.acos(min(1.0, abs(float(t_curve @ cusp)))))
    return np.array(out)


def triangle_angle_checks(T: Triangulation) -> dict:
    """Vertex-triangle angles and pairwise angles between the median lines."""
    min_vertex = math.inf
    med_lo, med_hi = math.inf, -math.inf
    for node in T.nodes:
        V = node.triangle.vertices
        g = V.mean(axis=0)
        for i in range(3):
            a, b, c = V[i], V[(i + 1) % 3], V[(i + 2) % 3]
            u, w = b - a, c - a
            min_vertex = min(min_vertex, math.atan2(abs(_cross(u, w)), float(u @ w)))
            # angle at g between the medians towards two vertices
            m1, m2 = V[i] - g, V[(i + 1) % 3] - g
            ang = math.atan2(abs(_cross(m1, m2)), float(m1 @ m2))
            med_lo, med_hi = min(med_lo, ang), max(med_hi, ang)
    return {"min_vertex_angle": min_vertex, "median_angle_range": (med_lo, med_hi)}


def coverage(T: Triangulation) -> dict:
    """Fraction of the hull covered by triangles placed up to each level."""
    total = abs(_signed_area(T.hull()))
    base = sum(t.area() for t in T.initial.triangles)
    by_level: dict = {}
    for node in T.nodes:
        by_level[node.level] = by_level.get(node.level, 0.0) + node.triangle.area()
    out = {0: base / total}
    acc = base
    for lvl in sorted(by_level):
        acc += by_level[lvl]
        out[lvl] = acc / total
    return out


# ---------------------------------------------------------------- export


def to_json(T: Triangulation) -> str:
    doc = {
        "generators": [list(map(float, A.to_float().params)) for A in T.generators],
        "points": T.initial.points.tolist(),
        "max_level": T.max_level,
        "patches": [{"id": i, "level": r.level, "kind": r.kind, "coefficients": r.patch.coefficients()}
                    for i, r in enumerate(T.patches)],
        "degenerate": [{"patch": i, "vertices": t.vertices.tolist()} for i, t in enumerate(T.initial.triangles)],
        "nodes": [{
            "level": n.level,
            "patch": n.patch_id,
            "parent": n.region.parent,
            "region_patches": list(n.region.patch_ids),
            "meeting_points": n.region.points.tolist(),
            "successor": list(map(float, n.fit.B0.to_float().params)),
            "center": n.fit.X0.tolist(),
            "vertices": n.fit.y.tolist(),
            "children": n.children,
        } for n in T.nodes],
    }
    return json.dumps(doc, indent=1)


def _link_children(T: Triangulation) -> None:
    for i, n in enumerate(T.nodes):
        n.children = []
    for i, n in enumerate(T.nodes):
        if n.region.parent is not None:
            T.nodes[n.region.parent].children.append(i)


def to_svg(T: Triangulation, width: int = 800) -> str:
    """Triangles filled by Hessian trace: larger trace, darker fill."""
    hull = T.hull()
    lo, hi = hull.min(axis=0), hull.max(axis=0)
    pad = 0.02 * float((hi - lo).max())
    lo, hi = lo - pad, hi + pad
    height = int(round(width * (hi[1] - lo[1]) / (hi[0] - lo[0])))
    traces = [float(r.patch.hessian.trace) for r in T.patches]
    tmax = max(traces)
    tmin = min(2.0, min(traces))

    def shade(tr):
        f = (tr - tmin) / (tmax - tmin) if tmax > tmin else 1.0
        g = int(round(235 * (1 - f)))
        return f"#{g:02x}{g:02x}{g:02x}"

    def path(poly):
        return " ".join(f"{'M' if i == 0 else 'L'}{x:.6g},{-y:.6g}" for i, (x, y) in enumerate(poly)) + " Z"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="{lo[0]:.6g} {-hi[1]:.6g} {hi[0] - lo[0]:.6g} {hi[1] - lo[1]:.6g}">',
        f'<path d="{path(hull)}" fill="none" stroke="#999" stroke-width="{(hi[0] - lo[0]) / width:.4g}"/>',
    ]
    for i, tri in enumerate(T.initial.triangles):
        out.append(f'<path d="{path(tri.polygon())}" fill="{shade(traces[i])}"/>')
    for n in T.nodes:
        out.append(f'<path d="{path(n.triangle.polygon())}" fill="{shade(traces[n.patch_id])}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
