"""Generalized circles, Soddy circles and Apollonian packings.

A :class:`GenCircle` is either a proper circle or a line.  A line is stored as
``{x : normal . x = offset}`` together with the closed half-plane
``{normal . x >= offset}`` that plays the role of its disc, so the normal
points away from the circles it touches.  In the complex Descartes relations a
line enters with curvature 0 and with its unit normal in place of
``curvature * center``.
"""

from __future__ import annotations

import cmath
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import symmat
from .errors import DegenerateMatrixError, GeometryError
from .symmat import Sym2

TANGENCY_TOL = 1e-9
DEDUP_TOL = 1e-9


@dataclass(frozen=True)
class GenCircle:
    kind: str  # "proper" or "line"
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    normal: tuple = (0.0, 0.0)
    offset: float = 0.0

    def __post_init__(self):
        if self.kind == "proper":
            if not self.radius > 0:
                raise GeometryError(f"proper circle needs a positive radius, got {self.radius}")
        elif self.kind == "line":
            n = math.hypot(*self.normal)
            if abs(n - 1.0) > 1e-12:
                object.__setattr__(self, "normal", (self.normal[0] / n, self.normal[1] / n))
                object.__setattr__(self, "offset", self.offset / n)
        else:
            raise ValueError(f"unknown circle kind {self.kind!r}")

    @classmethod
    def circle(cls, center, radius) -> "GenCircle":
        return cls("proper", center=(float(center[0]), float(center[1])), radius=float(radius))

    @classmethod
    def line(cls, normal, offset) -> "GenCircle":
        return cls("line", normal=(float(normal[0]), float(normal[1])), offset=float(offset))

    @property
    def is_line(self) -> bool:
        return self.kind == "line"

    @property
    def curvature(self) -> float:
        return 0.0 if self.is_line else 1.0 / self.radius

    def descartes_w(self) -> complex:
        """``curvature * center`` as a complex number (unit normal for lines)."""
        if self.is_line:
            return complex(*self.normal)
        return complex(*self.center) / self.radius

    def swapped(self) -> "GenCircle":
        """Image under the reflection ``(x, y) -> (y, x)``."""
        if self.is_line:
            return GenCircle.line(self.normal[::-1], self.offset)
        return GenCircle.circle(self.center[::-1], self.radius)

    def translated(self, dx: float, dy: float) -> "GenCircle":
        if self.is_line:
            return GenCircle.line(self.normal, self.offset + self.normal[0] * dx + self.normal[1] * dy)
        return GenCircle.circle((self.center[0] + dx, self.center[1] + dy), self.radius)

    def to_dict(self) -> dict:
        if self.is_line:
            return {"kind": "line", "normal": list(self.normal), "offset": self.offset}
        return {"kind": "proper", "center": list(self.center), "radius": self.radius}


def circle_to_matrix(C: GenCircle) -> Sym2:
    if C.is_line:
        raise GeometryError("line has no matrix")
    return symmat.m_of(C.center[0], C.center[1], C.radius + 2.0)


def matrix_to_circle(A: Sym2) -> GenCircle:
    a, b, c = symmat.params_of(A)
    if not c > 2:
        raise DegenerateMatrixError("trace <= 2 has no circle")
    return GenCircle.circle((float(a), float(b)), float(c) - 2.0)


def tangency_residual(C1: GenCircle, C2: GenCircle) -> float:
    """Distance from tangency (external or internal, lines included)."""
    if C1.is_line and C2.is_line:
        n1, n2 = C1.normal, C2.normal
        return abs(n1[0] * n2[1] - n1[1] * n2[0])
    if C1.is_line or C2.is_line:
        L, C = (C1, C2) if C1.is_line else (C2, C1)
        dist = L.normal[0] * C.center[0] + L.normal[1] * C.center[1] - L.offset
        return abs(abs(dist) - C.radius)
    d = math.dist(C1.center, C2.center)
    return min(abs(d - (C1.radius + C2.radius)), abs(d - abs(C1.radius - C2.radius)))


def is_externally_tangent(C1: GenCircle, C2: GenCircle, tol: float = TANGENCY_TOL) -> bool:
    if C1.is_line and C2.is_line:
        return tangency_residual(C1, C2) <= tol
    if C1.is_line or C2.is_line:
        L, C = (C1, C2) if C1.is_line else (C2, C1)
        dist = L.normal[0] * C.center[0] + L.normal[1] * C.center[1] - L.offset
        return abs(dist + C.radius) <= tol * max(1.0, C.radius)
    d = math.dist(C1.center, C2.center)
    return abs(d - (C1.radius + C2.radius)) <= tol * max(1.0, C1.radius + C2.radius)


def tangency_point(C1: GenCircle, C2: GenCircle):
    """Contact point of two tangent generalized circles (None for parallel lines)."""
    if C1.is_line and C2.is_line:
        return None
    if C1.is_line or C2.is_line:
        L, C = (C1, C2) if C1.is_line else (C2, C1)
        n = L.normal
        s = L.offset - (n[0] * C.center[0] + n[1] * C.center[1])
        return (C.center[0] + s * n[0], C.center[1] + s * n[1])
    c1, c2 = np.array(C1.center), np.array(C2.center)
    d = c2 - c1
    dist = float(np.hypot(*d))
    if abs(dist - (C1.radius + C2.radius)) <= abs(dist - abs(C1.radius - C2.radius)):
        p = c1 + C1.radius * d / dist
    else:
        big, small = (c1, c2) if C1.radius >= C2.radius else (c2, c1)
        R = max(C1.radius, C2.radius)
        u = (small - big) / dist
        p = big + R * u
    return (float(p[0]), float(p[1]))


def _circle_from_descartes(K: float, W: complex, refs: Iterable[GenCircle]) -> GenCircle | None:
    scale = max(abs(K), 1e-300)
    if abs(K) <= 1e-12 * max(1.0, max(c.curvature for c in refs)):
        if abs(W) == 0:
            return None
        n = W / abs(W)
        ref = next(c for c in refs if not c.is_line)
        offset = n.real * ref.center[0] + n.imag * ref.center[1] + ref.radius
        return GenCircle.line((n.real, n.imag), offset)
    z = W / K
    return GenCircle.circle((z.real, z.imag), 1.0 / abs(scale))


def soddy_circles(C1: GenCircle, C2: GenCircle, C3: GenCircle) -> tuple[GenCircle, GenCircle]:
    """Both generalized circles tangent to a pairwise tangent triple."""
    triple = (C1, C2, C3)
    if sum(c.is_line for c in triple) > 2:
        raise GeometryError("at most two lines allowed in a triple")
    pts = [tangency_point(C1, C2), tangency_point(C2, C3), tangency_point(C3, C1)]
    finite = [p for p in pts if p is not None]
    size = max((c.radius for c in triple if not c.is_line), default=1.0)
    for i in range(len(finite)):
        for j in range(i + 1, len(finite)):
            if math.dist(finite[i], finite[j]) <= 1e-12 * size:
                raise GeometryError("coincident tangency points")

    k = [c.curvature for c in triple]
    w = [c.descartes_w() for c in triple]
    disc_k = k[0] * k[1] + k[1] * k[2] + k[2] * k[0]
    root_k = math.sqrt(max(disc_k, 0.0))
    root_w = cmath.sqrt(w[0] * w[1] + w[1] * w[2] + w[2] * w[0])
    K = [sum(k) + 2 * root_k, sum(k) - 2 * root_k]
    W = [sum(w) + 2 * root_w, sum(w) - 2 * root_w]

    def resid(c: GenCircle | None) -> float:
        if c is None:
            return math.inf
        r = 0.0
        for ref in triple:
            s = max(1.0, c.radius if not c.is_line else 1.0)
            if not ref.is_line:
                s = max(s, ref.radius)
            r = max(r, tangency_residual(c, ref) / s)
        return r

    best = None
    for pairing in ((0, 1), (1, 0)):
        cands = [_circle_from_descartes(K[i], W[pairing[i]], triple) for i in range(2)]
        score = sum(resid(c) for c in cands)
        if best is None or score < best[0]:
            best = (score, cands)
    score, (a, b) = best
    if a is None or b is None or score > 1e-6:
        raise GeometryError(f"triple is not pairwise tangent (Descartes residual {score:.3g})")
    return a, b


def _in_bounded_gap(c: GenCircle, triple) -> bool:
    pts = [tangency_point(triple[0], triple[1]), tangency_point(triple[1], triple[2]),
           tangency_point(triple[2], triple[0])]
    if any(p is None for p in pts):
        return False
    x, y = c.center
    signs = []
    for i in range(3):
        (x1, y1), (x2, y2) = pts[i], pts[(i + 1) % 3]
        signs.append((x2 - x1) * (y - y1) - (y2 - y1) * (x - x1))
    return all(s >= 0 for s in signs) or all(s <= 0 for s in signs)


def successor_circle(C1: GenCircle, C2: GenCircle, C3: GenCircle) -> GenCircle:
    """Soddy circle of an externally tangent triple lying in the bounded gap.

    With two parallel lines both gaps are unbounded; the circle with the larger
    second coordinate is returned.
    """
    triple = (C1, C2, C3)
    nlines = sum(c.is_line for c in triple)
    a, b = soddy_circles(*triple)
    proper = [c for c in (a, b) if not c.is_line]
    if nlines == 2:
        return max(proper, key=lambda c: (c.center[1], c.center[0]))
    for i in range(3):
        for j in range(i + 1, 3):
            if not is_externally_tangent(triple[i], triple[j], 1e-7):
                raise GeometryError("no bounded region: triple is not externally tangent")
    cand = [c for c in proper if _in_bounded_gap(c, triple)]
    if not cand:
        raise GeometryError("no bounded region")
    return max(cand, key=lambda c: c.curvature)


@dataclass
class Packing:
    circles: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    parents: list = field(default_factory=list)
    edges: set = field(default_factory=set)
    kind: str = "downward"
    _index: dict = field(default_factory=dict, repr=False)

    def _key(self, c: GenCircle):
        if c.is_line:
            n, o = c.normal, c.offset
            if n[0] < -1e-12 or (abs(n[0]) <= 1e-12 and n[1] < 0):
                n, o = (-n[0], -n[1]), -o
            return ("L", round(n[0], 6), round(n[1], 6), round(o, 6))
        return ("C", round(c.center[0], 6), round(c.center[1], 6), round(c.radius, 6))

    def find(self, c: GenCircle) -> int | None:
        for idx in self._index.get(self._key(c), ()):
            other = self.circles[idx]
            if other.is_line != c.is_line:
                continue
            if c.is_line:
                if tangency_residual(c, other) <= DEDUP_TOL and abs(abs(c.offset) - abs(other.offset)) <= DEDUP_TOL:
                    return idx
            elif (math.dist(c.center, other.center) <= DEDUP_TOL
                  and abs(c.radius - other.radius) <= DEDUP_TOL):
                return idx
        return None

    def add(self, c: GenCircle, level: int, parents=None) -> tuple[int, bool]:
        idx = self.find(c)
        if idx is not None:
            return idx, False
        idx = len(self.circles)
        self.circles.append(c)
        self.levels.append(level)
        self.parents.append(tuple(parents) if parents is not None else None)
        self._index.setdefault(self._key(c), []).append(idx)
        if parents is not None:
            for p in parents:
                self.edges.add((min(p, idx), max(p, idx)))
        return idx, True

    def __len__(self) -> int:
        return len(self.circles)

    def successor_quadruples(self):
        """``(i, j, k, s)`` for every circle recorded as a successor."""
        for s, par in enumerate(self.parents):
            if par is not None:
                yield (*par, s)

    def to_json(self) -> str:
        rows = []
        for c, lvl, par in zip(self.circles, self.levels, self.parents):
            row = c.to_dict()
            row["level"] = lvl
            row["parents"] = list(par) if par is not None else []
            rows.append(row)
        return json.dumps({"kind": self.kind, "circles": rows}, indent=1)

    def to_svg(self, width: int = 800, bounds=None) -> str:
        proper = [c for c in self.circles if not c.is_line]
        if bounds is None:
            xs = [c.center[0] - c.radius for c in proper] + [c.center[0] + c.radius for c in proper]
            ys = [c.center[1] - c.radius for c in proper] + [c.center[1] + c.radius for c in proper]
            bounds = (min(xs), max(xs), min(ys), max(ys))
        x0, x1, y0, y1 = bounds
        pad = 0.02 * max(x1 - x0, y1 - y0)
        x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
        height = int(round(width * (y1 - y0) / (x1 - x0)))
        sw = (x1 - x0) / width
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="{x0:.9g} {-y1:.9g} {x1 - x0:.9g} {y1 - y0:.9g}">',
            f'<g fill="none" stroke="black" stroke-width="{sw:.6g}">',
        ]
        span = 2 * max(x1 - x0, y1 - y0)
        for c in self.circles:
            if c.is_line:
                n = c.normal
                px, py = n[0] * c.offset, n[1] * c.offset
                tx, ty = -n[1], n[0]
                out.append(f'<line x1="{px - span * tx:.9g}" y1="{-(py - span * ty):.9g}" '
                           f'x2="{px + span * tx:.9g}" y2="{-(py + span * ty):.9g}"/>')
            else:
                out.append(f'<circle cx="{c.center[0]:.9g}" cy="{-c.center[1]:.9g}" r="{c.radius:.9g}"/>')
        out.append("</g></svg>")
        return "\n".join(out) + "\n"


def band_generators(frame: str = "vertical") -> list[GenCircle]:
    """Lines ``x = 0``, ``x = 2`` and the unit circle about ``(1, 0)``.

    The ``ford`` frame is the same configuration reflected by ``(x, y) -> (y, x)``.
    """
    gens = [GenCircle.line((-1, 0), 0), GenCircle.line((1, 0), 2), GenCircle.circle((1, 0), 1)]
    if frame == "ford":
        return [g.swapped() for g in gens]
    if frame != "vertical":
        raise ValueError(f"unknown frame {frame!r}")
    return gens


def band_packing(max_level: int, frame: str = "vertical", translates: int = 0) -> Packing:
    """The Apollonian band packing, generated to ``max_level``.

    ``translates > 0`` adds the copies shifted by ``2k`` across the strip for
    ``|k| <= translates``.
    """
    if max_level < 0:
        raise ValueError("max_level must be >= 0")
    P = Packing(kind="full")
    for g in band_generators("vertical"):
        P.add(g, 0)
    queue: deque = deque()
    if max_level >= 1:
        for s in soddy_circles(*P.circles[:3]):
            idx, _ = P.add(s, 1, (0, 1, 2))
            queue.append(((0, 1, 2), idx))
    while queue:
        (i, j, k), n = queue.popleft()
        for tri, opp in (((i, j, n), k), ((j, k, n), i), ((i, k, n), j)):
            level = max(P.levels[t] for t in tri) + 1
            if level > max_level:
                continue
            opp_c = P.circles[opp]
            cands = soddy_circles(*(P.circles[t] for t in tri))
            new = max(cands, key=lambda c: _distance(c, opp_c))
            idx, fresh = P.add(new, level, tri)
            if fresh:
                queue.append((tri, idx))

    if translates:
        base = list(zip(P.circles, P.levels, P.parents))
        for shift in range(-translates, translates + 1):
            if shift == 0:
                continue
            offset = len(P.circles)
            remap = {}
            for idx, (c, lvl, par) in enumerate(base):
                new_idx, _ = P.add(c.translated(2 * shift, 0), lvl)
                remap[idx] = new_idx
            for idx, (_, _, par) in enumerate(base):
                if par is not None and P.parents[remap[idx]] is None and remap[idx] >= offset:
                    P.parents[remap[idx]] = tuple(remap[p] for p in par)
                    for p in P.parents[remap[idx]]:
                        P.edges.add((min(p, remap[idx]), max(p, remap[idx])))
    if frame == "ford":
        P.circles = [c.swapped() for c in P.circles]
        P._index = {}
        for idx, c in enumerate(P.circles):
            P._index.setdefault(P._key(c), []).append(idx)
    elif frame != "vertical":
        raise ValueError(f"unknown frame {frame!r}")
    return P


def _distance(a: GenCircle, b: GenCircle) -> float:
    """Crude dissimilarity used to tell a new Soddy circle from the known one."""
    if a.is_line != b.is_line:
        return math.inf
    if a.is_line:
        return abs(a.offset - b.offset) + math.dist(a.normal, b.normal)
    return math.dist(a.center, b.center) + abs(a.radius - b.radius)


def downward_packing(C1: GenCircle, C2: GenCircle, C3: GenCircle, max_level: int) -> Packing:
    """Close ``{C1, C2, C3}`` under successors, up to ``max_level`` generations."""
    if max_level < 0:
        raise ValueError("max_level must be >= 0")
    P = Packing(kind="downward")
    for c in (C1, C2, C3):
        P.add(c, 0)
    frontier = [(0, 1, 2)]
    for level in range(1, max_level + 1):
        nxt = []
        for i, j, k in frontier:
            s = successor_circle(P.circles[i], P.circles[j], P.circles[k])
            n, _ = P.add(s, level, (i, j, k))
            nxt.extend([(i, j, n), (j, k, n), (i, k, n)])
        frontier = nxt
    return P


def _angle(at, p, q) -> float:
    """Unsigned angle ``p-at-q`` in [0, pi]."""
    v1 = (p[0] - at[0], p[1] - at[1])
    v2 = (q[0] - at[0], q[1] - at[1])
    return abs(math.atan2(v1[0] * v2[1] - v1[1] * v2[0], v1[0] * v2[0] + v1[1] * v2[1]))


def _median_error(C: GenCircle, C1: GenCircle, C2: GenCircle, C0: GenCircle, C3: GenCircle) -> float:
    """Angle between the line of ``z_3`` and the median through the origin.

    ``z_i`` are square roots of the tangency points of ``C`` measured from its
    centre; the triangle is cut out by the lines of ``z_1``, ``z_2`` through 0
    and a parallel to ``z_0`` at unit distance.
    """
    c = C.center
    z = []
    for Ci in (C0, C1, C2, C3):
        p = tangency_point(C, Ci)
        z.append(complex(*symmat.sqrt_vector((p[0] - c[0], p[1] - c[1]))))
    z0, z1, z2, z3 = z
    n0 = z0 * 1j / abs(z0)
    # points where the lines through 0 along z1, z2 meet {x : <x, n0> = 1}
    def hit(zz):
        denom = (zz * n0.conjugate()).real
        return zz / denom
    mid = (hit(z1) + hit(z2)) / 2
    ang = abs(cmath.phase(mid / z3))
    return min(ang, math.pi - ang)


def validate_geometry(P: Packing) -> dict:
    """Check the angle bounds and the median-line rule on every successor."""
    bound4 = 2 * math.atan(3 / 4)
    report = {
        "configurations": 0,
        "violations": {"centre_in_triangle": 0, "right_angle": 0, "half_angle": 0, "successor_separation": 0},
        "max_violation": 0.0,
        "min_successor_separation": math.inf,
        "median_checks": 0,
        "max_median_error": 0.0,
        "max_descartes_error": 0.0,
    }
    eps = 1e-12
    for i, j, k, s in P.successor_quadruples():
        quad = [P.circles[t] for t in (i, j, k, s)]
        ks = [c.curvature for c in quad]
        desc = abs(2 * sum(x * x for x in ks) - sum(ks) ** 2) / max(1.0, max(ks) ** 2)
        report["max_descartes_error"] = max(report["max_descartes_error"], desc)
        if any(c.is_line for c in quad):
            continue
        C3 = quad[3]
        c3 = C3.center
        for rot in range(3):
            C0, C1, C2 = quad[rot], quad[(rot + 1) % 3], quad[(rot + 2) % 3]
            report["configurations"] += 1
            c0, c1, c2 = C0.center, C1.center, C2.center
            # c3 lies in the closed triangle of the parent centres
            side = []
            for a, b in ((c0, c1), (c1, c2), (c2, c0)):
                side.append((b[0] - a[0]) * (c3[1] - a[1]) - (b[1] - a[1]) * (c3[0] - a[0]))
            if not (all(t >= -eps for t in side) or all(t <= eps for t in side)):
                report["violations"]["centre_in_triangle"] += 1
            C4 = successor_circle(C0, C1, C3)
            C5 = successor_circle(C0, C2, C3)
            a4 = _angle(c0, C4.center, c3)
            a5 = _angle(c0, C5.center, c3)
            viol = [max(0.0, a4 - math.pi / 2), max(0.0, a5 - math.pi / 2)]
            if a4 >= math.pi / 2 or a5 >= math.pi / 2:
                report["violations"]["right_angle"] += 1
            half = [max(0.0, a5 / 2 - a4), max(0.0, a4 / 2 - a5)]
            if max(half) > eps:
                report["violations"]["half_angle"] += 1
            sep = _angle(c3, C4.center, C5.center)
            report["min_successor_separation"] = min(report["min_successor_separation"], sep)
            if sep < bound4 - eps:
                report["violations"]["successor_separation"] += 1
            report["max_violation"] = max(report["max_violation"], *viol, *half, max(0.0, bound4 - sep))

            other = [c for c in soddy_circles(C0, C1, C2) if _distance(c, C3) > 1e-9 * C3.radius]
            if other and not other[0].is_line:
                err = _median_error(C0, C1, C2, other[0], C3)
                report["median_checks"] += 1
                report["max_median_error"] = max(report["max_median_error"], err)
    report["total_violations"] = sum(report["violations"].values())
    return report


def triple_from_contact_points(C: GenCircle, points) -> tuple[GenCircle, GenCircle, GenCircle]:
    """The pairwise externally tangent triple touching ``C`` externally at ``points``."""
    c = np.array(C.center)
    r = C.radius
    ang = [math.atan2(p[1] - c[1], p[0] - c[0]) for p in points]

    def inv_sin2(t1, t2):
        return 1.0 / math.sin((t1 - t2) / 2) ** 2

    P = {(0, 1): inv_sin2(ang[0], ang[1]), (1, 2): inv_sin2(ang[1], ang[2]), (0, 2): inv_sin2(ang[0], ang[2])}
    kappa = [
        math.sqrt(P[(0, 1)] * P[(0, 2)] / P[(1, 2)]),
        math.sqrt(P[(0, 1)] * P[(1, 2)] / P[(0, 2)]),
        math.sqrt(P[(0, 2)] * P[(1, 2)] / P[(0, 1)]),
    ]
    out = []
    for t, kap in zip(ang, kappa):
        if kap <= 1:
            raise GeometryError("contact points admit no externally tangent triple")
        rho = r / (kap - 1)
        out.append(GenCircle.circle(c + (r + rho) * np.array([math.cos(t), math.sin(t)]), rho))
    return tuple(out)


def dual_contact_points(C: GenCircle, points):
    """Contact points of ``C`` with the new Soddy circles of ``{C, C_j, C_k}``.

    ``y_i`` comes from the Soddy circle of ``{C, C_j, C_k}`` other than
    ``C_i``.  When ``C`` sits in the gap of its triple that circle is the
    successor; otherwise it can be a line or an enclosing circle.
    """
    Cs = triple_from_contact_points(C, points)
    out = []
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        s = max(soddy_circles(C, Cs[j], Cs[k]), key=lambda c: _distance(c, Cs[i]))
        out.append(tangency_point(C, s))
    return out
