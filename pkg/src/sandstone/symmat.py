"""Algebra of real symmetric 2x2 matrices.

Matrices are parameterized as

    M(a, b, c) = 1/2 * [[c + a, b], [b, c - a]]

so that ``c`` is the trace and the downward cone of ``M(a, b, c)`` meets the
trace-2 plane in the disc of radius ``c - 2`` centred at ``(a, b)``.  This is
what makes proper circles and matrices of trace > 2 interchangeable.

Entries may be floats or :class:`fractions.Fraction`; every operation that
does not need a square root stays exact for rational input.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .errors import (
    CollinearError,
    DegenerateMatrixError,
    IncompatiblePatchesError,
    NoProperSuccessorError,
)

RANK1_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Sym2:
    m11: float
    m12: float
    m22: float

    def __eq__(self, other):
        if not isinstance(other, Sym2):
            return NotImplemented
        return (self.m11, self.m12, self.m22) == (other.m11, other.m12, other.m22)

    def __hash__(self):
        return hash((self.m11, self.m12, self.m22))

    @property
    def trace(self):
        return self.m11 + self.m22

    @property
    def det(self):
        return self.m11 * self.m22 - self.m12 * self.m12

    @property
    def params(self):
        return params_of(self)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(x, Rational) for x in (self.m11, self.m12, self.m22))

    def norm(self) -> float:
        return math.sqrt(float(self.m11) ** 2 + 2 * float(self.m12) ** 2 + float(self.m22) ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m12, self.m22]], dtype=float)

    def to_float(self) -> "Sym2":
        return Sym2(float(self.m11), float(self.m12), float(self.m22))

    def apply(self, x):
        """Matrix-vector product, exact for rational input."""
        return (self.m11 * x[0] + self.m12 * x[1], self.m12 * x[0] + self.m22 * x[1])

    def quad(self, x):
        """``x^t A x``."""
        return self.m11 * x[0] * x[0] + 2 * self.m12 * x[0] * x[1] + self.m22 * x[1] * x[1]

    def __add__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.m11 + other.m11, self.m12 + other.m12, self.m22 + other.m22)

    def __sub__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.m11 - other.m11, self.m12 - other.m12, self.m22 - other.m22)

    def __mul__(self, s) -> "Sym2":
        return Sym2(self.m11 * s, self.m12 * s, self.m22 * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Sym2":
        return Sym2(-self.m11, -self.m12, -self.m22)


class RationalSym2(Sym2):
    """Symmetric matrix with entries in ``(1/n) Z``; ``n`` is :attr:`denominator`."""

    def __init__(self, m11, m12, m22):
        object.__setattr__(self, "m11", Fraction(m11))
        object.__setattr__(self, "m12", Fraction(m12))
        object.__setattr__(self, "m22", Fraction(m22))

    @property
    def denominator(self) -> int:
        return math.lcm(self.m11.denominator, self.m12.denominator, self.m22.denominator)

    def scaled_integers(self) -> tuple[int, int, int]:
        n = self.denominator
        return (int(self.m11 * n), int(self.m12 * n), int(self.m22 * n))

    def __repr__(self) -> str:
        return f"RationalSym2({self.m11}, {self.m12}, {self.m22})"


def m_of(a, b, c) -> Sym2:
    """Return ``M(a, b, c)``; rational arguments give a :class:`RationalSym2`."""
    if all(isinstance(x, Rational) for x in (a, b, c)):
        a, b, c = Fraction(a), Fraction(b), Fraction(c)
        return RationalSym2((c + a) / 2, b / 2, (c - a) / 2)
    return Sym2((c + a) / 2, b / 2, (c - a) / 2)


def params_of(A: Sym2):
    """Inverse of :func:`m_of`: ``(a, b, c)``."""
    return (A.m11 - A.m22, 2 * A.m12, A.m11 + A.m22)


def identity() -> Sym2:
    return Sym2(1, 0, 1)


def reflect_trace2(A: Sym2) -> Sym2:
    """Reflection across the trace-2 plane, ``(a, b, c) -> (a, b, 4 - c)``."""
    shift = A.trace - 2
    out = Sym2(A.m11 - shift, A.m12, A.m22 - shift)
    if isinstance(A, RationalSym2):
        return RationalSym2(out.m11, out.m12, out.m22)
    return out


def rho_bar(A: Sym2):
    a, b, _ = params_of(A)
    return (a, b)


def vec_square(v) -> tuple[float, float]:
    """Complex square of a plane vector."""
    x, y = v
    return (x * x - y * y, 2 * x * y)


def sqrt_vector(u) -> tuple[float, float]:
    """Principal complex square root, argument in (-pi/2, pi/2]."""
    x, y = float(u[0]), float(u[1])
    z = cmath.sqrt(complex(x, 0.0 if y == 0 else y))
    # just below the negative real axis the argument can round to -pi/2
    if math.atan2(z.imag, z.real) <= -math.pi / 2:
        z = -z
    return (z.real, z.imag)


def outer(v) -> Sym2:
    return Sym2(v[0] * v[0], v[0] * v[1], v[1] * v[1])


def perp(v):
    """``(x, y)^perp = (-y, x)``."""
    return (-v[1], v[0])


def is_psd(A: Sym2, tol: float = 0.0) -> bool:
    return A.trace >= -tol and A.det >= -tol * (1 + A.norm() ** 2)


def leq(A: Sym2, B: Sym2, tol: float = 0.0) -> bool:
    """Matrix order ``A <= B``."""
    return is_psd(B - A, tol)


def is_rank1(D: Sym2, tol: float = RANK1_TOL) -> bool:
    """Rank exactly one; exact test for rational input, scale-free otherwise."""
    if D.is_exact:
        return D.det == 0 and (D.m11, D.m12, D.m22) != (0, 0, 0)
    n = D.norm()
    if n <= tol:
        return False
    return abs(float(D.det)) <= tol * (1 + n * n)


def _require_proper(*mats: Sym2) -> None:
    for A in mats:
        if not A.trace > 2:
            raise DegenerateMatrixError(f"degenerate: trace {A.trace} <= 2")


def is_ext_tangent(A1: Sym2, A2: Sym2, tol: float = RANK1_TOL) -> bool:
    _require_proper(A1, A2)
    D = A1 - reflect_trace2(A2)
    return is_rank1(D, tol) and D.trace > 0


def is_int_tangent(A1: Sym2, A2: Sym2, tol: float = RANK1_TOL) -> bool:
    _require_proper(A1, A2)
    return is_rank1(A1 - A2, tol)


def _apollonius_roots(centers, radii):
    """Signed offsets ``rho`` and centres solving |x - c_i| = r_i + rho."""
    (a1, b1), (a2, b2), (a3, b3) = centers
    r1, r2, r3 = radii
    M = np.array([[2 * (a2 - a1), 2 * (b2 - b1)], [2 * (a3 - a1), 2 * (b3 - b1)]])
    P = np.array([
        (a2 * a2 + b2 * b2 - a1 * a1 - b1 * b1) - (r2 * r2 - r1 * r1),
        (a3 * a3 + b3 * b3 - a1 * a1 - b1 * b1) - (r3 * r3 - r1 * r1),
    ])
    Q = np.array([-2 * (r2 - r1), -2 * (r3 - r1)])
    if abs(np.linalg.det(M)) <= 1e-14 * (1 + np.abs(M).max() ** 2):
        raise NoProperSuccessorError("collinear centres")
    u = np.linalg.solve(M, P)
    w = np.linalg.solve(M, Q)
    d = u - np.array([a1, b1])
    qa = w @ w - 1.0
    qb = 2.0 * (w @ d - r1)
    qc = d @ d - r1 * r1
    scale = max(abs(qb), abs(qc), 1.0)
    roots = []
    if abs(qa) <= 1e-13 * scale:
        # one Soddy circle degenerated into a line
        if qb != 0:
            roots.append(-qc / qb)
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            disc = 0.0 if disc > -1e-12 * scale * scale else disc
        if disc >= 0:
            s = math.sqrt(disc)
            q = -0.5 * (qb + math.copysign(s, qb))
            if q != 0:
                roots.extend([q / qa, qc / q])
            else:
                roots.append(-qb / (2 * qa))
    return [(rho, u + rho * w) for rho in roots]


def successor_matrix(A1: Sym2, A2: Sym2, A3: Sym2) -> Sym2:
    """Matrix of the successor circle of three pairwise externally tangent matrices.

    Solves ``A_i - B`` rank one for all ``i`` directly (Apollonius' problem in
    the (a, b, c) coordinates) and returns the solution of trace > 2 whose
    circle lies in the bounded gap, i.e. the one with the smallest radius.
    """
    mats = [A.to_float() for A in (A1, A2, A3)]
    _require_proper(*mats)
    centers = [rho_bar(A) for A in mats]
    ox, oy = centers[0]
    local = [(x - ox, y - oy) for x, y in centers]
    radii = [A.trace - 2 for A in mats]
    candidates = [(rho, c) for rho, c in _apollonius_roots(local, radii) if rho > 0]
    if not candidates:
        raise NoProperSuccessorError("no proper successor")
    rho, c = min(candidates, key=lambda t: t[0])
    return m_of(float(c[0]) + ox, float(c[1]) + oy, 2.0 + float(rho))


def _points_collinear(p, tol: float) -> bool:
    (x1, y1), (x2, y2), (x3, y3) = p
    cross = (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)
    if all(isinstance(t, Rational) for pt in p for t in pt):
        return cross == 0
    scale = max(abs(float(t)) for pt in p for t in pt) + 1.0
    return abs(float(cross)) <= tol * scale * scale


@dataclass(frozen=True)
class QuadraticPatch:
    """``phi(x) = 1/2 x^t H x + b . x + c``."""

    hessian: Sym2
    linear: tuple = (0, 0)
    constant: float = 0

    def value(self, x):
        H, b = self.hessian, self.linear
        return H.quad(x) / 2 + b[0] * x[0] + b[1] * x[1] + self.constant

    def gradient(self, x):
        Hx = self.hessian.apply(x)
        return (Hx[0] + self.linear[0], Hx[1] + self.linear[1])

    def coefficients(self) -> list[float]:
        """``[h11, h12, h22, b1, b2, c]``."""
        H = self.hessian
        return [float(t) for t in (H.m11, H.m12, H.m22, *self.linear, self.constant)]

    def evaluate_grid(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        H = self.hessian.to_float()
        b1, b2 = (float(t) for t in self.linear)
        return 0.5 * (H.m11 * x * x + 2 * H.m12 * x * y + H.m22 * y * y) + b1 * x + b2 * y + float(self.constant)


def patches_agree(q1: QuadraticPatch, q2: QuadraticPatch, x, tol: float = 1e-9) -> float:
    """Largest value/gradient mismatch at ``x``; exactly 0 means agreement."""
    dv = q1.value(x) - q2.value(x)
    g1, g2 = q1.gradient(x), q2.gradient(x)
    diffs = [dv, g1[0] - g2[0], g1[1] - g2[1]]
    return max(abs(float(d)) for d in diffs)


def _rref_solve(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact solve of a consistent overdetermined system; raises if inconsistent."""
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    ncol = len(rows[0])
    piv_row = 0
    pivots = []
    for col in range(ncol):
        sel = next((r for r in range(piv_row, len(m)) if m[r][col] != 0), None)
        if sel is None:
            continue
        m[piv_row], m[sel] = m[sel], m[piv_row]
        pv = m[piv_row][col]
        m[piv_row] = [t / pv for t in m[piv_row]]
        for r in range(len(m)):
            if r != piv_row and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[piv_row])]
        pivots.append(col)
        piv_row += 1
    if any(row[-1] != 0 for row in m[piv_row:]):
        raise IncompatiblePatchesError("rank-one system is inconsistent")
    if len(pivots) < ncol:
        raise CollinearError("rank-one system is singular")
    return [m[i][-1] for i in range(ncol)]


def rank1_recover(points: Sequence, patches: Sequence[QuadraticPatch], tol: float = 1e-9):
    """Recover ``B`` and ``alpha_i`` with ``D^2 q_i = B^- + alpha_i w_i (x) w_i``.

    ``w_i = (p_j - p_k)^perp`` and ``p_i`` is the point where the two patches
    other than ``q_i`` meet.  Rational patches and points give an exact answer.
    """
    p = [tuple(pt) for pt in points]
    if _points_collinear(p, tol):
        raise CollinearError("collinear points")
    exact = all(q.hessian.is_exact for q in patches) and all(
        isinstance(t, Rational) for pt in p for t in pt
    )
    scale = 1.0 + max(q.hessian.norm() for q in patches) * (1.0 + max(abs(float(t)) for pt in p for t in pt)) ** 2
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        mismatch = patches_agree(patches[j], patches[k], p[i])
        if (exact and mismatch != 0) or (not exact and mismatch > tol * scale):
            raise IncompatiblePatchesError(f"patches {j} and {k} disagree at point {i} by {mismatch:.3g}")

    ws = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        ws.append(perp((p[j][0] - p[k][0], p[j][1] - p[k][1])))

    rows, rhs = [], []
    for i, q in enumerate(patches):
        w = ws[i]
        H = q.hessian
        ww = (w[0] * w[0], w[0] * w[1], w[1] * w[1])
        for e in range(3):
            row = [0] * 6
            row[e] = 1
            row[3 + i] = ww[e]
            rows.append(row)
        rhs.extend([H.m11, H.m12, H.m22])

    if exact:
        sol = _rref_solve([[Fraction(t) for t in r] for r in rows], [Fraction(t) for t in rhs])
        N = RationalSym2(*sol[:3])
    else:
        A = np.array(rows, dtype=float)
        y = np.array([float(t) for t in rhs])
        sol, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = float(np.abs(A @ sol - y).max())
        if resid > tol * scale:
            raise IncompatiblePatchesError(f"rank-one residual {resid:.3g}")
        sol = [float(t) for t in sol]
        N = Sym2(*sol[:3])
    return reflect_trace2(N), tuple(sol[3:])
