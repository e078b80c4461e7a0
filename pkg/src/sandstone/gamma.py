"""Membership in the set of stabilizable matrices and its boundary height.

A rational matrix ``A`` with entries in ``(1/n) Z`` is stabilizable exactly
when ``eta = Laplacian(ceil(x^T A x / 2))`` stabilizes on the torus of side
``2n``.  Everything up to the toppling engine is integer arithmetic.

On the triangular lattice matrices are Gram forms in lattice coordinates.
:func:`tri_gram` converts the Euclidean family ``(2/3) M(a, b, c)`` with
``b = beta / sqrt(3)`` into that form, so the sweep parameters are
``(a, beta)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import IrrationalEntryError
from .lattice import SQUARE, STABLE, ChipConfig, Domain, Lattice, get_lattice, stabilize
from .symmat import RationalSym2, Sym2, m_of

DEFAULT_TORUS_CAP = 4096

# bisection range per lattice: (known member, known non-member)
C_RANGE = {"square": (Fraction(2), Fraction(3)), "triangular": (Fraction(3), Fraction(5))}


def _as_rational(A) -> RationalSym2:
    if isinstance(A, RationalSym2):
        return A
    try:
        entries = [Fraction(x) for x in (A.m11, A.m12, A.m22)]
    except (TypeError, ValueError):
        raise IrrationalEntryError(f"matrix {A!r} has a non-rational entry") from None
    if any(isinstance(x, float) for x in (A.m11, A.m12, A.m22)):
        raise IrrationalEntryError(f"matrix {A!r} has floating entries; pass Fractions")
    return RationalSym2(*entries)


def tri_gram(a, beta, c) -> RationalSym2:
    """Lattice-coordinate form of ``(2/3) M(a, beta / sqrt(3), c)``."""
    a, beta, c = Fraction(a), Fraction(beta), Fraction(c)
    g11 = (c + a) / 3
    g12 = ((c + a) / 2 + beta / 2) / 3
    g22 = (c - a / 2 + beta / 2) / 3
    return RationalSym2(g11, g12, g22)


def density(A: RationalSym2, lattice: Lattice = SQUARE) -> Fraction:
    """Mean of ``Laplacian(x^T A x / 2)``, which is the chip density of eta."""
    A = _as_rational(A)
    total = Fraction(0)
    for ox, oy in get_lattice(lattice).offsets:
        total += (A.m11 * ox * ox + 2 * A.m12 * ox * oy + A.m22 * oy * oy) / 2
    return total


@dataclass
class QuadraticLift:
    A: RationalSym2
    n: int
    lattice: Lattice
    ceil_q: np.ndarray  # window [-1, m] x [-1, m], indexed [y + 1, x + 1]
    period: int = 0  # m; defaults to 2n

    @property
    def torus_size(self) -> int:
        return self.period or 2 * self.n

    def eta(self) -> np.ndarray:
        q = self.ceil_q
        m = self.torus_size
        deg = self.lattice.degree
        out = -deg * q[1:m + 1, 1:m + 1]
        for ox, oy in self.lattice.offsets:
            out = out + q[1 + oy:m + 1 + oy, 1 + ox:m + 1 + ox]
        return out


def quadratic_lift(A, lattice: Lattice | str = SQUARE, period: int | None = None) -> QuadraticLift:
    """Exact ``ceil(q_A)`` on a window one cell larger than the torus."""
    A = _as_rational(A)
    lattice = get_lattice(lattice)
    n = A.denominator
    m = 2 * n if period is None else period
    k11, k12, k22 = (int(x * n) for x in (A.m11, A.m12, A.m22))
    xs = np.arange(-1, m + 1, dtype=np.int64)
    X, Y = np.meshgrid(xs, xs)
    num = k11 * X * X + 2 * k12 * X * Y + k22 * Y * Y
    ceil_q = -((-num) // (2 * n))
    return QuadraticLift(A, n, lattice, ceil_q, m)


def build_eta(A, lattice: Lattice | str = SQUARE) -> ChipConfig:
    """``Laplacian(ceil(q_A))`` on the torus of side ``2n``."""
    lift = quadratic_lift(A, lattice)
    eta = lift.eta()
    if np.abs(eta).max(initial=0) > np.iinfo(np.int32).max:
        raise OverflowError("eta does not fit in 32 bits")
    return ChipConfig(Domain.torus(lift.torus_size), eta, lift.lattice)


def torus_size(A, lattice: Lattice | str = SQUARE) -> int:
    return 2 * _as_rational(A).denominator


def gamma_member(A, lattice: Lattice | str = SQUARE) -> bool:
    """Whether ``A`` is stabilizable on the given lattice."""
    eta = build_eta(A, lattice)
    return stabilize(eta).status == STABLE


def family_matrix(a, b, c, lattice: Lattice | str = SQUARE) -> RationalSym2:
    """``M(a, b, c)`` on the square lattice, the Gram form on the triangular one."""
    lattice = get_lattice(lattice)
    if lattice.name == "triangular":
        return tri_gram(a, b, c)
    return m_of(Fraction(a), Fraction(b), Fraction(c))


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction
    certified: bool = True

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


def _dyadic_exponent(precision) -> int:
    p = Fraction(precision)
    if p <= 0 or p.numerator != 1 or p.denominator & (p.denominator - 1):
        raise ValueError(f"precision must be 1/2^k, got {precision}")
    return p.denominator.bit_length() - 1


def c0(a, b, precision=Fraction(1, 64), lattice: Lattice | str = SQUARE,
       cap: int = DEFAULT_TORUS_CAP) -> Interval:
    """Bisect for the largest ``c`` with ``family_matrix(a, b, c)`` stabilizable.

    ``lo`` is a tested member (or the bottom of the range) and ``hi`` a tested
    non-member (or the top).  If a probe would need a torus larger than
    ``cap`` the search stops early and the interval is marked uncertified.
    """
    lattice = get_lattice(lattice)
    _dyadic_exponent(precision)
    precision = Fraction(precision)
    lo, hi = C_RANGE[lattice.name]
    while hi - lo > precision:
        mid = (lo + hi) / 2
        A = family_matrix(a, b, mid, lattice)
        if torus_size(A, lattice) > cap:
            return Interval(lo, hi, False)
        if gamma_member(A, lattice):
            lo = mid
        else:
            hi = mid
    return Interval(lo, hi, True)


def default_threads() -> int:
    env = os.environ.get("SANDSTONE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def grid_values(lo, hi, count: int) -> list[Fraction]:
    lo, hi = Fraction(lo), Fraction(hi)
    if count == 1:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


@dataclass
class BoundaryRaster:
    rect: tuple
    grid: tuple
    precision: Fraction
    lattice: str
    a_values: list
    b_values: list
    intervals: list  # row-major, row 0 at the largest b

    def lo(self) -> np.ndarray:
        return self._field(lambda iv: float(iv.lo))

    def hi(self) -> np.ndarray:
        return self._field(lambda iv: float(iv.hi))

    def certified(self) -> np.ndarray:
        return self._field(lambda iv: iv.certified).astype(bool)

    def _field(self, f) -> np.ndarray:
        w, h = self.grid
        return np.array([f(iv) for iv in self.intervals], dtype=float).reshape(h, w)

    def point(self, row: int, col: int) -> tuple:
        return self.a_values[col], self.b_values[len(self.b_values) - 1 - row]

    def image(self) -> np.ndarray:
        """Gray levels: bottom of the range white, top of the range black."""
        c_lo, c_hi = (Fraction(2), Fraction(3)) if self.lattice == "square" else (Fraction(3), Fraction(4))
        out = []
        for iv in self.intervals:
            t = (iv.mid - c_lo) / (c_hi - c_lo)
            t = min(max(t, Fraction(0)), Fraction(1))
            out.append(255 - round(255 * t))
        w, h = self.grid
        return np.array(out, dtype=np.uint8).reshape(h, w)

    def csv_text(self) -> str:
        lines = ["a,b,lo,hi,certified"]
        w, h = self.grid
        for idx, iv in enumerate(self.intervals):
            a, b = self.point(idx // w, idx % w)
            lines.append(f"{_fmt(a)},{_fmt(b)},{_fmt(iv.lo)},{_fmt(iv.hi)},{int(iv.certified)}")
        return "\n".join(lines) + "\n"

    def all_certified(self) -> bool:
        return all(iv.certified and iv.width <= self.precision for iv in self.intervals)


def _fmt(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def raster_gamma(rect, grid, precision=Fraction(1, 32), lattice: Lattice | str = SQUARE,
                 threads: int | None = None, cap: int = DEFAULT_TORUS_CAP) -> BoundaryRaster:
    """Certified ``c0`` intervals on a ``grid = (W, H)`` of points spanning ``rect``.

    Grid points include the rectangle's corners.  Pixels are independent jobs;
    results are collected in index order, so the output does not depend on
    ``threads``.
    """
    lattice = get_lattice(lattice)
    a0, a1, b0, b1 = (Fraction(v) for v in rect)
    w, h = grid
    a_vals = grid_values(a0, a1, w)
    b_vals = grid_values(b0, b1, h)
    jobs = [(a_vals[col], b_vals[h - 1 - row]) for row in range(h) for col in range(w)]
    threads = threads or default_threads()

    def run(ab):
        return c0(ab[0], ab[1], precision, lattice, cap)

    if threads == 1:
        intervals = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            intervals = list(pool.map(run, jobs))
    return BoundaryRaster((a0, a1, b0, b1), (w, h), Fraction(precision), lattice.name, a_vals, b_vals, intervals)


def lipschitz_violations(R: BoundaryRaster) -> list:
    """Adjacent pixel pairs whose intervals break the 1-Lipschitz bound.

    ``c0(q) <= c0(p) + |p - q|`` gives ``lo_q - hi_p <= |p - q|``; the
    precision is allowed as slack.
    """
    w, h = R.grid
    bad = []
    for row in range(h):
        for col in range(w):
            for dr, dc in ((0, 1), (1, 0)):
                r2, c2 = row + dr, col + dc
                if r2 >= h or c2 >= w:
                    continue
                p, q = R.point(row, col), R.point(r2, c2)
                if R.lattice == "triangular":
                    dist = math.hypot(float(p[0] - q[0]), float(p[1] - q[1]) / math.sqrt(3))
                else:
                    dist = math.hypot(float(p[0] - q[0]), float(p[1] - q[1]))
                I, J = R.intervals[row * w + col], R.intervals[r2 * w + c2]
                slack = float(R.precision)
                if float(J.lo - I.hi) > dist + slack or float(I.lo - J.hi) > dist + slack:
                    bad.append(((row, col), (r2, c2)))
    return bad
