import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sandstone import symmat
from sandstone.circles import circle_to_matrix, successor_circle
from sandstone.errors import CollinearError, DegenerateMatrixError, IncompatiblePatchesError, NoProperSuccessorError
from sandstone.symmat import QuadraticPatch, RationalSym2, Sym2, m_of, params_of, reflect_trace2

from conftest import descartes_inner, random_triple, tangent_triple

F = Fraction
fracs = st.fractions(min_value=-20, max_value=20, max_denominator=12)
finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_m_of_examples():
    assert m_of(1, 0, 3) == Sym2(2, 0, 1)
    assert m_of(0, 0, 2) == symmat.identity()
    assert params_of(Sym2(1, 1, 1)) == (0, 2, 2)


def test_m_of_rational_type():
    A = m_of(F(1, 3), F(1, 2), F(5, 2))
    assert isinstance(A, RationalSym2)
    assert A.denominator == 12
    assert all(x * 12 == int(x * 12) for x in (A.m11, A.m12, A.m22))


@given(fracs, fracs, fracs)
def test_params_round_trip_exact(a, b, c):
    A = m_of(a, b, c)
    assert params_of(A) == (a, b, c)
    assert A.trace == c


def test_reflection_examples():
    assert reflect_trace2(m_of(1, 0, 3)) == m_of(1, 0, 1)
    assert reflect_trace2(m_of(0, 0, 2)) == m_of(0, 0, 2)
    assert reflect_trace2(reflect_trace2(m_of(5, -3, 7))) == m_of(5, -3, 7)


@given(fracs, fracs, fracs)
def test_reflection_involution_and_ab_fixed(a, b, c):
    A = m_of(a, b, c)
    R = reflect_trace2(A)
    assert reflect_trace2(R) == A
    assert params_of(R)[:2] == (a, b)
    assert R.trace == 4 - A.trace


def test_rho_bar():
    assert symmat.rho_bar(m_of(3, -2, 9)) == (3, -2)


@given(finite, finite)
def test_sqrt_vector_squares_back(x, y):
    if math.hypot(x, y) < 1e-6:
        return
    v = symmat.sqrt_vector((x, y))
    u = symmat.vec_square(v)
    assert math.hypot(u[0] - x, u[1] - y) <= 1e-12 * math.hypot(x, y)
    assert -math.pi / 2 < math.atan2(v[1], v[0]) <= math.pi / 2


def test_outer_is_rank_one():
    A = symmat.outer((F(2), F(3)))
    assert A == Sym2(4, 6, 9)
    assert symmat.is_rank1(A)


def test_tangency_examples():
    assert symmat.is_ext_tangent(m_of(1, 0, 3), m_of(3, 0, 3))
    assert not symmat.is_ext_tangent(m_of(1, 0, 3), m_of(1, 0, 3))
    assert symmat.is_int_tangent(m_of(0, 0, 4), m_of(0, -1, 3))
    with pytest.raises(DegenerateMatrixError):
        symmat.is_ext_tangent(m_of(0, 0, 2), m_of(1, 0, 3))


def test_ext_tangency_matches_geometry(rng):
    # half the pairs are tangent by construction, half are perturbed
    agree = 0
    for trial in range(1000):
        r1, r2 = np.exp(rng.uniform(-1.5, 1.5, 2))
        theta = rng.uniform(0, 2 * math.pi)
        c1 = rng.uniform(-5, 5, 2)
        d = r1 + r2 if trial % 2 == 0 else (r1 + r2) * rng.uniform(0.5, 1.5)
        c2 = c1 + d * np.array([math.cos(theta), math.sin(theta)])
        A1, A2 = m_of(*c1, r1 + 2), m_of(*c2, r2 + 2)
        geom = abs(math.dist(c1, c2) - (r1 + r2)) <= 1e-9 * (1 + r1 + r2)
        agree += symmat.is_ext_tangent(A1, A2) == geom
    assert agree == 1000


def test_successor_descartes_oracle():
    C = tangent_triple(1, 1, 1, shift=(0, 2))
    A = symmat.successor_matrix(*(circle_to_matrix(c) for c in C))
    r = 1 / (3 + 2 * math.sqrt(3))
    assert params_of(A)[2] == pytest.approx(r + 2, abs=1e-12)
    centroid = np.mean([c.center for c in C], axis=0)
    assert params_of(A)[:2] == pytest.approx(tuple(centroid), abs=1e-12)


def test_successor_no_root():
    # collinear centres: the triple is not a tangent configuration
    with pytest.raises(NoProperSuccessorError):
        symmat.successor_matrix(m_of(0, 0, 3), m_of(2, 0, 3), m_of(4, 0, 3))


def test_successor_matches_circle_route(rng):
    for _ in range(200):
        C = random_triple(rng)
        A = symmat.successor_matrix(*(circle_to_matrix(c) for c in C))
        S = circle_to_matrix(successor_circle(*C))
        assert np.allclose(params_of(A), params_of(S), atol=1e-9 * (1 + S.norm()))
        k = [1 / c.radius for c in C]
        assert 1 / (params_of(A)[2] - 2) == pytest.approx(descartes_inner(*k), rel=1e-9)
        for Ai in (circle_to_matrix(c) for c in C):
            assert symmat.is_rank1(Ai - reflect_trace2(A), 1e-7)


def _forward(B, alphas, pts):
    """Patches with D^2 q_i = B^- + alpha_i w_i w_i^t that agree at the p_i."""
    Bm = reflect_trace2(B)
    ws = [symmat.perp((pts[(i + 1) % 3][0] - pts[(i + 2) % 3][0], pts[(i + 1) % 3][1] - pts[(i + 2) % 3][1]))
          for i in range(3)]
    base = QuadraticPatch(Bm, (0, 0), 0)
    out = []
    for i in range(3):
        # q_i - base = alpha_i/2 (w_i . (x - p_j))^2 vanishes to second order along the line p_j p_k
        w, pj = ws[i], pts[(i + 1) % 3]
        wp = w[0] * pj[0] + w[1] * pj[1]
        a = alphas[i]
        H = Bm + symmat.outer(w) * a
        out.append(QuadraticPatch(H, (-a * wp * w[0], -a * wp * w[1]), a * wp * wp / 2))
    return out


def test_rank1_round_trip_rational(rng):
    for _ in range(50):
        B = m_of(*(F(int(rng.integers(-20, 21)), int(rng.integers(1, 6))) for _ in range(3)))
        alphas = [F(int(rng.integers(-9, 10)), int(rng.integers(1, 4))) for _ in range(3)]
        pts = [(F(int(rng.integers(-9, 10))), F(int(rng.integers(-9, 10)))) for _ in range(3)]
        if (pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1]) == (pts[1][1] - pts[0][1]) * (pts[2][0] - pts[0][0]):
            continue
        R, al = symmat.rank1_recover(pts, _forward(B, alphas, pts))
        assert R == B
        assert list(al) == alphas


def test_rank1_equal_patches():
    q = QuadraticPatch(m_of(F(1), F(2), F(5)), (F(1), F(-1)), F(3))
    B, al = symmat.rank1_recover([(0, 0), (1, 0), (0, 1)], [q, q, q])
    assert al == (0, 0, 0)
    assert reflect_trace2(B) == q.hessian


def test_rank1_errors():
    q = QuadraticPatch(m_of(F(1), F(2), F(5)))
    with pytest.raises(CollinearError):
        symmat.rank1_recover([(0, 0), (1, 1), (2, 2)], [q, q, q])
    q2 = QuadraticPatch(m_of(F(1), F(2), F(5)), (F(1), F(0)), F(0))
    with pytest.raises(IncompatiblePatchesError):
        symmat.rank1_recover([(0, 0), (1, 0), (0, 1)], [q, q, q2])
