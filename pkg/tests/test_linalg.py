from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy
from scipy.optimize import minimize
from scipy.stats import special_ortho_group

from contentlab.linalg import john_matrix, polytope_norm, svd_small


def exact_singular_values(M_int, denom, dps=40):
    """Singular values of M_int/denom from the exact characteristic polynomial of M^T M."""
    M = sympy.Matrix(M_int) / denom
    x = sympy.Symbol("x")
    coeffs = sympy.Poly((M.T * M).charpoly(x).as_expr(), x).all_coeffs()
    mpmath.mp.dps = dps
    roots = mpmath.polyroots([mpmath.mpf(sympy.Rational(c).p) / sympy.Rational(c).q for c in coeffs],
                             maxsteps=200, extraprec=200)
    return sorted((float(mpmath.sqrt(max(mpmath.re(r), 0))) for r in roots), reverse=True)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_svd_matches_exact_oracle(d, rng):
    for _ in range(10):
        M_int = rng.integers(-8, 9, size=(d, d))
        U, S, V = svd_small(M_int / 8)
        np.testing.assert_allclose(S, exact_singular_values(M_int.tolist(), 8), atol=1e-12)


def test_svd_reconstruction_and_orthogonality(rng):
    for d in (2, 3, 5):
        M = rng.standard_normal((d, d))
        U, S, V = svd_small(M)
        np.testing.assert_allclose(U @ np.diag(S) @ V.T, M, atol=1e-13)
        np.testing.assert_allclose(U.T @ U, np.eye(d), atol=1e-13)
        np.testing.assert_allclose(V.T @ V, np.eye(d), atol=1e-13)
        assert np.all(np.diff(S) <= 0)


def test_svd_rank_deficient():
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    U, S, V = svd_small(M)
    assert S[1] == pytest.approx(0, abs=1e-14)
    np.testing.assert_allclose(U.T @ U, np.eye(2), atol=1e-13)
    np.testing.assert_allclose(U @ np.diag(S) @ V.T, M, atol=1e-13)


def test_svd_zero_and_diagonal():
    U, S, V = svd_small(np.zeros((3, 3)))
    assert np.all(S == 0)
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-14)
    U, S, V = svd_small(np.diag([1.0, -3.0, 2.0]))
    np.testing.assert_allclose(S, [3, 2, 1])


def test_svd_rejects_rectangular():
    with pytest.raises(ValueError):
        svd_small(np.ones((2, 3)))


def test_svd_fraction_entries():
    M = [[Fraction(1, 3), Fraction(1, 7)], [Fraction(-2, 5), Fraction(1, 1)]]
    S = svd_small(np.array(M, dtype=float))[1]
    np.testing.assert_allclose(S, exact_singular_values([[35, 15], [-42, 105]], 105), atol=1e-14)


# -- John ellipsoid ------------------------------------------------------------

def test_john_square_is_identity():
    res = john_matrix(halfspaces=np.eye(2))
    np.testing.assert_allclose(res.A, np.eye(2), atol=1e-6)
    assert res.k == 2


def test_john_cross_polytope():
    res = john_matrix(vertices=[[1, 0], [-1, 0], [0, 1], [0, -1]])
    np.testing.assert_allclose(res.A, np.sqrt(2) * np.eye(2), atol=1e-6)


def test_john_one_dimensional_support():
    res = john_matrix(halfspaces=[[2.0, 0.0], [-2.0, 0.0]])
    assert res.k == 1
    w = np.array([[0.3, 5.0]])
    assert np.linalg.norm(w @ res.A.T) == pytest.approx(0.6)
    assert res.seminorm(w)[0] == pytest.approx(0.6)


def test_john_rejects_bad_input():
    with pytest.raises(ValueError):
        john_matrix()
    with pytest.raises(ValueError):
        john_matrix(halfspaces=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        john_matrix(vertices=[[1, 0], [0, 1]])


def _max_area_ellipse(rows):
    """Largest centred ellipse {L u : |u| <= 1} with |L^T a_i| <= 1, by direct optimisation."""
    def unpack(p):
        return np.array([[p[0], 0.0], [p[1], p[2]]])

    cons = [{"type": "ineq", "fun": lambda p, a=a: 1 - np.sum((unpack(p).T @ a) ** 2)} for a in rows]
    scale = 0.5 / np.abs(rows).sum(axis=1).max()
    res = minimize(lambda p: -np.log(abs(p[0] * p[2]) + 1e-300), [scale, 0.0, scale],
                   constraints=cons, method="SLSQP", options={"ftol": 1e-14, "maxiter": 1000})
    return abs(res.x[0] * res.x[2])


def test_john_random_polygons_against_direct_optimisation():
    rng = np.random.default_rng(5)
    for _ in range(20):
        ang = np.sort(rng.uniform(0, np.pi, 4))
        rad = rng.uniform(0.5, 2.0, 4)
        half = np.column_stack([np.cos(ang), np.sin(ang)]) * rad[:, None]
        rows = np.vstack([half, -half])
        res = john_matrix(halfspaces=rows)
        area_det = 1 / np.sqrt(np.linalg.det(res.ellipsoid))
        assert area_det == pytest.approx(_max_area_ellipse(rows), rel=1e-5)
        assert 1 - 1e-9 <= res.ratio_min and res.ratio_max <= 2 + 1e-9


def test_john_bounds_in_higher_dimension():
    R = special_ortho_group.rvs(3, random_state=2)
    rows = np.vstack([np.eye(3), [[1, 1, 1]]]) @ R.T
    res = john_matrix(halfspaces=rows, samples=4000)
    w = np.random.default_rng(1).standard_normal((500, 3))
    ratio = np.linalg.norm(w @ res.A.T, axis=1) / polytope_norm(rows, w)
    assert ratio.min() >= 1 - 1e-9 and ratio.max() <= 3 + 1e-9
