import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog, minimize_scalar
from scipy.stats import special_ortho_group

from contentlab import zoo
from contentlab.dyadic import DyadicCube, cubes_at_level
from contentlab.metric import GridMap
from contentlab.seminorm import (SeminormFit, adapted_basis, check_witness, fit_region,
                                 good_cube_search, md_fit_lp, md_fit_matrix, plane_constant,
                                 positive_content_certificate, quantdiff_sum, sandwich_check)

ROOT2 = DyadicCube.root(2)


def _region_points(f, lo, hi):
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*ranges, indexing="ij")], axis=1)
    return pts, f.values[np.ravel_multi_index(tuple(pts.T), f.shape)]


def _lp_oracle(f, cube, C0=1):
    """Dense LP over primitive directions with every pair and every triple written out."""
    lo, hi, _ = fit_region(f, cube, C0)
    pts, vals = _region_points(f, lo, hi)
    D = f.target.pairwise(vals, vals)
    rows = {}
    for i, j in itertools.combinations(range(len(pts)), 2):
        v = pts[j] - pts[i]
        if v[np.flatnonzero(v)[0]] < 0:
            v = -v
        g = math.gcd(*map(int, np.abs(v)))
        rows.setdefault(tuple(v // g), []).append((g, D[i, j]))
    dirs = sorted(rows)
    idx = {u: k for k, u in enumerate(dirs)}
    U = len(dirs)
    A, b = [], []
    for u, pairs in rows.items():
        for lam, dist in pairs:
            r = np.zeros(U + 1)
            r[idx[u]], r[U] = lam, -1
            A.append(r.copy()); b.append(dist)
            r[idx[u]] = -lam
            A.append(r); b.append(-dist)
    for u, v in itertools.combinations(dirs, 2):
        for s in (1, -1):
            w = np.array(u) + s * np.array(v)
            if not w.any():
                continue
            if w[np.flatnonzero(w)[0]] < 0:
                w = -w
            lam = math.gcd(*map(int, np.abs(w)))
            w = tuple(int(x) for x in w // lam)
            if w in idx:
                r = np.zeros(U + 1)
                r[idx[w]] += lam
                r[idx[u]] -= 1
                r[idx[v]] -= 1
                A.append(r); b.append(0.0)
    c = np.zeros(U + 1)
    c[U] = 1
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=[(0, None)] * (U + 1), method="highs")
    return res.fun


def _brute_deviation(f, fit):
    lo, hi = fit.region
    pts, vals = _region_points(f, lo, hi)
    diffs = (pts[:, None, :] - pts[None, :, :]).reshape(-1, f.d) * f.spacing
    D = f.target.pairwise(vals, vals).ravel()
    return float(np.abs(D - fit.norm(diffs)).max())


# -- LP fits -------------------------------------------------------------------

def test_lp_fold_one_dimensional_against_grid_search():
    f = GridMap.from_function(lambda x: np.abs(x[:, :1] - 0.5), 1, 0, 5)
    x = f.coords()[:, 0]
    dd = np.abs(f.image_coords()[:, 0][:, None] - f.image_coords()[:, 0][None, :])
    dx = np.abs(x[:, None] - x[None, :])
    grid = np.linspace(0, 1, 2001)
    coarse = min(grid, key=lambda s: np.abs(dd - s * dx).max())
    res = minimize_scalar(lambda s: np.abs(dd - s * dx).max(), bounds=(coarse - 1e-3, coarse + 1e-3),
                          method="bounded", options={"xatol": 1e-12})
    fit = md_fit_lp(f, DyadicCube.root(1))
    assert fit.deviation == pytest.approx(res.fun, abs=1e-4)
    assert fit.deviation <= res.fun + 1e-12


@pytest.mark.parametrize("name,K,level", [("fold", 3, 0), ("random", 2, 0), ("random", 3, 1),
                                          ("star_tree", 2, 0)])
def test_lp_matches_dense_oracle(name, K, level):
    f, _ = zoo(name, 1, 1, K)
    for cube in list(cubes_at_level(2, level))[:2]:
        fit = md_fit_lp(f, cube)
        oracle = _lp_oracle(f, cube)
        assert fit.deviation <= oracle + 1e-9
        assert fit.info["t_feasible"] >= oracle - 1e-9
        assert fit.info["t_feasible"] - fit.deviation <= 1e-10


def test_lp_returns_a_feasible_assignment():
    f, _ = zoo("random", 1, 1, 3, seed=2)
    fit = md_fit_lp(f, ROOT2)
    assert _brute_deviation(f, fit) <= fit.info["t_feasible"] + 1e-12


def test_lp_zero_on_affine_maps():
    for name, kw in (("projection", {}), ("linear_functional", {"a": [0.3, -0.7]}), ("constant", {})):
        f, _ = zoo(name, 1, 1, 3, **kw)
        assert md_fit_lp(f, ROOT2).md_value <= 1e-9


def test_lp_normalisation_and_clipping():
    f, _ = zoo("fold", 1, 1, 3)
    cube = DyadicCube(1, (0, 0))
    one = md_fit_lp(f, cube)
    three = md_fit_lp(f, cube, C0=3)
    assert three.clipped and not one.clipped
    assert three.md_value == pytest.approx(three.deviation / (3 * 0.5))
    assert fit_region(f, cube, 3)[:2][1].tolist() == [8, 8]
    with pytest.raises(ValueError):
        md_fit_lp(f, cube, C0=2)


def test_slopes_and_norm_lookup():
    f, _ = zoo("projection", 1, 1, 2)
    fit = md_fit_lp(f, ROOT2)
    assert fit.slopes[(1, 0)] == pytest.approx(1, abs=1e-9)
    assert fit.norm([[0.5, 0.0]])[0] == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(ValueError):
        fit.norm([[0.1, 0.0]])


# -- matrix fits and the bracket ------------------------------------------------

def test_matrix_fit_recovers_projection():
    f, _ = zoo("projection", 1, 1, 3)
    fit = md_fit_matrix(f, ROOT2)
    assert fit.md_value <= 1e-9
    assert fit.norm([[0.3, 0.9]])[0] == pytest.approx(0.3, abs=1e-9)


def test_matrix_fit_rotated_linear_map():
    R = special_ortho_group.rvs(2, random_state=7)
    f = GridMap.from_function(lambda x: x @ R.T, 2, 0, 3)
    fit = md_fit_matrix(f, ROOT2)
    assert fit.md_value <= 1e-6
    assert _brute_deviation(f, fit) == pytest.approx(fit.deviation, abs=1e-12)


def test_fold_root_brackets():
    f, _ = zoo("fold", 1, 1, 3)
    lp, mx = md_fit_lp(f, ROOT2), md_fit_matrix(f, ROOT2)
    assert lp.md_value == pytest.approx(1 / 3, abs=1e-9)
    assert mx.md_value == pytest.approx(1 / 3, abs=1e-9)


def test_bracket_invariant_random_maps():
    for seed in range(4):
        f, _ = zoo("random", 1, 1, 3, seed=seed)
        for cube in itertools.chain(cubes_at_level(2, 0), cubes_at_level(2, 1)):
            lp = md_fit_lp(f, cube)
            mx = md_fit_matrix(f, cube, lp_fit=lp)
            assert lp.md_value <= mx.md_value + 1e-12
            assert _brute_deviation(f, mx) == pytest.approx(mx.deviation, abs=1e-12)


# -- adapted bases and plane constants --------------------------------------------

def _matrix_fit(A, kind="l2"):
    return SeminormFit("matrix", 0.0, DyadicCube.root(A.shape[1]), 0.0, A=np.asarray(A, float), kind=kind)


def test_adapted_basis_diagonal():
    fit = _matrix_fit(np.diag([1.0, 1.0, 0.0]))
    ab = adapted_basis(fit, np.eye(3)[:2], 1.0)
    assert ab.constant * ab.delta == pytest.approx(1 / math.sqrt(2))
    assert ab.worst_ratio >= 1 - 1e-12


def test_adapted_basis_recovers_rotation():
    R = special_ortho_group.rvs(3, random_state=3)
    fit = _matrix_fit(np.diag([3.0, 2.0, 1.0]) @ R.T)
    ab = adapted_basis(fit, R.T[:2], 1.0, n=2)
    np.testing.assert_allclose(np.abs(ab.vectors @ R), np.eye(3), atol=1e-10)
    np.testing.assert_allclose(ab.singular_values, [3, 2, 1], atol=1e-12)


def test_adapted_basis_linf_factor():
    fit = _matrix_fit(np.eye(2), kind="linf")
    ab = adapted_basis(fit, np.eye(2)[:1], 1.0, n=1)
    assert ab.constant == pytest.approx(1 / math.sqrt(2))


def test_adapted_basis_precondition():
    with pytest.raises(ValueError, match="precondition"):
        adapted_basis(_matrix_fit(np.zeros((2, 2))), np.eye(2)[:1], 0.5)
    with pytest.raises(ValueError):
        adapted_basis(_matrix_fit(np.eye(2)), np.eye(2)[:1], 0.0)


def test_plane_constants():
    fit = _matrix_fit(np.diag([2.0, 1.0, 0.5]))
    assert plane_constant(fit, np.eye(3)[:2]) == (pytest.approx(1.0), "exact")
    lfit = _matrix_fit(np.eye(2), kind="linf")
    c, how = plane_constant(lfit, np.eye(2))
    assert how == "grid" and 1 / math.sqrt(2) - 1e-3 <= c <= 1 / math.sqrt(2)
    assert plane_constant(lfit, [[0.6, 0.8]]) == (pytest.approx(0.8), "exact")


# -- good cubes and certificates ----------------------------------------------------

def test_good_cube_projection_root():
    f, _ = zoo("projection", 1, 1, 3)
    w = good_cube_search(f, 0.1, 0.5, 0.25)
    assert w.cube == ROOT2
    assert w.c == pytest.approx(1.0, abs=1e-9)
    assert check_witness(f, w) == []


def test_good_cube_constant_has_none():
    f, _ = zoo("constant", 1, 1, 3)
    assert good_cube_search(f, 0.1, 0.5, 0.25) is None


def test_good_cube_argument_checks():
    f, _ = zoo("projection", 1, 1, 3)
    with pytest.raises(ValueError):
        good_cube_search(f, 0.0, 0.5, 0.25)
    with pytest.raises(ValueError):
        good_cube_search(f, 0.1, 0.5, 1 / 16)


def test_projection_certificate():
    f, _ = zoo("projection", 1, 1, 3)
    w = good_cube_search(f, 0.1, 0.5, 0.25)
    cert = positive_content_certificate(f, w)
    assert not cert.degenerate
    assert cert.bound >= 0.5
    assert cert.certified <= cert.bound
    ok, upper = sandwich_check(f, cert)
    assert ok and cert.dyadic_bound <= upper


def test_certificate_rejects_stale_witness():
    f, _ = zoo("projection", 1, 1, 3)
    w = good_cube_search(f, 0.1, 0.5, 0.25)
    g, _ = zoo("scaled_projection", 1, 1, 3, alpha=0.9)
    with pytest.raises(ValueError, match="stale"):
        positive_content_certificate(g, w)


def test_fold_certificate_k5():
    f, _ = zoo("fold", 1, 1, 5)
    w = good_cube_search(f, 0.1, 0.5, 0.125)
    assert w is not None and w.cube.level == 2
    cert = positive_content_certificate(f, w)
    assert not cert.degenerate and cert.certified > 0
    assert sandwich_check(f, cert)[0]


# -- quantitative differentiation ------------------------------------------------------

def test_quantdiff_fold_matches_crease_oracle():
    for K in (3, 4):
        f, _ = zoo("fold", 1, 1, K)
        expected = sum(q.volume for lev in range(K - 1) for q in cubes_at_level(2, lev)
                       if q.lower[0] < 0.5 < q.upper[0])
        assert quantdiff_sum(f, 0.01) == pytest.approx(expected)
        for lev in range(K - 1):
            for q in cubes_at_level(2, lev):
                if not q.lower[0] < 0.5 < q.upper[0]:
                    assert md_fit_lp(f, q).md_value <= 1e-9


def test_quantdiff_zero_for_affine():
    f, _ = zoo("linear_functional", 1, 1, 4, a=[0.5, 0.25])
    assert quantdiff_sum(f, 0.01) == 0
    with pytest.raises(ValueError):
        quantdiff_sum(f, 0.0)
