"""Small dense linear algebra: one-sided Jacobi SVD and John-ellipsoid matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull


def svd_small(M, max_sweeps: int = 80):
    """One-sided (Hestenes) Jacobi SVD of a small square matrix.

    Returns ``U, S, V`` with ``M = U @ diag(S) @ V.T``, S descending.
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"svd_small expects a square matrix, got shape {M.shape}")
    d = M.shape[0]
    W = M.copy()
    V = np.eye(d)
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        rotated = False
        for i in range(d - 1):
            for j in range(i + 1, d):
                a = W[:, i] @ W[:, i]
                b = W[:, j] @ W[:, j]
                g = W[:, i] @ W[:, j]
                if abs(g) <= eps * np.sqrt(a * b) or g == 0.0:
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * g)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                wi, wj = W[:, i].copy(), W[:, j]
                W[:, i] = c * wi - s * wj
                W[:, j] = s * wi + c * wj
                vi, vj = V[:, i].copy(), V[:, j]
                V[:, i] = c * vi - s * vj
                V[:, j] = s * vi + c * vj
        if not rotated:
            break
    S = np.sqrt((W * W).sum(axis=0))
    order = np.argsort(-S, kind="stable")
    S, W, V = S[order], W[:, order], V[:, order]
    U = np.zeros((d, d))
    tiny = eps * max(1.0, S[0] if d else 0.0) * d
    live = S > tiny
    U[:, live] = W[:, live] / S[live]
    if not live.all():
        U = _complete_orthonormal(U, live)
    return U, S, V


def _complete_orthonormal(U, live):
    """Fill the dead columns of U with an orthonormal complement of the live ones."""
    d = U.shape[0]
    basis = [U[:, i] for i in range(d) if live[i]]
    for e in np.eye(d):
        if len(basis) == d:
            break
        v = e - sum((e @ b) * b for b in basis) if basis else e.copy()
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
    out = U.copy()
    fill = iter(basis[int(live.sum()):])
    for i in range(d):
        if not live[i]:
            out[:, i] = next(fill)
    return out


@dataclass
class JohnResult:
    A: np.ndarray        # ||w|| <= |A w| <= k ||w||
    k: int               # dim of the norm's support V
    basis: np.ndarray    # d x k orthonormal basis of V
    ellipsoid: np.ndarray  # k x k matrix G of the inscribed ellipsoid {u : u^T G u <= 1}
    ratio_min: float
    ratio_max: float
    rows: np.ndarray     # the seminorm is max_i |rows_i . w|

    def seminorm(self, w):
        return polytope_norm(self.rows, w)


def polytope_norm(rows: np.ndarray, w) -> np.ndarray:
    """||w|| = max_i |a_i . w| for the symmetric polytope {|a_i . w| <= 1}."""
    return np.abs(np.atleast_2d(w) @ rows.T).max(axis=1)


def _halfspaces_from_vertices(vertices: np.ndarray, tol: float):
    V = np.asarray(vertices, dtype=float)
    for v in V:
        if np.min(np.abs(V + v).max(axis=1)) > tol:
            raise ValueError("vertex set is not symmetric about the origin")
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    k = int((s > tol * max(1.0, s[0])).sum())
    if k == 0:
        raise ValueError("degenerate polytope")
    Q = vt[:k].T
    X = V @ Q
    if k == 1:
        rows = np.array([[1.0 / np.abs(X).max()]])
    else:
        hull = ConvexHull(X)
        nrm, off = hull.equations[:, :-1], hull.equations[:, -1]
        if np.any(off >= -tol):
            raise ValueError("origin is not interior to the polytope")
        rows = nrm / (-off)[:, None]
    return rows @ Q.T


def john_matrix(halfspaces=None, vertices=None, samples: int = 1000, seed: int = 0,
                tol: float = 1e-12) -> JohnResult:
    """Linear map A with ||w|| <= |A w| <= dim(V) ||w|| for a polyhedral seminorm.

    The seminorm has unit ball {w : |a_i . w| <= 1} (``halfspaces`` rows a_i)
    or the symmetric hull of ``vertices``. Its support V is the row space; A
    is the John map of the maximal inscribed ellipsoid composed with the
    orthogonal projection onto V. The ellipsoid comes from Khachiyan's
    coordinate ascent on the polar D-optimal design problem, with away steps.
    """
    if (halfspaces is None) == (vertices is None):
        raise ValueError("give exactly one of halfspaces or vertices")
    if vertices is not None:
        rows = _halfspaces_from_vertices(vertices, 1e-9)
    else:
        rows = np.atleast_2d(np.asarray(halfspaces, dtype=float))
    d = rows.shape[1]
    _, s, vt = np.linalg.svd(rows, full_matrices=False)
    k = int((s > 1e-12 * max(1.0, s[0])).sum())
    if k == 0:
        raise ValueError("degenerate seminorm (identically zero)")
    Q = vt[:k].T                                   # d x k
    P = rows @ Q                                   # points a_i in V coordinates
    P = P[np.abs(P).max(axis=1) > 0]
    G = _inscribed_ellipsoid(P, k, tol)
    evals, evecs = np.linalg.eigh(G)
    T = evecs @ np.diag(np.sqrt(evals)) @ evecs.T
    A = Q @ T @ Q.T
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((samples, d))
    norm = polytope_norm(rows, w)
    img = np.linalg.norm(w @ A.T, axis=1)
    ok = norm > 1e-12
    ratios = img[ok] / norm[ok]
    res = JohnResult(A, k, Q, G, float(ratios.min()), float(ratios.max()), rows)
    if res.ratio_min < 1 - 1e-9 or res.ratio_max > k * (1 + 1e-9):
        raise AssertionError(f"John bounds violated: ratios in [{res.ratio_min}, {res.ratio_max}], k={k}")
    return res


def _inscribed_ellipsoid(P: np.ndarray, k: int, tol: float, max_iter: int = 200_000) -> np.ndarray:
    """Matrix G of the max-volume centred ellipsoid {u^T G u <= 1} in {|p_i . u| <= 1}."""
    if k == 1:
        return np.array([[np.abs(P).max() ** 2]])
    m = len(P)
    u = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        X = (P * u[:, None]).T @ P
        g = np.einsum("ij,jk,ik->i", P, np.linalg.inv(X), P)
        j = int(np.argmax(g))
        live = np.flatnonzero(u > 0)
        i = live[int(np.argmin(g[live]))]
        if g[j] <= k * (1 + tol):
            break
        if g[j] - k >= k - g[i]:
            step = (g[j] / k - 1) / (g[j] - 1)
            u *= 1 - step
            u[j] += step
        else:
            # away step: shift weight off the least useful support point
            step = min((1 - g[i] / k) / (g[i] - 1) if g[i] > 1 else np.inf, u[i] / (1 - u[i]))
            u *= 1 + step
            u[i] -= step
            u[i] = max(u[i], 0.0)
    G = k * X
    # scale so the ellipsoid touches the polytope: max_i p_i^T G^-1 p_i = 1
    s = np.einsum("ij,jk,ik->i", P, np.linalg.inv(G), P).max()
    return G * s
