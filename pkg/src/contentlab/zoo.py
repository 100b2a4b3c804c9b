"""Deterministic example maps on the lattice.

``zoo(name, n, m, K, **params)`` returns ``(GridMap, TreeFactorization | None)``.
Maps that factor through a tree by construction ship the factorization.
"""
from __future__ import annotations

import itertools

import numpy as np

from .metric import GridMap, SupCloud, TreeSpace
from .trees import MetricTree, TreeFactorization, compose_factorization

NAMES = ("projection", "constant", "scaled_projection", "linear_functional", "fold",
         "distance_to_point", "segment_tree", "star_tree", "perturbed", "random")


def _need_n(name, n):
    if n < 1:
        raise ValueError(f"zoo map {name!r} needs n >= 1")


def _through_values(f_vals: np.ndarray, n, m, K, h_of):
    """Factor lattice -> path tree on the distinct values -> h_of(values)."""
    pos, inv = np.unique(f_vals, return_inverse=True)
    if len(pos) == 1:
        tree = MetricTree(1, [])
    else:
        tree = MetricTree.path(pos, labels=[float(p) for p in pos])
    g = GridMap(n, m, K, TreeSpace(tree), inv.ravel())
    h = SupCloud(np.atleast_2d(h_of(pos)).reshape(len(pos), -1))
    tf = TreeFactorization(g, h, 1.0)
    return compose_factorization(tf), tf


def _star(n, m, K, legs):
    d = n + m
    if not 1 <= legs <= 2 ** d:
        raise ValueError(f"star_tree needs 1 <= legs <= 2^d = {2 ** d}")
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d))[:legs])
    x = GridMap(n, m, K, SupCloud([[0.0]]), np.zeros(((1 << K) + 1) ** d)).coords()
    dist = np.sqrt(((x[:, None, :] - corners[None, :, :]) ** 2).sum(axis=2))
    leg = np.argmin(dist, axis=1)
    height = np.maximum(0.0, 0.5 - dist[np.arange(len(x)), leg])
    tree = MetricTree.star([np.unique(height[(leg == j) & (height > 0)]) for j in range(legs)])
    where = {lb: i for i, lb in enumerate(tree.labels)}
    verts = np.array([0 if h <= 0 else where[(int(j), float(h))] for j, h in zip(leg, height)])
    g = GridMap(n, m, K, TreeSpace(tree), verts)
    tf = TreeFactorization(g, SupCloud(np.array(tree.distances)), 1.0)
    return compose_factorization(tf), tf


def _smooth_noise(x: np.ndarray, ncoords: int, rng) -> np.ndarray:
    """ncoords functions, each 1-Lipschitz: sum of sines with sum |a_i||w_i| = 1."""
    out = np.zeros((len(x), ncoords))
    for c in range(ncoords):
        w = rng.normal(size=(3, x.shape[1])) * 4
        a = rng.uniform(0.2, 1.0, size=3)
        a /= (a * np.linalg.norm(w, axis=1)).sum()
        ph = rng.uniform(0, 2 * np.pi, size=3)
        out[:, c] = (a * np.sin(x @ w.T + ph)).sum(axis=1)
    return out


def zoo(name: str, n: int = 1, m: int = 1, K: int = 3, **params):
    """Build a named example map; see ``NAMES``."""
    d = n + m
    if name == "projection":
        _need_n(name, n)
        return GridMap.from_function(lambda x: x[:, :n], n, m, K), None
    if name == "constant":
        return GridMap.from_function(lambda x: np.zeros((len(x), 1)), n, m, K), None
    if name == "scaled_projection":
        _need_n(name, n)
        alpha = float(params.get("alpha", 0.5))
        return GridMap.from_function(lambda x: alpha * x[:, :n], n, m, K, max(1.0, abs(alpha))), None
    if name == "linear_functional":
        a = np.asarray(params.get("a", [1.0] + [0.0] * (d - 1)), dtype=float)
        if a.shape != (d,):
            raise ValueError(f"linear_functional needs a vector of length d={d}")
        lip = max(1.0, float(np.linalg.norm(a)))
        return GridMap.from_function(lambda x: x @ a, n, m, K, lip), None
    if name == "fold":
        _need_n(name, n)
        return GridMap.from_function(
            lambda x: np.column_stack([np.abs(x[:, 0] - 0.5), x[:, 1:]]), n, m, K), None
    if name == "distance_to_point":
        p = np.asarray(params.get("p", [0.5] * d), dtype=float)
        if p.shape != (d,):
            raise ValueError(f"distance_to_point needs a point of length d={d}")
        x = GridMap(n, m, K, SupCloud([[0.0]]), np.zeros(((1 << K) + 1) ** d)).coords()
        vals = np.sqrt(((x - p) ** 2).sum(axis=1))
        return _through_values(vals, n, m, K, lambda t: t[:, None])
    if name == "segment_tree":
        x = GridMap(n, m, K, SupCloud([[0.0]]), np.zeros(((1 << K) + 1) ** d)).coords()
        return _through_values(x[:, 0], n, m, K,
                               lambda t: np.column_stack([t, 0.5 - np.abs(t - 0.5)]))
    if name == "star_tree":
        return _star(n, m, K, int(params.get("legs", 4)))
    if name == "perturbed":
        base_name = params.get("base", "projection")
        amp = float(params.get("amplitude", 0.05))
        seed = int(params.get("seed", 0))
        base, _ = zoo(base_name, n, m, K)
        rng = np.random.default_rng(seed)
        img = base.image_coords()
        img = img + amp * _smooth_noise(base.coords(), img.shape[1], rng)
        pts, inv = np.unique(img, axis=0, return_inverse=True)
        return GridMap(n, m, K, SupCloud(pts), inv.ravel(), base.declared_lip + amp), None
    if name == "random":
        seed = int(params.get("seed", 0))
        ncoords = int(params.get("ncoords", 2))
        cones = int(params.get("cones", 4))
        rng = np.random.default_rng(seed)
        C = rng.uniform(0, 1, size=(ncoords, cones, d))
        B = rng.uniform(0, 0.5, size=(ncoords, cones))

        def fn(x):
            dist = np.sqrt(((x[None, :, None, :] - C[:, None, :, :]) ** 2).sum(axis=3))
            return (B[:, None, :] + dist).min(axis=2).T
        return GridMap.from_function(fn, n, m, K), None
    raise ValueError(f"unknown zoo map {name!r}; choose from {', '.join(NAMES)}")
