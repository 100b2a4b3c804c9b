"""Finite metric trees and factorizations f = h o g through them."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .metric import GridMap, SupCloud, TreeSpace, lipschitz_check

EXHAUSTIVE_LIMIT = 40


class MetricTree:
    """A weighted graph on vertices 0..n-1 with its path-length metric.

    Nothing here forces the graph to be a tree; ``validate_tree`` decides.
    """

    def __init__(self, n_vertices: int, edges, labels=None):
        if n_vertices < 1:
            raise ValueError("a tree needs at least one vertex")
        self.n_vertices = int(n_vertices)
        self.edges = [(int(u), int(v), float(w)) for u, v, w in edges]
        for u, v, w in self.edges:
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise ValueError(f"edge ({u}, {v}) references a missing vertex")
            if not w > 0:
                raise ValueError(f"edge ({u}, {v}) has non-positive length {w}")
        self.labels = list(labels) if labels is not None else None
        self._dist = None

    @property
    def total_length(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    @property
    def distances(self) -> np.ndarray:
        if self._dist is None:
            n = self.n_vertices
            if self.edges:
                # parallel edges keep the shortest length; a zero entry means "no edge"
                best: dict[tuple[int, int], float] = {}
                for a, b, c in self.edges:
                    key = (min(a, b), max(a, b))
                    best[key] = min(best.get(key, np.inf), c)
                rows, cols, w = zip(*[(a, b, c) for (a, b), c in best.items() if a != b] or [(0, 0, 0.0)])
                g = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
                D = shortest_path(g, method="D", directed=False)
            else:
                D = np.full((n, n), np.inf)
                np.fill_diagonal(D, 0.0)
            D.setflags(write=False)
            self._dist = D
        return self._dist

    def space(self) -> TreeSpace:
        return TreeSpace(self)

    @classmethod
    def path(cls, positions, labels=None) -> "MetricTree":
        """A segment with vertices at the given increasing positions."""
        pos = np.asarray(positions, dtype=float)
        if np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        edges = [(i, i + 1, float(pos[i + 1] - pos[i])) for i in range(len(pos) - 1)]
        return cls(len(pos), edges, labels)

    @classmethod
    def star(cls, leg_positions) -> "MetricTree":
        """Vertex 0 is the centre; leg j carries vertices at the given positive heights."""
        edges, labels = [], [("centre", 0.0)]
        nxt = 1
        for j, heights in enumerate(leg_positions):
            prev, prev_h = 0, 0.0
            for h in np.sort(np.asarray(heights, dtype=float)):
                if h <= prev_h:
                    continue
                edges.append((prev, nxt, float(h - prev_h)))
                labels.append((j, float(h)))
                prev, prev_h = nxt, h
                nxt += 1
        return cls(nxt, edges, labels)


@dataclass
class TreeReport:
    connected: bool
    acyclic: bool
    four_point: bool
    witness: tuple[int, int, int, int] | None = None
    gap: float = 0.0
    exhaustive: bool = True
    reasons: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.connected and self.acyclic and self.four_point


def four_point_gaps(D: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """Largest minus second-largest of the three pair sums, per quadruple."""
    w, x, y, z = quads.T
    s = np.stack([D[w, x] + D[y, z], D[w, y] + D[x, z], D[w, z] + D[x, y]], axis=1)
    s.sort(axis=1)
    return s[:, 2] - s[:, 1]


def validate_tree(t: MetricTree, samples: int = 200_000, seed: int = 0) -> TreeReport:
    """Connectivity, acyclicity and the four-point condition (0-hyperbolicity)."""
    n = t.n_vertices
    D = t.distances
    rep = TreeReport(connected=bool(np.all(np.isfinite(D))), acyclic=True, four_point=True)
    if not rep.connected:
        rep.reasons.append("graph is disconnected")
    pairs = {(min(u, v), max(u, v)) for u, v, _ in t.edges}
    if len(t.edges) != n - 1 or len(pairs) != len(t.edges) or any(u == v for u, v, _ in t.edges):
        rep.acyclic = False
        rep.reasons.append(f"{len(t.edges)} edges on {n} vertices: not a tree")
    if n < 4 or not rep.connected:
        return rep
    if n <= EXHAUSTIVE_LIMIT:
        quads = np.array(list(itertools.combinations(range(n), 4)), dtype=np.int64)
    else:
        rep.exhaustive = False
        rng = np.random.default_rng(seed)
        quads = np.array([rng.choice(n, 4, replace=False) for _ in range(samples)])
    tol = 1e-9 * max(1.0, float(D.max()))
    best_gap, best = 0.0, None
    for s in range(0, len(quads), 100_000):
        chunk = quads[s:s + 100_000]
        gaps = four_point_gaps(D, chunk)
        i = int(np.argmax(gaps))
        if gaps[i] > best_gap:
            best_gap, best = float(gaps[i]), tuple(int(q) for q in chunk[i])
    rep.gap = best_gap
    if best_gap > tol:
        rep.four_point = False
        rep.witness = best
        rep.reasons.append(f"four-point condition fails on {best} (gap {best_gap:.3g})")
    return rep


@dataclass
class TreeFactorization:
    g: GridMap          # lattice -> tree vertices
    h: SupCloud         # tree vertex i -> h.points[i]
    L: float = 1.0

    @property
    def tree(self) -> MetricTree:
        return self.g.target.tree

    def __post_init__(self):
        if not isinstance(self.g.target, TreeSpace):
            raise TypeError("g must map into a TreeSpace")
        if self.h.size != self.g.target.size:
            raise ValueError("h must give one point per tree vertex")


class LipschitzViolation(ValueError):
    def __init__(self, leg: str, pair, ratio: float, L: float):
        self.leg, self.pair, self.ratio = leg, pair, ratio
        super().__init__(f"leg {leg} is not {L}-Lipschitz: pair {pair} has ratio {ratio:.17g}")


def check_legs(tf: TreeFactorization, rtol: float = 1e-12) -> None:
    Dt = tf.tree.distances
    Dh = tf.h.full_matrix()
    excess = Dh - tf.L * Dt
    if excess.max() > rtol * max(1.0, float(Dt.max())):
        i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise LipschitzViolation("h", (int(i), int(j)), float(Dh[i, j] / Dt[i, j]), tf.L)
    rep = lipschitz_check(tf.g, "all_pairs")
    if rep.constant > tf.L * (1 + rtol):
        raise LipschitzViolation("g", rep.pair, rep.constant, tf.L)


def compose_factorization(tf: TreeFactorization) -> GridMap:
    check_legs(tf)
    g = tf.g
    f = GridMap(g.n, g.m, g.K, tf.h, g.values, declared_lip=tf.L * tf.L)
    lip = lipschitz_check(f, "all_pairs").constant
    if lip > tf.L * tf.L * (1 + 1e-12) + 1e-12:
        raise AssertionError(f"composition has Lipschitz constant {lip} > L^2")
    return f


@dataclass(frozen=True)
class FactorReport:
    passed: bool
    sup_distance: float
    legs_ok: bool
    message: str = ""


def factor_check(f: GridMap, tf: TreeFactorization, tol: float = 0.0) -> FactorReport:
    """Is f within ``tol`` (lattice sup) of h o g, with both legs L-Lipschitz?"""
    if (f.n, f.m, f.K) != (tf.g.n, tf.g.m, tf.g.K):
        raise ValueError("f and the factorization live on different lattices")
    if not isinstance(f.target, SupCloud) or f.target.ncoords != tf.h.ncoords:
        raise ValueError("f must map into a SupCloud with the same coordinate count as h")
    try:
        check_legs(tf)
    except LipschitzViolation as exc:
        return FactorReport(False, float("nan"), False, str(exc))
    composed = tf.h.points[tf.g.values]
    dist = float(np.abs(f.image_coords() - composed).max())
    ok = dist <= tol
    return FactorReport(ok, dist, True, "" if ok else f"sup distance {dist:.6g} > tol {tol:g}")
