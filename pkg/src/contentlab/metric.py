"""Target metric spaces, sampled maps on the dyadic lattice, and map distances."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .dyadic import lattice_points, lattice_shape

_CACHE_LIMIT = 4096


def max_points() -> int:
    return int(os.environ.get("CONTENTLAB_MAX_POINTS", "50000"))


class TargetSpace:
    """A finite metric space whose points are addressed by integer index."""

    kind: str = "abstract"

    def __init__(self):
        self._full = None

    @property
    def size(self) -> int:
        raise NotImplementedError

    def _block(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def full_matrix(self) -> np.ndarray:
        if self._full is None:
            idx = np.arange(self.size)
            self._full = self._block(idx, idx)
        return self._full

    def pairwise(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64).ravel()
        b = np.asarray(b, dtype=np.int64).ravel()
        for idx in (a, b):
            if idx.size and (idx.min() < 0 or idx.max() >= self.size):
                raise IndexError(f"point index out of range for space of size {self.size}")
        if self._full is not None or self.size <= _CACHE_LIMIT:
            return self.full_matrix()[np.ix_(a, b)]
        return self._block(a, b)

    def distance(self, a: int, b: int) -> float:
        return float(self.pairwise([a], [b])[0, 0])


class SupCloud(TargetSpace):
    """Points of R^N with the max-coordinate metric (finite stand-in for l^infinity)."""

    kind = "supcloud"

    def __init__(self, points):
        super().__init__()
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("SupCloud needs a non-empty (p, N) array of points")
        self.points = pts
        self.points.setflags(write=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def ncoords(self) -> int:
        return self.points.shape[1]

    def _block(self, a, b):
        out = np.empty((len(a), len(b)))
        step = max(1, 2_000_000 // max(1, len(b) * self.ncoords))
        pb = self.points[b]
        for s in range(0, len(a), step):
            pa = self.points[a[s:s + step]]
            out[s:s + step] = np.abs(pa[:, None, :] - pb[None, :, :]).max(axis=2)
        return out


class FiniteMetric(TargetSpace):
    """An explicit distance matrix, validated on construction."""

    kind = "finite"

    def __init__(self, matrix, tol: float = 1e-9):
        super().__init__()
        D = np.array(matrix, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
            raise ValueError("distance matrix must be square and non-empty")
        if np.any(D < 0):
            raise ValueError("negative distance")
        if np.max(np.abs(D - D.T)) > tol:
            raise ValueError("distance matrix is not symmetric")
        if np.max(np.abs(np.diag(D))) > tol:
            raise ValueError("non-zero diagonal")
        # d(i,k) <= d(i,j) + d(j,k): compare against min-plus product
        via = (D[:, :, None] + D[None, :, :]).min(axis=1)
        bad = D - via
        if bad.max() > tol:
            i, k = np.unravel_index(np.argmax(bad), bad.shape)
            raise ValueError(f"triangle inequality fails for pair ({i}, {k})")
        D.setflags(write=False)
        self.matrix = D
        self._full = D

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def _block(self, a, b):
        return self.matrix[np.ix_(a, b)]


class TreeSpace(TargetSpace):
    """Vertices of a finite metric tree with the path-length metric."""

    kind = "tree"

    def __init__(self, tree):
        super().__init__()
        self.tree = tree

    @property
    def size(self) -> int:
        return self.tree.n_vertices

    def full_matrix(self):
        return self.tree.distances

    def pairwise(self, a, b):
        self._full = self.tree.distances
        return super().pairwise(a, b)

    def _block(self, a, b):
        return self.tree.distances[np.ix_(a, b)]


class GridMap:
    """A map sampled on the lattice 2^-K Z^d of [0,1]^d, d = n + m.

    ``values[i]`` is the index in ``target`` of the image of lattice point i
    (row-major over the ``(2^K+1)^d`` grid).
    """

    def __init__(self, n: int, m: int, K: int, target: TargetSpace, values,
                 declared_lip: float = 1.0):
        if n < 0 or m < 0 or n + m == 0:
            raise ValueError(f"need n, m >= 0 with n + m >= 1 (got n={n}, m={m})")
        if K < 0:
            raise ValueError("resolution K must be non-negative")
        if declared_lip <= 0:
            raise ValueError("declared_lip must be positive")
        self.n, self.m, self.K = int(n), int(m), int(K)
        npts = ((1 << K) + 1) ** (n + m)
        if npts > max_points():
            raise ValueError(
                f"lattice has {npts} points, above CONTENTLAB_MAX_POINTS={max_points()}")
        vals = np.asarray(values, dtype=np.int64).ravel()
        if vals.size != npts:
            raise ValueError(f"expected {npts} values, got {vals.size}")
        if vals.min() < 0 or vals.max() >= target.size:
            raise ValueError("map value outside the target point set")
        vals.setflags(write=False)
        self.values = vals
        self.target = target
        self.declared_lip = float(declared_lip)

    @classmethod
    def from_function(cls, fn, n: int, m: int, K: int, declared_lip: float = 1.0):
        """Sample ``fn`` (rows of real coordinates -> rows of R^N) into a SupCloud."""
        d = n + m
        x = lattice_points(d, K) / float(1 << K)
        y = np.asarray(fn(x), dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        pts, inv = np.unique(y, axis=0, return_inverse=True)
        return cls(n, m, K, SupCloud(pts), inv.ravel(), declared_lip)

    @property
    def d(self) -> int:
        return self.n + self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return lattice_shape(self.d, self.K)

    @property
    def npoints(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> float:
        return 2.0 ** -self.K

    @property
    def sample_radius(self) -> float:
        """Every point of a closed lattice cell lies this close (in the image) to a corner."""
        return self.declared_lip * np.sqrt(self.d) * 2.0 ** (-self.K - 1)

    def coords(self) -> np.ndarray:
        return lattice_points(self.d, self.K) * self.spacing

    def image_coords(self) -> np.ndarray:
        if not isinstance(self.target, SupCloud):
            raise TypeError("image coordinates need a SupCloud target")
        return self.target.points[self.values]

    def content_hash(self) -> str:
        from .io import gridmap_hash
        return gridmap_hash(self)

    def with_values(self, target: TargetSpace, values) -> "GridMap":
        return GridMap(self.n, self.m, self.K, target, values, self.declared_lip)


@dataclass(frozen=True)
class LipschitzReport:
    constant: float
    declared: float
    mode: str
    pair: tuple[int, int] | None
    bound: float

    @property
    def violation(self) -> bool:
        return self.bound > self.declared * (1 + 1e-12)


def lipschitz_check(f: GridMap, mode: str = "all_pairs") -> LipschitzReport:
    """Largest ratio d(f(x), f(y)) / |x - y| over lattice pairs.

    ``adjacent`` only scans axis neighbours; its ``bound`` (ratio * sqrt(d))
    dominates the all-pairs constant by the l1/l2 comparison.
    """
    x = f.coords()
    if mode == "adjacent":
        best, pair = 0.0, None
        grid = np.arange(f.npoints).reshape(f.shape)
        for ax in range(f.d):
            a = np.take(grid, np.arange(grid.shape[ax] - 1), axis=ax).ravel()
            b = np.take(grid, np.arange(1, grid.shape[ax]), axis=ax).ravel()
            if a.size == 0:
                continue
            dt = _paired(f.target, f.values[a], f.values[b])
            i = int(np.argmax(dt))
            r = dt[i] / f.spacing
            if r > best:
                best, pair = float(r), (int(a[i]), int(b[i]))
        return LipschitzReport(best, f.declared_lip, mode, pair, best * np.sqrt(f.d))
    if mode != "all_pairs":
        raise ValueError(f"unknown mode {mode!r}")
    best, pair = 0.0, None
    P = f.npoints
    step = max(1, 400_000 // P)
    for s in range(0, P, step):
        rows = np.arange(s, min(P, s + step))
        dd = np.sqrt(((x[rows, None, :] - x[None, :, :]) ** 2).sum(axis=2))
        dt = f.target.pairwise(f.values[rows], f.values)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dd > 0, dt / np.where(dd > 0, dd, 1.0), 0.0)
        k = int(np.argmax(ratio))
        i, j = np.unravel_index(k, ratio.shape)
        if ratio[i, j] > best:
            best, pair = float(ratio[i, j]), (int(rows[i]), int(j))
    return LipschitzReport(best, f.declared_lip, mode, pair, best)


def distance(space: TargetSpace, a: int, b: int) -> float:
    return space.distance(a, b)


def _paired(space: TargetSpace, a, b) -> np.ndarray:
    """Distances d(a_i, b_i) for aligned index arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    if isinstance(space, SupCloud):
        return np.abs(space.points[a] - space.points[b]).max(axis=1)
    return space.full_matrix()[a, b]


def set_distance(space: TargetSpace, A, B, return_witness: bool = False):
    """min over a in A, b in B of d(a, b)."""
    A = np.unique(np.asarray(A, dtype=np.int64).ravel())
    B = np.unique(np.asarray(B, dtype=np.int64).ravel())
    if A.size == 0 or B.size == 0:
        raise ValueError("set_distance needs non-empty sets")
    D = space.pairwise(A, B)
    i, j = np.unravel_index(int(np.argmin(D)), D.shape)
    val = float(D[i, j])
    if return_witness:
        return val, (int(A[i]), int(B[j]))
    return val


def kuratowski_embed(space: FiniteMetric) -> SupCloud:
    """Point i goes to (d(i, 0), ..., d(i, p-1)); isometric into the sup metric."""
    return SupCloud(np.array(space.full_matrix(), dtype=float))


@dataclass(frozen=True)
class MapPair:
    f: GridMap
    g: GridMap

    def __post_init__(self):
        f, g = self.f, self.g
        if (f.n, f.m, f.K) != (g.n, g.m, g.K):
            raise ValueError("maps live on different lattices")
        if not (isinstance(f.target, SupCloud) and isinstance(g.target, SupCloud)):
            raise TypeError("map_distance compares maps into SupCloud targets")
        if f.target.ncoords != g.target.ncoords:
            raise ValueError(
                f"coordinate counts differ ({f.target.ncoords} vs {g.target.ncoords})")


@dataclass(frozen=True)
class MapDistance:
    value: float
    continuum_error: float
    witness: int


def map_distance(pair: MapPair) -> MapDistance:
    """Lattice sup of |f(x) - g(x)|_inf, plus the Lipschitz error bar for the continuum sup."""
    f, g = pair.f, pair.g
    diff = np.abs(f.image_coords() - g.image_coords()).max(axis=1)
    i = int(np.argmax(diff))
    err = (f.declared_lip + g.declared_lip) * np.sqrt(f.d) * 2.0 ** (-f.K - 1)
    return MapDistance(float(diff[i]), float(err), i)


def check_one_lipschitz(source: TargetSpace, target: TargetSpace, table,
                        tol: float = 1e-12) -> None:
    table = np.asarray(table, dtype=np.int64)
    if table.size != source.size:
        raise ValueError(f"table has {table.size} entries for {source.size} points")
    D0 = source.full_matrix()
    D1 = target.pairwise(table, table)
    excess = D1 - D0
    if excess.max() > tol:
        i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise ValueError(
            f"map is not 1-Lipschitz: points {i}, {j} at distance {D0[i, j]:.17g} "
            f"go to distance {D1[i, j]:.17g}")


def postcompose(f: GridMap, table, new_target: TargetSpace, tol: float = 1e-12) -> GridMap:
    """phi o f, where phi sends target point i to ``new_target`` point ``table[i]``."""
    check_one_lipschitz(f.target, new_target, table, tol)
    table = np.asarray(table, dtype=np.int64)
    return f.with_values(new_target, table[f.values])


def mcshane_extend(space: TargetSpace, known, known_values, query) -> np.ndarray:
    """Coordinatewise 1-Lipschitz extension g(x) = min_y g(y) + d(x, y).

    ``known_values`` has one row of sup-metric coordinates per known point;
    each coordinate of the result is 1-Lipschitz on ``space``.
    """
    known_values = np.asarray(known_values, dtype=float).reshape(len(known), -1)
    D = space.pairwise(query, known)
    return (known_values[None, :, :] + D[:, :, None]).min(axis=1)
