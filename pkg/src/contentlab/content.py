"""Hausdorff content estimates, the dyadic mapping-content DP, and lower-bound checks.

Upper bounds come from explicit covers (a ball cover or the whole set) so
every reported upper value is realized by a cover that can be replayed.
Lower bounds come from distances between images of opposite faces and
from combinatorial chain distances on weighted covers.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (DyadicCube, Face, children, cube_lattice_indices, cubes_at_level,
                     face_lattice_points, flat_index)
from .metric import (FiniteMetric, GridMap, SupCloud, TargetSpace, TreeSpace,
                     kuratowski_embed, set_distance)

EXACT_THRESHOLD = 12


@dataclass
class ContentEstimate:
    value: float
    kind: str                      # "upper" | "lower" | "exact_small"
    method: str                    # "single_set" | "greedy_ball" | "partition"
    r_min: float | None = None
    certified: float | None = None  # upper bound for any set within rho of the samples
    rho: float = 0.0
    balls: list[tuple[int, float]] = field(default_factory=list)  # (point index, radius)
    parts: list[list[int]] | None = None


def _unique(A) -> np.ndarray:
    A = np.unique(np.asarray(A, dtype=np.int64).ravel())
    if A.size == 0:
        raise ValueError("content of an empty set")
    return A


def greedy_ball_cover(D: np.ndarray, k: float, r_min: float):
    """Greedy cover by balls B(a, r_min 2^j) centred at points, cost sum (2r)^k.

    Picks the ball with the most newly covered points per unit cost; ties go
    to the smallest centre index, then the smallest radius.
    """
    diam = float(D.max())
    J = 0
    while r_min * 2 ** J < diam:
        J += 1
    radii = r_min * 2.0 ** np.arange(J + 1)
    cost = (2 * radii) ** k
    cover = D[:, None, :] <= radii[None, :, None]          # (centre, radius, point)
    uncovered = np.ones(D.shape[0], dtype=bool)
    balls = []
    while uncovered.any():
        newly = cover @ uncovered.astype(np.int64)          # (centre, radius)
        score = newly / cost[None, :]
        c, j = np.unravel_index(int(np.argmax(score)), score.shape)
        balls.append((int(c), float(radii[j])))
        uncovered &= ~cover[c, j]
    return balls


def content_upper(space: TargetSpace, A, k: float, r_min: float,
                  method: str = "auto", rho: float = 0.0) -> ContentEstimate:
    """Upper estimate of the k-dimensional Hausdorff content of a point set.

    ``single_set`` uses the whole set (cost diam^k); ``greedy_ball`` uses the
    greedy ball cover; ``auto`` keeps the cheaper one. ``certified`` inflates
    each cover element by ``rho`` so it bounds the content of any set lying
    within ``rho`` of the samples.
    """
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    pts = _unique(A)
    D = space.pairwise(pts, pts)
    diam = float(D.max())
    single = ContentEstimate(diam ** k, "upper", "single_set", r_min,
                             (diam + 2 * rho) ** k, rho)
    if method == "single_set":
        return single
    balls = greedy_ball_cover(D, k, r_min)
    greedy = ContentEstimate(
        math.fsum((2 * r) ** k for _, r in balls), "upper", "greedy_ball", r_min,
        math.fsum((2 * (r + rho)) ** k for _, r in balls), rho,
        [(int(pts[c]), r) for c, r in balls])
    if method == "greedy_ball":
        return greedy
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    return single if single.value <= greedy.value else greedy


def subset_diameters(D: np.ndarray) -> np.ndarray:
    p = D.shape[0]
    diam = np.zeros(1 << p)
    for mask in range(1, 1 << p):
        hb = mask.bit_length() - 1
        rest = mask ^ (1 << hb)
        if rest:
            others = [i for i in range(hb) if rest >> i & 1]
            diam[mask] = max(diam[rest], D[hb, others].max())
    return diam


def content_exact_small(space: TargetSpace, A, k: float, max_parts: int | None = None,
                        floor: float = 0.0, threshold: int = EXACT_THRESHOLD) -> ContentEstimate:
    """Exact min over partitions of A of sum max(diam(part), floor)^k.

    With ``floor = 0`` and unlimited parts this is 0 (singletons); the
    ``max_parts``/``floor`` knobs make it a meaningful cross-check.
    """
    pts = _unique(A)
    p = pts.size
    if p > threshold:
        raise ValueError(f"{p} points exceed the exact threshold {threshold}")
    D = space.pairwise(pts, pts)
    cost = np.maximum(subset_diameters(D), floor) ** k
    full = (1 << p) - 1
    limit = p if max_parts is None else min(max_parts, p)
    if limit < 1:
        raise ValueError("max_parts must be at least 1")
    INF = math.inf
    # best[j][mask]: optimal cost of mask using at most j parts
    best = [[INF] * (1 << p) for _ in range(limit + 1)]
    choice = [[0] * (1 << p) for _ in range(limit + 1)]
    for j in range(limit + 1):
        best[j][0] = 0.0
    for j in range(1, limit + 1):
        bj, bprev, cj = best[j], best[j - 1], choice[j]
        for mask in range(1, full + 1):
            low = mask & -mask
            rest = mask ^ low
            sub = rest
            val, arg = INF, 0
            while True:
                part = sub | low
                v = cost[part] + bprev[mask ^ part]
                if v < val:
                    val, arg = v, part
                if sub == 0:
                    break
                sub = (sub - 1) & rest
            bj[mask], cj[mask] = val, arg
    parts, mask, j = [], full, limit
    while mask:
        part = choice[j][mask]
        parts.append([int(pts[i]) for i in range(p) if part >> i & 1])
        mask ^= part
        j -= 1
    return ContentEstimate(float(best[limit][full]), "exact_small", "partition", parts=parts)


# ---------------------------------------------------------------------------
# dyadic DP for the mapping content


@dataclass
class DPResult:
    value: float
    cover: list[DyadicCube]
    per_cube: dict[DyadicCube, float]
    certified: float
    L_max: int
    r_min: float
    rho: float
    terms: str
    details: dict[DyadicCube, ContentEstimate] = field(default_factory=dict)

    @property
    def sampling_slack(self) -> float:
        return self.certified - self.value


def default_r_min(f: GridMap) -> float:
    return math.sqrt(f.d) * 2.0 ** -f.K * f.declared_lip


def mapping_content_upper(f: GridMap, L_max: int, r_min: float | None = None,
                          terms: str = "auto", exact_kwargs: dict | None = None) -> DPResult:
    """Minimum over almost-disjoint dyadic covers (levels <= L_max) of
    sum term(Q) side(Q)^m, with cost(Q) = min(term(Q), sum of children costs).

    ``terms`` is a ``content_upper`` method, or ``exact_small`` (cubes whose
    image has too many points are then ineligible).
    """
    if L_max > f.K:
        raise ValueError(f"L_max={L_max} exceeds the lattice resolution K={f.K}")
    if L_max < 0:
        raise ValueError("L_max must be non-negative")
    r_min = default_r_min(f) if r_min is None else r_min
    rho = f.sample_radius
    exact_kwargs = exact_kwargs or {}
    cache: dict[tuple, ContentEstimate] = {}

    def term(cube):
        img = np.unique(f.values[cube_lattice_indices(cube, f.K)])
        key = tuple(img.tolist())
        if key not in cache:
            if terms == "exact_small":
                thr = exact_kwargs.get("threshold", EXACT_THRESHOLD)
                if img.size > thr:
                    cache[key] = ContentEstimate(math.inf, "exact_small", "ineligible")
                else:
                    est = content_exact_small(f.target, img, f.n, **exact_kwargs)
                    est.certified = math.inf
                    cache[key] = est
            else:
                cache[key] = content_upper(f.target, img, f.n, r_min, terms, rho)
        return cache[key]

    cost: dict[DyadicCube, float] = {}
    take: dict[DyadicCube, bool] = {}
    est_of: dict[DyadicCube, ContentEstimate] = {}
    d = f.d
    for level in range(L_max, -1, -1):
        sidem = (2.0 ** -level) ** f.m
        for cube in cubes_at_level(d, level):
            est = term(cube)
            own = est.value * sidem
            est_of[cube] = est
            if level == L_max:
                cost[cube], take[cube] = own, True
                continue
            kids = children(cube)
            split = math.fsum(cost[c] for c in kids)
            if own <= split:
                cost[cube], take[cube] = own, True
            else:
                cost[cube], take[cube] = split, False
    cover: list[DyadicCube] = []
    stack = [DyadicCube.root(d)]
    while stack:
        q = stack.pop()
        if take[q]:
            cover.append(q)
        else:
            stack.extend(reversed(children(q)))
    cover.sort()
    per_cube = {q: est_of[q].value * q.side ** f.m for q in cover}
    certified = math.fsum(
        (est_of[q].certified if est_of[q].certified is not None else math.inf) * q.side ** f.m
        for q in cover)
    value = math.fsum(per_cube.values())
    return DPResult(value, cover, per_cube, certified, L_max, r_min, rho, terms,
                    {q: est_of[q] for q in cover})


# ---------------------------------------------------------------------------
# face-distance lower bounds


@dataclass
class FaceCertificate:
    axis_distances: list[float]
    witnesses: list[tuple[int, int]]   # lattice indices on (low face, high face)
    product: float
    sampling_error: float              # per-factor continuum slack
    map_hash: str = ""

    @property
    def certified_product(self) -> float:
        return math.prod(max(0.0, a - self.sampling_error) for a in self.axis_distances)


def face_indices(f: GridMap, axis: int, high: bool, cube: DyadicCube | None = None) -> np.ndarray:
    cube = cube or DyadicCube.root(f.d)
    return flat_index(face_lattice_points(Face(cube, axis, high), f.K), f.d, f.K)


def faces_lower_bound(f: GridMap) -> FaceCertificate:
    """prod_{k<n} dist(f(F_k), f(F'_k)) over lattice samples of opposite faces of Q_0."""
    if f.n < 1:
        raise ValueError("faces_lower_bound needs n >= 1")
    dists, wits = [], []
    for k in range(f.n):
        lo = face_indices(f, k, False)
        hi = face_indices(f, k, True)
        val, (a, b) = set_distance(f.target, f.values[lo], f.values[hi], return_witness=True)
        wa = int(lo[np.flatnonzero(f.values[lo] == a)[0]])
        wb = int(hi[np.flatnonzero(f.values[hi] == b)[0]])
        dists.append(val)
        wits.append((wa, wb))
    err = f.declared_lip * math.sqrt(f.d) * 2.0 ** -f.K
    return FaceCertificate(dists, wits, math.prod(dists), err, f.content_hash())


# ---------------------------------------------------------------------------
# combinatorial distances on weighted covers


@dataclass
class CoverWeighting:
    """Weighted cover of a finite sample of a target space.

    ``core[i, p]``: point p certainly lies in set i (used to check coverage).
    ``reach[i, p]``: set i may meet a continuum point represented by p (used
    for chain endpoints). For plain point-set covers both are membership.
    """
    core: np.ndarray
    reach: np.ndarray
    weights: np.ndarray
    nerve: np.ndarray
    lift: GridMap | None = None

    def __post_init__(self):
        S = self.core.shape[0]
        if self.weights.shape[0] != S or self.nerve.shape != (S, S) or self.reach.shape != self.core.shape:
            raise ValueError("inconsistent cover shapes")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if not np.array_equal(self.nerve, self.nerve.T):
            raise ValueError("nerve must be symmetric")

    @property
    def nsets(self) -> int:
        return self.core.shape[0]

    @classmethod
    def from_point_sets(cls, sets, weights, npoints: int) -> "CoverWeighting":
        mem = np.zeros((len(sets), npoints), dtype=bool)
        for i, s in enumerate(sets):
            mem[i, np.asarray(list(s), dtype=np.int64)] = True
        inter = (mem.astype(np.int64) @ mem.T.astype(np.int64)) > 0
        return cls(mem, mem.copy(), np.asarray(weights, dtype=float), inter)


def ball_cover(space: TargetSpace, centers, radii, weights, rho: float = 0.0) -> CoverWeighting:
    """Open balls in a geodesic ambient space (sup-metric R^N or a metric tree).

    For a SupCloud, ``centers`` are coordinate vectors; otherwise point indices.
    Two balls meet iff d(c_i, c_j) < r_i + r_j.
    """
    radii = np.asarray(radii, dtype=float)
    if isinstance(space, SupCloud):
        C = np.atleast_2d(np.asarray(centers, dtype=float))
        Dcp = np.abs(C[:, None, :] - space.points[None, :, :]).max(axis=2)
        Dcc = np.abs(C[:, None, :] - C[None, :, :]).max(axis=2)
    else:
        c = np.asarray(centers, dtype=np.int64)
        Dcp = space.pairwise(c, np.arange(space.size))
        Dcc = space.pairwise(c, c)
    core = Dcp < (radii - rho)[:, None]
    reach = Dcp < (radii + rho)[:, None]
    nerve = Dcc < radii[:, None] + radii[None, :]
    return CoverWeighting(core, reach, np.atleast_2d(np.asarray(weights, dtype=float)), nerve)


def chain_distance(cw: CoverWeighting, k: int, E, F) -> float:
    """Least total k-weight of a chain of overlapping sets from E to F (inf if none).

    Node-weighted Dijkstra over the nerve.
    """
    E = np.asarray(E, dtype=np.int64).ravel()
    F = np.asarray(F, dtype=np.int64).ravel()
    w = cw.weights[:, k]
    src = np.flatnonzero(cw.reach[:, E].any(axis=1))
    dst = set(np.flatnonzero(cw.reach[:, F].any(axis=1)).tolist())
    if src.size == 0 or not dst:
        return math.inf
    dist = np.full(cw.nsets, math.inf)
    heap = []
    for s in src:
        dist[s] = w[s]
        heap.append((w[s], int(s)))
    heapq.heapify(heap)
    nbrs = [np.flatnonzero(row) for row in cw.nerve]
    done = np.zeros(cw.nsets, dtype=bool)
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        if u in dst:
            return float(du)
        done[u] = True
        for v in nbrs[u]:
            nd = du + w[v]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, int(v)))
    return math.inf


@dataclass
class KinnebergReport:
    lhs: float
    rhs: float
    chain_distances: list[float]
    holds: bool


def kinneberg_check(g: GridMap, cw: CoverWeighting, tol: float = 1e-9) -> KinnebergReport:
    """sum_i prod_k w_k(i)  >=  prod_k dist_{w_k}(g(F_k), g(F'_k))."""
    if cw.core.shape[1] != g.target.size:
        raise ValueError("cover is indexed over a different point set")
    if cw.weights.shape[1] != g.d:
        raise ValueError(f"need {g.d} weight functions, got {cw.weights.shape[1]}")
    img = np.unique(g.values)
    missing = img[~cw.core[:, img].any(axis=0)]
    if missing.size:
        raise ValueError(f"cover does not cover the image: point {int(missing[0])} is outside every set")
    lhs = math.fsum(float(np.prod(row)) for row in cw.weights)
    chains = []
    for k in range(g.d):
        E = g.values[face_indices(g, k, False)]
        F = g.values[face_indices(g, k, True)]
        chains.append(chain_distance(cw, k, E, F))
    rhs = math.inf if any(math.isinf(c) for c in chains) else math.prod(chains)
    holds = math.isinf(lhs) if math.isinf(rhs) else lhs >= rhs - tol
    return KinnebergReport(lhs, rhs, chains, holds)


# ---------------------------------------------------------------------------
# the product lift h(x, y) = (f(x, y), y)


def as_supcloud(f: GridMap) -> GridMap:
    """Re-express f in sup-metric coordinates (Kuratowski embedding if needed)."""
    if isinstance(f.target, SupCloud):
        return f
    if isinstance(f.target, (FiniteMetric, TreeSpace)):
        pts = kuratowski_embed(FiniteMetric(f.target.full_matrix())) if isinstance(f.target, TreeSpace) \
            else kuratowski_embed(f.target)
        return f.with_values(pts, f.values)
    raise TypeError(f"cannot embed target of kind {f.target.kind}")


def product_lift(f: GridMap) -> GridMap:
    """h(x, y) = (f(x, y), y) into Y x [0,1]^m with the max metric."""
    f = as_supcloud(f)
    y = f.coords()[:, f.n:]
    rows = np.hstack([f.image_coords(), y])
    pts, inv = np.unique(rows, axis=0, return_inverse=True)
    return GridMap(f.n, f.m, f.K, SupCloud(pts), inv.ravel(), max(f.declared_lip, 1.0))


def _check_domain_cover(cubes: list[DyadicCube], d: int, K: int) -> None:
    n = 1 << K
    hit = np.zeros((n,) * d, dtype=bool)
    for q in cubes:
        if q.level > K:
            raise ValueError(f"domain cube {q} is finer than the lattice")
        step = 1 << (K - q.level)
        sl = tuple(slice(c * step, (c + 1) * step) for c in q.corner)
        hit[sl] = True
    if not hit.all():
        raise ValueError("domain sets do not cover Q_0")


def lifted_cover(f: GridMap, domain_sets: list[DyadicCube], image_covers, eta: float) -> CoverWeighting:
    """Cover {V^i_j = U^i_j x N_eta(Proj_y S_i)} of the lift h(x, y) = (f(x, y), y).

    ``image_covers[i]`` lists (centre vector, radius) sup-metric balls that
    must cover f(S_i) with the sampling margin. Weights are 2r (the diameter
    of U) on the first n axes and side(S_i) + 2 eta on the last m.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if len(image_covers) != len(domain_sets):
        raise ValueError("one image cover per domain set")
    f = as_supcloud(f)
    d, n, m = f.d, f.n, f.m
    _check_domain_cover(domain_sets, d, f.K)
    h = product_lift(f)
    rho = f.sample_radius
    ymargin = 2.0 ** (-f.K - 1)
    N = f.target.ncoords
    hp = h.target.points
    hf, hy = hp[:, :N], hp[:, N:]
    cores, reaches, weights, centers, radii, boxes = [], [], [], [], [], []
    for cube, balls in zip(domain_sets, image_covers):
        img = f.image_coords()[cube_lattice_indices(cube, f.K)]
        C = np.atleast_2d(np.array([c for c, _ in balls], dtype=float))
        R = np.array([r for _, r in balls], dtype=float)
        if C.shape[1] != N:
            raise ValueError(f"ball centres need {N} coordinates")
        covered = (np.abs(img[:, None, :] - C[None, :, :]).max(axis=2) < (R - rho)[None, :]).any(axis=1)
        if not covered.all():
            raise ValueError(f"image cover of {cube} misses a sample (with margin {rho:.3g})")
        lo, hi = cube.lower[n:], cube.upper[n:]
        gap = np.maximum(0.0, np.maximum(lo - hy, hy - hi)).max(axis=1) if m else np.zeros(len(hp))
        dc = np.abs(hf[None, :, :] - C[:, None, :]).max(axis=2)
        for j in range(len(R)):
            cores.append((dc[j] < R[j] - rho) & (gap <= 0))
            reaches.append((dc[j] < R[j] + rho) & (gap < eta + ymargin))
            weights.append([2 * R[j]] * n + [cube.side + 2 * eta] * m)
            centers.append(C[j])
            radii.append(R[j])
            boxes.append((lo, hi))
    centers = np.array(centers)
    radii = np.array(radii)
    meet_u = np.abs(centers[:, None, :] - centers[None, :, :]).max(axis=2) < radii[:, None] + radii[None, :]
    if m:
        los = np.array([b[0] for b in boxes])
        his = np.array([b[1] for b in boxes])
        boxgap = np.maximum(0.0, np.maximum(los[:, None, :] - his[None, :, :],
                                            los[None, :, :] - his[:, None, :])).max(axis=2)
        meet_y = boxgap < 2 * eta
    else:
        meet_y = np.ones_like(meet_u)
    cw = CoverWeighting(np.array(cores), np.array(reaches), np.array(weights, dtype=float),
                        meet_u & meet_y, lift=h)
    return cw


def random_ball_cover(space: SupCloud, image, rho: float, rng: np.random.Generator,
                      n_balls: int = 6, scale: float = 0.5):
    """Random sup-metric balls covering ``image`` with margin rho: (centres, radii)."""
    image = np.unique(np.asarray(image))
    pts = space.points[image]
    centers = [pts[i] for i in rng.choice(len(pts), size=min(n_balls, len(pts)), replace=False)]
    radii = list(rho + rng.uniform(0.05, 1.0, size=len(centers)) * scale)
    while True:
        C, R = np.array(centers), np.array(radii)
        ok = (np.abs(pts[:, None, :] - C[None, :, :]).max(axis=2) < (R - rho)[None, :]).any(axis=1)
        if ok.all():
            return C, R
        i = int(np.flatnonzero(~ok)[0])
        centers.append(pts[i])
        radii.append(rho + rng.uniform(0.05, 1.0) * scale)
