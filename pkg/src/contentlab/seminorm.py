"""Seminorm fits (metric derivatives), adapted bases, good cubes and positive certificates.

A seminorm fit on a cube measures how far the pulled-back distance
d(f(x), f(y)) is from a seminorm ||x - y||. Two estimators bracket the best
fit over all seminorms on the lattice data:

* ``md_fit_lp`` solves a linear program over one value per primitive
  lattice direction with subadditivity on representable triples. Every
  seminorm is feasible, so its optimum is a lower bound.
* ``md_fit_matrix`` searches seminorms |A v| (Euclidean) and |A v|_inf by
  coordinate descent. Any concrete seminorm gives an upper bound.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .content import mapping_content_upper
from .dyadic import DyadicCube, children, cubes_at_level, flat_index, inscribe_rotated_cube
from .linalg import svd_small
from .metric import GridMap, _paired, set_distance

LP_TOL = 1e-10


# ---------------------------------------------------------------------------
# pair data on a lattice box


def fit_region(f: GridMap, cube: DyadicCube, C0: int = 1):
    """Lattice box of C0*cube clipped to Q_0: (lo, hi, clipped)."""
    if C0 < 1 or C0 % 2 == 0:
        raise ValueError(f"C0 must be a positive odd integer, got {C0}")
    if cube.dim != f.d:
        raise ValueError("cube dimension does not match the map")
    if cube.level > f.K:
        raise ValueError(f"cube level {cube.level} is finer than the lattice K={f.K}")
    step = 1 << (f.K - cube.level)
    grow = (C0 - 1) // 2 * step
    lo = np.array([c * step - grow for c in cube.corner])
    hi = np.array([(c + 1) * step + grow for c in cube.corner])
    top = 1 << f.K
    clipped = bool(np.any(lo < 0) or np.any(hi > top))
    return np.maximum(lo, 0), np.minimum(hi, top), clipped


def _primitive(diffs: np.ndarray):
    """Split integer vectors into (primitive direction, positive multiple)."""
    g = np.gcd.reduce(np.abs(diffs), axis=1)
    return diffs // g[:, None], g


@dataclass
class PairData:
    """Distances grouped by lattice difference vector (normalised up to sign)."""
    diffs: np.ndarray     # G x d integer difference vectors (lattice units)
    dmin: np.ndarray
    dmax: np.ndarray
    dirs: np.ndarray      # U x d primitive directions
    dir_of: np.ndarray    # group -> direction index
    mult: np.ndarray      # group -> positive multiple
    spacing: float


def pair_data(f: GridMap, lo, hi) -> PairData:
    sizes = np.asarray(hi) - np.asarray(lo) + 1
    if np.prod(sizes) < 2:
        raise ValueError("fit region holds fewer than two lattice points")
    grid = f.values.reshape(f.shape)[tuple(slice(a, b + 1) for a, b in zip(lo, hi))]
    diffs, dmin, dmax = [], [], []
    for delta in itertools.product(*[range(-(s - 1), s) for s in sizes]):
        nz = [x for x in delta if x != 0]
        if not nz or nz[0] < 0:
            continue
        sa = tuple(slice(max(0, -x), s - max(0, x)) for x, s in zip(delta, sizes))
        sb = tuple(slice(max(0, x), s - max(0, -x)) for x, s in zip(delta, sizes))
        dist = _paired(f.target, grid[sa].ravel(), grid[sb].ravel())
        diffs.append(delta)
        dmin.append(dist.min())
        dmax.append(dist.max())
    diffs = np.array(diffs, dtype=np.int64)
    prim, mult = _primitive(diffs)
    dirs, dir_of = np.unique(prim, axis=0, return_inverse=True)
    return PairData(diffs, np.array(dmin), np.array(dmax), dirs, dir_of.ravel(), mult, f.spacing)


@lru_cache(maxsize=64)
def _triples(dirs_key: bytes, d: int):
    """All (u, v, w, lam) with u +- v = lam * w among stored primitive directions."""
    dirs = np.frombuffer(dirs_key, dtype=np.int64).reshape(-1, d)
    lookup = {tuple(u): i for i, u in enumerate(dirs)}
    iu, iv = np.triu_indices(len(dirs), k=1)
    out = []
    for sgn in (1, -1):
        s = dirs[iu] + sgn * dirs[iv]
        nz = np.any(s != 0, axis=1)
        s, a, b = s[nz], iu[nz], iv[nz]
        # normalise the sign so the first non-zero entry is positive
        first = s[np.arange(len(s)), np.argmax(s != 0, axis=1)]
        s = s * np.sign(first)[:, None]
        p, lam = _primitive(s)
        for row, ua, vb, lm in zip(p, a, b, lam):
            w = lookup.get(tuple(row))
            if w is not None:
                out.append((ua, vb, w, lm))
    return np.array(out, dtype=np.int64).reshape(-1, 4)


# ---------------------------------------------------------------------------
# fits


@dataclass
class SeminormFit:
    form: str                     # "slopes" | "matrix"
    md_value: float
    cube: DyadicCube
    deviation: float              # sup |d(f(x), f(y)) - ||x - y|||
    C0: int = 1
    region: tuple = ()            # (lo, hi) lattice box actually fitted
    clipped: bool = False
    directions: np.ndarray | None = None   # primitive lattice directions (slopes form)
    values: np.ndarray | None = None       # ||u * spacing|| per direction
    A: np.ndarray | None = None            # matrix form
    kind: str = "l2"                       # matrix norm: |A v| ("l2") or |A v|_inf ("linf")
    spacing: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def slopes(self) -> dict:
        """Seminorm value per unit Euclidean length along each stored direction."""
        if self.form != "slopes":
            raise TypeError("slopes are only stored by LP fits")
        lens = np.linalg.norm(self.directions, axis=1) * self.spacing
        return {tuple(int(x) for x in u): float(v / ln)
                for u, v, ln in zip(self.directions, self.values, lens)}

    def norm(self, v) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if self.form == "matrix":
            return matrix_norm(self.A, self.kind, v)
        out = []
        for row in v:
            lat = row / self.spacing
            q = np.rint(lat).astype(np.int64)
            if np.abs(lat - q).max() > 1e-9:
                raise ValueError(f"{row} is not a lattice vector")
            if not q.any():
                out.append(0.0)
                continue
            q = q * np.sign(q[np.flatnonzero(q)[0]])
            (u,), (lam,) = _primitive(q[None, :])
            hit = np.flatnonzero((self.directions == u).all(axis=1))
            if not hit.size:
                raise ValueError(f"direction {tuple(u)} was not fitted")
            out.append(lam * float(self.values[hit[0]]))
        return np.array(out)


def matrix_norm(A: np.ndarray, kind: str, v: np.ndarray) -> np.ndarray:
    img = np.atleast_2d(v) @ np.asarray(A).T
    if kind == "l2":
        return np.sqrt((img * img).sum(axis=1))
    if kind == "linf":
        return np.abs(img).max(axis=1) if img.shape[1] else np.zeros(len(img))
    raise ValueError(f"unknown matrix norm kind {kind!r}")


def _deviation(pd: PairData, A: np.ndarray, kind: str) -> float:
    nv = matrix_norm(A, kind, pd.diffs * pd.spacing)
    return float(max((pd.dmax - nv).max(), (nv - pd.dmin).max()))


def _bounds_at(pd: PairData, t: float):
    """Per-direction interval [L_u, U_u] for sigma_u from |d - lam sigma_u| <= t."""
    U = len(pd.dirs)
    lo = np.zeros(U)
    hi = np.full(U, np.inf)
    np.maximum.at(lo, pd.dir_of, (pd.dmax - t) / pd.mult)
    np.minimum.at(hi, pd.dir_of, (pd.dmin + t) / pd.mult)
    return lo, hi


class _Closure:
    """Greatest assignment below given bounds that satisfies every triple constraint.

    Subadditive assignments are closed under pointwise max, so the greatest
    one exists; repeated sigma_w <- min(sigma_w, (sigma_u + sigma_v)/lam)
    converges to it from above.
    """

    def __init__(self, tri: np.ndarray, U: int):
        order = np.argsort(tri[:, 2], kind="stable")
        self.tri = tri[order]
        self.starts = np.flatnonzero(np.r_[True, np.diff(self.tri[:, 2]) != 0]) if len(tri) else tri[:0, 0]
        self.targets = self.tri[self.starts, 2]
        self.U = U

    def __call__(self, sigma: np.ndarray, max_sweeps: int = 5000) -> np.ndarray:
        sigma = sigma.copy()
        if not len(self.tri):
            return sigma
        u, v, lam = self.tri[:, 0], self.tri[:, 1], self.tri[:, 3]
        for _ in range(max_sweeps):
            cand = np.minimum.reduceat((sigma[u] + sigma[v]) / lam, self.starts)
            cur = sigma[self.targets]
            if not np.any(cand < cur - 1e-15 * np.maximum(1.0, cur)):
                break
            sigma[self.targets] = np.minimum(cur, cand)
        return sigma


def _feasible(pd: PairData, closure: _Closure, t: float, tol: float = 1e-12):
    lo, hi = _bounds_at(pd, t)
    if np.any(hi < lo - tol):
        return False, None
    sig = closure(hi)
    return bool(np.all(sig >= lo - tol)), sig


def _solve_lp(pd: PairData, tol: float = 1e-12):
    """Optimal t of the slope LP, bracketed as [t_lo, t_hi].

    t_lo is proven infeasible (or 0); t_hi is the exact deviation of the
    returned assignment ``sig``. The bisection stops at width ``tol``.

    The LP without triple constraints is solved by HiGHS; adding the triples
    only raises t, and feasibility at fixed t is decided exactly by the
    closure above, so bisection on t finishes the job.
    """
    U, G = len(pd.dirs), len(pd.diffs)
    rows = np.arange(G)
    # lam*sigma_u - t <= dmin  and  -lam*sigma_u - t <= -dmax
    Aub = coo_matrix((np.concatenate([pd.mult, -np.ones(G), -pd.mult, -np.ones(G)]).astype(float),
                      (np.concatenate([rows, rows, G + rows, G + rows]),
                       np.concatenate([pd.dir_of, np.full(G, U), pd.dir_of, np.full(G, U)]))),
                     shape=(2 * G, U + 1)).tocsr()
    cvec = np.zeros(U + 1)
    cvec[U] = 1.0
    res = linprog(cvec, A_ub=Aub, b_ub=np.concatenate([pd.dmin, -pd.dmax]),
                  bounds=[(0, None)] * (U + 1), method="highs",
                  options={"primal_feasibility_tolerance": LP_TOL,
                           "dual_feasibility_tolerance": LP_TOL})
    if res.status != 0:
        raise RuntimeError(f"seminorm LP failed: {res.message}")
    tri = _triples(np.ascontiguousarray(pd.dirs).tobytes(), pd.dirs.shape[1])
    closure = _Closure(tri, U)
    # bracket the relaxed optimum by solver tolerance, then confirm both ends exactly
    t_lo = max(0.0, float(res.x[U]) - 10 * LP_TOL)
    t_hi = float(res.x[U]) + 10 * LP_TOL
    if t_lo > 0 and _feasible(pd, closure, t_lo)[0]:
        t_lo, t_hi = 0.0, t_lo
    ok, sig = _feasible(pd, closure, t_hi)
    if not ok:
        t_lo = t_hi
        t_hi = float(pd.dmax.max())               # sigma = 0 is feasible here
        ok, sig = _feasible(pd, closure, t_hi)
        if not ok:
            raise AssertionError("slope LP: zero assignment should be feasible")
    steps = 0
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        okm, sm = _feasible(pd, closure, mid)
        if okm:
            t_hi, sig = mid, sm
        else:
            t_lo = mid
        steps += 1
    # the assignment may miss its bounds by the feasibility tolerance; report its true deviation
    lam_sig = pd.mult * sig[pd.dir_of]
    t_hi = max(t_hi, float(np.max(np.maximum(pd.dmax - lam_sig, lam_sig - pd.dmin))))
    return t_lo, t_hi, sig, len(tri), steps


def md_fit_lp(f: GridMap, cube: DyadicCube, C0: int = 1, _pd: PairData | None = None) -> SeminormFit:
    """Lower bound for the metric derivative on C0*cube (clipped to Q_0).

    md = t*/(C0 side(cube)), with t* the optimum of the direction-slope LP.
    ``deviation`` is the lower end of a bracket of width 1e-12 around the
    optimum; ``values`` is a feasible slope assignment at the upper end.
    """
    lo, hi, clipped = fit_region(f, cube, C0)
    pd = _pd or pair_data(f, lo, hi)
    t_lo, t_hi, sig, n_tri, steps = _solve_lp(pd)
    return SeminormFit("slopes", t_lo / (C0 * cube.side), cube, t_lo, C0, (tuple(lo), tuple(hi)),
                       clipped, directions=pd.dirs, values=sig, spacing=pd.spacing,
                       info={"t_feasible": t_hi, "triples": n_tri, "bisection_steps": steps})


def _descend(pd: PairData, A: np.ndarray, kind: str, scale: float, min_step: float = 1e-7):
    A = A.copy()
    best = _deviation(pd, A, kind)
    step = 0.25 * scale
    while step >= min_step * scale and best > 1e-13:
        for _ in range(50):
            improved = False
            for idx in np.ndindex(A.shape):
                for s in (step, -step):
                    A[idx] += s
                    val = _deviation(pd, A, kind)
                    if val < best - 1e-15:
                        best, improved = val, True
                        break
                    A[idx] -= s
            if not improved:
                break
        step /= 2
    return A, best


def _affine_gradient(f: GridMap, lo, hi) -> np.ndarray | None:
    """Least-squares linear part of f on the box (SupCloud targets only)."""
    if f.target.kind != "supcloud":
        return None
    sl = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
    idx = np.arange(f.npoints).reshape(f.shape)[sl].ravel()
    X = np.hstack([f.coords()[idx], np.ones((len(idx), 1))])
    Y = f.image_coords()[idx]
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef[:-1].T                         # N x d


def md_fit_matrix(f: GridMap, cube: DyadicCube, restarts: int = 2, C0: int = 1, seed: int = 0,
                  kinds=("linf", "l2"), lp_fit: SeminormFit | None = None,
                  _pd: PairData | None = None) -> SeminormFit:
    """Upper bound for the metric derivative from seminorms |Av| and |Av|_inf.

    Deterministic coordinate descent from: zero, the LP axis slopes on the
    diagonal, the least-squares gradient (SupCloud targets), and ``restarts``
    seeded random rotations of the diagonal start.
    """
    lo, hi, clipped = fit_region(f, cube, C0)
    pd = _pd or pair_data(f, lo, hi)
    d = f.d
    lp = lp_fit or md_fit_lp(f, cube, C0, _pd=pd)
    axis_vals = np.zeros(d)
    for i in range(d):
        e = np.zeros(d, dtype=np.int64)
        e[i] = 1
        hit = np.flatnonzero((pd.dirs == e).all(axis=1))
        if hit.size:
            axis_vals[i] = lp.values[hit[0]] / pd.spacing
    scale = max(1.0, float(pd.dmax.max()) / (pd.spacing * max(1, np.abs(pd.diffs).max())))
    rng = np.random.default_rng(seed)
    starts = [np.zeros((d, d)), np.diag(axis_vals)]
    grad = _affine_gradient(f, lo, hi)
    if grad is not None:
        starts.append(grad)
    for _ in range(restarts):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        starts.append(Q @ np.diag(axis_vals) @ Q.T)
    best = None
    for kind in kinds:
        for i, A0 in enumerate(starts):
            if kind == "l2" and A0.shape[0] != d:
                continue
            A, dev = _descend(pd, A0, kind, scale)
            if best is None or dev < best[1] - 1e-15:
                best = (A, dev, kind, i)
            if best[1] <= 1e-13:
                break
        if best[1] <= 1e-13:
            break
    A, dev, kind, start = best
    # round-off entries would rotate the singular basis when singular values tie
    snapped = np.where(np.abs(A) <= 1e-12 * max(1.0, np.abs(A).max()), 0.0, A)
    sdev = _deviation(pd, snapped, kind)
    if sdev <= dev + 1e-13:
        A, dev = snapped, sdev
    return SeminormFit("matrix", dev / (C0 * cube.side), cube, dev, C0, (tuple(lo), tuple(hi)),
                       clipped, A=A, kind=kind, spacing=pd.spacing,
                       info={"start": start, "lp_md": lp.md_value})


def fit_deviation(f: GridMap, fit: SeminormFit) -> float:
    """Recompute the sup deviation of a matrix fit on its recorded region."""
    lo, hi = fit.region
    return _deviation(pair_data(f, np.array(lo), np.array(hi)), fit.A, fit.kind)


# ---------------------------------------------------------------------------
# adapted bases


def _square_factor(A: np.ndarray, d: int) -> np.ndarray:
    """A d x d matrix R with |R v| = |A v| for all v."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape == (d, d):
        return A
    if A.shape[0] < d:
        return np.vstack([A, np.zeros((d - A.shape[0], d))])
    _, R = np.linalg.qr(A)
    return R


def _unit_samples(P: np.ndarray, count: int, rng) -> np.ndarray:
    c = rng.standard_normal((count, len(P)))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    return c @ P


@dataclass
class AdaptedBasis:
    vectors: np.ndarray     # d x d, row i is v_i
    delta: float
    constant: float         # c0: ||sum a_i v_i|| >= c0 delta sum_{i<n} |a_i|
    singular_values: np.ndarray
    n: int
    worst_ratio: float      # min over samples of ||sum a_i v_i|| / (delta sum_{i<n}|a_i|)


def adapted_basis(fit: SeminormFit, P, delta: float, n: int | None = None, seed: int = 0,
                  samples: int = 1000) -> AdaptedBasis:
    """Right-singular basis of the fit's matrix with a verified lower constant.

    With sigma_n the n-th singular value, |A sum a_i v_i| >= sigma_n |a_{<n}|_2
    >= sigma_n |a_{<n}|_1 / sqrt(n). For the |.|_inf form with r rows a further
    1/sqrt(r) enters, so c0 = sigma_n / (sqrt(n) [sqrt(r)] delta).
    """
    if fit.form != "matrix":
        raise TypeError("adapted_basis needs a matrix fit")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = len(P) if n is None else n
    d = P.shape[1]
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    u = _unit_samples(P, 200, rng)
    vals = fit.norm(u)
    bad = np.flatnonzero(vals < delta - 1e-9)
    if bad.size:
        v = u[bad[0]]
        raise ValueError(f"precondition fails: ||v|| = {vals[bad[0]]:.6g} < delta = {delta:g} "
                         f"at v = {np.array2string(v, precision=6)}")
    _, S, V = svd_small(_square_factor(fit.A, d))
    sig_n = S[n - 1]
    if sig_n < delta / d:
        raise ValueError(f"sigma_{n} = {sig_n:.6g} is below delta/d = {delta / d:.6g}")
    rows = fit.A.shape[0] if fit.kind == "linf" else 1
    c0 = sig_n / (math.sqrt(n) * math.sqrt(rows) * delta)
    coef = rng.standard_normal((samples, d))
    lhs = fit.norm(coef @ V.T)
    rhs = c0 * delta * np.abs(coef[:, :n]).sum(axis=1)
    ok = rhs > 0
    worst = float((lhs[ok] / rhs[ok]).min()) if ok.any() else math.inf
    if np.any(lhs < rhs * (1 - 1e-12) - 1e-12):
        raise AssertionError("adapted basis inequality fails on a sample")
    return AdaptedBasis(V.T.copy(), float(delta), float(c0), S, n, worst)


# ---------------------------------------------------------------------------
# good cubes


def plane_constant(fit: SeminormFit, P, seed: int = 0, samples: int = 2000) -> tuple[float, str]:
    """Lower bound c for ||v|| / |v| on span(P) (rows of P orthonormal).

    Exact for |Av| (smallest singular value of A restricted to P) and for
    one-dimensional P. For |Av|_inf on a 2-plane: an angle grid minus the
    Lipschitz error of the grid. Higher dimensions fall back to sampling.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    k = len(P)
    if fit.kind == "l2":
        AP = _square_factor(fit.A, P.shape[1]) @ P.T
        return float(np.linalg.svd(AP, compute_uv=False)[-1]), "exact"
    if k == 1:
        return float(fit.norm(P)[0]), "exact"
    if k == 2:
        th = np.linspace(0.0, np.pi, 3601)
        u = np.cos(th)[:, None] * P[0] + np.sin(th)[:, None] * P[1]
        lip = float(np.linalg.norm(fit.A, 2))
        return max(0.0, float(fit.norm(u).min()) - lip * (np.pi / 3600) / 2), "grid"
    u = _unit_samples(P, samples, np.random.default_rng(seed))
    return float(fit.norm(u).min()), "sampled"


@dataclass
class GoodCubeWitness:
    cube: DyadicCube
    fit: SeminormFit
    plane: np.ndarray        # n x d orthonormal rows
    c: float                 # verified constant on the plane
    eta: float
    c_required: float
    plane_method: str
    map_hash: str = ""


def _candidate_planes(fit: SeminormFit, n: int, d: int):
    _, _, V = svd_small(_square_factor(fit.A, d))
    yield V[:, :n].T.copy()
    for axes in itertools.combinations(range(d), n):
        yield np.eye(d)[list(axes)]


def check_witness(f: GridMap, w: GoodCubeWitness, tol: float = 1e-9, seed: int = 0) -> list[str]:
    """Re-run the three witness checks; returns the failures (empty when sound)."""
    errs = []
    dev = fit_deviation(f, w.fit)
    md = dev / (w.fit.C0 * w.cube.side)
    if md > w.eta + tol:
        errs.append(f"md {md:.6g} exceeds eta {w.eta:g}")
    P = np.atleast_2d(w.plane)
    if np.abs(P @ P.T - np.eye(len(P))).max() > tol:
        errs.append("plane basis is not orthonormal")
    u = _unit_samples(P, 1000, np.random.default_rng(seed))
    low = float(w.fit.norm(u).min())
    if low < w.c - tol:
        errs.append(f"||v|| = {low:.6g} < c = {w.c:g} on the plane")
    if w.c < w.c_required - tol:
        errs.append(f"plane constant {w.c:.6g} below the required {w.c_required:g}")
    return errs


def good_cube_search(f: GridMap, eta: float, c: float, min_side: float, C0: int = 3,
                     restarts: int = 2, seed: int = 0) -> GoodCubeWitness | None:
    """First cube (level ascending, corners lexicographic) with md(C0 Q) < eta
    and an n-plane where the fitted seminorm is at least c |v|."""
    if f.n < 1:
        raise ValueError("good cubes need n >= 1")
    if eta <= 0 or c <= 0:
        raise ValueError("eta and c must be positive")
    if min_side < 2.0 ** (-f.K + 1) - 1e-15:
        raise ValueError(f"min_side must be at least 2^(1-K) = {2.0 ** (1 - f.K):g}")
    level = 0
    while 2.0 ** -(level + 1) >= min_side - 1e-15:
        level += 1
    for lev in range(level + 1):
        for cube in cubes_at_level(f.d, lev):
            lo, hi, _ = fit_region(f, cube, C0)
            pd = pair_data(f, lo, hi)
            lp = md_fit_lp(f, cube, C0, _pd=pd)
            if lp.md_value >= eta:
                continue
            fit = md_fit_matrix(f, cube, restarts, C0, seed, lp_fit=lp, _pd=pd)
            if fit.md_value >= eta:
                continue
            best = None
            for P in _candidate_planes(fit, f.n, f.d):
                val, how = plane_constant(fit, P, seed)
                if best is None or val > best[1] + 1e-12:
                    best = (P, val, how)
            if best[1] >= c:
                w = GoodCubeWitness(cube, fit, best[0], best[1], eta, c, best[2], f.content_hash())
                errs = check_witness(f, w, seed=seed)
                if errs:
                    raise AssertionError(f"witness on {cube} fails its checks: {errs}")
                return w
    return None


# ---------------------------------------------------------------------------
# positive-content certificates


@dataclass
class PositiveCertificate:
    cube: DyadicCube
    center: np.ndarray
    basis: np.ndarray                  # rows: axes of the rotated cube
    side: float
    n: int
    m: int
    K: int
    mesh: float                        # face sampling mesh
    axis_distances: list[float]
    witnesses: list[tuple[int, int]]   # lattice indices realizing each distance
    a: float                           # min_k dist_k / side
    bound: float                       # prod dist_k * side^m, from the samples
    error: float                       # per-face continuum slack e
    certified: float                   # prod max(0, dist_k - 2e) * side^m
    dyadic_bound: float                # certified / d^(m/2): lower bound for the dyadic content
    degenerate: bool
    message: str
    map_hash: str
    basis_constant: float = 0.0


def face_sample_indices(f: GridMap, center, basis, side, axis: int, high: bool, mesh: float) -> np.ndarray:
    """Lattice indices nearest to a mesh-``mesh`` grid on one face of a rotated cube."""
    d = len(center)
    per = max(1, int(math.ceil(side / mesh)))
    ticks = np.linspace(0.0, side, per + 1)
    axes = [ticks] * d
    axes[axis] = np.array([side if high else 0.0])
    local = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    world = np.asarray(center) + (local - side / 2) @ np.asarray(basis)
    lat = np.clip(np.rint(world * (1 << f.K)), 0, 1 << f.K).astype(np.int64)
    return np.unique(flat_index(lat, d, f.K))


def positive_content_certificate(f: GridMap, w: GoodCubeWitness, seed: int = 0) -> PositiveCertificate:
    """Face distances of f on the rotated cube Q' inscribed in the witness cube.

    The axes of Q' come from the adapted basis of the witness fit. The bound
    prod_k dist(f(F_k), f(F'_k)) side(Q')^m uses sampled faces; ``certified``
    subtracts, per factor, twice the continuum slack
    e = lip (mesh sqrt(d-1)/2 + sqrt(d) 2^(-K-1)).
    """
    h = f.content_hash()
    if w.map_hash and w.map_hash != h:
        raise ValueError("stale witness: the map changed since the witness was found")
    errs = check_witness(f, w, seed=seed)
    if errs:
        raise ValueError(f"witness precondition fails: {'; '.join(errs)}")
    ab = adapted_basis(w.fit, w.plane, w.c, n=f.n, seed=seed)
    rc = inscribe_rotated_cube(w.cube, ab.vectors)
    mesh = f.spacing
    d = f.d
    dists, wits = [], []
    for k in range(f.n):
        lo = face_sample_indices(f, rc.center, rc.basis, rc.side, k, False, mesh)
        hi = face_sample_indices(f, rc.center, rc.basis, rc.side, k, True, mesh)
        val, (a, b) = set_distance(f.target, f.values[lo], f.values[hi], return_witness=True)
        wa = int(lo[np.flatnonzero(f.values[lo] == a)[0]])
        wb = int(hi[np.flatnonzero(f.values[hi] == b)[0]])
        dists.append(val)
        wits.append((wa, wb))
    s = rc.side
    e = f.declared_lip * (mesh * math.sqrt(d - 1) / 2 + math.sqrt(d) * 2.0 ** (-f.K - 1))
    a_val = min(dists) / s
    bound = math.prod(dists) * s ** f.m
    certified = math.prod(max(0.0, x - 2 * e) for x in dists) * s ** f.m
    degenerate = a_val <= 0 or certified <= 0
    msg = ""
    if a_val <= 0:
        msg = "faces of Q' touch in the image: eta too large relative to c"
    elif certified <= 0:
        msg = "face distances do not exceed the sampling slack; refine K"
    return PositiveCertificate(w.cube, rc.center, rc.basis, s, f.n, f.m, f.K, mesh, dists, wits,
                               a_val, bound, e, certified, certified / d ** (f.m / 2),
                               degenerate, msg, h, ab.constant)


def sandwich_check(f: GridMap, cert: PositiveCertificate, L_max: int | None = None) -> tuple[bool, float]:
    """certificate lower bound <= certified DP upper bound."""
    dp = mapping_content_upper(f, f.K if L_max is None else L_max)
    return cert.dyadic_bound <= dp.certified + 1e-9, dp.certified


# ---------------------------------------------------------------------------
# quantitative differentiation


def quantdiff_sum(f: GridMap, eps: float, C0: int = 1, max_level: int | None = None) -> float:
    """sum of |Q| over dyadic cubes of level <= K-2 whose LP md on C0 Q exceeds eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    top = f.K - 2 if max_level is None else max_level
    total = 0.0
    for lev in range(max(top, -1) + 1):
        for cube in cubes_at_level(f.d, lev):
            if md_fit_lp(f, cube, C0).md_value > eps:
                total += cube.volume
    return total
