"""Replay certificates against a map without reusing the code that built them.

Every check recomputes distances from the raw lattice values and the target
description, so a bug in the producing path cannot hide in the replay.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .io import gridmap_hash, parse_reals
from .metric import GridMap

TOL = 1e-9


@dataclass
class VerifyReport:
    passed: bool
    kind: str
    failures: list[str] = field(default_factory=list)
    checked: int = 0


def _dist_matrix(f: GridMap, a, b) -> np.ndarray:
    """Target distances between point indices, from the target's own data."""
    t = f.target
    a, b = np.asarray(a), np.asarray(b)
    if t.kind == "supcloud":
        P = t.points
        return np.abs(P[a][:, None, :] - P[b][None, :, :]).max(axis=2)
    return np.asarray(t.full_matrix())[np.ix_(a, b)]


def _lattice_coords(f: GridMap, idx) -> np.ndarray:
    return np.stack(np.unravel_index(np.asarray(idx), f.shape), axis=-1)


def _face_values(f: GridMap, axis: int, high: bool) -> tuple[np.ndarray, np.ndarray]:
    grid = np.arange(f.npoints).reshape(f.shape)
    idx = np.take(grid, -1 if high else 0, axis=axis).ravel()
    return idx, f.values[idx]


def verify_faces(cert: dict, f: GridMap, tol: float = TOL) -> list[str]:
    errs = []
    if cert["n"] != f.n:
        return [f"certificate has n={cert['n']}, map has n={f.n}"]
    claimed = [float(x) for x in cert["axis_distances"]]
    for k, (val, (wa, wb)) in enumerate(zip(claimed, cert["witnesses"])):
        lo_idx, lo_v = _face_values(f, k, False)
        hi_idx, hi_v = _face_values(f, k, True)
        if wa not in set(lo_idx.tolist()) or wb not in set(hi_idx.tolist()):
            errs.append(f"axis {k}: witness points are not on the claimed faces")
            continue
        at_witness = float(_dist_matrix(f, [f.values[wa]], [f.values[wb]])[0, 0])
        true_min = float(_dist_matrix(f, np.unique(lo_v), np.unique(hi_v)).min())
        if abs(at_witness - val) > tol:
            errs.append(f"axis {k}: witness distance {at_witness:.17g} != claimed {val:.17g}")
        if abs(true_min - val) > tol:
            errs.append(f"axis {k}: face distance is {true_min:.17g}, certificate claims {val:.17g}")
    if abs(math.prod(claimed) - float(cert["product"])) > tol:
        errs.append("product does not equal the product of the axis distances")
    return errs


def _cover_cells(f: GridMap, cover) -> list[str]:
    n = 1 << f.K
    count = np.zeros((n,) * f.d, dtype=np.int64)
    for q in cover:
        lev, corner = q["level"], q["corner"]
        step = 1 << (f.K - lev)
        count[tuple(slice(c * step, (c + 1) * step) for c in corner)] += 1
    if np.any(count == 0):
        return ["cover misses part of Q_0"]
    if np.any(count > 1):
        return ["cover cubes overlap"]
    return []


def verify_dp(cert: dict, f: GridMap, tol: float = TOL) -> list[str]:
    errs = _cover_cells(f, cert["cover"])
    rho = float(cert["rho"])
    total, total_cert = [], []
    for q in cert["cover"]:
        lev, corner = q["level"], q["corner"]
        step = 1 << (f.K - lev)
        ranges = [np.arange(c * step, (c + 1) * step + 1) for c in corner]
        idx = np.ravel_multi_index(tuple(g.ravel() for g in np.meshgrid(*ranges, indexing="ij")), f.shape)
        img = np.unique(f.values[idx])
        side_m = (2.0 ** -lev) ** f.m
        val = float(q["value"])
        if q["method"] == "single_set":
            diam = float(_dist_matrix(f, img, img).max())
            if abs(diam ** f.n - val) > tol:
                errs.append(f"cube {lev}/{corner}: diameter term {diam ** f.n:.17g} != {val:.17g}")
            total_cert.append((diam + 2 * rho) ** f.n * side_m)
        elif q["method"] == "greedy_ball":
            centres = [int(c) for c, _ in q["balls"]]
            radii = np.array([float(r) for _, r in q["balls"]])
            D = _dist_matrix(f, centres, img)
            if not np.all((D <= radii[:, None] + 1e-15).any(axis=0)):
                errs.append(f"cube {lev}/{corner}: balls do not cover the image")
            cost = float(((2 * radii) ** f.n).sum())
            if abs(cost - val) > tol:
                errs.append(f"cube {lev}/{corner}: ball cost {cost:.17g} != {val:.17g}")
            total_cert.append(float(((2 * (radii + rho)) ** f.n).sum()) * side_m)
        else:
            errs.append(f"cube {lev}/{corner}: method {q['method']!r} cannot be replayed")
            continue
        total.append(val * side_m)
    if abs(math.fsum(total) - float(cert["value"])) > tol:
        errs.append(f"cover value {math.fsum(total):.17g} != claimed {cert['value']}")
    if total_cert and abs(math.fsum(total_cert) - float(cert["certified"])) > tol:
        errs.append(f"certified value {math.fsum(total_cert):.17g} != claimed {cert['certified']}")
    return errs


def _rotated_face_samples(f: GridMap, center, basis, side, axis, high, mesh) -> np.ndarray:
    d = f.d
    per = max(1, int(math.ceil(side / mesh)))
    ticks = [j * side / per for j in range(per + 1)]
    samples = []
    for pt in itertools.product(*[ticks] * (d - 1)):
        local = list(pt[:axis]) + [side if high else 0.0] + list(pt[axis:])
        world = center + (np.array(local) - side / 2) @ basis
        samples.append(world)
    lat = np.clip(np.rint(np.array(samples) * (1 << f.K)), 0, 1 << f.K).astype(np.int64)
    return np.unique(np.ravel_multi_index(tuple(lat.T), f.shape))


def verify_positive(cert: dict, f: GridMap, tol: float = TOL) -> list[str]:
    errs = []
    center = parse_reals(cert["center"])
    basis = parse_reals(cert["basis"])
    side = float(cert["side"])
    mesh = float(cert["mesh"])
    d = f.d
    if np.abs(basis @ basis.T - np.eye(d)).max() > tol:
        errs.append("basis is not orthonormal")
    lev, corner = cert["cube"]["level"], cert["cube"]["corner"]
    lo = np.array(corner) * 2.0 ** -lev
    verts = center + side * np.array(list(itertools.product((-0.5, 0.5), repeat=d))) @ basis
    if np.any(verts < lo - 1e-12) or np.any(verts > lo + 2.0 ** -lev + 1e-12):
        errs.append("rotated cube is not inside its dyadic cube")
    if abs(side - 2.0 ** -lev / math.sqrt(d)) > tol:
        errs.append("rotated cube side is not side(Q)/sqrt(d)")
    claimed = [float(x) for x in cert["axis_distances"]]
    for k, val in enumerate(claimed):
        a = _rotated_face_samples(f, center, basis, side, k, False, mesh)
        b = _rotated_face_samples(f, center, basis, side, k, True, mesh)
        true = float(_dist_matrix(f, np.unique(f.values[a]), np.unique(f.values[b])).min())
        if abs(true - val) > tol:
            errs.append(f"axis {k}: face distance is {true:.17g}, certificate claims {val:.17g}")
    e = f.declared_lip * (mesh * math.sqrt(d - 1) / 2 + math.sqrt(d) * 2.0 ** (-f.K - 1))
    checks = {
        "error": e,
        "a": min(claimed) / side,
        "bound": math.prod(claimed) * side ** f.m,
        "certified": math.prod(max(0.0, x - 2 * e) for x in claimed) * side ** f.m,
    }
    checks["dyadic_bound"] = checks["certified"] / d ** (f.m / 2)
    for key, val in checks.items():
        if abs(val - float(cert[key])) > tol:
            errs.append(f"{key}: replay gives {val:.17g}, certificate claims {cert[key]}")
    return errs


def verify_witness(cert: dict, f: GridMap, tol: float = TOL) -> list[str]:
    """Brute-force all pairs in the fitted region for the md claim; sample the plane."""
    errs = []
    fit = cert["fit"]
    A = parse_reals(fit["A"])
    A = np.atleast_2d(A)
    lo, hi = (np.array(x) for x in fit["region"])
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*ranges, indexing="ij")], axis=1)
    vals = f.values[np.ravel_multi_index(tuple(pts.T), f.shape)]
    worst = 0.0
    for s in range(0, len(pts), 256):
        diff = (pts[s:s + 256, None, :] - pts[None, :, :]) * f.spacing
        img = diff @ A.T
        nv = np.sqrt((img ** 2).sum(-1)) if fit["kind"] == "l2" else np.abs(img).max(-1)
        dd = _dist_matrix(f, vals[s:s + 256], vals)
        worst = max(worst, float(np.abs(dd - nv).max()))
    lev = cert["cube"]["level"]
    md = worst / (fit["C0"] * 2.0 ** -lev)
    if md > float(cert["eta"]) + tol:
        errs.append(f"md replay {md:.6g} exceeds eta {cert['eta']}")
    if abs(worst - float(fit["deviation"])) > tol:
        errs.append(f"deviation replay {worst:.17g} != claimed {fit['deviation']}")
    P = np.atleast_2d(parse_reals(cert["plane"]))
    rng = np.random.default_rng(0)
    u = rng.standard_normal((1000, len(P))) @ P
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    img = u @ A.T
    nv = np.sqrt((img ** 2).sum(-1)) if fit["kind"] == "l2" else np.abs(img).max(-1)
    if nv.min() < float(cert["c"]) - tol:
        errs.append(f"plane constant fails: ||v|| = {nv.min():.6g} < c = {cert['c']}")
    return errs


_VERIFIERS = {"faces": verify_faces, "dp_upper": verify_dp, "positive": verify_positive,
              "good_cube": verify_witness}


def verify(cert: dict, f: GridMap, tol: float = TOL) -> VerifyReport:
    kind = cert.get("type", "?")
    if kind not in _VERIFIERS:
        return VerifyReport(False, kind, [f"unknown certificate type {kind!r}"])
    if cert.get("map_hash") != gridmap_hash(f):
        return VerifyReport(False, kind, ["map hash mismatch: certificate belongs to a different map"])
    errs = _VERIFIERS[kind](cert, f, tol)
    return VerifyReport(not errs, kind, errs, 1)
