"""JSON formats for maps, trees and certificates.

Reals are written as decimal strings with 17 significant digits so a file
round-trips bit for bit. Keys are sorted, so hashes of the canonical text
are stable.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .metric import FiniteMetric, GridMap, SupCloud, TargetSpace, TreeSpace
from .trees import MetricTree, TreeFactorization

SCHEMA_VERSION = 1


def real(x) -> str:
    return format(float(x), ".17g")


def reals(a) -> list:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return real(a)
    return [reals(r) for r in a]


def parse_reals(a):
    if isinstance(a, list):
        return np.array([parse_reals(x) for x in a], dtype=float)
    return float(a)


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def tree_to_dict(t: MetricTree) -> dict:
    return {"vertices": t.n_vertices,
            "edges": [[u, v, real(w)] for u, v, w in t.edges],
            "labels": [list(lb) if isinstance(lb, tuple) else lb for lb in t.labels]
            if t.labels is not None else None}


def tree_from_dict(d: dict) -> MetricTree:
    labels = d.get("labels")
    if labels is not None:
        labels = [tuple(lb) if isinstance(lb, list) else lb for lb in labels]
    return MetricTree(int(d["vertices"]), [(int(u), int(v), float(w)) for u, v, w in d["edges"]], labels)


def target_to_dict(t: TargetSpace) -> dict:
    if isinstance(t, SupCloud):
        return {"kind": "supcloud", "data": reals(t.points)}
    if isinstance(t, FiniteMetric):
        return {"kind": "finite", "data": reals(t.matrix)}
    if isinstance(t, TreeSpace):
        return {"kind": "tree", "data": tree_to_dict(t.tree)}
    raise TypeError(f"cannot serialize target {type(t).__name__}")


def target_from_dict(d: dict) -> TargetSpace:
    kind = d["kind"]
    if kind == "supcloud":
        return SupCloud(parse_reals(d["data"]))
    if kind == "finite":
        return FiniteMetric(parse_reals(d["data"]))
    if kind == "tree":
        return TreeSpace(tree_from_dict(d["data"]))
    raise ValueError(f"unknown target kind {kind!r}")


def gridmap_to_dict(f: GridMap) -> dict:
    return {"n": f.n, "m": f.m, "K": f.K, "target": target_to_dict(f.target),
            "values": [int(v) for v in f.values], "declared_lip": real(f.declared_lip)}


def gridmap_from_dict(d: dict) -> GridMap:
    return GridMap(int(d["n"]), int(d["m"]), int(d["K"]), target_from_dict(d["target"]),
                   np.asarray(d["values"], dtype=np.int64), float(d["declared_lip"]))


def gridmap_hash(f: GridMap) -> str:
    return hashlib.sha256(canonical(gridmap_to_dict(f)).encode()).hexdigest()


def factorization_to_dict(tf: TreeFactorization) -> dict:
    return {"g": gridmap_to_dict(tf.g), "h": reals(tf.h.points), "L": real(tf.L)}


def factorization_from_dict(d: dict) -> TreeFactorization:
    return TreeFactorization(gridmap_from_dict(d["g"]), SupCloud(parse_reals(d["h"])), float(d["L"]))


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = os.path.abspath(path)
    folder = os.path.dirname(path)
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path: str | None = None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is not None:
        write_atomic(path, text)
    return text


def load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def save_gridmap(f: GridMap, path: str) -> None:
    dump_json(gridmap_to_dict(f), path)


def load_gridmap(path: str) -> GridMap:
    return gridmap_from_dict(load_json(path))


# ---------------------------------------------------------------------------
# certificates


def face_certificate_to_dict(cert, f: GridMap) -> dict:
    return {"schema": SCHEMA_VERSION, "type": "faces", "map_hash": cert.map_hash or gridmap_hash(f),
            "n": f.n, "m": f.m, "K": f.K,
            "axis_distances": [real(x) for x in cert.axis_distances],
            "witnesses": [list(w) for w in cert.witnesses],
            "product": real(cert.product), "sampling_error": real(cert.sampling_error)}


def dp_certificate_to_dict(dp, f: GridMap) -> dict:
    return {"schema": SCHEMA_VERSION, "type": "dp_upper", "map_hash": gridmap_hash(f),
            "n": f.n, "m": f.m, "K": f.K, "L_max": dp.L_max, "r_min": real(dp.r_min),
            "rho": real(dp.rho), "value": real(dp.value), "certified": real(dp.certified),
            "cover": [{"level": q.level, "corner": list(q.corner),
                       "method": dp.details[q].method,
                       "value": real(dp.details[q].value),
                       "balls": [[int(i), real(r)] for i, r in dp.details[q].balls]}
                      for q in dp.cover]}


def positive_certificate_to_dict(cert) -> dict:
    return {"schema": SCHEMA_VERSION, "type": "positive", "map_hash": cert.map_hash,
            "n": cert.n, "m": cert.m, "K": cert.K,
            "cube": {"level": cert.cube.level, "corner": list(cert.cube.corner)},
            "center": reals(cert.center), "basis": reals(cert.basis), "side": real(cert.side),
            "mesh": real(cert.mesh), "axis_distances": [real(x) for x in cert.axis_distances],
            "witnesses": [list(w) for w in cert.witnesses], "a": real(cert.a),
            "bound": real(cert.bound), "error": real(cert.error), "certified": real(cert.certified),
            "dyadic_bound": real(cert.dyadic_bound), "degenerate": bool(cert.degenerate),
            "message": cert.message}


def witness_to_dict(w) -> dict:
    fit = w.fit
    return {"schema": SCHEMA_VERSION, "type": "good_cube", "map_hash": w.map_hash,
            "cube": {"level": w.cube.level, "corner": list(w.cube.corner)},
            "eta": real(w.eta), "c_required": real(w.c_required), "c": real(w.c),
            "plane": reals(w.plane), "plane_method": w.plane_method,
            "fit": {"form": fit.form, "kind": fit.kind, "A": reals(fit.A), "C0": fit.C0,
                    "region": [list(map(int, fit.region[0])), list(map(int, fit.region[1]))],
                    "clipped": bool(fit.clipped), "md": real(fit.md_value),
                    "deviation": real(fit.deviation)}}
