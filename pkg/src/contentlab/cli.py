"""Command line entry point: ``contentlab <command> [options]``.

Exit codes: 0 computed / passed, 1 usage or input error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import math
import sys

import numpy as np

from . import io
from .content import faces_lower_bound, mapping_content_upper
from .dyadic import DyadicCube
from .metric import GridMap, MapPair, SupCloud, map_distance
from .seminorm import (good_cube_search, md_fit_lp, md_fit_matrix, positive_content_certificate)
from .verify import verify
from .zoo import NAMES, zoo

SCHEMA_VERSION = io.SCHEMA_VERSION


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, val = text.split("=", 1)
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def load_map(args) -> tuple[GridMap, object]:
    src = args.map
    if src is None:
        raise UsageError("--map is required (a GridMap JSON file or zoo:NAME)")
    if src.startswith("zoo:"):
        params = dict(args.param or [])
        if args.seed is not None and "seed" not in params and src[4:] in ("perturbed", "random"):
            params["seed"] = args.seed
        try:
            return zoo(src[4:], args.n, args.m, args.K, **params)
        except (ValueError, TypeError) as exc:
            raise UsageError(str(exc)) from exc
    try:
        return io.load_gridmap(src), None
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read map {src!r}: {exc}") from exc


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = _stdio.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _emit(args, report: dict, rows: list[dict] | None = None, files: dict | None = None):
    report = {"schema": SCHEMA_VERSION, **report}
    text = io.dump_json(report)
    if args.out:
        import os
        io.write_atomic(os.path.join(args.out, "report.json"), text)
        if rows:
            body = f"# schema {SCHEMA_VERSION}\n" + _csv(rows)
            io.write_atomic(os.path.join(args.out, "report.csv"), body)
        for name, obj in (files or {}).items():
            io.dump_json(obj, os.path.join(args.out, name))
    sys.stdout.write(text)


def _lmax(args, f):
    L = f.K if args.Lmax is None else args.Lmax
    if not 0 <= L <= f.K:
        raise UsageError(f"--Lmax must lie in [0, K={f.K}]")
    return L


def _config(args):
    return {k: getattr(args, k) for k in ("map", "n", "m", "K", "Lmax", "eta", "c", "tol", "seed")
            if getattr(args, k, None) is not None} | {"param": dict(args.param or [])}


# ---------------------------------------------------------------------------


def content_report(f: GridMap, L_max: int, tol: float = 1e-9):
    dp = mapping_content_upper(f, L_max)
    faces = faces_lower_bound(f) if f.n >= 1 else None
    lower = faces.product if faces else 0.0
    report = {"upper": dp.value, "upper_certified": dp.certified, "sampling_slack": dp.sampling_slack,
              "lower": lower, "lower_certified": faces.certified_product if faces else 0.0,
              "sandwich": bool(dp.value + dp.sampling_slack >= lower - tol),
              "L_max": L_max, "cover_size": len(dp.cover)}
    rows = [{"level": q.level, "corner": " ".join(map(str, q.corner)), "method": dp.details[q].method,
             "term": io.real(dp.details[q].value), "contribution": io.real(dp.per_cube[q])}
            for q in dp.cover]
    files = {"dp_certificate.json": io.dp_certificate_to_dict(dp, f)}
    if faces:
        files["faces_certificate.json"] = io.face_certificate_to_dict(faces, f)
    return report, rows, files, dp, faces


def cmd_content(args) -> int:
    f, _ = load_map(args)
    report, rows, files, _, _ = content_report(f, _lmax(args, f), args.tol)
    files["map.json"] = io.gridmap_to_dict(f)
    _emit(args, {"command": "content", "config": _config(args), "map_hash": f.content_hash(), **report},
          rows, files)
    return 0


def continuity_family(name: str, count: int, K: int):
    """Canonical sequences (f_i, f) on n = m = 1."""
    if name == "shrink":
        seq = [GridMap.from_function(lambda x, i=i: np.column_stack([x[:, 0] / i, 0 * x[:, 0]]), 1, 1, K)
               for i in range(1, count + 1)]
        limit = GridMap.from_function(lambda x: np.zeros((len(x), 2)), 1, 1, K)
    elif name == "squash":
        seq = [GridMap.from_function(lambda x, i=i: np.column_stack([x[:, 0], x[:, 1] / i]), 1, 1, K)
               for i in range(1, count + 1)]
        limit = GridMap.from_function(lambda x: np.column_stack([x[:, 0], 0 * x[:, 0]]), 1, 1, K)
    elif name == "constant":
        limit, _ = zoo("projection", 1, 1, K)
        seq = [limit] * count
    else:
        raise UsageError(f"unknown family {name!r}; choose shrink, squash or constant")
    return seq, limit


def _cube_diams(f: GridMap, cover) -> list[float]:
    from .dyadic import cube_lattice_indices
    out = []
    for q in cover:
        img = np.unique(f.values[cube_lattice_indices(q, f.K)])
        out.append(float(f.target.pairwise(img, img).max()))
    return out


def continuity_table(seq: list[GridMap], limit: GridMap, L_max: int, tol: float = 1e-9):
    """Map distances, DP uppers and face lowers along a sequence, with the
    bounds that closeness to the limit forces."""
    ref = mapping_content_upper(limit, L_max, terms="single_set")
    diams = _cube_diams(limit, ref.cover)
    faces_lim = faces_lower_bound(limit) if limit.n else None
    rows, consistent = [], True
    for i, fi in enumerate(seq, start=1):
        dist = map_distance(MapPair(fi, limit)).value
        up = mapping_content_upper(fi, L_max, terms="single_set").value
        pred_up = math.fsum((dm + 2 * dist) ** fi.n * q.side ** fi.m for dm, q in zip(diams, ref.cover))
        lo = faces_lower_bound(fi).product if fi.n else 0.0
        pred_lo = math.prod(max(0.0, a - 2 * dist) for a in faces_lim.axis_distances) if faces_lim else 0.0
        ok = up <= pred_up + tol and lo >= pred_lo - tol
        consistent &= ok
        rows.append({"i": i, "distance": dist, "upper": up, "predicted_upper": pred_up,
                     "lower": lo, "predicted_lower": pred_lo, "consistent": ok})
    limit_info = {"upper": ref.value, "lower": faces_lim.product if faces_lim else 0.0}
    return rows, limit_info, bool(consistent)


def cmd_continuity(args) -> int:
    if args.family:
        seq, limit = continuity_family(args.family, args.count, args.K)
    elif args.config:
        cfg = io.load_json(args.config)
        seq = [io.load_gridmap(p) for p in cfg["maps"]]
        limit = io.load_gridmap(cfg["limit"])
    else:
        raise UsageError("give --family or --config")
    for fi in seq:
        if (fi.n, fi.m, fi.K) != (limit.n, limit.m, limit.K):
            raise UsageError("sequence maps and the limit must share n, m and K")
    L = limit.K if args.Lmax is None else args.Lmax
    try:
        rows, lim, ok = continuity_table(seq, limit, L, args.tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(args, {"command": "continuity", "config": _config(args) | {"family": args.family},
                 "limit": lim, "consistent": ok,
                 "rows": [{k: (io.real(v) if isinstance(v, float) else v) for k, v in r.items()}
                          for r in rows]},
          [{k: (io.real(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows])
    return 0 if ok else 2


def _min_side(args, f):
    return args.min_side if args.min_side is not None else 2.0 ** (1 - f.K)


def cmd_goodcube(args) -> int:
    f, _ = load_map(args)
    w = good_cube_search(f, args.eta, args.c, _min_side(args, f), seed=args.seed or 0)
    files = {"map.json": io.gridmap_to_dict(f)}
    rep = {"command": "goodcube", "config": _config(args), "map_hash": f.content_hash(),
           "found": w is not None}
    if w is not None:
        rep["witness"] = io.witness_to_dict(w)
        files["witness.json"] = rep["witness"]
    else:
        rep["outcome"] = "no witness"
    _emit(args, rep, None, files)
    return 0


def cmd_certify(args) -> int:
    f, _ = load_map(args)
    w = good_cube_search(f, args.eta, args.c, _min_side(args, f), seed=args.seed or 0)
    files = {"map.json": io.gridmap_to_dict(f)}
    rep = {"command": "certify", "config": _config(args), "map_hash": f.content_hash(),
           "found": w is not None}
    if w is None:
        rep["outcome"] = "no witness"
        _emit(args, rep, None, files)
        return 0
    cert = positive_content_certificate(f, w, seed=args.seed or 0)
    content, _, cfiles, dp, _ = content_report(f, _lmax(args, f), args.tol)
    rep["witness"] = io.witness_to_dict(w)
    rep["certificate"] = io.positive_certificate_to_dict(cert)
    rep["content"] = content
    rep["sandwich"] = bool(cert.dyadic_bound <= dp.certified + args.tol)
    files.update({"witness.json": rep["witness"], "positive_certificate.json": rep["certificate"]})
    files.update(cfiles)
    _emit(args, rep, None, files)
    return 0 if rep["sandwich"] else 2


def cmd_verify(args) -> int:
    try:
        cert = io.load_json(args.cert)
        f = io.load_gridmap(args.map_file)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read inputs: {exc}") from exc
    rep = verify(cert, f, args.tol if args.tol is not None else 1e-9)
    _emit(args, {"command": "verify", "type": rep.kind, "passed": rep.passed, "failures": rep.failures})
    return 0 if rep.passed else 2


def cmd_zoo_export(args) -> int:
    args.map = f"zoo:{args.name}"
    f, tf = load_map(args)
    if not args.out:
        raise UsageError("zoo export needs --out FILE")
    io.save_gridmap(f, args.out)
    rep = {"command": "zoo export", "name": args.name, "map_hash": f.content_hash(), "file": args.out,
           "points": f.npoints}
    if tf is not None:
        fac = args.out[:-5] + ".factorization.json" if args.out.endswith(".json") else args.out + ".factorization.json"
        io.dump_json(io.factorization_to_dict(tf), fac)
        rep["factorization"] = fac
    sys.stdout.write(io.dump_json({"schema": SCHEMA_VERSION, **rep}))
    return 0


def _parse_cube(text: str, d: int) -> DyadicCube:
    try:
        level, corner = text.split(":")
        return DyadicCube(int(level), tuple(int(c) for c in corner.split(",")) if corner else (0,) * d)
    except ValueError as exc:
        raise UsageError(f"bad --cube {text!r}: expected LEVEL:c1,c2,... ({exc})") from exc


def cmd_md(args) -> int:
    f, _ = load_map(args)
    cube = _parse_cube(args.cube, f.d) if args.cube else DyadicCube.root(f.d)
    if cube.dim != f.d:
        raise UsageError(f"cube has dimension {cube.dim}, map has d={f.d}")
    lp = md_fit_lp(f, cube, args.C0)
    mat = md_fit_matrix(f, cube, args.restarts, args.C0, args.seed or 0, lp_fit=lp)
    rep = {"command": "md", "config": _config(args), "map_hash": f.content_hash(),
           "cube": {"level": cube.level, "corner": list(cube.corner)}, "C0": args.C0,
           "md_lp": io.real(lp.md_value), "md_matrix": io.real(mat.md_value),
           "matrix_kind": mat.kind, "A": io.reals(mat.A), "clipped": lp.clipped,
           "bracket_ok": bool(lp.md_value <= mat.md_value + 1e-9)}
    _emit(args, rep)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", help="GridMap JSON file or zoo:NAME")
    common.add_argument("--param", action="append", type=_param, metavar="KEY=VALUE",
                        help="zoo parameter (repeatable), e.g. alpha=0.5")
    common.add_argument("--n", type=int, default=1)
    common.add_argument("--m", type=int, default=1)
    common.add_argument("--K", type=int, default=3)
    common.add_argument("--Lmax", type=int)
    common.add_argument("--eta", type=float, default=0.1)
    common.add_argument("--c", type=float, default=0.5)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (file for zoo export)")

    p = _Parser(prog="contentlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("content", parents=[common], help="DP upper bound, faces lower bound")
    s.set_defaults(func=cmd_content)
    s = sub.add_parser("continuity", parents=[common], help="bounds along a sequence of maps")
    s.add_argument("--family", choices=["shrink", "squash", "constant"])
    s.add_argument("--count", type=int, default=8)
    s.add_argument("--config", help="JSON {maps: [files], limit: file}")
    s.set_defaults(func=cmd_continuity)
    for name, fn in (("goodcube", cmd_goodcube), ("certify", cmd_certify)):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--min-side", type=float, dest="min_side")
        s.set_defaults(func=fn)
    s = sub.add_parser("verify", parents=[common], help="replay a certificate against a map file")
    s.add_argument("cert")
    s.add_argument("map_file")
    s.set_defaults(func=cmd_verify)
    z = sub.add_parser("zoo", help="example maps")
    zs = z.add_subparsers(dest="zoo_command", required=True, parser_class=_Parser)
    s = zs.add_parser("export", parents=[common])
    s.add_argument("name", choices=NAMES)
    s.set_defaults(func=cmd_zoo_export)
    s = sub.add_parser("md", parents=[common], help="metric derivative bracket on one cube")
    s.add_argument("--cube", help="LEVEL:c1,c2,... (default: the unit cube)")
    s.add_argument("--C0", type=int, default=1)
    s.add_argument("--restarts", type=int, default=2)
    s.set_defaults(func=cmd_md)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for key in ("tol", "eta", "c"):
        val = getattr(args, key, None)
        if val is not None and not val > 0:
            sys.stderr.write(f"contentlab: error: --{key} must be positive\n")
            return 1
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"contentlab: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
