"""Command-line interface.  Every command prints one key-sorted JSON line.

Exit status: 0 on success, 1 on a domain error (bad instance, infeasible
k, mismatched diagram, unreadable file), 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import diagram as dg
from .geometry import GeometryError, Translation
from .instances import (InstanceFile, format_p, gen_grid_instance, gen_random_instance,
                        read_instance, write_instance)
from .matching import brute_force_oracle, solve_exact
from .search import (const_factor_search, disk_eating_search, eps_optimum_search,
                     random_sample_search)
from .svg import export_svg

KIND_FLAGS = {"voronoi3": dg.VORONOI3, "voronoi-cluster": dg.VORONOI_CLUSTER,
              "eps": dg.EPS_T, "cluster-eps": dg.EPS_CLUSTER}


def _translation(text: str) -> Translation:
    try:
        dx, dy = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected dx,dy but got {text!r}") from None
    if not (math.isfinite(dx) and math.isfinite(dy)):
        raise argparse.ArgumentTypeError("translation must be finite")
    return Translation(dx, dy)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _emit(doc, out=None):
    out = out or sys.stdout
    out.write(json.dumps(_json_safe(doc), sort_keys=True, separators=(",", ":")) + "\n")


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load(args):
    inst = read_instance(args.instance)
    A, B = inst.arrays()
    return inst, A, B


def _load_diagram(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise dg.DiagramError(f"{path}: not a JSON diagram ({exc.msg})") from None
    return dg.from_json(doc)


def cmd_solve(args):
    inst, A, B = _load(args)
    solver = brute_force_oracle if args.oracle else solve_exact
    res = solver(A, B, inst.k, inst.p, args.t)
    _emit({"cost": res.cost, "method": "oracle" if args.oracle else "exact",
           "pairs": [list(pq) for pq in res.matching], "translation": list(args.t)})


def cmd_optimize(args):
    inst, A, B = _load(args)
    if args.algo == "exhaustive":
        res = const_factor_search(A, B, inst.k, inst.p, args.delta)
    elif args.algo == "grid":
        res = eps_optimum_search(A, B, inst.k, inst.p, args.eps)
    elif args.algo == "random":
        res = random_sample_search(A, B, inst.k, inst.p, args.eps, args.samples, args.seed)
    else:
        res = disk_eating_search(A, B, inst.k, inst.p, args.eps, args.delta)
    _emit(res.to_json())


def cmd_diagram_build(args):
    inst, A, B = _load(args)
    kind = KIND_FLAGS[args.kind]
    if kind == dg.VORONOI3:
        d = dg.build_voronoi3_diagram(A, B, inst.k, inst.p, args.delta)
    elif kind == dg.VORONOI_CLUSTER:
        d = dg.build_cluster_voronoi_diagram(A, B, inst.k, inst.p, args.delta)
    else:
        d = dg.build_eps_diagram(A, B, inst.k, inst.p, args.eps, kind)
    doc = dg.to_json(d)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(_json_safe(doc), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    _emit({"eps": d.eps, "faceCount": dg.diagram_face_count(d), "guaranteeFactor": d.guarantee_factor,
           "instanceHash": d.instance_hash, "kind": d.kind, "levelCount": d.level_count,
           "out": args.out, "sites": len(d.sites)})


def cmd_diagram_query(args):
    inst, A, B = _load(args)
    d = _load_diagram(args.diagram)
    face, M, cost = dg.query_diagram(d, args.t, A, B, inst.k, inst.p)
    if args.save:
        with open(args.diagram, "w", encoding="utf-8") as fh:
            json.dump(_json_safe(dg.to_json(d)), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    _emit({"cost": cost, "depth": face.depth, "i": face.i, "j": face.j, "level": face.level,
           "matching": [list(pq) for pq in M], "region": face.region, "site": face.site,
           "translation": list(args.t)})


def cmd_diagram_verify(args):
    inst, A, B = _load(args)
    d = _load_diagram(args.diagram)
    rep = dg.verify_diagram(d, A, B, inst.k, inst.p, args.samples, args.seed)
    rep["withinGuarantee"] = rep["maxRatio"] <= d.guarantee_factor + 1e-6
    _emit(rep)


def cmd_gen(args):
    if args.shape == "random":
        inst = gen_random_instance(args.m, args.n, args.k, args.p, args.box, args.seed)
    else:
        inst = gen_grid_instance(args.m_side, args.n_side, args.k, args.p)
    _write(args.out, write_instance(inst))


def cmd_export_svg(args):
    d = _load_diagram(args.diagram)
    _write(args.out, export_svg(d, show_grids=not args.no_grids))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geomatch", description="Partial point matching under translation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_instance(p):
        p.add_argument("--instance", required=True, help="instance file (text or JSON)")
        return p

    p = with_instance(sub.add_parser("solve", help="optimal k-matching at a fixed translation"))
    p.add_argument("--t", type=_translation, default=Translation(0.0, 0.0), metavar="DX,DY")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="min-cost flow solver (default)")
    g.add_argument("--oracle", action="store_true", help="brute-force enumeration")
    p.set_defaults(fn=cmd_solve)

    p = with_instance(sub.add_parser("optimize", help="search for a good translation"))
    p.add_argument("--algo", choices=["exhaustive", "grid", "random", "cluster"], default="exhaustive")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1, help="rounds of the randomized search")
    p.set_defaults(fn=cmd_optimize)

    dia = sub.add_parser("diagram", help="build, query or verify a matching diagram")
    dsub = dia.add_subparsers(dest="action", required=True)
    p = with_instance(dsub.add_parser("build"))
    p.add_argument("--kind", choices=sorted(KIND_FLAGS), default="voronoi3")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--out", help="write the diagram JSON here")
    p.set_defaults(fn=cmd_diagram_build)
    p = with_instance(dsub.add_parser("query"))
    p.add_argument("--diagram", required=True)
    p.add_argument("--t", type=_translation, required=True, metavar="DX,DY")
    p.add_argument("--save", action="store_true", help="write newly memoized faces back")
    p.set_defaults(fn=cmd_diagram_query)
    p = with_instance(dsub.add_parser("verify"))
    p.add_argument("--diagram", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_diagram_verify)

    gen = sub.add_parser("gen", help="generate an instance file")
    gsub = gen.add_subparsers(dest="shape", required=True)
    p = gsub.add_parser("random")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", default="2")
    p.add_argument("--box", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_gen)
    p = gsub.add_parser("grid")
    p.add_argument("--m-side", type=int, required=True)
    p.add_argument("--n-side", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", default="2")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("export-svg", help="render a diagram as SVG")
    p.add_argument("--diagram", required=True)
    p.add_argument("--out")
    p.add_argument("--no-grids", action="store_true")
    p.set_defaults(fn=cmd_export_svg)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "delta", 0) is None:
        args.delta = 0.0 if args.algo == "exhaustive" else 1.0
    try:
        args.fn(args)
    except (GeometryError, OSError) as exc:
        print(f"geomatch: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
