"""Command-line front end.

    qpcf scheme validate FILE
    qpcf tree analyze FILE [--keep V,...] [--cover FILE]
    qpcf lam pullback|classes FILE [--depth K]
    qpcf lam parallel PLUS MINUS [--depth K]
    qpcf blaschke eval FILE --z RE IM
    qpcf blaschke mark FILE --angle P/Q [--depth K]
    qpcf blaschke tree FILE [--cluster-gap G] [--attach-radius R] [--K K]
    qpcf spheres validate FILE [--tol T]
    qpcf mate --plus FILE --minus FILE [--max-depth K]

Exit status: 0 success, 1 negative verdict (obstructed, parallel, invalid),
2 bad input. Reports are JSON with sorted keys.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import blaschke, lamination as lam, mating, render, treedyn, treesphere
from .errors import InputError, QpcfError

MAX_DEPTH = 64


class ParseError(InputError):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as e:
        raise ParseError(f"{path}: file not found") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e


def _depth(x) -> int:
    k = int(x)
    if not 0 <= k <= MAX_DEPTH:
        raise argparse.ArgumentTypeError(f"depth must lie in [0, {MAX_DEPTH}]")
    return k


def _unit(x) -> float:
    v = float(x)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("tolerance must lie in (0, 1)")
    return v


def _positive(x) -> float:
    v = float(x)
    if not v > 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = [_jsonable(v) for v in x]
        return sorted(items, key=json.dumps) if isinstance(x, (set, frozenset)) else items
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "tolist"):
        return _jsonable(x.tolist())
    if isinstance(x, float) and x != x:
        return None
    if isinstance(x, float) and x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return x


def _figure_stem(args) -> str:
    if args.out:
        return os.path.splitext(args.out)[0]
    return "qpcf_" + "_".join(a for a in (args.group, getattr(args, "action", None)) if a)


def _render(args, report, objs, titles):
    if not args.render:
        return
    stem = _figure_stem(args)
    figs = []
    for k, o in enumerate(objs):
        path = f"{stem}.svg" if len(objs) == 1 else f"{stem}_{k}.svg"
        figs.append(render.render_svg(o, path))
    figs.append(render.render_png(objs, f"{stem}.png", titles))
    report["figures"] = figs


# ---- commands

def cmd_scheme(args):
    S = treedyn.scheme_from_json(_read_json(args.file))
    try:
        return {"valid": True, "degree": treedyn.validate_scheme(S)}, 0
    except treedyn.HyperbolicityViolated as e:
        return {"valid": False, "error": "HyperbolicityViolated", "cycle": e.cycle}, 1
    except treedyn.MinimalityViolated as e:
        return {"valid": False, "error": "MinimalityViolated", "vertex": e.vertex}, 1


def cmd_tree(args):
    T = treedyn.tree_from_json(_read_json(args.file))
    report = {"notes": []}
    if not T.is_simplicial():
        try:
            T, added = treedyn.subdivide(T)
            report["subdivided"] = [T.labels[v] for v in added]
        except treedyn.NotSimplicial as e:
            report["notes"].append(f"left unsubdivided: {e}")
    E = treedyn.markov_degree_matrices(T)
    v = treedyn.solve_eigen_MD(E)
    report.update({"M": E.M, "D": E.D, "v": v,
                   "lambda": treedyn.spectral_radius(E.DinvM()) if E.size else 0.0})
    if args.keep:
        idx = {str(l): k for k, l in enumerate(T.labels)}
        try:
            keep = [idx[k.strip()] for k in args.keep.split(",")]
        except KeyError as e:
            raise ParseError(f"--keep names unknown vertex {e}") from e
    else:
        keep = sorted(T.marked)
    if keep:
        R = treedyn.convex_hull_subtree(T, keep)
        report["reduced"] = {"vertices": [T.labels[x] for x in R.vertices],
                             "edges": [[T.labels[a], T.labels[b]] for a, b in R.edges],
                             "M": R.matrices.M, "D": R.matrices.D,
                             "v": treedyn.solve_eigen_MD(R.matrices), "notes": R.notes}
    anchored = all(k in T.anchors for k, c in enumerate(T.components()) if any(T.ribbon[x] for x in c))
    if anchored and T.is_simplicial():
        L = treedyn.dual_lamination(T, auto_subdivide=False)
        report["dual_lamination"] = lam.lamination_to_json(L)
        _render(args, report, [L], ["dual lamination"])
    status = 0
    if args.cover:
        C = treedyn.cover_from_json(_read_json(args.cover))
        res = treedyn.thurston_matrix(C, args.tol)
        report["thurston"] = {"A": res.A, "lambda": res.lam, "obstructed": res.obstructed,
                              "exact_obstructed": res.exact}
        status = 1 if res.obstructed else 0
    return report, status


def _load_lam(path, depth=None):
    obj = _read_json(path)
    if "trees" in obj:
        L, P = mating.lamination_of(mating.hubbard_from_json(obj), 0)
    else:
        L, P = lam.lamination_from_json(obj)
        lam.validate_lamination(L)
    if depth:
        if P is None:
            raise ParseError(f"{path}: pulling back needs a critical portrait")
        L = lam.pullback_lamination(L, P, depth)
    return L, P


def cmd_lam(args):
    if args.action == "pullback":
        L, P = _load_lam(args.files[0], args.depth)
        report = lam.lamination_to_json(L, P)
        _render(args, report, [L], ["pullback"])
        return report, 0
    if args.action == "classes":
        L, P = _load_lam(args.files[0], args.depth)
        report = {"degree": L.degree, "depth": L.depth,
                  "classes": lam.classes_to_json(lam.equivalence_classes(L))}
        _render(args, report, [L], ["classes"])
        return report, 0
    if len(args.files) != 2:
        raise ParseError("lam parallel needs two lamination files")
    Lp, _ = _load_lam(args.files[0], args.depth)
    Lm, _ = _load_lam(args.files[1], args.depth)
    res = lam.parallel_test(Lp, Lm, args.depth or max(Lp.depth, Lm.depth))
    if isinstance(res, lam.Parallel):
        report = {"verdict": "Parallel", "certificate": [str(a) for a in res.certificate.cycle],
                  "depth": res.depth}
        status = 1
    else:
        report = {"verdict": "NonParallel", "report": res.report}
        status = 0
    _render(args, report, [Lp, Lm.reflected()], ["plus", "minus (reflected)"])
    return report, status


def cmd_blaschke(args):
    FS = blaschke.scheme_from_json(_read_json(args.file))
    s = args.vertex or FS.scheme.vertices[0]
    if s not in FS.maps:
        raise ParseError(f"unknown scheme vertex {s!r}")
    f = FS.maps[s]
    if args.action == "eval":
        if args.z is None:
            raise ParseError("blaschke eval needs --z RE IM")
        z = complex(*args.z)
        return {"vertex": s, "z": z, "value": blaschke.bp_eval(f, z),
                "critical_points": blaschke.bp_critical_points(f)}, 0
    if args.action == "mark":
        if args.angle is None:
            raise ParseError("blaschke mark needs --angle")
        t = lam.parse_angle(args.angle)
        x = blaschke.marking_eval(f, t, args.depth if args.depth is not None else MAX_DEPTH)
        return {"vertex": s, "angle": str(t), "eta": x,
                "fixed_point": blaschke.continued_fixed_point(f)}, 0
    w = blaschke.quasi_pcf_witness([FS], args.K, [0], (args.max_l, args.max_q))[0]
    forest, Fmap, rep = blaschke.extract_tree(FS, w, args.cluster_gap, args.attach_radius)
    report = {"witness": [[str(lab), l, q, g] for lab, l, q, g in w.entries],
              "spines": {str(k): sp.to_json() for k, sp in forest.spines.items()},
              "F": {f"{a}:{v}": f"{b}:{u}" for (a, v), (b, u) in Fmap.items()},
              "report": rep.as_dict()}
    spines = [forest.spines[k] for k in sorted(forest.spines, key=str)]
    _render(args, report, spines, [str(k) for k in sorted(forest.spines, key=str)])
    return report, 0


def cmd_spheres(args):
    TS = treesphere.spheres_from_json(_read_json(args.file))
    rep = treesphere.validate_tree_of_spheres(TS, args.tol)
    degs = {}
    if rep["pass"]:
        for a, b in TS.edges:
            degs[f"{a}-{b}"] = treesphere.edge_local_degree(TS, (a, b))
    rep["edge_degrees"] = degs
    return rep, 0 if rep["pass"] else 1


def cmd_mate(args):
    Lp, Pp = mating.load_mating_input(args.plus)
    Lm, Pm = mating.load_mating_input(args.minus)
    v = mating.mateability(Lp, Lm, args.max_depth, (Pp, Pm))
    report = v.to_json()
    if args.render:
        k = v.depth_used
        Pk = lam.pullback_lamination(Lp, Pp, k)
        Mk = lam.pullback_lamination(Lm, Pm, k)
        _render(args, report, [Pk, Mk.reflected()], ["plus", "minus (reflected)"])
    return report, 1 if v.outcome == "Obstructed" else 0


# ---- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--depth", type=_depth, default=None, help="pullback / digit depth (<= 64)")
    common.add_argument("--tol", type=_unit, default=1e-9)
    common.add_argument("--cluster-gap", type=_positive, default=1.0)
    common.add_argument("--attach-radius", type=_positive, default=1.0)
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    common.add_argument("--render", action="store_true", help="write SVG and PNG figures next to the report")

    p = argparse.ArgumentParser(prog="qpcf", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="group", required=True)

    sc = sub.add_parser("scheme").add_subparsers(dest="action", required=True)
    q = sc.add_parser("validate", parents=[common])
    q.add_argument("file")

    tr = sub.add_parser("tree").add_subparsers(dest="action", required=True)
    q = tr.add_parser("analyze", parents=[common])
    q.add_argument("file")
    q.add_argument("--keep", default=None, help="comma-separated vertex labels")
    q.add_argument("--cover", default=None, help="curve cover file for the Thurston matrix")

    la = sub.add_parser("lam").add_subparsers(dest="action", required=True)
    for name in ("pullback", "classes", "parallel"):
        q = la.add_parser(name, parents=[common])
        q.add_argument("files", nargs="+")

    bl = sub.add_parser("blaschke").add_subparsers(dest="action", required=True)
    for name in ("eval", "mark", "tree"):
        q = bl.add_parser(name, parents=[common])
        q.add_argument("file")
        q.add_argument("--vertex", default=None)
        q.add_argument("--z", type=float, nargs=2, default=None, metavar=("RE", "IM"))
        q.add_argument("--angle", default=None)
        q.add_argument("--K", type=_positive, default=1.0)
        q.add_argument("--max-l", type=int, default=8)
        q.add_argument("--max-q", type=int, default=8)

    sp = sub.add_parser("spheres").add_subparsers(dest="action", required=True)
    q = sp.add_parser("validate", parents=[common])
    q.add_argument("file")

    q = sub.add_parser("mate", parents=[common])
    q.add_argument("--plus", required=True)
    q.add_argument("--minus", required=True)
    q.add_argument("--max-depth", type=_depth, default=8)
    return p


COMMANDS = {"scheme": cmd_scheme, "tree": cmd_tree, "lam": cmd_lam, "blaschke": cmd_blaschke,
            "spheres": cmd_spheres, "mate": cmd_mate}


def dumps(report) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        report, status = COMMANDS[args.group](args)
    except InputError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except QpcfError as e:
        report, status = {"error": type(e).__name__, "message": str(e)}, 1
    text = dumps(report)
    if args.out:
        try:
            with open(args.out, "w", newline="\n") as fh:
                fh.write(text)
        except OSError as e:
            print(f"error: cannot write {args.out}: {e}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return status


def main() -> None:
    sys.exit(run())
