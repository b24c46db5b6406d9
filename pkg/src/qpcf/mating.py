"""Mateability of two postcritically finite polynomials via their laminations.

Pipeline: Hubbard tree -> dual lamination -> critical portrait -> pullbacks
to increasing depth -> parallel test at each depth.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import InputError, QpcfError
from .lamination import (Angle, CriticalPortrait, DepthInsufficient, Lamination, Leaf, Parallel,
                         ParallelCertificate, angle_preimages, check_certificate, lamination_from_json,
                         leaves_linked, map_angle, parallel_test, parse_angle, pullback_lamination,
                         standard_portrait)
from .treedyn import (NotSimplicial, RibbonTreeMap, _dart_ends, boundary_circuit, dual_lamination,
                      landing_angles, tree_from_json)


class DepthExhausted(QpcfError):
    def __init__(self, depth, report=None):
        self.depth, self.report = depth, report or {}
        super().__init__(f"no verdict within depth {depth}")


class PortraitNotFound(QpcfError):
    pass


@dataclass
class HubbardTreeInput:
    tree: RibbonTreeMap
    degree: int
    portrait: Optional[CriticalPortrait] = None

    def __post_init__(self):
        T = self.tree
        if len(T.components()) != 1:
            raise InputError("a Hubbard tree must be a single tree")
        total = 1 + sum(x - 1 for x in T.delta_v)
        if total != self.degree:
            raise InputError(f"local degrees give degree {total}, declared {self.degree}")
        if T.edges and 0 not in T.anchors:
            raise InputError("Hubbard tree with edges needs an anchor side")


def hubbard_is_simplicial(H: HubbardTreeInput) -> tuple[bool, list[str]]:
    T = H.tree
    diag = []
    for e, (i, j) in enumerate(T.edges):
        name = f"edge {e} ({T.labels[i]}-{T.labels[j]})"
        try:
            img = T.edge_image(e)
        except NotSimplicial:
            diag.append(f"{name} collapses to a vertex")
            continue
        if len(img) != 1:
            diag.append(f"{name} maps onto a path of {len(img)} edges")
    return not diag, diag


# ---- critical portrait from the tree

def _regions(T: RibbonTreeMap, t: dict) -> dict:
    """Closed angle arcs (lo, hi) with lo <= hi < lo + 1, per vertex corner."""
    reg = {v: [] for v in range(T.n_vertices)}
    if not T.edges:
        return {v: [(Fraction(0), Fraction(1))] for v in reg}
    circ = boundary_circuit(T, T.anchors[0])
    n = len(circ)
    for k, a in enumerate(circ):
        b = circ[(k + 1) % n]
        _, v = _dart_ends(T, a)
        lo, hi = Fraction(t[a]), Fraction(t[b])
        if k == n - 1:
            hi += 1
        reg[v].append((lo, hi))
    return reg


def _in_region(x, arcs, strict: bool) -> bool:
    x = Fraction(x)
    for lo, hi in arcs:
        for y in (x, x + 1):
            if (lo < y < hi) if strict else (lo <= y <= hi):
                return True
    return False


def _candidates(d: int, max_period: int, max_preperiod: int):
    """Rationals in [0, 1) ordered by (period, preperiod, value)."""
    seen = set()
    for n in range(1, max_period + 1):
        for m in range(max_preperiod + 1):
            q = d ** m * (d ** n - 1)
            for p in range(q):
                y = Angle(p, q)
                if y not in seen:
                    seen.add(y)
                    yield y


def _follows(y, w, F, regions, d, support) -> bool:
    """y's forward orbit stays strictly inside the regions of w's vertex orbit
    until the pair (angle, vertex) repeats, and never meets a leaf endpoint."""
    seen = set()
    while (y, w) not in seen:
        if y in support or not _in_region(y, regions[w], strict=True):
            return False
        seen.add((y, w))
        y, w = map_angle(y, d), F[w]
    return True


def derive_portrait(T: RibbonTreeMap, L: Lamination, max_period: int = 12,
                    max_preperiod: int = 4) -> CriticalPortrait:
    """Critical chords inside the gap at each critical vertex.

    For a critical vertex v, pick the first value y whose orbit follows the
    orbit of F(v) through the corner regions of the dual lamination and avoids
    leaf endpoints. Its delta(v) preimages in the region of v are joined by a
    fan of chords.
    """
    d = L.degree
    crit = [v for v in range(T.n_vertices) if T.delta_v[v] >= 2]
    if not T.edges:
        return standard_portrait(d)
    t = landing_angles(T)
    regions = _regions(T, t)
    support = L.support()
    chords: list[Leaf] = []
    for v in crit:
        k = T.delta_v[v]
        found = None
        for y in _candidates(d, max_period, max_preperiod):
            if not _follows(y, T.F[v], T.F, regions, d, support):
                continue
            pre = [x for x in angle_preimages(y, d) if _in_region(x, regions[v], strict=True)]
            if len(pre) != k:
                continue
            fan = [Leaf(pre[0], x) for x in pre[1:]]
            if any(leaves_linked(c, l) for c in fan for l in list(L.leaves) + chords):
                continue
            found = fan
            break
        if found is None:
            raise PortraitNotFound(f"no critical chord found at vertex {T.labels[v]!r}")
        chords.extend(found)
    return CriticalPortrait(tuple(chords), d)


def lamination_of(H: HubbardTreeInput, depth: int) -> tuple[Lamination, CriticalPortrait]:
    ok, diag = hubbard_is_simplicial(H)
    if not ok:
        raise NotSimplicial("; ".join(diag))
    L0 = dual_lamination(H.tree, auto_subdivide=False)
    L0 = Lamination(L0.leaves, H.degree, 0)
    P = H.portrait or derive_portrait(H.tree, L0)
    return pullback_lamination(L0, P, depth), P


# ---- verdicts

@dataclass(frozen=True)
class MatingVerdict:
    outcome: str            # "Mateable" or "Obstructed"
    certificate: object     # ParallelCertificate or stabilization report
    depth_used: int

    def to_json(self) -> dict:
        if isinstance(self.certificate, ParallelCertificate):
            cert = [str(a) for a in self.certificate.cycle]
        else:
            cert = self.certificate
        return {"outcome": self.outcome, "certificate": cert, "depth": self.depth_used}


def mateability(Lp: Lamination, Lm: Lamination, max_depth: int,
                portraits: tuple = (None, None)) -> MatingVerdict:
    """Pull both laminations back one generation at a time and run the
    parallel test at each depth. Obstructed on the first cycle; Mateable once
    the shared-angle structure is unchanged across two consecutive depths."""
    if Lp.degree != Lm.degree:
        raise InputError("laminations have different degrees")
    if max_depth < 0 or max_depth > 64:
        raise InputError("max depth must lie in [0, 64]")
    Pp = portraits[0] or standard_portrait(Lp.degree)
    Pm = portraits[1] or standard_portrait(Lm.degree)
    P = Lamination(Lp.leaves, Lp.degree, 0)
    M = Lamination(Lm.leaves, Lm.degree, 0)
    report = {}
    for k in range(max_depth + 1):
        if k:
            P = pullback_lamination(P, Pp, 1)
            M = pullback_lamination(M, Pm, 1)
        try:
            res = _parallel_at(P, M, k)
        except DepthInsufficient as e:
            report = e.report
            continue
        if isinstance(res, Parallel):
            return MatingVerdict("Obstructed", res.certificate, res.depth)
        if k >= 1:
            rep = dict(res.report)
            rep["stable_depths"] = [k - 1, k]
            return MatingVerdict("Mateable", rep, k)
    raise DepthExhausted(max_depth, report)


def _parallel_at(P: Lamination, M: Lamination, k: int):
    return parallel_test(P, M, k)


def validate_verdict(v: MatingVerdict, Lp: Lamination, Lm: Lamination) -> bool:
    if v.outcome != "Obstructed":
        return True
    return check_certificate(v.certificate, Lp.truncate(v.depth_used), Lm.truncate(v.depth_used))


# ---- io

def hubbard_from_json(obj) -> HubbardTreeInput:
    T = tree_from_json(obj)
    d = obj.get("degree") or 1 + sum(x - 1 for x in T.delta_v)
    P = None
    if obj.get("portrait"):
        P = CriticalPortrait(tuple(Leaf(parse_angle(a), parse_angle(b)) for a, b in obj["portrait"]), int(d))
    return HubbardTreeInput(T, int(d), P)


def load_mating_input(path, depth: int = 0) -> tuple[Lamination, CriticalPortrait]:
    """A Hubbard tree file (has "trees") or a lamination file with a portrait."""
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: {e}") from e
    if "trees" in obj:
        return lamination_of(hubbard_from_json(obj), depth)
    L, P = lamination_from_json(obj)
    if P is None:
        if L.leaves:
            raise InputError(f"{path}: a lamination with leaves needs a critical portrait")
        P = standard_portrait(L.degree)
    return L, P
