"""Exact angles in Q/Z, chords, laminations and the parallel test.

Everything here is exact rational arithmetic. No floats.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InputError, QpcfError


class LinkedLeaves(InputError):
    def __init__(self, pairs):
        self.pairs = list(pairs)
        super().__init__(f"{len(self.pairs)} linked leaf pair(s), first: {self.pairs[:1]}")


class PortraitIncompatible(InputError):
    pass


class LinkedResult(QpcfError):
    pass


class DepthInsufficient(QpcfError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"incidence structure not stable at depth {report.get('depth')}")


# ---------------------------------------------------------------- angles

class Angle(Fraction):
    """A rational number reduced mod 1, so 0 <= value < 1."""

    def __new__(cls, numerator=0, denominator=None):
        if isinstance(numerator, str) and denominator is None:
            f = Fraction(numerator.strip())
        else:
            f = Fraction(numerator, denominator)
        f = f - (f.numerator // f.denominator)
        return super().__new__(cls, f.numerator, f.denominator)

    def __repr__(self):
        return f"Angle({self.numerator}/{self.denominator})"

    def __str__(self):
        return f"{self.numerator}/{self.denominator}"


def as_angle(x) -> Angle:
    return x if isinstance(x, Angle) else Angle(x)


def map_angle(t, d: int) -> Angle:
    return Angle(d * Fraction(t))


def angle_preimages(t, d: int) -> list[Angle]:
    t = as_angle(t)
    return [Angle((t + j) / d) for j in range(d)]


def reflect(t) -> Angle:
    return Angle(-Fraction(t))


def in_open_arc(x, a, b) -> bool:
    """True if x lies strictly inside the counterclockwise arc from a to b."""
    if a < b:
        return a < x < b
    return x > a or x < b


# ---------------------------------------------------------------- leaves

@dataclass(frozen=True, order=True)
class Leaf:
    a: Angle
    b: Angle

    def __post_init__(self):
        a, b = as_angle(self.a), as_angle(self.b)
        if a == b:
            raise InputError(f"degenerate leaf with equal endpoints {a}")
        if b < a:
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def endpoints(self) -> tuple[Angle, Angle]:
        return (self.a, self.b)

    def image(self, d: int) -> "Leaf | None":
        x, y = map_angle(self.a, d), map_angle(self.b, d)
        return None if x == y else Leaf(x, y)

    def reflected(self) -> "Leaf":
        return Leaf(reflect(self.a), reflect(self.b))

    def __str__(self):
        return f"{{{self.a},{self.b}}}"


def leaf(a, b) -> Leaf:
    return Leaf(as_angle(a), as_angle(b))


def leaves_linked(l1: Leaf, l2: Leaf) -> bool:
    inside = sum(in_open_arc(x, l1.a, l1.b) for x in l2.endpoints if x not in l1.endpoints)
    shared = len(set(l1.endpoints) & set(l2.endpoints))
    return shared == 0 and inside == 1


def first_crossing(leaves: Iterable[Leaf]) -> tuple[Leaf, Leaf] | None:
    """Sweep for a linked pair in O(n log n). Returns one pair or None."""
    ivs = sorted(set(leaves), key=lambda l: (l.a, -l.b))
    stack: list[Leaf] = []
    for cur in ivs:
        while stack and stack[-1].b <= cur.a:
            stack.pop()
        if stack and cur.b > stack[-1].b and cur.a > stack[-1].a:
            return stack[-1], cur
        stack.append(cur)
    return None


# ---------------------------------------------------------------- laminations

@dataclass(frozen=True)
class Lamination:
    leaves: frozenset
    degree: int = 2
    depth: int = 0
    # pullback generation of each leaf; base leaves are generation 0
    generation: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.degree < 2:
            raise InputError("degree must be at least 2")
        object.__setattr__(self, "leaves", frozenset(self.leaves))

    @classmethod
    def of(cls, pairs, degree: int = 2, depth: int = 0) -> "Lamination":
        return cls(frozenset(p if isinstance(p, Leaf) else leaf(*p) for p in pairs), degree, depth)

    def gen(self, l: Leaf) -> int:
        return self.generation.get(l, 0)

    def truncate(self, depth: int) -> "Lamination":
        keep = {l for l in self.leaves if self.gen(l) <= depth}
        return Lamination(frozenset(keep), self.degree, min(depth, self.depth),
                          {l: self.gen(l) for l in keep})

    def reflected(self) -> "Lamination":
        gens = {l.reflected(): self.gen(l) for l in self.leaves}
        return Lamination(frozenset(gens), self.degree, self.depth, gens)

    def support(self) -> set[Angle]:
        return {x for l in self.leaves for x in l.endpoints}

    def sorted_leaves(self) -> list[Leaf]:
        return sorted(self.leaves)

    def __len__(self):
        return len(self.leaves)


def linked_pairs(leaves: Sequence[Leaf]) -> list[tuple[Leaf, Leaf]]:
    ls = sorted(leaves)
    return [(p, q) for p, q in itertools.combinations(ls, 2) if leaves_linked(p, q)]


def validate_lamination(L: Lamination, raise_on_error: bool = True):
    """Return True if no two leaves are linked; else raise or return the pairs."""
    if first_crossing(L.leaves) is None:
        return True
    pairs = linked_pairs(L.leaves)
    if raise_on_error:
        raise LinkedLeaves(pairs)
    return pairs


@dataclass(frozen=True)
class CriticalPortrait:
    chords: tuple
    degree: int

    def __post_init__(self):
        chords = tuple(sorted(c if isinstance(c, Leaf) else leaf(*c) for c in self.chords))
        object.__setattr__(self, "chords", chords)
        if len(chords) != self.degree - 1:
            raise InputError(f"portrait needs {self.degree - 1} chords, got {len(chords)}")
        for c in chords:
            if map_angle(c.a, self.degree) != map_angle(c.b, self.degree):
                raise InputError(f"portrait chord {c} is not critical for degree {self.degree}")
        bad = linked_pairs(chords)
        if bad:
            raise InputError(f"portrait chords linked: {bad[0]}")

    def separates(self, x: Angle, y: Angle) -> bool:
        for c in self.chords:
            if x in c.endpoints or y in c.endpoints:
                continue
            if in_open_arc(x, c.a, c.b) != in_open_arc(y, c.a, c.b):
                return True
        return False


def standard_portrait(d: int) -> CriticalPortrait:
    """Chords {0, j/d} for j = 1..d-1: a fan from angle 0."""
    return CriticalPortrait(tuple(leaf(0, Fraction(j, d)) for j in range(1, d)), d)


def leaf_preimages(l: Leaf, portrait: CriticalPortrait) -> list[Leaf]:
    """The d preimage chords of a leaf, matched so none crosses the portrait."""
    d = portrait.degree
    pa, pb = angle_preimages(l.a, d), angle_preimages(l.b, d)
    ok = [[not portrait.separates(x, y) for y in pb] for x in pa]
    found: list[list[Leaf]] = []

    def extend(i, used, acc):
        if len(found) > 1:
            return
        if i == d:
            if first_crossing(acc) is None and not any(
                leaves_linked(c, p) for c in acc for p in portrait.chords
            ):
                found.append(list(acc))
            return
        for j in range(d):
            if j not in used and ok[i][j]:
                acc.append(Leaf(pa[i], pb[j]))
                extend(i + 1, used | {j}, acc)
                acc.pop()

    extend(0, frozenset(), [])
    if len(found) != 1:
        why = "no" if not found else "more than one"
        raise PortraitIncompatible(f"{why} admissible preimage matching for leaf {l}")
    return found[0]


def pullback_lamination(L: Lamination, portrait: CriticalPortrait, depth: int,
                        check: bool = True) -> Lamination:
    if portrait.degree != L.degree:
        raise PortraitIncompatible("portrait degree differs from lamination degree")
    if depth < 0:
        raise InputError("depth must be nonnegative")
    gens = {l: L.gen(l) for l in L.leaves}
    base = max(gens.values(), default=0)
    frontier = [l for l in L.leaves if gens[l] == base] if L.depth else list(L.leaves)
    for g in range(1, depth + 1):
        new = []
        for l in sorted(frontier):
            for p in leaf_preimages(l, portrait):
                if p not in gens:
                    gens[p] = L.depth + g
                    new.append(p)
        frontier = new
        if not frontier:
            break
    out = Lamination(frozenset(gens), L.degree, L.depth + depth, gens)
    if check:
        bad = first_crossing(out.leaves)
        if bad is not None:
            raise LinkedResult(f"pullback produced linked leaves {bad[0]} and {bad[1]}")
    return out


# ---------------------------------------------------------------- classes

class _DSU:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


@dataclass(frozen=True)
class EquivClasses:
    classes: tuple  # tuple of sorted tuples of Angles, sorted by min element

    def index(self) -> dict:
        return {x: i for i, c in enumerate(self.classes) for x in c}

    def as_sets(self) -> set[frozenset]:
        return {frozenset(c) for c in self.classes}


def equivalence_classes(L: Lamination) -> EquivClasses:
    dsu = _DSU()
    for l in L.leaves:
        dsu.union(l.a, l.b)
    groups: dict = {}
    for x in list(dsu.parent):
        groups.setdefault(dsu.find(x), []).append(x)
    return EquivClasses(tuple(sorted(tuple(sorted(g)) for g in groups.values())))


# ---------------------------------------------------------------- parallel test

@dataclass(frozen=True)
class ParallelCertificate:
    cycle: tuple  # a_0, b_0, a_1, b_1, ...

    @property
    def pairs(self) -> list[tuple[Angle, Angle]]:
        c = self.cycle
        return [(c[2 * i], c[2 * i + 1]) for i in range(len(c) // 2)]


@dataclass(frozen=True)
class Parallel:
    certificate: ParallelCertificate
    depth: int = 0


@dataclass(frozen=True)
class NonParallel:
    report: dict


def _incidence_cycle(cp: EquivClasses, cm: EquivClasses):
    """Find a cycle in the bipartite class multigraph joined by shared angles.

    Returns the cycle as an alternating angle list a_0, b_0, ... or None.
    """
    ip, im = cp.index(), cm.index()
    shared = sorted(set(ip) & set(im))
    # nodes: ('p', i) and ('m', j); edges labelled by shared angle
    adj: dict = {}
    for t in shared:
        u, v = ("p", ip[t]), ("m", im[t])
        adj.setdefault(u, []).append((v, t))
        adj.setdefault(v, []).append((u, t))
    seen: dict = {}
    for root in sorted(adj):
        if root in seen:
            continue
        seen[root] = (None, None)
        order = [root]
        stack = [root]
        while stack:
            u = stack.pop()
            for v, t in adj[u]:
                if t == seen[u][1]:
                    continue
                if v in seen:
                    return _close_cycle(seen, u, v, t)
                seen[v] = (u, t)
                order.append(v)
                stack.append(v)
    return None


def _close_cycle(seen, u, v, t):
    def path(x):
        out = [x]
        while seen[x][0] is not None:
            x = seen[x][0]
            out.append(x)
        return out

    pu, pv = path(u), path(v)
    common = set(pu) & set(pv)
    lca = next(x for x in pu if x in common)
    # walk u -> lca, then lca -> v, then edge v -> u labelled t
    nodes_up = pu[: pu.index(lca) + 1]
    nodes_down = list(reversed(pv[: pv.index(lca)]))
    edges = [seen[x][1] for x in pu[: pu.index(lca)]]
    edges += [seen[x][1] for x in nodes_down]
    edges.append(t)
    nodes = nodes_up + nodes_down
    # edges[i] joins nodes[i] and nodes[i+1] (cyclically); rotate so that
    # the cycle starts entering a p-class: a_i enters p-class, b_i leaves it
    k = len(nodes)
    start = next(i for i in range(k) if nodes[i][0] == "p")
    ang = [edges[(start - 1 + i) % k] for i in range(k)]
    return _canonical_cycle(ang)


def _canonical_cycle(ang):
    # same cycle read from each p-class, in both directions; keep the least
    k = len(ang)
    rev = [ang[(1 - i) % k] for i in range(k)]
    options = []
    for seq in (ang, rev):
        for s in range(0, k, 2):
            options.append(tuple(seq[(s + i) % k] for i in range(k)))
    return min(options)


def incidence_verdict(Lp: Lamination, Lm: Lamination):
    return _incidence_cycle(equivalence_classes(Lp), equivalence_classes(Lm.reflected()))


def parallel_test(Lp: Lamination, Lm: Lamination, max_depth: int | None = None):
    """Parallel(certificate) if the incidence multigraph has a cycle.

    Leaves of generation above max_depth are ignored. When no cycle is found,
    the shared-angle structure at max_depth-1 and max_depth is compared and
    DepthInsufficient is raised if it moved.
    """
    if max_depth is None:
        max_depth = max(Lp.depth, Lm.depth)
    P, M = Lp.truncate(max_depth), Lm.truncate(max_depth)
    cyc = incidence_verdict(P, M)
    if cyc is not None:
        # report the cycle from the earliest generation that already has one
        for g in range(max_depth):
            early = incidence_verdict(Lp.truncate(g), Lm.truncate(g))
            if early is not None:
                return Parallel(ParallelCertificate(early), g)
        return Parallel(ParallelCertificate(cyc), max_depth)
    sig = _shared_signature(P, M)
    report = {"depth": max_depth, "shared_angles": len(sig[0]),
              "classes_plus": len(equivalence_classes(P).classes),
              "classes_minus": len(equivalence_classes(M).classes), "stable": True}
    if max_depth > 0:
        prev = _shared_signature(Lp.truncate(max_depth - 1), Lm.truncate(max_depth - 1))
        if prev != sig:
            report["stable"] = False
            raise DepthInsufficient(report)
    return NonParallel(report)


def _shared_signature(P: Lamination, M: Lamination):
    cp, cm = equivalence_classes(P), equivalence_classes(M.reflected())
    ip, im = cp.index(), cm.index()
    shared = sorted(set(ip) & set(im))
    # partition of shared angles induced by each side
    part_p = frozenset(frozenset(t for t in shared if ip[t] == i) for i in {ip[t] for t in shared})
    part_m = frozenset(frozenset(t for t in shared if im[t] == j) for j in {im[t] for t in shared})
    return tuple(shared), part_p, part_m


def check_certificate(cert: ParallelCertificate, Lp: Lamination, Lm: Lamination) -> bool:
    ip = equivalence_classes(Lp).index()
    im = equivalence_classes(Lm).index()
    pairs = cert.pairs
    k = len(pairs)
    if k == 0:
        return False
    for i, (a, b) in enumerate(pairs):
        a_next = pairs[(i + 1) % k][0]
        if a == b or a not in ip or b not in ip or ip[a] != ip[b]:
            return False
        x, y = reflect(b), reflect(a_next)
        if x == y or x not in im or y not in im or im[x] != im[y]:
            return False
    return len(set(cert.cycle)) == len(cert.cycle)


# ---------------------------------------------------------------- io

def parse_angle(s) -> Angle:
    try:
        return Angle(str(s))
    except (ValueError, ZeroDivisionError) as e:
        raise InputError(f"bad angle {s!r}") from e


def lamination_from_json(obj) -> tuple[Lamination, CriticalPortrait | None]:
    try:
        d = int(obj["degree"])
        leaves = [Leaf(parse_angle(p), parse_angle(q)) for p, q in obj.get("leaves", [])]
        chords = obj.get("portrait")
        depth = int(obj.get("depth", 0))
        gens = [int(g) for g in obj.get("generation", [0] * len(leaves))]
        if len(gens) != len(leaves) or depth < 0:
            raise ValueError("generation list does not match the leaves")
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"bad lamination file: {e}") from e
    L = Lamination(frozenset(leaves), d, depth, {l: g for l, g in zip(leaves, gens) if g})
    P = None
    if chords:
        P = CriticalPortrait(tuple(Leaf(parse_angle(p), parse_angle(q)) for p, q in chords), d)
    return L, P


def lamination_to_json(L: Lamination, portrait: CriticalPortrait | None = None) -> dict:
    out = {"degree": L.degree, "depth": L.depth,
           "leaves": [[str(l.a), str(l.b)] for l in L.sorted_leaves()]}
    if any(L.gen(l) for l in L.leaves):
        out["generation"] = [L.gen(l) for l in L.sorted_leaves()]
    if portrait is not None:
        out["portrait"] = [[str(c.a), str(c.b)] for c in portrait.chords]
    return out


def load_lamination(path) -> tuple[Lamination, CriticalPortrait | None]:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: {e}") from e
    return lamination_from_json(obj)


def classes_to_json(C: EquivClasses) -> list:
    return [[str(x) for x in c] for c in C.classes]
