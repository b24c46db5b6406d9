"""Mapping schemes, ribbon tree maps and the matrices built from them.

Trees are stored with integer vertex indices; labels from input files are
kept for reporting only. An edge (i, j) has two sides: side 0 runs i -> j,
side 1 runs j -> i. A side is also called a dart below.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import InputError, NumericalError
from .lamination import Angle, Lamination, Leaf


class MinimalityViolated(InputError):
    def __init__(self, vertex):
        self.vertex = vertex
        super().__init__(f"degree-1 vertex {vertex!r} is not in the forward orbit of a critical vertex")


class HyperbolicityViolated(InputError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(f"periodic cycle {self.cycle} has only degree-1 vertices")


class NotSimplicial(InputError):
    pass


class NotNonnegative(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class EmptyKeep(InputError):
    pass


class AnchorUnreachable(InputError):
    pass


class ItineraryInconsistent(InputError):
    pass


# ---------------------------------------------------------------- schemes

@dataclass(frozen=True)
class MappingScheme:
    vertices: tuple
    phi: dict
    delta: dict

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        for s in self.vertices:
            if s not in self.phi or self.phi[s] not in self.phi:
                raise InputError(f"phi is not a self-map at {s!r}")
            if int(self.delta.get(s, 0)) < 1:
                raise InputError(f"delta({s!r}) must be a positive integer")

    def degree(self) -> int:
        return 1 + sum(self.delta[s] - 1 for s in self.vertices)

    def cycles(self) -> list[list]:
        out, seen = [], set()
        for s in self.vertices:
            path, x = [], s
            while x not in seen and x not in path:
                path.append(x)
                x = self.phi[x]
            if x in path:
                out.append(path[path.index(x):])
            seen.update(path)
        return out


def validate_scheme(S: MappingScheme) -> int:
    """Check hyperbolicity and minimality; return the scheme degree."""
    for cyc in S.cycles():
        if all(S.delta[s] == 1 for s in cyc):
            raise HyperbolicityViolated(cyc)
    reached = set()
    for s in S.vertices:
        if S.delta[s] >= 2:
            x = S.phi[s]
            while x not in reached:
                reached.add(x)
                x = S.phi[x]
    for s in S.vertices:
        if S.delta[s] == 1 and s not in reached:
            raise MinimalityViolated(s)
    return S.degree()


def qh_scheme(d: int) -> MappingScheme:
    """Two fixed vertices of degree d."""
    return MappingScheme(("a", "b"), {"a": "a", "b": "b"}, {"a": d, "b": d})


def scheme_from_json(obj) -> MappingScheme:
    try:
        sc = obj.get("scheme", obj)
        verts = list(sc["vertices"])
        return MappingScheme(tuple(verts), dict(sc["phi"]), {k: int(v) for k, v in sc["delta"].items()})
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        raise InputError(f"bad scheme data: {e}") from e


# ---------------------------------------------------------------- ribbon trees

@dataclass
class RibbonTreeMap:
    n_vertices: int
    edges: list                     # (i, j)
    F: list                         # vertex -> vertex
    delta_v: list
    delta_e: list
    ribbon: dict = field(default_factory=dict)     # v -> ccw list of edge indices
    marked: set = field(default_factory=set)
    anchors: dict = field(default_factory=dict)    # tree index -> (edge, side)
    degree: Optional[int] = None
    labels: list = field(default_factory=list)
    corner_turns: dict = field(default_factory=dict)
    tree_order: list = field(default_factory=list)  # tree index per vertex, as given

    def __post_init__(self):
        n = self.n_vertices
        self.edges = [tuple(map(int, e)) for e in self.edges]
        if not self.labels:
            self.labels = list(range(n))
        if len(self.F) != n or len(self.delta_v) != n or len(self.delta_e) != len(self.edges):
            raise InputError("F, delta_v and delta_e must cover every vertex and edge")
        for i, j in self.edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise InputError(f"bad edge ({i}, {j})")
        if any(int(x) < 1 for x in list(self.delta_v) + list(self.delta_e)):
            raise InputError("local degrees must be at least 1")
        if not self.ribbon:
            self.ribbon = {v: [e for e, (i, j) in enumerate(self.edges) if v in (i, j)]
                           for v in range(n)}
        for v in range(n):
            inc = sorted(e for e, (i, j) in enumerate(self.edges) if v in (i, j))
            if sorted(self.ribbon.get(v, [])) != inc:
                raise InputError(f"ribbon order at vertex {self.labels[v]!r} does not list its edges")
        comps = self.components()
        if len(self.edges) != n - len(comps):
            raise InputError("edge set contains a cycle")

    # --- structure

    def adjacency(self) -> dict:
        adj = {v: [] for v in range(self.n_vertices)}
        for e, (i, j) in enumerate(self.edges):
            adj[i].append((j, e))
            adj[j].append((i, e))
        return adj

    def components(self) -> list[list[int]]:
        adj = self.adjacency()
        comp, out = {}, []
        for v in range(self.n_vertices):
            if v in comp:
                continue
            stack, cur = [v], [v]
            comp[v] = len(out)
            while stack:
                for w, _ in adj[stack.pop()]:
                    if w not in comp:
                        comp[w] = len(out)
                        cur.append(w)
                        stack.append(w)
            out.append(sorted(cur))
        return out

    def component_of(self) -> dict:
        return {v: k for k, c in enumerate(self.components()) for v in c}

    def path(self, u: int, v: int) -> list[int]:
        """Edge indices along the tree path from u to v, in order."""
        if u == v:
            return []
        adj = self.adjacency()
        prev = {u: None}
        stack = [u]
        while stack:
            x = stack.pop()
            for y, e in adj[x]:
                if y not in prev:
                    prev[y] = (x, e)
                    stack.append(y)
        if v not in prev:
            raise NotSimplicial(f"vertices {self.labels[u]!r} and {self.labels[v]!r} lie in different trees")
        out, x = [], v
        while prev[x] is not None:
            x, e = prev[x]
            out.append(e)
        return out[::-1]

    def edge_image(self, e: int) -> list[int]:
        i, j = self.edges[e]
        if self.F[i] == self.F[j]:
            raise NotSimplicial(f"edge {e} collapses to vertex {self.labels[self.F[i]]!r}")
        return self.path(self.F[i], self.F[j])

    def is_simplicial(self) -> bool:
        try:
            return all(len(self.edge_image(e)) == 1 for e in range(len(self.edges)))
        except NotSimplicial:
            return False

    def tree_degree(self, comp: list[int]) -> int:
        return 1 + sum(self.delta_v[v] - 1 for v in comp)

    def to_json(self) -> dict:
        comps = self.components()
        lab = self.labels
        trees = []
        for k, c in enumerate(comps):
            es = [e for e, (i, j) in enumerate(self.edges) if i in c]
            t = {"vertices": [lab[v] for v in c],
                 "edges": [[lab[self.edges[e][0]], lab[self.edges[e][1]]] for e in es],
                 "edge_ids": es,
                 "ribbon": {str(lab[v]): self.ribbon[v] for v in c},
                 "marked": [lab[v] for v in c if v in self.marked]}
            if k in self.anchors:
                t["anchor"] = {"edge": self.anchors[k][0], "side": self.anchors[k][1]}
            trees.append(t)
        return {"trees": trees,
                "F": {"vertex": {str(lab[v]): lab[self.F[v]] for v in range(self.n_vertices)}},
                "delta_v": {str(lab[v]): self.delta_v[v] for v in range(self.n_vertices)},
                "delta_e": {str(e): self.delta_e[e] for e in range(len(self.edges))},
                "degree": self.degree}


def tree_from_json(obj) -> RibbonTreeMap:
    """Read a tree map. Vertex labels may be any JSON scalars; edges are
    numbered in file order across all trees."""
    try:
        trees = obj["trees"]
        labels, index, edges, ribbon, marked, anchors, tree_of = [], {}, [], {}, set(), {}, []
        for k, t in enumerate(trees):
            for v in t["vertices"]:
                key = str(v)
                if key in index:
                    raise InputError(f"vertex {v!r} appears twice")
                index[key] = len(labels)
                labels.append(v)
                tree_of.append(k)
        for k, t in enumerate(trees):
            base = len(edges)
            for a, b in t.get("edges", []):
                edges.append((index[str(a)], index[str(b)]))
            for v, order in t.get("ribbon", {}).items():
                ribbon[index[str(v)]] = [base + int(e) for e in order]
            for v in t.get("marked", []):
                marked.add(index[str(v)])
            if "anchor" in t:
                anchors[k] = (base + int(t["anchor"]["edge"]), int(t["anchor"]["side"]))
        fv = obj["F"]["vertex"] if "vertex" in obj["F"] else obj["F"]
        F = [index[str(fv[str(lab)])] for lab in labels]
        dv = obj.get("delta_v", {})
        de = obj.get("delta_e", {})
        delta_v = [int(dv.get(str(lab), 1)) for lab in labels]
        delta_e = [int(de.get(str(e), 1)) for e in range(len(edges))]
        turns = {index[str(v)]: list(map(int, w)) for v, w in obj.get("corner_turns", {}).items()}
        for v in range(len(labels)):
            ribbon.setdefault(v, [e for e, (i, j) in enumerate(edges) if v in (i, j)])
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise InputError(f"bad tree map data: {e!r}") from e
    T = RibbonTreeMap(len(labels), edges, F, delta_v, delta_e, ribbon, marked, {},
                      obj.get("degree"), labels, turns, tree_of)
    comp = T.component_of()
    # anchors are keyed by computed component index
    for k, (e, s) in anchors.items():
        T.anchors[comp[T.edges[e][0]]] = (e, s)
    return T


def load_tree(path) -> RibbonTreeMap:
    with open(path) as fh:
        return tree_from_json(json.load(fh))


def subdivide(T: RibbonTreeMap, max_vertices: int = 2000) -> tuple[RibbonTreeMap, list[int]]:
    """Split edges whose image is a longer path until F is simplicial.

    New vertices get local degree 1, inherit the edge degree and map to the
    interior vertices of the image path. Returns the new map and the indices
    of added vertices.
    """
    T = RibbonTreeMap(T.n_vertices, list(T.edges), list(T.F), list(T.delta_v), list(T.delta_e),
                      {v: list(o) for v, o in T.ribbon.items()}, set(T.marked), dict(T.anchors),
                      T.degree, list(T.labels), dict(T.corner_turns), list(T.tree_order))
    added = []
    while True:
        bad = None
        for e in range(len(T.edges)):
            p = T.edge_image(e)
            if len(p) > 1:
                bad = (e, p)
                break
        if bad is None:
            return T, added
        e, p = bad
        i, j = T.edges[e]
        # interior vertices of the image path, in order from F(i)
        x, stops = T.F[i], []
        for pe in p[:-1]:
            a, b = T.edges[pe]
            x = b if a == x else a
            stops.append(x)
        if T.n_vertices + len(stops) > max_vertices:
            raise NotSimplicial("subdivision does not terminate; a periodic edge covers a longer path")
        chain = [i]
        for s in stops:
            v = T.n_vertices
            T.n_vertices += 1
            T.F.append(s)
            T.delta_v.append(1)
            T.labels.append(f"{T.labels[i]}~{T.labels[j]}#{v}")
            T.tree_order.append(T.tree_order[i] if T.tree_order else 0)
            chain.append(v)
            added.append(v)
        chain.append(j)
        de = T.delta_e[e]
        T.edges[e] = (chain[0], chain[1])
        new_ids = []
        for a, b in zip(chain[1:-1], chain[2:]):
            new_ids.append(len(T.edges))
            T.edges.append((a, b))
            T.delta_e.append(de)
        # ribbon: j now meets the last new edge instead of e
        last = new_ids[-1]
        T.ribbon[j] = [last if x == e else x for x in T.ribbon[j]]
        ids = [e] + new_ids
        for k, v in enumerate(chain[1:-1]):
            T.ribbon[v] = [ids[k], ids[k + 1]]
        for k, (ae, s) in list(T.anchors.items()):
            if ae == e and s == 1:
                T.anchors[k] = (last, 1)


# ---------------------------------------------------------------- edge matrices

@dataclass(frozen=True)
class EdgeMatrices:
    M: tuple            # tuple of row tuples of 0/1
    D: tuple            # diagonal entries
    order: tuple = ()   # edge ids in matrix order

    @property
    def size(self) -> int:
        return len(self.D)

    def M_array(self) -> np.ndarray:
        return np.array(self.M, dtype=float).reshape(self.size, self.size)

    def DinvM(self) -> list[list[Fraction]]:
        return [[Fraction(self.M[i][j], self.D[i]) for j in range(self.size)] for i in range(self.size)]


def markov_degree_matrices(T: RibbonTreeMap) -> EdgeMatrices:
    n = len(T.edges)
    M = [[0] * n for _ in range(n)]
    for j in range(n):
        for i in T.edge_image(j):
            M[i][j] = 1
    return EdgeMatrices(tuple(map(tuple, M)), tuple(T.delta_e), tuple(range(n)))


def matrices_from_images(images: list[list[int]], degrees: list[int]) -> EdgeMatrices:
    """Build M, D directly from edge-image lists (column j lists E_i in F(E_j))."""
    n = len(degrees)
    M = [[0] * n for _ in range(n)]
    for j, img in enumerate(images):
        for i in img:
            M[i][j] = 1
    return EdgeMatrices(tuple(map(tuple, M)), tuple(degrees), tuple(range(n)))


# ---------------------------------------------------------------- exact linear algebra

def rref(A: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    R = [[Fraction(x) for x in row] for row in A]
    rows = len(R)
    cols = len(R[0]) if rows else 0
    pivots, r = [], 0
    for c in range(cols):
        p = next((k for k in range(r, rows) if R[k][c] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        pv = R[r][c]
        R[r] = [x / pv for x in R[r]]
        for k in range(rows):
            if k != r and R[k][c] != 0:
                f = R[k][c]
                R[k] = [a - f * b for a, b in zip(R[k], R[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return R, pivots


def nullspace(A: list[list[Fraction]], ncols: Optional[int] = None) -> list[list[Fraction]]:
    n = ncols if ncols is not None else (len(A[0]) if A else 0)
    if not A:
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    R, piv = rref(A)
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for r, p in enumerate(piv):
            v[p] = -R[r][f]
        basis.append(v)
    return basis


def _normalize(v):
    m = max(v)
    return tuple(x / m for x in v)


def cone_rays(B: list[list[Fraction]]) -> list[tuple]:
    """Extreme rays of {B^T x : B^T x >= 0}, B a list of basis vectors."""
    k = len(B)
    if k == 0:
        return []
    n = len(B[0])
    rows = [[B[j][i] for j in range(k)] for i in range(n)]  # v_i = rows[i] . x
    rays = set()
    for sub in itertools.combinations(range(n), k - 1):
        ker = nullspace([rows[i] for i in sub], k) if sub else [[Fraction(int(a == b)) for a in range(k)] for b in range(k)]
        if len(ker) != 1:
            continue
        x = ker[0]
        for sgn in (1, -1):
            v = [sgn * sum(r[j] * x[j] for j in range(k)) for r in rows]
            if all(c >= 0 for c in v) and any(c > 0 for c in v):
                rays.add(_normalize(v))
    return sorted(rays)


def _int_det(A: list[list[int]]) -> int:
    """Fraction-free (Bareiss) determinant of an integer matrix."""
    A = [list(r) for r in A]
    n, sign, prev = len(A), 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            p = next((i for i in range(k + 1, n) if A[i][k]), None)
            if p is None:
                return 0
            A[k], A[p] = A[p], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def solve_eigen_MD(E: EdgeMatrices) -> Optional[tuple]:
    """Exact nonnegative v != 0 with M v = D v, largest entry 1, or None.

    The returned vector is the normalized sum of all extreme rays of the
    solution cone, so it has the largest possible support.
    """
    n = E.size
    if n == 0:
        return None
    A = [[E.M[i][j] - (E.D[i] if i == j else 0) for j in range(n)] for i in range(n)]
    if all(isinstance(x, int) for row in A for x in row) and _int_det(A) != 0:
        return None
    A = [[Fraction(x) for x in row] for row in A]
    rays = cone_rays(nullspace(A, n))
    if not rays:
        return None
    s = [sum(r[i] for r in rays) for i in range(n)]
    return _normalize(s)


def check_eigen(E: EdgeMatrices, v) -> bool:
    n = E.size
    return all(sum(E.M[i][j] * v[j] for j in range(n)) == E.D[i] * v[i] for i in range(n))


# ---------------------------------------------------------------- spectral radius

def _sccs(A: np.ndarray) -> list[list[int]]:
    n = len(A)
    index, low, on, stack, out = {}, {}, set(), [], []
    counter = [0]

    def visit(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for w in range(n):
            if A[v, w] > 0:
                if w not in index:
                    visit(w)
                    low[v] = min(low[v], low[w])
                elif w in on:
                    low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(sorted(comp))

    for v in range(n):
        if v not in index:
            visit(v)
    return out


def _perron_irreducible(B: np.ndarray, tol: float) -> float:
    """Perron root of an irreducible nonnegative matrix.

    Power iteration on B + I (primitive), accelerated by repeated squaring,
    stopped when the Collatz-Wielandt bracket is narrower than tol.
    """
    n = len(B)
    C = B + np.eye(n)
    P = C.copy()
    x = np.ones(n)
    for _ in range(200):
        y = C @ x
        lo, hi = float(np.min(y / x)), float(np.max(y / x))
        if hi - lo < tol:
            return 0.5 * (lo + hi) - 1.0
        P = P @ P
        P /= np.max(P)
        x = P @ np.ones(n)
        x /= np.max(x)
        if np.any(x <= 0):
            x = np.ones(n)
    raise NumericalError(f"power iteration did not bracket the Perron root to {tol}")


def spectral_radius(A, tol: float = 1e-9) -> float:
    A = np.asarray([[float(x) for x in row] for row in A], dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("spectral radius needs a square matrix")
    if np.any(A < 0):
        raise NotNonnegative("matrix has a negative entry")
    best = 0.0
    for comp in _sccs(A):
        B = A[np.ix_(comp, comp)]
        if len(comp) == 1 and B[0, 0] == 0:
            continue
        best = max(best, _perron_irreducible(B, tol * 1e-2))
    return best


# ---------------------------------------------------------------- Thurston matrix

@dataclass(frozen=True)
class CurveCover:
    curves: tuple
    # for each curve tau: tuple of (isotopy tag or None, covering degree)
    components: dict

    def __post_init__(self):
        names = set(self.curves)
        for tau, comps in self.components.items():
            if tau not in names:
                raise InputError(f"unknown curve {tau!r}")
            for tag, deg in comps:
                if tag is not None and tag not in names:
                    raise InputError(f"component tag {tag!r} is not a curve")
                if int(deg) < 1:
                    raise InputError("covering degrees must be at least 1")


@dataclass(frozen=True)
class ThurstonResult:
    A: tuple            # Fraction entries, rows sigma, columns tau
    lam: float
    obstructed: bool
    exact: Optional[bool]   # exact verdict (lambda >= 1), None if not decidable


def thurston_entries(C: CurveCover) -> list[list[Fraction]]:
    idx = {c: k for k, c in enumerate(C.curves)}
    n = len(C.curves)
    A = [[Fraction(0)] * n for _ in range(n)]
    for tau, comps in C.components.items():
        for tag, deg in comps:
            if tag is not None:
                A[idx[tag]][idx[tau]] += Fraction(1, int(deg))
    return A


def inverse(A: list[list[Fraction]]) -> Optional[list[list[Fraction]]]:
    n = len(A)
    aug = [list(A[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    R, piv = rref(aug)
    if piv[:n] != list(range(n)):
        return None
    return [row[n:] for row in R]


def exact_rho_below_one(A: list[list[Fraction]]) -> bool:
    """For A >= 0: rho(A) < 1 iff I - A is invertible with nonnegative inverse."""
    n = len(A)
    IA = [[Fraction(int(i == j)) - A[i][j] for j in range(n)] for i in range(n)]
    inv = inverse(IA)
    return inv is not None and all(x >= 0 for row in inv for x in row)


def thurston_matrix(C: CurveCover, tol: float = 1e-9) -> ThurstonResult:
    A = thurston_entries(C)
    lam = spectral_radius(A) if A else 0.0
    exact = (not exact_rho_below_one(A)) if A else False
    obstructed = lam >= 1 - tol
    if exact is not None and exact != obstructed:
        # the numerical bracket sits within tol of 1; the exact test decides
        obstructed = exact
    return ThurstonResult(tuple(map(tuple, A)), lam, obstructed, exact)


def cover_from_json(obj) -> CurveCover:
    try:
        curves = tuple(obj["curves"])
        comps = {tau: tuple((c.get("tag"), int(c["degree"])) for c in lst)
                 for tau, lst in obj["components"].items()}
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        raise InputError(f"bad curve cover data: {e!r}") from e
    return CurveCover(curves, comps)


def compare_bound(A, E: EdgeMatrices, tol: float = 1e-9) -> bool:
    """True iff A >= D^-1 M entrywise. When true and Mv = Dv has a nonnegative
    solution, the Perron root of A is checked to be at least 1."""
    A = [[Fraction(x) if not isinstance(x, float) else x for x in row] for row in A]
    n = E.size
    if len(A) != n or any(len(r) != n for r in A):
        raise DimensionMismatch(f"A is {len(A)}x{len(A[0]) if A else 0}, edge matrices are {n}x{n}")
    B = E.DinvM()
    ok = all(A[i][j] >= B[i][j] for i in range(n) for j in range(n))
    if ok and solve_eigen_MD(E) is not None:
        lam = spectral_radius(A)
        if lam < 1 - tol:
            raise NumericalError(f"bound holds but spectral radius {lam} < 1")
    return ok


# ---------------------------------------------------------------- reduced trees

@dataclass
class ReducedTree:
    vertices: list          # original vertex indices kept
    edges: list             # pairs of original vertex indices
    paths: list             # original edge indices per reduced edge
    matrices: EdgeMatrices
    notes: list = field(default_factory=list)

    def vertex_set(self) -> set:
        return set(self.vertices)


def convex_hull_subtree(T: RibbonTreeMap, keep) -> ReducedTree:
    keep = sorted(set(keep))
    if not keep:
        raise EmptyKeep("keep set is empty")
    comp = T.component_of()
    hull_v, hull_e = set(), set()
    groups: dict = {}
    for v in keep:
        groups.setdefault(comp[v], []).append(v)
    for vs in groups.values():
        root = vs[0]
        hull_v.add(root)
        for v in vs[1:]:
            for e in T.path(root, v):
                hull_e.add(e)
                hull_v.update(T.edges[e])
    val = {v: sum(1 for e in hull_e if v in T.edges[e]) for v in hull_v}
    W = {v for v in hull_v if v in keep or v in T.marked or val[v] != 2}
    changed = True
    while changed:
        changed = False
        for v in list(W):
            if T.F[v] in hull_v and T.F[v] not in W:
                W.add(T.F[v])
                changed = True
    # walk hull edges between consecutive kept vertices
    adj: dict = {v: [] for v in hull_v}
    for e in hull_e:
        i, j = T.edges[e]
        adj[i].append((j, e))
        adj[j].append((i, e))
    r_edges, paths, seen = [], [], set()
    for start in sorted(W):
        for nxt, e in adj[start]:
            if e in seen:
                continue
            p, cur = [e], nxt
            while cur not in W:
                (nn, ee), = [(a, b) for a, b in adj[cur] if b != p[-1]]
                p.append(ee)
                cur = nn
            seen.update(p)
            r_edges.append((start, cur))
            paths.append(p)
    notes = []
    n = len(r_edges)
    images = []
    for a, b in r_edges:
        if T.F[a] == T.F[b]:
            raise NotSimplicial(f"reduced edge {T.labels[a]!r}-{T.labels[b]!r} collapses")
        images.append(set(T.path(T.F[a], T.F[b])))
    M = [[int(set(paths[i]) <= images[j]) for j in range(n)] for i in range(n)]
    D = []
    for k, p in enumerate(paths):
        ds = {T.delta_e[e] for e in p}
        if len(ds) > 1:
            notes.append(f"reduced edge {k} has mixed edge degrees {sorted(ds)}; using the largest")
        D.append(max(ds))
    return ReducedTree(sorted(W), r_edges, paths, EdgeMatrices(tuple(map(tuple, M)), tuple(D), tuple(range(n))), notes)


# ---------------------------------------------------------------- dual lamination

def _dart_ends(T: RibbonTreeMap, dart):
    e, s = dart
    i, j = T.edges[e]
    return (i, j) if s == 0 else (j, i)


def _next_dart(T: RibbonTreeMap, dart):
    _, v = _dart_ends(T, dart)
    order = T.ribbon[v]
    e = order[(order.index(dart[0]) + 1) % len(order)]
    i, j = T.edges[e]
    return (e, 0 if i == v else 1)


def boundary_circuit(T: RibbonTreeMap, start) -> list[tuple]:
    out, d = [], start
    while True:
        out.append(d)
        d = _next_dart(T, d)
        if d == start:
            return out


def _dart_image(T: RibbonTreeMap, dart):
    u, v = _dart_ends(T, dart)
    fu, fv = T.F[u], T.F[v]
    p = T.path(fu, fv) if fu != fv else []
    if len(p) != 1:
        raise NotSimplicial(f"edge {dart[0]} does not map onto a single edge")
    e = p[0]
    return (e, 0 if T.edges[e][0] == fu else 1)


def _extra_turns(T: RibbonTreeMap, v: int) -> list[int]:
    """Extra full turns per corner at v (corner k follows ribbon[v][k])."""
    order = T.ribbon[v]
    fv = T.F[v]
    target = T.ribbon[fv]
    m = len(target)
    if not order:
        return []
    if m == 0:
        raise ItineraryInconsistent(f"vertex {T.labels[v]!r} has edges but its image has none")
    img = []
    for e in order:
        dart = (e, 0 if T.edges[e][0] == v else 1)
        img.append(_dart_image(T, dart)[0])
    ks = []
    for k in range(len(order)):
        a, b = target.index(img[k]), target.index(img[(k + 1) % len(order)])
        step = (b - a) % m
        ks.append(step if step else m)
    total = T.delta_v[v] * m - sum(ks)
    if total < 0 or total % m:
        raise ItineraryInconsistent(f"ribbon order at {T.labels[v]!r} is incompatible with local degree {T.delta_v[v]}")
    W = total // m
    if v in T.corner_turns:
        w = list(T.corner_turns[v])
        if len(w) != len(order) or sum(w) != W or min(w) < 0:
            raise ItineraryInconsistent(f"corner turns at {T.labels[v]!r} must be {len(order)} nonnegative integers summing to {W}")
        return w
    return [W] + [0] * (len(order) - 1)


def landing_angles(T: RibbonTreeMap) -> dict:
    """Angle of every side (dart) of every edge. Requires a simplicial map;
    non-simplicial input should go through subdivide first."""
    comps = T.components()
    comp_of = {v: k for k, c in enumerate(comps) for v in c}
    circuits, pos = {}, {}
    for k, c in enumerate(comps):
        if not any(T.ribbon[v] for v in c):
            continue
        if k not in T.anchors:
            raise AnchorUnreachable(f"tree {k} has edges but no anchor")
        e, s = T.anchors[k]
        if not (0 <= e < len(T.edges)) or comp_of[T.edges[e][0]] != k or s not in (0, 1):
            raise AnchorUnreachable(f"anchor ({e}, {s}) is not a side of tree {k}")
        circ = boundary_circuit(T, (e, s))
        circuits[k] = circ
        for p, dd in enumerate(circ):
            pos[dd] = p
    image = {dd: _dart_image(T, dd) for circ in circuits.values() for dd in circ}
    turns = {v: _extra_turns(T, v) for v in range(T.n_vertices) if T.ribbon[v]}

    digit, deg = {}, {}
    for k, circ in circuits.items():
        dk = T.tree_degree(comps[k])
        n = len(circ)
        passes = []
        for p in range(n):
            a, b = circ[p], circ[(p + 1) % n]
            _, v = _dart_ends(T, a)
            corner = T.ribbon[v].index(a[0])
            wrap = int(pos[image[b]] <= pos[image[a]])
            passes.append(wrap + turns[v][corner])
        # corner n-1 joins the last dart back to the anchor dart
        if passes[-1] < 1:
            raise AnchorUnreachable(f"the corner before the anchor of tree {k} does not cover the anchor")
        dig = 0
        for p, dd in enumerate(circ):
            digit[dd] = dig
            deg[dd] = dk
            dig += passes[p]
        if dig != dk:
            raise ItineraryInconsistent(f"tree {k}: circuit covers the anchor {dig} times, expected degree {dk}")
        if T.degree is not None and len(comps) == 1 and dk != T.degree:
            raise ItineraryInconsistent(f"local degrees give degree {dk}, file says {T.degree}")

    t: dict = {}
    for start in image:
        if start in t:
            continue
        orbit, x = [], start
        while x not in t and x not in orbit:
            orbit.append(x)
            x = image[x]
        if x not in t:
            cyc = orbit[orbit.index(x):]
            # t = (D_0 + (D_1 + ... + (D_{q-1} + t)/d_{q-1})...)/d_0
            a, scale = Fraction(0), Fraction(1)
            for c in cyc:
                scale /= deg[c]
                a += digit[c] * scale
            t[x] = Angle(a / (1 - scale))
            # fill the rest of the cycle forward from x
            y = x
            for _ in range(len(cyc) - 1):
                prev = y
                y = image[y]
                t[y] = Angle(deg[prev] * t[prev] - digit[prev])
        for c in reversed(orbit):
            if c not in t:
                t[c] = Angle((digit[c] + t[image[c]]) / deg[c])
    # checks: equivariance and circuit order
    for c, a in t.items():
        if Angle(deg[c] * a) != t[image[c]]:
            raise ItineraryInconsistent(f"equivariance fails at side {c}")
    for k, circ in circuits.items():
        vals = [t[c] for c in circ]
        if any(x > y for x, y in zip(vals, vals[1:])):
            raise ItineraryInconsistent(f"side angles of tree {k} are not in circuit order")
    return t


def dual_lamination(T: RibbonTreeMap, auto_subdivide: bool = True) -> Lamination:
    if auto_subdivide and not T.is_simplicial():
        T, _ = subdivide(T)
    d = T.degree or max((T.tree_degree(c) for c in T.components()), default=2)
    if not T.edges:
        return Lamination(frozenset(), max(d, 2), 0)
    t = landing_angles(T)
    leaves = set()
    for e in range(len(T.edges)):
        a, b = t[(e, 0)], t[(e, 1)]
        if a != b:
            leaves.add(Leaf(a, b))
    return Lamination(frozenset(leaves), max(d, 2), 0)
