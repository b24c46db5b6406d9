"""Independent reference computations used by the tests.

Nothing here calls into qpcf; each routine is a slow, direct reading of the
definition it checks.
"""
from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import numpy as np
import sympy


# ---- circle combinatorics

def frac1(x) -> Fraction:
    return Fraction(x) % 1


def strictly_inside(x, a, b) -> bool:
    """x in the open counterclockwise arc from a to b."""
    x, a, b = frac1(x), frac1(a), frac1(b)
    return 0 < (x - a) % 1 < (b - a) % 1


def linked_by_count(l1, l2) -> bool:
    """Chords cross iff exactly one endpoint of l2 lies in one open arc of l1."""
    a, b = l1
    c, d = l2
    if {frac1(a), frac1(b)} & {frac1(c), frac1(d)}:
        return False
    return (strictly_inside(c, a, b) + strictly_inside(d, a, b)) == 1


def classes(leaves) -> list[set]:
    """Connected components of the leaf graph on endpoints."""
    comp: dict = {}
    for a, b in leaves:
        a, b = frac1(a), frac1(b)
        ca, cb = comp.get(a, {a}), comp.get(b, {b})
        if ca is not cb:
            merged = ca | cb
            for x in merged:
                comp[x] = merged
        else:
            comp[a] = ca
    out = []
    for s in comp.values():
        if all(s is not t for t in out):
            out.append(s)
    return out


def brute_parallel(plus, minus):
    """Alternating chain search: a_i ~+ b_i and -b_i ~- -a_{i+1}, angles distinct.

    Returns a cycle (a_0, b_0, ...) or None. The chain length is bounded by the
    number of plus classes, which is enough to find a simple cycle in the class
    graph if one exists.
    """
    cp = {x: i for i, s in enumerate(classes(plus)) for x in s}
    cm_raw = {x: i for i, s in enumerate(classes(minus)) for x in s}
    cm = {frac1(-x): i for x, i in cm_raw.items()}
    shared = sorted(set(cp) & set(cm))
    kmax = len(set(cp.values()))

    def same_p(x, y):
        return x != y and cp[x] == cp[y]

    def same_m(x, y):
        return x != y and cm[x] == cm[y]

    def dfs(chain):
        k = len(chain) // 2
        a0, b = chain[0], chain[-1]
        if same_m(b, a0):
            return tuple(chain)
        if k >= kmax:
            return None
        for a in shared:
            if a in chain or not same_m(b, a):
                continue
            for bb in shared:
                if bb in chain or bb == a or not same_p(a, bb):
                    continue
                r = dfs(chain + [a, bb])
                if r:
                    return r
        return None

    for a0 in shared:
        for b0 in shared:
            if same_p(a0, b0):
                r = dfs([a0, b0])
                if r:
                    return r
    return None


def random_lamination(rng: random.Random, max_leaves: int = 10, qmax: int = 64,
                      focus: int | None = None, pool=None) -> list[tuple[Fraction, Fraction]]:
    """Random pairwise unlinked chords with denominators <= qmax.

    With focus set, endpoints are drawn from a small pool of that many angles
    so that shared endpoints (and hence cycles) are common. An explicit pool
    overrides focus.
    """
    n = rng.randint(0, max_leaves)
    if pool is not None:
        pool = sorted(pool)
    elif focus:
        pool = sorted({Fraction(rng.randint(0, q - 1), q) for q in (rng.randint(2, qmax) for _ in range(focus))})
    leaves: list = []
    for _ in range(8 * n):
        if len(leaves) >= n:
            break
        if pool and len(pool) >= 2:
            a, b = rng.sample(pool, 2)
        else:
            qa, qb = rng.randint(2, qmax), rng.randint(2, qmax)
            a, b = Fraction(rng.randint(0, qa - 1), qa), Fraction(rng.randint(0, qb - 1), qb)
        if a == b:
            continue
        c = (min(a, b), max(a, b))
        if c in leaves or any(linked_by_count(c, l) for l in leaves):
            continue
        leaves.append(c)
    return leaves


def symmetric_pool(rng: random.Random, size: int, qmax: int = 64) -> set:
    """Angles closed under t -> -t, so plus and reflected minus endpoints meet."""
    out = set()
    while len(out) < size:
        q = rng.randint(2, qmax)
        t = Fraction(rng.randint(0, q - 1), q)
        out |= {t, frac1(-t)}
    return out


def preimage_matchings(a, b, chords, d: int) -> list[set]:
    """All matchings of the preimages of a with those of b whose d chords
    are pairwise unlinked and unlinked with every portrait chord."""
    pa = [frac1((a + j) / d) for j in range(d)]
    pb = [frac1((b + j) / d) for j in range(d)]
    found = []
    for perm in itertools.permutations(range(d)):
        cand = [(pa[i], pb[perm[i]]) for i in range(d)]
        if any(x == y for x, y in cand):
            continue
        if any(linked_by_count(c1, c2) for c1, c2 in itertools.combinations(cand, 2)):
            continue
        if any(linked_by_count(c, p) for c in cand for p in chords):
            continue
        found.append({tuple(sorted(c)) for c in cand})
    return found


# ---- exact linear algebra

def charpoly_radius(A) -> float:
    """Largest real root of the exact characteristic polynomial, by bisection
    on sympy's isolating intervals."""
    M = sympy.Matrix([[sympy.Rational(str(x)) for x in row] for row in A])
    lam = sympy.Symbol("lam")
    p = sympy.Poly(M.charpoly(lam).as_expr(), lam)
    ivs = p.intervals(eps=sympy.Rational(1, 10 ** 14))
    if not ivs:
        return 0.0
    (lo, hi), _ = max(ivs, key=lambda iv: iv[0][1])
    lo, hi = sympy.Rational(lo), sympy.Rational(hi)
    for _ in range(40):
        mid = (lo + hi) / 2
        if p.eval(lo) * p.eval(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return max(float((lo + hi) / 2), 0.0)


def nonneg_kernel_oracle(M, D) -> tuple[bool, int]:
    """(exists v >= 0, v != 0 with Mv = Dv, nullity of M - D) via sympy and an LP."""
    from scipy.optimize import linprog
    n = len(D)
    A = sympy.Matrix(n, n, lambda i, j: M[i][j] - (D[i] if i == j else 0))
    ns = A.nullspace()
    if not ns:
        return False, 0
    res = linprog(-np.ones(n), A_eq=np.array(A.tolist(), dtype=float), b_eq=np.zeros(n),
                  bounds=[(0, 1)] * n, method="highs")
    return bool(res.status == 0 and -res.fun > 1e-9), len(ns)


# ---- polynomial multiplicity

def multiplicity_exact(coeffs, x) -> int:
    """Order of vanishing of p(z) - p(x) at x by repeated synthetic division,
    with exact rational (Gaussian-integer) arithmetic."""
    c = [sympy.nsimplify(v) for v in coeffs]
    x = sympy.nsimplify(x)
    z = sympy.Symbol("z")
    p = sum(ci * z ** (len(c) - 1 - i) for i, ci in enumerate(c))
    q = sympy.Poly(sympy.expand(p - p.subs(z, x)), z)
    m = 0
    while not q.is_zero and sympy.simplify(q.eval(x)) == 0:
        q = sympy.Poly(sympy.quo(q.as_expr(), z - x, z), z)
        m += 1
    return m


# ---- hyperbolic disk

def disk_dist(x, y) -> float:
    """Distance in the Poincare disk from the cross-ratio formula."""
    x, y = complex(*x), complex(*y)
    r = abs((x - y) / (1 - x.conjugate() * y))
    return math.log((1 + r) / (1 - r))


def golden_min(f, lo: float, hi: float, iters: int = 200) -> tuple[float, float]:
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    for _ in range(iters):
        if f(c) < f(d):
            b = d
        else:
            a = c
        c, d = b - g * (b - a), a + g * (b - a)
    x = (a + b) / 2
    return x, f(x)


# ---- tree maps and covers

def tree_shapes(n: int):
    """Edge lists of all trees on n labelled vertices, one per isomorphism class."""
    seen = set()
    for es in itertools.combinations(itertools.combinations(range(n), 2), n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x
        ok = True
        for a, b in es:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if not ok:
            continue
        key = min(tuple(sorted(tuple(sorted((p[a], p[b]))) for a, b in es))
                  for p in itertools.permutations(range(n)))
        if key not in seen:
            seen.add(key)
            yield list(key)


def thurston_fold(cover: dict) -> list[list[Fraction]]:
    """A[s][t] = sum of 1/deg over components of the preimage of t isotopic to s."""
    names = list(cover["curves"])
    A = [[Fraction(0)] * len(names) for _ in names]
    for j, t in enumerate(names):
        for comp in cover["components"][t]:
            if comp["tag"] is not None:
                A[names.index(comp["tag"])][j] += Fraction(1, int(comp["degree"]))
    return A


def radius_at_least_one(A) -> bool:
    """Exact: the Perron root of a nonnegative matrix is >= 1 iff the
    characteristic polynomial has a real root in [1, max row sum]."""
    M = sympy.Matrix([[sympy.Rational(str(x)) for x in row] for row in A])
    lam = sympy.Symbol("lam")
    p = sympy.Poly(M.charpoly(lam).as_expr(), lam)
    top = max(1, max(sum(abs(x) for x in row) for row in M.tolist()))
    return p.count_roots(1, top) > 0


# ---- Blaschke products

def blaschke_eval(zeros, z):
    """z * prod (z - a) / (1 - conj(a) z), vectorised over z."""
    out = np.asarray(z, dtype=complex).copy()
    for a in zeros:
        out = out * (z - a) / (1 - np.conj(a) * z)
    return out


def continuation_fixed_point(zeros, steps: int = 200) -> complex:
    """Follow the boundary fixed point 1 of z^d along f_s with zeros s*a by
    complex Newton on f_s(z) - z."""
    a = np.array(zeros, dtype=complex)
    z = 1 + 0j
    for s in np.linspace(0, 1, steps + 1)[1:]:
        aa = s * a
        for _ in range(50):
            f, df = z, 1 + 0j
            for ai in aa:
                g = (z - ai) / (1 - np.conj(ai) * z)
                dg = (1 - abs(ai) ** 2) / (1 - np.conj(ai) * z) ** 2
                df = df * g + f * dg
                f = f * g
            step = (f - z) / (df - 1)
            z -= step
            if abs(step) < 1e-16:
                break
    return complex(z)
