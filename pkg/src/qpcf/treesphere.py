"""Rational maps on trees of Riemann spheres: data model and validator.

Each vertex a carries a sphere with marked points xi_a(b), one per neighbour b
(the tangent direction toward b). R_a maps sphere a to sphere F(a).
Infinity is represented by complex('inf'). Polynomial coefficients are
listed from the highest degree down, as in numpy.poly1d.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .blaschke import poly_roots, _cluster_roots

INF = complex(math.inf, 0.0)


class DegreeMismatch(NumericalError):
    pass


class RadiusSelectionFailed(NumericalError):
    pass


def is_inf(z) -> bool:
    return cmath.isinf(z)


def chordal(z, w) -> float:
    if is_inf(z) and is_inf(w):
        return 0.0
    if is_inf(z):
        z, w = w, z
    if is_inf(w):
        return 2 / math.sqrt(1 + abs(z) ** 2)
    return 2 * abs(z - w) / math.sqrt((1 + abs(z) ** 2) * (1 + abs(w) ** 2))


@dataclass(frozen=True)
class RationalMap:
    num: tuple
    den: tuple

    def __post_init__(self):
        n = np.trim_zeros(np.asarray(self.num, dtype=complex), "f")
        d = np.trim_zeros(np.asarray(self.den, dtype=complex), "f")
        if d.size == 0:
            raise InputError("denominator is the zero polynomial")
        if n.size == 0:
            n = np.array([0j])
        object.__setattr__(self, "num", tuple(complex(c) for c in n))
        object.__setattr__(self, "den", tuple(complex(c) for c in d))

    @property
    def N(self) -> np.poly1d:
        return np.poly1d(self.num)

    @property
    def D(self) -> np.poly1d:
        return np.poly1d(self.den)

    @property
    def degree(self) -> int:
        if len(self.num) == 1 and self.num[0] == 0:
            return 0
        return max(len(self.num), len(self.den)) - 1

    def __call__(self, z) -> complex:
        n, d = len(self.num) - 1, len(self.den) - 1
        if is_inf(z):
            if n > d:
                return INF
            if n < d:
                return 0j
            return self.num[0] / self.den[0]
        dv = self.D(z)
        nv = self.N(z)
        if dv == 0:
            return INF if nv != 0 else nv
        return complex(nv / dv)

    def wronskian(self) -> np.poly1d:
        return self.N.deriv() * self.D - self.N * self.D.deriv()

    def critical_points(self) -> list[tuple[complex, int]]:
        """Critical points on the sphere with multiplicity; total 2 deg - 2."""
        total = 2 * self.degree - 2
        if total <= 0:
            return []
        finite = _cluster_roots(poly_roots(self.wronskian()))
        nfin = sum(m for _, m in finite)
        out = list(finite)
        if total - nfin > 0:
            out.append((INF, total - nfin))
        return out


def _rmap(obj) -> RationalMap:
    def coeffs(v):
        return tuple(complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c) for c in v)
    try:
        return RationalMap(coeffs(obj["num"]), coeffs(obj.get("den", [1])))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"bad rational map data: {e}") from e


@dataclass
class TreeOfSpheres:
    vertices: tuple
    edges: tuple        # ((a, b), ...)
    F: dict
    xi: dict            # a -> {neighbour: point}
    R: dict             # a -> RationalMap
    degree: int

    def __post_init__(self):
        vs = set(self.vertices)
        for a, b in self.edges:
            if a not in vs or b not in vs or a == b:
                raise InputError(f"bad edge ({a!r}, {b!r})")
        for a in self.vertices:
            if a not in self.F or self.F[a] not in vs:
                raise InputError(f"F is not defined on vertex {a!r}")
            if a not in self.R:
                raise InputError(f"no rational map at vertex {a!r}")
            for b in self.xi.get(a, {}):
                if b not in vs:
                    raise InputError(f"xi at {a!r} names unknown vertex {b!r}")

    def neighbours(self, a) -> list:
        return sorted({b for x, b in self.edges if x == a} | {x for x, b in self.edges if b == a}, key=str)

    def path(self, u, v) -> list:
        prev, stack = {u: None}, [u]
        while stack:
            x = stack.pop()
            for y in self.neighbours(x):
                if y not in prev:
                    prev[y] = x
                    stack.append(y)
        if v not in prev:
            raise InputError(f"{u!r} and {v!r} are not connected")
        out = [v]
        while out[-1] != u:
            out.append(prev[out[-1]])
        return out[::-1]

    def DF(self, a, b):
        """Image of the tangent direction at a toward b: a direction at F(a)."""
        fa, fb = self.F[a], self.F[b]
        if fa == fb:
            return None
        return self.path(fa, fb)[1]

    def singular_set(self, a) -> list:
        return list(self.xi.get(a, {}).values())


def validate_tree_of_spheres(TS: TreeOfSpheres, tol: float = 1e-9) -> dict:
    checks = []

    def record(name, ok, detail=""):
        checks.append({"check": name, "pass": bool(ok), "detail": detail})

    for a in TS.vertices:
        nb = TS.neighbours(a)
        pts = TS.xi.get(a, {})
        ok = sorted(pts, key=str) == nb
        vals = list(pts.values())
        inj = all(chordal(vals[i], vals[j]) > tol for i in range(len(vals)) for j in range(i + 1, len(vals)))
        record(f"xi[{a}]", ok and inj,
               f"{len(vals)} points for valence {len(nb)}" + ("" if inj else "; not injective"))
        record(f"degree[{a}]", TS.R[a].degree >= 1, f"deg R = {TS.R[a].degree}")

    for a, b in TS.edges:
        record(f"edge-injective[{a},{b}]", TS.F[a] != TS.F[b], f"F maps to ({TS.F[a]}, {TS.F[b]})")

    for a in TS.vertices:
        for b, x in TS.xi.get(a, {}).items():
            tgt = TS.DF(a, b)
            fa = TS.F[a]
            if tgt is None or tgt not in TS.xi.get(fa, {}):
                record(f"tangent[{a}->{b}]", False, "image direction undefined")
                continue
            err = chordal(TS.R[a](x), TS.xi[fa][tgt])
            record(f"tangent[{a}->{b}]", err <= tol, f"chordal error {err:.3e}")

    for a in TS.vertices:
        fa = TS.F[a]
        worst = 0.0
        for x in TS.singular_set(a):
            y = TS.R[a](x)
            worst = max(worst, min((chordal(y, w) for w in TS.singular_set(fa)), default=math.inf))
        record(f"singular-invariance[{a}]", worst <= tol, f"max distance {worst:.3e}")

    free, singular = [], []
    for a in TS.vertices:
        sing = TS.singular_set(a)
        crit = TS.R[a].critical_points()
        nsing = 0
        for c, m in crit:
            if any(chordal(c, x) <= tol for x in sing):
                singular.append((a, c, m))
                nsing += m
            else:
                free.append((a, c, m))
        nfree = sum(m for _, m in crit) - nsing
        record(f"riemann-hurwitz[{a}]", nsing + nfree == 2 * TS.R[a].degree - 2,
               f"{nsing} singular + {nfree} free")
    nfree = sum(m for *_, m in free)
    record("free-critical-count", nfree == 2 * TS.degree - 2, f"{nfree} free, expected {2 * TS.degree - 2}")

    return {"pass": all(c["pass"] for c in checks),
            "checks": checks,
            "free_critical": [(str(a), _pt(c), m) for a, c, m in free],
            "singular_critical": [(str(a), _pt(c), m) for a, c, m in singular],
            "tol": tol}


def _pt(z):
    return "inf" if is_inf(z) else [float(z.real), float(z.imag)]


# ---- local degree by winding number

def _local_chart(R: RationalMap, x):
    """Return (g, x0) with g holomorphic near x0 and deg_x0 g = deg_x R."""
    if is_inf(x):
        base = lambda w: R(1 / w) if w != 0 else R(INF)
        x0 = 0j
    else:
        base, x0 = R, complex(x)
    y = base(x0)
    if is_inf(y):
        return (lambda z: 1 / base(z)), x0
    return (lambda z: base(z) - y), x0


def _order_at(P: np.poly1d, x: complex, rel: float = 1e-10) -> int:
    """Numerical order of vanishing of P at x from its Taylor coefficients."""
    c, q, fact = [], P, 1.0
    for j in range(P.order + 1):
        if j:
            fact *= j
        c.append(abs(q(x)) / fact)
        q = q.deriv()
    big = max(c)
    return next((j for j, v in enumerate(c) if v > rel * big), 0)


def _drop_nearest(pts: list, x: complex, k: int) -> list:
    """Remove the k points closest to x (numerical copies of a multiple root at x)."""
    if k <= 0:
        return pts
    order = sorted(range(len(pts)), key=lambda i: abs(pts[i] - x))
    gone = set(order[:k])
    return [p for i, p in enumerate(pts) if i not in gone]


def _nearby(R: RationalMap, x) -> list[complex]:
    """Points that must stay outside the winding circle around x, in the chart of x."""
    crit = [c for c, m in R.critical_points() for _ in range(m) if not is_inf(c)]
    y = R(x)
    P = R.D if is_inf(y) else R.N - y * R.D
    zeros = poly_roots(P)
    if not is_inf(x):
        # rounding splits a multiple root at x into a small cluster around it
        m = _order_at(P, complex(x))
        zeros = _drop_nearest(zeros, x, m)
        crit = _drop_nearest(crit, x, m - 1)
    pts = crit + zeros + poly_roots(R.D)
    if is_inf(x):
        return [1 / p for p in pts if p != 0]
    return pts


def local_degree(R: RationalMap, x, avoid=(), samples: int = 4096) -> int:
    g, x0 = _local_chart(R, x)
    extra = [a for a in avoid if not is_inf(a)]
    if is_inf(x):
        extra = [1 / a for a in extra if a != 0]
    others = [p for p in _nearby(R, x) + extra if abs(p - x0) > 1e-9]
    gap = min((abs(p - x0) for p in others), default=2.0)
    r = max(gap / 2, 1e-6)
    if r >= gap:
        raise RadiusSelectionFailed(f"other points within {gap:.2e} of {x}")
    th = 2 * np.pi * np.arange(samples + 1) / samples
    vals = np.array([g(z) for z in x0 + r * np.exp(1j * th)])
    if np.any(~np.isfinite(vals)) or np.min(np.abs(vals)) == 0:
        raise RadiusSelectionFailed("winding circle meets a zero or pole")
    w = np.sum(np.angle(vals[1:] / vals[:-1])) / (2 * np.pi)
    k = int(round(w))
    if abs(w - k) > 1e-6 or k < 1:
        raise RadiusSelectionFailed(f"winding number {w} is not a positive integer")
    return k


def edge_local_degree(TS: TreeOfSpheres, E) -> int:
    a, b = E
    if b not in TS.xi.get(a, {}) or a not in TS.xi.get(b, {}):
        raise InputError(f"({a!r}, {b!r}) is not a marked edge")
    xa, xb = TS.xi[b][a], TS.xi[a][b]
    da = local_degree(TS.R[a], xb, [p for k, p in TS.xi[a].items() if k != b])
    db = local_degree(TS.R[b], xa, [p for k, p in TS.xi[b].items() if k != a])
    if da != db:
        raise DegreeMismatch(f"deg at x_b of R_a is {da}, deg at x_a of R_b is {db}")
    return da


# ---- io

def _point(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return INF
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def spheres_from_json(obj) -> TreeOfSpheres:
    try:
        verts = tuple(str(v) for v in obj["vertices"])
        edges = tuple((str(a), str(b)) for a, b in obj.get("edges", []))
        F = {str(k): str(v) for k, v in obj["F"].items()}
        xi = {str(a): {str(b): _point(p) for b, p in m.items()} for a, m in obj.get("xi", {}).items()}
        R = {str(a): _rmap(m) for a, m in obj["R"].items()}
        d = int(obj["degree"])
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"bad tree-of-spheres data: {e}") from e
    return TreeOfSpheres(verts, edges, F, xi, R, d)


def load_spheres(path) -> TreeOfSpheres:
    with open(path) as fh:
        return spheres_from_json(json.load(fh))
