"""Blaschke products, Blaschke mapping schemes and circle markings.

Normal form: f(z) = z * prod (z - a_i) / (1 - conj(a_i) z), |a_i| < 1.

On the circle f(e^{2 pi i x}) = e^{2 pi i Phi(x)} with the global lift
    Phi(x) = d x - (1/pi) sum arg(1 - conj(a_i) e^{2 pi i x}),
which is exact because each factor 1 - conj(a) w has positive real part.
Phi' = 1 + sum (1 - |a|^2) / |1 - conj(a) w|^2 > 1, so f is expanding on
the circle and Phi(x) = x has a single real root: the fixed point that
continues 1 from z^d. The marking lifts to H with Phi(H(t)) = H(d t),
H(0) = that root.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Optional

import numpy as np

from .errors import InputError, NumericalError
from .hypgeom import build_spine, dist_raw, geodesic_point, project_segment, MarkedSpine
from .treedyn import MappingScheme

EDGE_TOL = 1e-12
ROOT_CLUSTER = 1e-8


class OutsideDisk(InputError):
    pass


class RootFindingFailed(NumericalError):
    pass


class NotExpanding(NumericalError):
    pass


class DepthExhausted(NumericalError):
    pass


class NoWitnessWithinBounds(NumericalError):
    def __init__(self, label, best):
        self.label, self.best = label, best
        super().__init__(f"no (l, q) within bounds for critical point {label}; smallest gap {best}")


class ClusterDegenerate(NumericalError):
    pass


# ---------------------------------------------------------------- products

@dataclass(frozen=True)
class BlaschkeProduct:
    zeros: tuple

    def __post_init__(self):
        zs = tuple(complex(a) for a in self.zeros)
        for a in zs:
            if abs(a) >= 1 - EDGE_TOL:
                raise OutsideDisk(f"zero {a} is not inside the unit disk")
        object.__setattr__(self, "zeros", zs)

    @property
    def degree(self) -> int:
        return len(self.zeros) + 1

    @property
    def a(self) -> np.ndarray:
        return np.array(self.zeros, dtype=complex)

    def num_den(self) -> tuple[np.poly1d, np.poly1d]:
        P = np.poly1d([1.0, 0.0])
        Q = np.poly1d([1.0])
        for a in self.zeros:
            P = P * np.poly1d([1.0, -a])
            Q = Q * np.poly1d([-np.conj(a), 1.0])
        return P, Q

    def __call__(self, z):
        return bp_eval(self, z)


def power_map(d: int) -> BlaschkeProduct:
    return BlaschkeProduct((0j,) * (d - 1))


def _eval(a: np.ndarray, z):
    z = np.asarray(z, dtype=complex)
    out = z.copy()
    for ai in a:
        out = out * (z - ai) / (1 - np.conj(ai) * z)
    return out


def bp_eval(f: BlaschkeProduct, z):
    zz = np.asarray(z, dtype=complex)
    if np.any(np.abs(zz) > 1 + EDGE_TOL):
        raise OutsideDisk(f"|z| > 1 at {z}")
    out = _eval(f.a, zz)
    return complex(out) if np.ndim(out) == 0 else out


def bp_derivative(f: BlaschkeProduct, z):
    P, Q = f.num_den()
    z = np.asarray(z, dtype=complex)
    out = (P.deriv()(z) * Q(z) - P(z) * Q.deriv()(z)) / Q(z) ** 2
    return complex(out) if np.ndim(out) == 0 else out


def _cluster_roots(roots, tol=ROOT_CLUSTER):
    """Group numerically equal roots. Returns list of (mean root, multiplicity)."""
    groups: list[list[complex]] = []
    for r in sorted(roots, key=lambda c: (round(c.real, 12), round(c.imag, 12))):
        for g in groups:
            if abs(g[0] - r) <= tol * max(1.0, abs(r)) * 10 ** (len(g) > 1):
                g.append(r)
                break
        else:
            groups.append([r])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def poly_roots(p: np.poly1d, polish: int = 8) -> list[complex]:
    """Companion-matrix roots with Newton polishing of simple roots."""
    coeffs = np.trim_zeros(np.asarray(p.coeffs, dtype=complex), "f")
    if len(coeffs) <= 1:
        return []
    # leading coefficients at rounding level only carry roots near infinity
    big = np.max(np.abs(coeffs))
    while len(coeffs) > 1 and abs(coeffs[0]) <= 1e-13 * big:
        coeffs = coeffs[1:]
    if len(coeffs) <= 1:
        return []
    deg = len(coeffs) - 1
    nzero = 0
    while nzero < deg and coeffs[-1 - nzero] == 0:
        nzero += 1
    core = coeffs[: len(coeffs) - nzero]
    try:
        r = list(np.roots(core)) if len(core) > 1 else []
    except np.linalg.LinAlgError as e:
        raise RootFindingFailed(str(e)) from e
    q = np.poly1d(core)
    dq = q.deriv()
    out = []
    for z in r:
        if not np.isfinite(z):
            raise RootFindingFailed("non-finite root from companion matrix")
        if min((abs(z - w) for w in r if w is not z), default=1.0) > 1e-6:
            for _ in range(polish):
                dv = dq(z)
                if dv == 0:
                    break
                step = q(z) / dv
                z = z - step
                if abs(step) < 1e-16:
                    break
        out.append(complex(z))
    return out + [0j] * nzero


def bp_critical_points(f: BlaschkeProduct) -> list[complex]:
    """Critical points in the open disk, with multiplicity (d - 1 of them)."""
    d = f.degree
    if d == 1:
        return []
    P, Q = f.num_den()
    N = P.deriv() * Q - P * Q.deriv()
    roots = [z for z in poly_roots(N) if abs(z) < 1]
    out = []
    for z, m in _cluster_roots(roots):
        out.extend([z] * m)
    if len(out) != d - 1:
        raise RootFindingFailed(f"found {len(out)} critical points in the disk, expected {d - 1}")
    return sorted(out, key=lambda c: (abs(c), np.angle(c)))


def bp_preimages(f: BlaschkeProduct, w: complex) -> list[tuple[complex, int]]:
    """Distinct preimages of w in the disk with multiplicities (sum = degree)."""
    P, Q = f.num_den()
    roots = poly_roots(P - w * Q)
    roots = [z for z in roots if abs(z) < 1 + 1e-9]
    groups = _cluster_roots(roots)
    if sum(m for _, m in groups) != f.degree:
        raise RootFindingFailed(f"preimages of {w}: found {len(roots)} in the disk, expected {f.degree}")
    return groups


# ---------------------------------------------------------------- circle lift

def lift(f: BlaschkeProduct, x):
    x = np.asarray(x, dtype=float)
    w = np.exp(2j * np.pi * x)
    out = f.degree * x
    for a in f.a:
        out = out - np.angle(1 - np.conj(a) * w) / np.pi
    return out


def lift_deriv(f: BlaschkeProduct, x):
    w = np.exp(2j * np.pi * np.asarray(x, dtype=float))
    out = np.ones_like(w.real)
    for a in f.a:
        out = out + (1 - abs(a) ** 2) / np.abs(1 - np.conj(a) * w) ** 2
    return out


def expansion_bound(f: BlaschkeProduct, samples: int = 4096) -> float:
    x = np.arange(samples) / samples
    return float(np.min(lift_deriv(f, x)))


def _check_expanding(f: BlaschkeProduct):
    lam = expansion_bound(f)
    if not lam > 1 + 1e-9:
        raise NotExpanding(f"circle derivative bound {lam} does not exceed 1")
    return lam


def _invert_lift(f: BlaschkeProduct, y, iters: int = 60):
    """Solve Phi(x) = y (vectorized) by safeguarded Newton."""
    y = np.asarray(y, dtype=float)
    d = f.degree
    half = (d - 1) / 2 + 1e-9
    lo, hi = (y - half) / d, (y + half) / d
    x = y / d
    for _ in range(iters):
        g = lift(f, x) - y
        lo = np.where(g < 0, x, lo)
        hi = np.where(g > 0, x, hi)
        xn = x - g / lift_deriv(f, x)
        bad = (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        if np.max(np.abs(xn - x), initial=0.0) < 1e-15:
            return xn
        x = xn
    return x


def fixed_point_angle(f: BlaschkeProduct) -> float:
    """The real root of Phi(x) = x (lifted angle of the continued fixed point)."""
    # Phi(x) - x is increasing with slope > 0 and |Phi(x) - d x| <= (d-1)/2
    lo, hi = -1.0, 1.0
    g = lambda x: float(lift(f, x)) - x
    while g(lo) > 0:
        lo -= 1
    while g(hi) < 0:
        hi += 1
    x = 0.5 * (lo + hi)
    for _ in range(200):
        gx = g(x)
        if gx > 0:
            hi = x
        else:
            lo = x
        xn = x - gx / (float(lift_deriv(f, x)) - 1)
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) < 1e-16:
            break
        x = xn
    return x


def continued_fixed_point(f: BlaschkeProduct) -> complex:
    return complex(np.exp(2j * np.pi * fixed_point_angle(f)))


# ---------------------------------------------------------------- markings

@dataclass(frozen=True)
class AngleGrid:
    """A finite set of rational angles closed under t -> d t mod 1."""
    p: np.ndarray
    q: np.ndarray
    succ: np.ndarray
    digit: np.ndarray
    keys: np.ndarray
    base: int
    degree: int

    @property
    def values(self) -> np.ndarray:
        return self.p / self.q

    def index(self, ts) -> np.ndarray:
        ts = [Fraction(t) % 1 for t in ts]
        k = np.array([t.denominator * self.base + t.numerator for t in ts], dtype=np.int64)
        return np.searchsorted(self.keys, k)


def _close(keys: np.ndarray, base: int, d: int) -> AngleGrid:
    keys = np.unique(keys)
    frontier = keys
    while frontier.size:
        q, p = np.divmod(frontier, base)
        p2 = (d * p) % q
        g = np.gcd(p2, q)
        img = np.unique((q // g) * base + p2 // g)
        frontier = np.setdiff1d(img, keys, assume_unique=True)
        keys = np.union1d(keys, frontier)
    q, p = np.divmod(keys, base)
    p2 = (d * p) % q
    g = np.gcd(p2, q)
    succ = np.searchsorted(keys, (q // g) * base + p2 // g)
    return AngleGrid(p, q, succ, ((d * p) // q).astype(float), keys, base, d)


def _orbit_closure(ts, d: int) -> AngleGrid:
    ts = [Fraction(t) % 1 for t in ts]
    qmax = max((t.denominator for t in ts), default=1)
    if qmax * qmax * d >= 2 ** 62:
        raise InputError("denominators too large for the batch marking solver")
    base = qmax + 1
    keys = np.array([t.denominator * base + t.numerator for t in ts], dtype=np.int64)
    return _close(keys, base, d)


def rational_grid(qmax: int, d: int) -> AngleGrid:
    """All reduced p/q in [0, 1) with q <= qmax; closed under t -> d t."""
    base = qmax + 1
    q = np.concatenate([np.full(k, k, dtype=np.int64) for k in range(1, qmax + 1)])
    p = np.concatenate([np.arange(k, dtype=np.int64) for k in range(1, qmax + 1)])
    keep = np.gcd(p, q) == 1
    return _close(q[keep] * base + p[keep], base, d)


def _dyadic_grid(f: BlaschkeProduct, theta0: float, levels: int) -> np.ndarray:
    """H at k / d^levels, computed level by level through inverse branches."""
    d = f.degree
    H = np.array([theta0])
    for j in range(1, levels + 1):
        k = np.arange(d ** j)
        coarse = (d * k) % d ** j          # index into level j-1 grid is coarse // d
        prev = H[coarse // d]
        digit = (d * k) // d ** j
        H = _invert_lift(f, prev + digit)
    return H


def _affine_solve(alpha, beta, succ, rounds: int = 64):
    """Solve x = alpha * x[succ] + beta when |alpha| < 1, by pointer doubling."""
    a, b, s = alpha.copy(), beta.copy(), succ.copy()
    for _ in range(rounds):
        b = a * b[s] + b
        a = a * a[s]
        s = s[s]
        if np.max(np.abs(a), initial=0.0) < 1e-18:
            break
    return b


def _solve_marking(f: BlaschkeProduct, tv, succ, digit, theta0, grid_levels=None):
    d = f.degree
    if grid_levels is None:
        grid_levels = max(1, int(np.ceil(12 * np.log(2) / np.log(d))))
    G = _dyadic_grid(f, theta0, grid_levels)
    N = len(G)
    xs = np.arange(N + 1) / N
    Gx = np.append(G, theta0 + 1)
    H = np.interp(tv, xs, Gx)
    for _ in range(40):
        r = lift(f, H) - H[succ] - digit
        err = float(np.max(np.abs(r), initial=0.0))
        if err < 2e-15 * d:
            break
        a = lift_deriv(f, H)
        delta = _affine_solve(1 / a, -r / a, succ)
        H = H + delta
    else:
        raise NumericalError("marking solve did not converge")
    return H


def solve_on_grid(f: BlaschkeProduct, G: AngleGrid, grid_levels=None) -> np.ndarray:
    """Lifted marking H on every angle of G, with H(0) the continued fixed point."""
    if G.degree != f.degree:
        raise InputError("angle grid and product have different degrees")
    _check_expanding(f)
    return _solve_marking(f, G.values, G.succ, G.digit, fixed_point_angle(f), grid_levels)


def _marking_lifts(f: BlaschkeProduct, ts, grid_levels=None):
    G = _orbit_closure(ts, f.degree)
    H = solve_on_grid(f, G, grid_levels)
    return H, lambda t: int(G.index([t])[0])


def marking_table(f: BlaschkeProduct, ts) -> dict:
    """eta(t) for many rational t at once. Returns {Fraction: unit complex}."""
    _check_expanding(f)
    ts = list(ts)
    G = _orbit_closure(ts, f.degree)
    vals = np.exp(2j * np.pi * solve_on_grid(f, G))[G.index(ts)]
    return {t: complex(v) for t, v in zip(ts, vals)}


def marking_lift_table(f: BlaschkeProduct, ts) -> dict:
    """Lifted marking H(t) in [H(0), H(0) + 1) for rational t in [0, 1)."""
    _check_expanding(f)
    ts = [Fraction(t) % 1 for t in ts]
    G = _orbit_closure(ts, f.degree)
    H = solve_on_grid(f, G)[G.index(ts)]
    return {t: float(h) for t, h in zip(ts, H)}


def _orbit_length(t: Fraction, d: int) -> int:
    """Preperiod plus period of t under multiplication by d."""
    seen, k = {}, 0
    while t not in seen:
        seen[t] = k
        t, k = (d * t) % 1, k + 1
    return k


def _digits(t: Fraction, d: int, n: int) -> list[int]:
    out = []
    for _ in range(n):
        t = d * t
        out.append(int(t))
        t -= int(t)
    return out


def marking_eval(f: BlaschkeProduct, t, depth: int = 64, tol: float = 1e-12) -> complex:
    """eta_f(t) via nested backward-orbit arcs.

    The digit string of a rational t is eventually periodic. If its preperiod
    plus period fits within depth digits, the periodic tail is solved exactly
    and the result is the limit point of the nested arcs. Otherwise the first
    depth digits are used and DepthExhausted is raised when the final arc is
    wider than tol.
    """
    _check_expanding(f)
    t = Fraction(t) % 1
    d = f.degree
    theta0 = fixed_point_angle(f)
    if _orbit_length(t, d) <= depth:
        H, lookup = _marking_lifts(f, [t], grid_levels=1)
        return complex(np.exp(2j * np.pi * H[lookup(t)]))
    digs = _digits(t, d, depth)
    tail = float((d ** depth * t) % 1)
    lo, hi, mid = theta0, theta0 + 1.0, theta0 + tail
    for k in reversed(digs):
        lo, hi, mid = (float(_invert_lift(f, v + k)) for v in (lo, hi, mid))
    if hi - lo > tol:
        raise DepthExhausted(f"arc after {depth} digits has width {hi - lo:.3e} > {tol:.1e}")
    return complex(np.exp(2j * np.pi * mid))


def functional_equation_error(f: BlaschkeProduct, ts=None, grid: Optional[AngleGrid] = None) -> float:
    """max |eta(d t) - f(eta(t))| over ts (or over a whole grid), evaluating f directly."""
    G = grid if grid is not None else _orbit_closure(ts, f.degree)
    H = solve_on_grid(f, G)
    eta = np.exp(2j * np.pi * H)
    idx = np.arange(len(H)) if ts is None else G.index(ts)
    return float(np.max(np.abs(eta[G.succ[idx]] - _eval(f.a, eta[idx])), initial=0.0))


def rationals_up_to(qmax: int) -> list[Fraction]:
    return [Fraction(p, q) for q in range(1, qmax + 1) for p in range(q) if gcd(p, q) == 1]


# ---------------------------------------------------------------- schemes

@dataclass
class BlaschkeScheme:
    scheme: MappingScheme
    maps: dict
    notes: list = field(default_factory=list)

    def __post_init__(self):
        for s in self.scheme.vertices:
            if s not in self.maps:
                raise InputError(f"no Blaschke product at vertex {s!r}")
            if self.maps[s].degree != self.scheme.delta[s]:
                raise InputError(f"product at {s!r} has degree {self.maps[s].degree}, scheme says {self.scheme.delta[s]}")
        per = self.periodic()
        for s in self.scheme.vertices:
            if s not in per and abs(sum(self.maps[s].zeros)) > 1e-9:
                self.notes.append(f"aperiodic vertex {s!r}: zeros do not sum to 0")

    def periodic(self) -> set:
        return {s for cyc in self.scheme.cycles() for s in cyc}

    def critical_points(self) -> list[tuple]:
        out = []
        for s in self.scheme.vertices:
            for i, c in enumerate(bp_critical_points(self.maps[s])):
                out.append(((s, i), s, c))
        return out


def scheme_orbit(FS: BlaschkeScheme, s, z: complex, k: int):
    if abs(z) >= 1:
        raise OutsideDisk(f"|z| >= 1 at {z}")
    for _ in range(k):
        z = complex(_eval(FS.maps[s].a, np.array(z)))
        s = FS.scheme.phi[s]
    return s, z


def _orbit_list(FS: BlaschkeScheme, s, z, n):
    out = [(s, z)]
    for _ in range(n):
        z = complex(_eval(FS.maps[s].a, np.array(z)))
        s = FS.scheme.phi[s]
        out.append((s, z))
    return out


def marked_points_with_multiplicity(FS: BlaschkeScheme) -> dict:
    per = FS.periodic()
    out: dict = {}

    def get(s):
        if s in out:
            return out[s]
        if s in per:
            out[s] = [(0j, 1)]
            return out[s]
        pts: list = []
        for w, _ in get(FS.scheme.phi[s]):
            for z, m in bp_preimages(FS.maps[s], w):
                for k, (y, mm) in enumerate(pts):
                    if abs(y - z) <= ROOT_CLUSTER:
                        pts[k] = (y, mm + m)
                        break
                else:
                    pts.append((z, m))
        out[s] = pts
        return pts

    for s in FS.scheme.vertices:
        get(s)
    return out


def marked_points(FS: BlaschkeScheme) -> dict:
    return {s: sorted((z for z, _ in v), key=lambda c: (abs(c), np.angle(c)))
            for s, v in marked_points_with_multiplicity(FS).items()}


def scheme_dist(p, q) -> float:
    (s, z), (t, w) = p, q
    if s != t:
        return float("inf")
    if abs(z) >= 1 or abs(w) >= 1:
        return 0.0 if z == w else float("inf")
    return float(dist_raw(np.array([z.real, z.imag]), np.array([w.real, w.imag])))


@dataclass(frozen=True)
class QpcfWitness:
    entries: tuple      # ((label, l, q, gap), ...)
    K: float

    def as_dict(self) -> dict:
        return {lab: (l, q, g) for lab, l, q, g in self.entries}


def quasi_pcf_witness(seq, K: float, n_range, bounds=(8, 8)) -> dict:
    """Lexicographically least (l, q) per critical point with gap <= K.

    seq is a callable n -> BlaschkeScheme or a sequence indexed by n.
    bounds = (max pre-period, max period).
    """
    get = seq if callable(seq) else (lambda n: seq[n])
    max_l, max_q = bounds
    out = {}
    for n in n_range:
        FS = get(n)
        entries = []
        for label, s, c in FS.critical_points():
            orbit = _orbit_list(FS, s, c, max_l + max_q)
            best, found = float("inf"), None
            for l in range(max_l + 1):
                for q in range(1, max_q + 1):
                    g = scheme_dist(orbit[l], orbit[l + q])
                    best = min(best, g)
                    if g <= K:
                        found = (l, q, g)
                        break
                if found:
                    break
            if not found:
                raise NoWitnessWithinBounds(label, best)
            entries.append((label,) + found)
        out[n] = QpcfWitness(tuple(entries), K)
    return out


# ---------------------------------------------------------------- tree extraction

def _c2v(z) -> np.ndarray:
    return np.array([z.real, z.imag])


def single_linkage(points: list[complex], gap: float) -> list[list[int]]:
    n = len(points)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    P = np.array([_c2v(z) for z in points]).reshape(n, 2)
    for i in range(n):
        if i + 1 < n:
            dd = dist_raw(P[i][None, :], P[i + 1:])
            for k in np.nonzero(dd <= gap)[0]:
                a, b = find(i), find(i + 1 + int(k))
                if a != b:
                    parent[max(a, b)] = min(a, b)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def _representative(points, members) -> int:
    if len(members) == 1:
        return members[0]
    P = np.array([_c2v(points[i]) for i in members])
    ecc = [float(np.max(dist_raw(P[k][None, :], P))) for k in range(len(members))]
    return members[int(np.argmin(ecc))]


@dataclass
class SpineForest:
    spines: dict            # s -> MarkedSpine
    clusters: dict          # s -> list of member index lists
    points: dict            # s -> list of complex
    representatives: dict   # s -> list of point indices


def spine_forest(points: dict, cluster_gap: float, attach_radius: float = 1.0) -> SpineForest:
    spines, clusters, reps = {}, {}, {}
    for s, pts in points.items():
        pts = list(pts)
        if not pts:
            continue
        cl = single_linkage(pts, cluster_gap)
        if len(cl) == 1 and len(pts) > 1:
            P = np.array([_c2v(z) for z in pts])
            diam = max(float(np.max(dist_raw(P[i][None, :], P))) for i in range(len(P)))
            if diam > cluster_gap:
                raise ClusterDegenerate(
                    f"vertex {s!r}: all {len(pts)} points chain into one cluster of diameter {diam:.3g}")
        r = [_representative(pts, m) for m in cl]
        clusters[s], reps[s] = cl, r
        spines[s] = build_spine([_c2v(pts[i]) for i in r], attach_radius=attach_radius)
    return SpineForest(spines, clusters, {s: list(p) for s, p in points.items()}, reps)


@dataclass
class QitReport:
    min_vertex_separation: float
    max_critical_distance: float
    max_vertex_displacement: float
    max_edge_displacement: float
    cluster_gap: float
    clusters: dict
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"degenerating_vertices": self.min_vertex_separation,
                "critically_approximating": self.max_critical_distance,
                "vertex_quasi_invariance": self.max_vertex_displacement,
                "edge_quasi_invariance": self.max_edge_displacement,
                "cluster_gap": self.cluster_gap,
                "clusters": {str(k): v for k, v in self.clusters.items()},
                "notes": list(self.notes)}


def _nearest_vertex(sp: MarkedSpine, z: complex) -> tuple[int, float]:
    V = np.array(sp.vertices)
    d = dist_raw(_c2v(z)[None, :], V)
    k = int(np.argmin(d))
    return k, float(d[k])


def extract_tree(FS: BlaschkeScheme, witness: QpcfWitness, cluster_gap: float,
                 attach_radius: float = 1.0):
    """Spine forest over marked and critical-orbit points, the induced vertex
    map and the measured quasi-invariance constants."""
    pts: dict = {s: [] for s in FS.scheme.vertices}

    def add(s, z):
        if all(abs(z - w) > ROOT_CLUSTER for w in pts[s]):
            pts[s].append(z)

    for s, zs in marked_points(FS).items():
        for z in zs:
            add(s, z)
    wit = witness.as_dict()
    crit = FS.critical_points()
    for label, s, c in crit:
        l, q, _ = wit.get(label, (0, 1, 0.0))
        for t, z in _orbit_list(FS, s, c, max(l + q - 1, 0)):
            add(t, z)
    forest = spine_forest(pts, cluster_gap, attach_radius)

    Fmap = {}
    vdisp = 0.0
    for s, sp in forest.spines.items():
        fs, t = FS.maps[s], FS.scheme.phi[s]
        for v, x in enumerate(sp.vertices):
            img = complex(_eval(fs.a, np.array(complex(x[0], x[1]))))
            k, dd = _nearest_vertex(forest.spines[t], img)
            Fmap[(s, v)] = (t, k)
            vdisp = max(vdisp, dd)
    edisp = 0.0
    for s, sp in forest.spines.items():
        fs, t = FS.maps[s], FS.scheme.phi[s]
        tsp = forest.spines[t]
        for i, j in sp.edges:
            a, b = Fmap[(s, i)][1], Fmap[(s, j)][1]
            for frac in (0.25, 0.5, 0.75):
                p = geodesic_point(sp.vertices[i], sp.vertices[j], frac).vec
                img = _c2v(complex(_eval(fs.a, np.array(complex(p[0], p[1])))))
                if a == b:
                    dd = float(dist_raw(img, tsp.vertices[a]))
                else:
                    dd = project_segment(img, tsp.vertices[a], tsp.vertices[b])[1]
                edisp = max(edisp, dd)
    sep = []
    for sp in forest.spines.values():
        V = np.array(sp.vertices)
        for i in range(len(V)):
            if i + 1 < len(V):
                sep.append(float(np.min(dist_raw(V[i][None, :], V[i + 1:]))))
    cdist = 0.0
    for _, s, c in crit:
        cdist = max(cdist, _nearest_vertex(forest.spines[s], c)[1])
    notes = [f"clusters are single-linkage groups at hyperbolic threshold {cluster_gap}"]
    notes += FS.notes
    report = QitReport(min(sep) if sep else 0.0, cdist, vdisp, edisp, cluster_gap,
                       {s: len(c) for s, c in forest.clusters.items()}, notes)
    return forest, Fmap, report


# ---------------------------------------------------------------- io

def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]) if len(v) > 1 else 0.0)
    return complex(v)


def product_from_json(obj) -> BlaschkeProduct:
    try:
        return BlaschkeProduct(tuple(_cplx(z) for z in obj.get("zeros", [])))
    except (TypeError, ValueError, AttributeError) as e:
        raise InputError(f"bad Blaschke product data: {e}") from e


def scheme_from_json(obj) -> BlaschkeScheme:
    from .treedyn import scheme_from_json as _scheme
    if "scheme" not in obj:
        f = product_from_json(obj)
        S = MappingScheme(("s",), {"s": "s"}, {"s": f.degree})
        return BlaschkeScheme(S, {"s": f})
    S = _scheme(obj["scheme"])
    try:
        maps = {s: product_from_json(obj["maps"][s]) for s in S.vertices}
    except KeyError as e:
        raise InputError(f"missing map for vertex {e}") from e
    return BlaschkeScheme(S, maps)


def load_scheme(path) -> BlaschkeScheme:
    with open(path) as fh:
        return scheme_from_json(json.load(fh))
