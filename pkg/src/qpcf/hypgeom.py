"""Poincare disk / ball geometry and the inductive spine construction.

Points are numpy vectors of length 2 (disk) or 3 (ball). All isometries are
Mobius (gyro) translations, which work the same way in any dimension.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

TOL = 1e-9


class ModelMismatch(InputError):
    pass


class DegenerateSegment(InputError):
    pass


class DuplicatePoints(InputError):
    pass


class NotIncident(InputError):
    pass


@dataclass(frozen=True)
class HPoint:
    coords: tuple
    model: str = "disk"

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        if self.model not in ("disk", "ball") or len(c) != (2 if self.model == "disk" else 3):
            raise ModelMismatch(f"{len(c)} coordinates do not fit model {self.model!r}")
        if sum(v * v for v in c) >= 1.0:
            raise InputError(f"point {c} is not inside the unit {self.model}")
        object.__setattr__(self, "coords", c)

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.coords)


def hpoint(x) -> HPoint:
    if isinstance(x, HPoint):
        return x
    if isinstance(x, complex):
        return HPoint((x.real, x.imag), "disk")
    x = tuple(np.ravel(np.asarray(x, dtype=float)))
    return HPoint(x, "disk" if len(x) == 2 else "ball")


def _vec(x) -> np.ndarray:
    return hpoint(x).vec


def _same_model(*pts):
    models = {hpoint(p).model for p in pts}
    if len(models) > 1:
        raise ModelMismatch(f"points come from different models {sorted(models)}")


# ---- vectorized primitives on raw arrays (..., n)

def mobius_add(a, x):
    """a (+) x; the map x -> (-a) (+) x is an isometry sending a to 0."""
    a, x = np.asarray(a, float), np.asarray(x, float)
    ax = np.sum(a * x, -1)
    a2 = np.sum(a * a, -1)
    x2 = np.sum(x * x, -1)
    num = (1 + 2 * ax + x2)[..., None] * a + (1 - a2)[..., None] * x
    den = 1 + 2 * ax + a2 * x2
    return num / den[..., None]


def dist_raw(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    q = np.sum((x - y) ** 2, -1) / ((1 - np.sum(x * x, -1)) * (1 - np.sum(y * y, -1)))
    return 2 * np.arcsinh(np.sqrt(q))


def _project_raw(p, x, y):
    """Nearest point on segment [x, y] to p, broadcast over leading axes."""
    p, x, y = np.broadcast_arrays(*(np.asarray(v, float) for v in (p, x, y)))
    z = mobius_add(-x, y)
    r = np.linalg.norm(z, axis=-1)
    D = 2 * np.arctanh(np.minimum(r, 1 - 1e-17))
    u = z / np.where(r > 0, r, 1)[..., None]
    q = mobius_add(-x, p)
    q2 = np.sum(q * q, -1)
    P0 = (1 + q2) / (1 - q2)
    w = 2 * np.sum(q * u, -1) / (1 - q2)
    t = np.clip(np.arctanh(np.clip(w / P0, -1 + 1e-16, 1 - 1e-16)), 0, D)
    foot = mobius_add(x, np.tanh(t / 2)[..., None] * u)
    return foot, dist_raw(p, foot)


# ---- public operations

def hyp_dist(x, y) -> float:
    _same_model(x, y)
    return float(dist_raw(_vec(x), _vec(y)))


def dist_from_origin(r: float) -> float:
    return float(np.log((1 + r) / (1 - r)))


def geodesic_point(x, y, s: float) -> HPoint:
    _same_model(x, y)
    X, Y = _vec(x), _vec(y)
    if dist_raw(X, Y) < TOL:
        raise DegenerateSegment("segment endpoints coincide")
    z = mobius_add(-X, Y)
    r = np.linalg.norm(z)
    D = 2 * np.arctanh(r)
    out = mobius_add(X, np.tanh(s * D / 2) * z / r)
    return hpoint(out)


def project_segment(p, x, y) -> tuple[HPoint, float]:
    _same_model(p, x, y)
    X, Y = _vec(x), _vec(y)
    if dist_raw(X, Y) < TOL:
        raise DegenerateSegment("segment endpoints coincide")
    foot, d = _project_raw(_vec(p), X, Y)
    return hpoint(foot), float(d)


def direction_at(v, w) -> np.ndarray:
    """Unit tangent at v of the geodesic towards w, in the conformal frame at v."""
    z = mobius_add(-np.asarray(v, float), np.asarray(w, float))
    n = np.linalg.norm(z)
    if n < TOL:
        raise DegenerateSegment("zero-length edge has no direction")
    return z / n


def angle_between(v, w1, w2) -> float:
    c = float(np.dot(direction_at(v, w1), direction_at(v, w2)))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


# ---- spines

@dataclass
class MarkedSpine:
    vertices: list            # numpy arrays
    edges: list               # (i, j) index pairs, i < j
    marked: list              # vertex indices carrying input points
    input_map: dict           # input index -> vertex index
    model: str = "disk"
    log: list = field(default_factory=list, repr=False)

    def point(self, i) -> HPoint:
        return hpoint(self.vertices[i])

    def neighbours(self, i) -> list[int]:
        return sorted({b for a, b in self.edges if a == i} | {a for a, b in self.edges if b == i})

    def valence(self, i) -> int:
        return len(self.neighbours(i))

    def edge_length(self, e) -> float:
        i, j = self.edges[e]
        return float(dist_raw(self.vertices[i], self.vertices[j]))

    def to_json(self) -> dict:
        return {"model": self.model,
                "vertices": [[float(c) for c in v] for v in self.vertices],
                "edges": [list(e) for e in self.edges],
                "marked": sorted(self.marked)}

    def is_tree(self) -> bool:
        n = len(self.vertices)
        if len(self.edges) != n - 1:
            return False
        seen, stack = {0}, [0]
        adj = {i: self.neighbours(i) for i in range(n)}
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == n


def _fermat_point(start, targets, iters: int = 60):
    """Point minimizing the sum of hyperbolic distances to targets.

    Newton's method, recentred at the current estimate each step so the
    gradient and Hessian take their simple form at the origin.
    """
    center = np.asarray(start, float)
    T = np.asarray(targets, float)
    n = center.size

    def total(c):
        return float(np.sum(dist_raw(c[None, :], T)))

    for _ in range(iters):
        W = mobius_add(-center, T)
        r = np.linalg.norm(W, axis=1)
        if np.any(r < 1e-14):
            break  # sitting on a target, where the sum is not smooth
        U = W / r[:, None]
        d = 2 * np.arctanh(r)
        g = -2 * U.sum(0)
        H = sum(4 / np.tanh(dj) * (np.eye(n) - np.outer(u, u)) for dj, u in zip(d, U))
        step = -np.linalg.lstsq(H, g, rcond=None)[0]
        f0 = total(center)
        lam = 1.0
        while lam > 1e-6:
            cand = mobius_add(center, np.clip(lam * step, -0.5, 0.5))
            if total(cand) <= f0 + 1e-15:
                break
            lam /= 2
        else:
            break
        center = cand
        if np.linalg.norm(lam * step) < 1e-15:
            break
    return center


def _relax_steiner(sp: MarkedSpine, sweeps: int = 50):
    """Move unmarked branch vertices to the Fermat point of their neighbours."""
    free = [i for i in range(len(sp.vertices)) if i not in set(sp.marked)]
    for _ in range(sweeps):
        moved = 0.0
        for i in free:
            nb = [sp.vertices[j] for j in sp.neighbours(i)]
            new = _fermat_point(sp.vertices[i], nb)
            moved = max(moved, float(dist_raw(new, sp.vertices[i])))
            sp.vertices[i] = new
        if moved < 1e-12:
            break


def _hull_projection(p, verts):
    V = np.asarray(verts)
    if len(V) == 1:
        return V[0], float(dist_raw(p, V[0]))
    I, J = np.triu_indices(len(V), 1)
    foot, d = _project_raw(p[None, :], V[I], V[J])
    k = int(np.argmin(d))
    return foot[k], float(d[k])


def build_spine(points, attach_radius: float = 1.0, relax: bool = True) -> MarkedSpine:
    if len(points) == 0:
        raise InputError("need at least one point")
    if attach_radius <= 0:
        raise InputError("attach radius must be positive")
    hp = [hpoint(p) for p in points]
    _same_model(*hp)
    P = np.array([h.vec for h in hp])
    n = len(P)
    for i in range(n):
        for j in range(i + 1, n):
            if dist_raw(P[i], P[j]) < TOL:
                raise DuplicatePoints(f"input points {i} and {j} coincide")

    sp = MarkedSpine([P[0].copy()], [], [0], {0: 0}, hp[0].model)
    remaining = list(range(1, n))
    while remaining:
        # next point: nearest to the current hull, ties to lowest index
        best = None
        for idx in remaining:
            foot, d = _hull_projection(P[idx], sp.vertices)
            key = (round(d / TOL) * TOL, idx)
            if best is None or key < best[0]:
                best = (key, idx, foot)
        _, b, a = best
        remaining.remove(b)
        vb = len(sp.vertices)
        V = np.asarray(sp.vertices)
        dv = dist_raw(a[None, :], V)
        v = int(np.argmin(dv))
        if dv[v] <= attach_radius or not sp.edges:
            sp.vertices.append(P[b].copy())
            sp.edges.append((v, vb))
            sp.log.append(("attach", b, v))
        else:
            E = np.array(sp.edges)
            feet, de = _project_raw(a[None, :], V[E[:, 0]], V[E[:, 1]])
            k = int(np.argmin(de))
            i, j = sp.edges[k]
            at = feet[k]
            if dist_raw(at, V[i]) < TOL or dist_raw(at, V[j]) < TOL:
                w = i if dist_raw(at, V[i]) <= dist_raw(at, V[j]) else j
                sp.vertices.append(P[b].copy())
                sp.edges.append((w, vb))
                sp.log.append(("attach", b, w))
            else:
                sp.vertices.append(at)
                sp.edges[k] = (min(i, vb), max(i, vb))
                sp.edges.append((min(j, vb), max(j, vb)))
                sp.vertices.append(P[b].copy())
                sp.edges.append((vb, vb + 1))
                sp.log.append(("split", b, k))
                vb += 1
        sp.marked.append(vb)
        sp.input_map[b] = vb
    if relax:
        _relax_steiner(sp)
    sp.edges = [tuple(sorted(e)) for e in sp.edges]
    return sp


def vertex_angle(spine: MarkedSpine, v: int, e1, e2) -> float:
    def other(e):
        i, j = spine.edges[e] if isinstance(e, int) else tuple(e)
        if v not in (i, j) or (min(i, j), max(i, j)) not in {tuple(sorted(x)) for x in spine.edges}:
            raise NotIncident(f"edge {e} is not incident to vertex {v}")
        return j if i == v else i

    V = spine.vertices
    return angle_between(V[v], V[other(e1)], V[other(e2)])


def spine_from_json(obj) -> MarkedSpine:
    try:
        verts = [np.asarray(v, float) for v in obj["vertices"]]
        edges = [tuple(sorted(map(int, e))) for e in obj["edges"]]
        marked = [int(m) for m in obj.get("marked", [])]
        model = obj.get("model", "disk" if len(verts[0]) == 2 else "ball")
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise InputError(f"bad spine data: {e}") from e
    return MarkedSpine(verts, edges, marked, {i: m for i, m in enumerate(marked)}, model)


def load_points(path) -> list[HPoint]:
    with open(path) as fh:
        obj = json.load(fh)
    pts = obj["points"] if isinstance(obj, dict) else obj
    return [hpoint(p) for p in pts]
