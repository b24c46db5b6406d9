"""Disk pictures of laminations and spines.

render_svg writes a small hand-built SVG (byte-identical for identical input).
render_png draws the same geometry with matplotlib for report figures.
"""
from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .errors import InputError
from .hypgeom import MarkedSpine, geodesic_point
from .lamination import Lamination

SIZE = 400
PAD = 10
SCALE = SIZE / 2 - PAD


class IoError(InputError):
    pass


def _xy(p) -> tuple[float, float]:
    """Disk coordinates to SVG coordinates (y axis flipped)."""
    return SIZE / 2 + SCALE * float(p[0]), SIZE / 2 - SCALE * float(p[1])


def _f(x: float) -> str:
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _circle_through(p, q, m):
    """Centre and radius of the circle through three points, or None if collinear."""
    (ax, ay), (bx, by), (cx, cy) = p, q, m
    det = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(det) < 1e-12:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / det
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / det
    return (ux, uy), math.hypot(ax - ux, ay - uy)


def _arc_path(p, q, m) -> str:
    """SVG path from p to q along the circle (or line) through midpoint m."""
    P, Q, Mid = _xy(p), _xy(q), _xy(m)
    c = _circle_through(P, Q, Mid)
    if c is None or c[1] > 1e5:
        return f"M {_f(P[0])} {_f(P[1])} L {_f(Q[0])} {_f(Q[1])}"
    (ux, uy), r = c
    cross = (P[0] - ux) * (Mid[1] - uy) - (P[1] - uy) * (Mid[0] - ux)
    sweep = 1 if cross > 0 else 0
    return f"M {_f(P[0])} {_f(P[1])} A {_f(r)} {_f(r)} 0 0 {sweep} {_f(Q[0])} {_f(Q[1])}"


def leaf_geometry(a, b):
    """Endpoints and geodesic midpoint of the leaf joining angles a and b."""
    ta, tb = 2 * math.pi * float(a), 2 * math.pi * float(b)
    p, q = (math.cos(ta), math.sin(ta)), (math.cos(tb), math.sin(tb))
    delta = (tb - ta) % (2 * math.pi)
    h = min(delta, 2 * math.pi - delta) / 2
    if abs(h - math.pi / 2) < 1e-12:
        return p, q, (0.0, 0.0)
    # the orthogonal circle is centred beyond the midpoint of the shorter arc
    direction = ta + delta / 2 + (math.pi if delta > math.pi else 0.0)
    r = 1 / math.cos(h) - math.tan(h)
    return p, q, (r * math.cos(direction), r * math.sin(direction))


def _edge_geometry(x, y):
    m = geodesic_point(x, y, 0.5).vec
    return tuple(x), tuple(y), tuple(m)


def svg_string(obj) -> str:
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
             f'viewBox="0 0 {SIZE} {SIZE}">',
             f'<circle cx="{_f(SIZE / 2)}" cy="{_f(SIZE / 2)}" r="{_f(SCALE)}" '
             f'fill="none" stroke="black" stroke-width="1"/>']
    if isinstance(obj, Lamination):
        for l in obj.sorted_leaves():
            p, q, m = leaf_geometry(l.a, l.b)
            lines.append(f'<path d="{_arc_path(p, q, m)}" fill="none" stroke="#1f4e9c" stroke-width="1"/>')
    elif isinstance(obj, MarkedSpine):
        if obj.model != "disk":
            raise InputError("only disk spines can be drawn")
        V = obj.vertices
        for i, j in sorted(obj.edges):
            p, q, m = _edge_geometry(V[i], V[j])
            lines.append(f'<path d="{_arc_path(p, q, m)}" fill="none" stroke="#9c1f1f" stroke-width="1.5"/>')
        for k, v in enumerate(V):
            x, y = _xy(v)
            fill = "#9c1f1f" if k in set(obj.marked) else "white"
            lines.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3" fill="{fill}" stroke="#9c1f1f"/>')
    else:
        raise InputError(f"cannot render {type(obj).__name__}")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_svg(obj, path) -> str:
    text = svg_string(obj)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return str(path)


# ---- matplotlib figures

def _sample_leaf(a, b, n=64) -> np.ndarray:
    p, q, m = leaf_geometry(a, b)
    c = _circle_through(p, q, m)
    if c is None:
        return np.array([p, q])
    (ux, uy), r = c
    t0 = math.atan2(p[1] - uy, p[0] - ux)
    t1 = math.atan2(q[1] - uy, q[0] - ux)
    tm = math.atan2(m[1] - uy, m[0] - ux)
    # go from t0 to t1 through tm
    d1 = (t1 - t0) % (2 * math.pi)
    if (tm - t0) % (2 * math.pi) > d1:
        d1 -= 2 * math.pi
    ts = t0 + d1 * np.linspace(0, 1, n)
    return np.column_stack([ux + r * np.cos(ts), uy + r * np.sin(ts)])


def _sample_edge(x, y, n=32) -> np.ndarray:
    return np.array([geodesic_point(x, y, s).vec for s in np.linspace(0, 1, n)])


def _draw(ax, obj, title=""):
    th = np.linspace(0, 2 * np.pi, 361)
    ax.plot(np.cos(th), np.sin(th), color="black", lw=0.8)
    if isinstance(obj, Lamination):
        for l in obj.sorted_leaves():
            xy = _sample_leaf(l.a, l.b)
            ax.plot(xy[:, 0], xy[:, 1], color="#1f4e9c", lw=0.7)
    elif isinstance(obj, MarkedSpine):
        for i, j in obj.edges:
            xy = _sample_edge(obj.vertices[i], obj.vertices[j])
            ax.plot(xy[:, 0], xy[:, 1], color="#9c1f1f", lw=1.2)
        V = np.array(obj.vertices)
        mk = sorted(set(obj.marked))
        ax.scatter(V[:, 0], V[:, 1], s=10, facecolor="white", edgecolor="#9c1f1f", zorder=3)
        if mk:
            ax.scatter(V[mk, 0], V[mk, 1], s=10, color="#9c1f1f", zorder=4)
    ax.set_aspect("equal")
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.axis("off")
    if title:
        ax.set_title(title, fontsize=9)


def render_png(objs: Iterable, path, titles: Iterable[str] = ()) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    objs = list(objs)
    titles = list(titles) + [""] * len(objs)
    fig, axes = plt.subplots(1, len(objs), figsize=(3.2 * len(objs), 3.2), squeeze=False)
    for ax, o, t in zip(axes[0], objs, titles):
        _draw(ax, o, t)
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=120)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    return str(path)
