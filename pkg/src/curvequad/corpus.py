"""Bundled test shapes, generated from closed-form curves.

Every builder returns a :class:`CurveNetwork`. Curved boundaries are cut
into segments of equal parameter span and each segment interpolates the
exact curve at uniform parameters, so inputs carry a small, realistic
approximation error of their own.
"""

from __future__ import annotations

import math

import numpy as np

from .curves import BezierSegment
from .linear_mesh import EdgeTag, LinearMesh
from .reconstruct import CurveNetwork

__all__ = ["SHAPES", "INTERFACE_SHAPES", "build", "retraced_input", "snap_fixture"]


def _param_segments(f, t0: float, t1: float, count: int, degree: int, breaks=None) -> list[np.ndarray]:
    """Segments interpolating ``f`` on ``count`` equal sub-intervals (or given breaks)."""
    ts = np.linspace(t0, t1, count + 1) if breaks is None else np.asarray(breaks, dtype=float)
    out = []
    for a, b in zip(ts[:-1], ts[1:]):
        u = np.linspace(a, b, degree + 1)
        out.append(np.array([f(x) for x in u], dtype=float))
    return out


def _line(p, q, degree: int) -> np.ndarray:
    p, q = np.asarray(p, float), np.asarray(q, float)
    return np.array([p + (q - p) * (i / degree) for i in range(degree + 1)])


def _close(segs: list[np.ndarray]) -> list[np.ndarray]:
    """Make consecutive segment endpoints bit-identical (and the loop closed)."""
    for a, b in zip(segs, segs[1:] + segs[:1]):
        b[0] = a[-1]
    return segs


def _single_loop(segs, rid="domain") -> CurveNetwork:
    segs = _close(segs)
    return CurveNetwork(segs, {rid: [[(k, 1) for k in range(len(segs))]]})


def _polygon(points, degree: int, per_edge: int = 1) -> list[np.ndarray]:
    segs = []
    m = len(points)
    for i in range(m):
        p, q = np.asarray(points[i], float), np.asarray(points[(i + 1) % m], float)
        for k in range(per_edge):
            segs.append(_line(p + (q - p) * k / per_edge, p + (q - p) * (k + 1) / per_edge, degree))
    return segs


def _circle(cx, cy, r, count, degree, phase=0.0, clockwise=False):
    sgn = -1.0 if clockwise else 1.0
    return _param_segments(lambda t: (cx + r * math.cos(phase + sgn * t), cy + r * math.sin(phase + sgn * t)),
                           0.0, 2 * math.pi, count, degree)


# ---------------------------------------------------------------------------
# single-region shapes
# ---------------------------------------------------------------------------

def disk(degree: int = 2) -> CurveNetwork:
    return _single_loop(_circle(0.0, 0.0, 1.0, 8, degree))


def ellipse(degree: int = 3) -> CurveNetwork:
    return _single_loop(_param_segments(lambda t: (2.0 * math.cos(t), 0.8 * math.sin(t)),
                                        0.0, 2 * math.pi, 12, degree))


def square(degree: int = 2) -> CurveNetwork:
    return _single_loop(_polygon([(0, 0), (1, 0), (1, 1), (0, 1)], degree))


def rounded_rectangle(degree: int = 4) -> CurveNetwork:
    w, h, r = 2.0, 1.0, 0.3
    segs = []
    corners = [(w - r, r, -math.pi / 2), (w - r, h - r, 0.0), (r, h - r, math.pi / 2), (r, r, math.pi)]
    straight = [((r, 0), (w - r, 0)), ((w, r), (w, h - r)), ((w - r, h), (r, h)), ((0, h - r), (0, r))]
    for (p, q), (cx, cy, a0) in zip(straight, corners):
        segs.append(_line(p, q, degree))
        segs += _param_segments(lambda t, cx=cx, cy=cy: (cx + r * math.cos(t), cy + r * math.sin(t)),
                                a0, a0 + math.pi / 2, 2, degree)
    return _single_loop(segs)


def l_shape(degree: int = 2) -> CurveNetwork:
    return _single_loop(_polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)], degree))


def flower(degree: int = 3) -> CurveNetwork:
    def f(t):
        rad = 1.0 + 0.25 * math.cos(5 * t)
        return (rad * math.cos(t), rad * math.sin(t))
    return _single_loop(_param_segments(f, 0.0, 2 * math.pi, 30, degree))


def annulus(degree: int = 2) -> CurveNetwork:
    outer = _close(_circle(0.0, 0.0, 1.0, 8, degree))
    inner = _close(_circle(0.0, 0.0, 0.45, 6, degree, clockwise=True))
    segs = outer + inner
    loops = [[(k, 1) for k in range(len(outer))], [(len(outer) + k, 1) for k in range(len(inner))]]
    return CurveNetwork(segs, {"ring": loops})


def airfoil_channel(degree: int = 2) -> CurveNetwork:
    """Rectangular channel around a smooth teardrop profile."""
    box = _close(_polygon([(-1.0, -0.8), (2.0, -0.8), (2.0, 0.8), (-1.0, 0.8)], degree))

    def prof(t):
        # clockwise so the hole loop runs opposite to the outer box
        c = math.cos(t)
        return (0.5 + 0.5 * c, -0.16 * math.sin(t) * (1.0 + 0.55 * c) * (1.15 - 0.6 * (0.5 + 0.5 * c)))
    hole = _close(_param_segments(prof, 0.0, 2 * math.pi, 16, degree))
    segs = box + hole
    loops = [[(k, 1) for k in range(len(box))], [(len(box) + k, 1) for k in range(len(hole))]]
    return CurveNetwork(segs, {"channel": loops})


def gear(degree: int = 2) -> CurveNetwork:
    """Gently toothed wheel: smooth but strongly varying curvature."""
    def f(t):
        rad = 1.0 + 0.08 * math.sin(8 * t)
        return (rad * math.cos(t), rad * math.sin(t))
    return _single_loop(_param_segments(f, 0.0, 2 * math.pi, 64, degree))


def crescent(degree: int = 2) -> CurveNetwork:
    """Moon shape between two circular arcs meeting at two corners."""
    r1, r2, d = 1.0, 0.8, 0.8
    # intersection of |x| = r1 and |x - (d, 0)| = r2
    x = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    y = math.sqrt(r1 * r1 - x * x)
    a1 = math.atan2(y, x)
    a2 = math.atan2(y, x - d)
    outer = _param_segments(lambda t: (r1 * math.cos(t), r1 * math.sin(t)), a1, 2 * math.pi - a1, 8, degree)
    inner = _param_segments(lambda t: (d + r2 * math.cos(t), r2 * math.sin(t)), 2 * math.pi - a2, a2, 6, degree)
    return _single_loop(outer + inner)


# ---------------------------------------------------------------------------
# interface models
# ---------------------------------------------------------------------------

def two_half_disks(degree: int = 2) -> CurveNetwork:
    """Unit disk split along its horizontal diameter into two regions."""
    upper = _param_segments(lambda t: (math.cos(t), math.sin(t)), 0.0, math.pi, 4, degree)
    lower = _param_segments(lambda t: (math.cos(t), math.sin(t)), math.pi, 2 * math.pi, 4, degree)
    diameter = [_line((-1.0, 0.0), (0.0, 0.0), degree), _line((0.0, 0.0), (1.0, 0.0), degree)]
    for s in upper + lower:
        for i in (0, -1):
            s[i] = np.round(s[i], 15)
    upper[0][0] = (1.0, 0.0)
    upper[-1][-1] = (-1.0, 0.0)
    lower[0][0] = (-1.0, 0.0)
    lower[-1][-1] = (1.0, 0.0)
    for a, b in zip(upper, upper[1:]):
        b[0] = a[-1]
    for a, b in zip(lower, lower[1:]):
        b[0] = a[-1]
    segs = upper + lower + diameter
    nu = len(upper)
    d0, d1 = len(segs) - 2, len(segs) - 1
    regions = {
        "upper": [[(k, 1) for k in range(nu)] + [(d0, 1), (d1, 1)]],
        "lower": [[(nu + k, 1) for k in range(len(lower))] + [(d1, -1), (d0, -1)]],
    }
    return CurveNetwork(segs, regions)


def square_with_inclusion(degree: int = 2) -> CurveNetwork:
    """Square matrix region around a circular inclusion region."""
    box = _close(_polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)], degree))
    circ = _close(_circle(0.0, 0.0, 0.5, 8, degree))
    segs = box + circ
    nb = len(box)
    regions = {
        "matrix": [[(k, 1) for k in range(nb)], [(nb + k, -1) for k in reversed(range(len(circ)))]],
        "inclusion": [[(nb + k, 1) for k in range(len(circ))]],
    }
    return CurveNetwork(segs, regions)


SHAPES = {
    "disk": disk,
    "ellipse": ellipse,
    "square": square,
    "rounded_rectangle": rounded_rectangle,
    "l_shape": l_shape,
    "flower": flower,
    "annulus": annulus,
    "airfoil_channel": airfoil_channel,
    "gear": gear,
    "crescent": crescent,
    "two_half_disks": two_half_disks,
    "square_with_inclusion": square_with_inclusion,
}
INTERFACE_SHAPES = ("two_half_disks", "square_with_inclusion")


# ---------------------------------------------------------------------------
# special fixtures
# ---------------------------------------------------------------------------

def retraced_input(degree: int = 2) -> CurveNetwork:
    """A 47-segment closed curve, over-segmented on its flat stretches.

    Mimics a traced outline: long gentle sides cut into many short pieces
    (which the bounded-error approximation merges) next to a few tight bends
    (which refinement splits again).
    """
    def f(t):
        rad = 1.0 + 0.2 * math.cos(5 * t) ** 3 + 0.1 * math.sin(t)
        return (1.4 * rad * math.cos(t), rad * math.sin(t))

    breaks = np.sort(np.concatenate([np.linspace(0.0, 2 * math.pi, 30)[:-1],
                                     np.linspace(0.5, 2.2, 19)[1:]]))
    breaks = np.concatenate([breaks, [2 * math.pi]])
    return _single_loop(_param_segments(f, 0.0, 2 * math.pi, len(breaks) - 1, degree, breaks=breaks))


def snap_fixture(bulge: float = 0.33, degree: int = 2) -> LinearMesh:
    """One quad whose bottom edge is a parabolic arc bulging into the element.

    Snapping the edge nodes alone leaves the interior node behind the moved
    edge (negative Jacobian); the mean value deformation carries it along.
    """
    c = np.array([(0.0, 0.0), (1.0, 0.0), (0.8, 0.9), (0.1, 1.0)])
    mesh = LinearMesh(c.copy())
    mesh.quads = [(0, 1, 2, 3)]
    mesh.quad_region = ["fixture"]
    # quadratic Bezier through (0,0), (0.5, bulge), (1,0): middle control at 2*bulge
    arc = BezierSegment(np.array([(0.0, 0.0), (0.5, 2.0 * bulge), (1.0, 0.0)]))
    while arc.degree < degree:
        arc = arc.elevate()
    mesh.edge_tags[(0, 1)] = EdgeTag(0, 0, "boundary")
    mesh.edge_curves[(0, 1)] = arc
    return mesh


SHAPES["retraced"] = retraced_input


def build(name: str, degree: int | None = None) -> CurveNetwork:
    fn = SHAPES[name]
    return fn() if degree is None else fn(degree)
