"""Linear quadrilateral meshing of a reconstructed curve network.

The chords of the reconstructed pieces (straight edges between consecutive
joints) are recovered in a constrained Delaunay triangulation, which is then
refined toward edge length ``2 * lt``. Triangle pairs are merged into quads
by a minimum-cost maximum-cardinality matching on the dual graph, and a
global midpoint subdivision turns the quad-dominant mesh into a pure quad
mesh whose tagged edges follow the reconstructed curves.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.spatial import Delaunay

from .curves import BezierSegment, arc_midpoint

__all__ = [
    "GeometryError",
    "EdgeTag",
    "LinearMesh",
    "triangulate",
    "quad_quality",
    "DualGraph",
    "build_dual",
    "match_dual",
    "matching_cost",
    "merge_and_subdivide",
    "mesh_from_reconstruction",
    "ZETA",
]

ZETA = 10000.0
# pairs below this merged-quad quality stay triangles (split into 3 quads)
MIN_MERGE_QUALITY = 0.5


class GeometryError(ValueError):
    """Chords intersect or pass through a vertex; regions overlap."""


@dataclass(frozen=True)
class EdgeTag:
    """A mesh edge lying on a reconstructed piece."""

    chain: int
    piece: int
    kind: str  # "boundary" | "interface"


@dataclass
class LinearMesh:
    """Vertices plus triangles and quads, all counterclockwise.

    ``edge_tags`` and ``edge_curves`` are keyed by ``(min id, max id)``; the
    curve of a tagged edge runs from the smaller vertex id to the larger.
    ``corner`` marks vertices where two tagged edges meet without tangent
    continuity (chain ends).
    """

    vertices: np.ndarray
    tris: list[tuple[int, int, int]] = field(default_factory=list)
    quads: list[tuple[int, int, int, int]] = field(default_factory=list)
    tri_region: list = field(default_factory=list)
    quad_region: list = field(default_factory=list)
    edge_tags: dict[tuple[int, int], EdgeTag] = field(default_factory=dict)
    edge_curves: dict[tuple[int, int], BezierSegment] = field(default_factory=dict)
    corner: set[int] = field(default_factory=set)
    flagged: list[int] = field(default_factory=list)

    def tagged(self, a: int, b: int) -> bool:
        return _key(a, b) in self.edge_tags

    def tagged_vertices(self) -> set[int]:
        out: set[int] = set()
        for a, b in self.edge_tags:
            out.add(a)
            out.add(b)
        return out

    def quad_points(self, q) -> np.ndarray:
        return self.vertices[list(q)]

    def signed_areas(self) -> np.ndarray:
        out = []
        for q in self.quads:
            p = self.vertices[list(q)]
            x, y = p[:, 0], p[:, 1]
            out.append(0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))
        return np.array(out)


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


# ---------------------------------------------------------------------------
# geometric predicates
# ---------------------------------------------------------------------------

def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _incircle(a, b, c, d) -> float:
    """Positive when d lies inside the circumcircle of counterclockwise a, b, c."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx))


def _circumcenter(a, b, c):
    bx, by = b[0] - a[0], b[1] - a[1]
    cx, cy = c[0] - a[0], c[1] - a[1]
    d = 2.0 * (bx * cy - by * cx)
    if d == 0.0:
        return None
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return (a[0] + ux, a[1] + uy)


def _crosses(a, b, u, v) -> bool:
    """Proper crossing of segments ab and uv."""
    o1 = _orient(a, b, u)
    o2 = _orient(a, b, v)
    o3 = _orient(u, v, a)
    o4 = _orient(u, v, b)
    return o1 * o2 < 0 and o3 * o4 < 0


# ---------------------------------------------------------------------------
# triangle mesh with constrained edges
# ---------------------------------------------------------------------------

class _TriMesh:
    def __init__(self, pts, scale: float):
        self.pts: list[tuple[float, float]] = [tuple(map(float, p)) for p in pts]
        self.tris: list[tuple[int, int, int] | None] = []
        self.region: list = []
        self.emap: dict[tuple[int, int], int] = {}
        self.vt: list[set[int]] = [set() for _ in self.pts]
        self.constrained: set[tuple[int, int]] = set()
        self.scale = scale
        self.tiny = 1e-14 * scale * scale

    def add_point(self, p) -> int:
        self.pts.append((float(p[0]), float(p[1])))
        self.vt.append(set())
        return len(self.pts) - 1

    def add_tri(self, a, b, c, region=None, slot=None) -> int:
        if slot is None:
            slot = len(self.tris)
            self.tris.append((a, b, c))
            self.region.append(region)
        else:
            self.tris[slot] = (a, b, c)
            self.region[slot] = region
        for u, v in ((a, b), (b, c), (c, a)):
            self.emap[(u, v)] = slot
        for w in (a, b, c):
            self.vt[w].add(slot)
        return slot

    def remove_tri(self, t):
        a, b, c = self.tris[t]
        for u, v in ((a, b), (b, c), (c, a)):
            if self.emap.get((u, v)) == t:
                del self.emap[(u, v)]
        for w in (a, b, c):
            self.vt[w].discard(t)
        self.tris[t] = None

    def alive(self):
        return [t for t, tri in enumerate(self.tris) if tri is not None]

    def has_edge(self, a, b) -> bool:
        return (a, b) in self.emap or (b, a) in self.emap

    def is_constrained(self, a, b) -> bool:
        return _key(a, b) in self.constrained

    def opposite(self, t, a, b):
        tri = self.tris[t]
        for w in tri:
            if w != a and w != b:
                return w
        raise AssertionError

    def flip(self, u, v) -> tuple[int, int]:
        """Flip edge uv; returns the new diagonal (x, y)."""
        t1 = self.emap[(u, v)]
        t2 = self.emap[(v, u)]
        x = self.opposite(t1, u, v)
        y = self.opposite(t2, v, u)
        r1, r2 = self.region[t1], self.region[t2]
        self.remove_tri(t1)
        self.remove_tri(t2)
        self.add_tri(u, y, x, r1, slot=t1)
        self.add_tri(y, v, x, r2, slot=t2)
        return x, y

    def convex_quad(self, u, v) -> bool:
        t1 = self.emap.get((u, v))
        t2 = self.emap.get((v, u))
        if t1 is None or t2 is None:
            return False
        x = self.opposite(t1, u, v)
        y = self.opposite(t2, v, u)
        P = self.pts
        return (_orient(P[u], P[y], P[x]) > self.tiny and _orient(P[y], P[v], P[x]) > self.tiny)

    def needs_flip(self, u, v) -> bool:
        if self.is_constrained(u, v):
            return False
        t1 = self.emap.get((u, v))
        t2 = self.emap.get((v, u))
        if t1 is None or t2 is None:
            return False
        x = self.opposite(t1, u, v)
        y = self.opposite(t2, v, u)
        P = self.pts
        if _incircle(P[u], P[v], P[x], P[y]) <= 0.0:
            return False
        return self.convex_quad(u, v)

    def lawson(self, edges=None, frozen: set[int] | None = None):
        """Flip non-constrained edges until locally Delaunay."""
        if edges is None:
            edges = {_key(u, v) for (u, v) in self.emap}
        stack = sorted(edges)
        limit = 50 * (len(stack) + 10)
        while stack and limit > 0:
            limit -= 1
            u, v = stack.pop()
            if frozen and (u in frozen or v in frozen):
                continue
            if not self.needs_flip(u, v):
                continue
            x, y = self.flip(u, v)
            stack.extend([_key(u, y), _key(y, v), _key(v, x), _key(x, u)])

    # -- constraint recovery -------------------------------------------------

    def _crossing_edges(self, a, b):
        P = self.pts
        pa, pb = P[a], P[b]
        start = None
        for t in sorted(self.vt[a]):
            tri = self.tris[t]
            i = tri.index(a)
            p, q = tri[(i + 1) % 3], tri[(i + 2) % 3]
            for w in (p, q):
                if _on_segment(pa, pb, P[w], self.tiny):
                    raise GeometryError(f"chord {a}-{b} passes through vertex {w}")
            if _crosses(pa, pb, P[p], P[q]):
                start = (t, p, q)
                break
        if start is None:
            raise GeometryError(f"cannot locate chord {a}-{b} in the triangulation")
        t, p, q = start
        out = [(p, q)]
        for _ in range(len(self.tris) + 5):
            t2 = self.emap.get((q, p))
            if t2 is None:
                raise GeometryError(f"chord {a}-{b} leaves the triangulation")
            r = self.opposite(t2, q, p)
            if r == b:
                return out
            if _on_segment(pa, pb, P[r], self.tiny):
                raise GeometryError(f"chord {a}-{b} passes through vertex {r}")
            if _crosses(pa, pb, P[q], P[r]):
                p, q = q, r
            elif _crosses(pa, pb, P[r], P[p]):
                p, q = r, p
            else:
                raise GeometryError(f"walk along chord {a}-{b} got lost")
            t = t2
            out.append((p, q))
        raise GeometryError(f"walk along chord {a}-{b} did not terminate")

    def recover(self, a, b):
        if self.has_edge(a, b):
            return
        P = self.pts
        queue = list(self._crossing_edges(a, b))
        for u, v in queue:
            if self.is_constrained(u, v):
                raise GeometryError(f"chords {a}-{b} and {u}-{v} intersect")
        stall = 0
        while queue:
            u, v = queue.pop(0)
            if not self.has_edge(u, v):
                continue
            if (u, v) not in self.emap:
                u, v = v, u
            if not self.convex_quad(u, v):
                queue.append((u, v))
                stall += 1
                if stall > 4 * len(queue) + 100:
                    raise GeometryError(f"could not recover chord {a}-{b}")
                continue
            stall = 0
            x, y = self.flip(u, v)
            if {x, y} != {a, b} and _crosses(P[a], P[b], P[x], P[y]):
                queue.append((x, y))
        if not self.has_edge(a, b):
            raise GeometryError(f"could not recover chord {a}-{b}")

    # -- point insertion -------------------------------------------------------

    def locate(self, t0, p):
        """Walk from triangle t0 toward p; None when blocked by a constraint or the hull."""
        P = self.pts
        t = t0
        tri = self.tris[t]
        c = tuple(sum(P[w][k] for w in tri) / 3.0 for k in range(2))
        prev = None
        for _ in range(4 * len(self.tris) + 10):
            tri = self.tris[t]
            exit_edge = None
            for i in range(3):
                u, v = tri[i], tri[(i + 1) % 3]
                if _orient(P[u], P[v], p) < 0.0 and (u, v) != prev:
                    if _orient(c, p, P[u]) * _orient(c, p, P[v]) <= 0.0 or exit_edge is None:
                        exit_edge = (u, v)
            if exit_edge is None:
                return t
            u, v = exit_edge
            if self.is_constrained(u, v):
                return None
            t2 = self.emap.get((v, u))
            if t2 is None:
                return None
            prev = (v, u)
            t = t2
        return None

    def insert(self, t0, p, frozen_region=True) -> int | None:
        """Bowyer-Watson insertion of p (located in t0); None if rejected."""
        P = self.pts
        region = self.region[t0]
        cavity = {t0}
        stack = [t0]
        while stack:
            t = stack.pop()
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                if self.is_constrained(u, v):
                    continue
                n = self.emap.get((v, u))
                if n is None or n in cavity:
                    continue
                na, nb, nc = self.tris[n]
                if _incircle(P[na], P[nb], P[nc], p) > 0.0:
                    cavity.add(n)
                    stack.append(n)
        boundary = []
        for t in cavity:
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                n = self.emap.get((v, u))
                if n is None or n not in cavity:
                    boundary.append((u, v))
        for u, v in boundary:
            if self.is_constrained(u, v):
                mid = (0.5 * (P[u][0] + P[v][0]), 0.5 * (P[u][1] + P[v][1]))
                r2 = 0.25 * ((P[u][0] - P[v][0]) ** 2 + (P[u][1] - P[v][1]) ** 2)
                if (p[0] - mid[0]) ** 2 + (p[1] - mid[1]) ** 2 < r2:
                    return None
            if _orient(P[u], P[v], p) <= self.tiny:
                return None
        w = self.add_point(p)
        slots = sorted(cavity)
        for t in slots:
            self.remove_tri(t)
        for i, (u, v) in enumerate(sorted(boundary)):
            self.add_tri(u, v, w, region, slot=slots[i] if i < len(slots) else None)
        return w

    def split_triangle(self, t, p) -> int:
        a, b, c = self.tris[t]
        region = self.region[t]
        w = self.add_point(p)
        self.remove_tri(t)
        self.add_tri(a, b, w, region, slot=t)
        self.add_tri(b, c, w, region)
        self.add_tri(c, a, w, region)
        return w

    def split_edge(self, u, v) -> int:
        """Insert the midpoint of unconstrained edge uv, splitting both sides."""
        P = self.pts
        w = self.add_point((0.5 * (P[u][0] + P[v][0]), 0.5 * (P[u][1] + P[v][1])))
        for a, b in ((u, v), (v, u)):
            t = self.emap.get((a, b))
            if t is None:
                continue
            c = self.opposite(t, a, b)
            region = self.region[t]
            self.remove_tri(t)
            self.add_tri(a, w, c, region, slot=t)
            self.add_tri(w, b, c, region)
        return w


def _on_segment(a, b, p, tiny) -> bool:
    if abs(_orient(a, b, p)) > tiny * 1e3:
        return False
    dx, dy = b[0] - a[0], b[1] - a[1]
    s = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)
    return 1e-9 < s < 1.0 - 1e-9


# ---------------------------------------------------------------------------
# triangulation
# ---------------------------------------------------------------------------

@dataclass
class ChordSet:
    """Straight-edge skeleton of a reconstruction: points, chords, regions."""

    points: np.ndarray
    chords: list[tuple[int, int, EdgeTag, BezierSegment, tuple]]
    corner: set[int]
    regions: list


def _point_in_region(p, edges, pts) -> bool:
    inside = False
    x, y = p
    for a, b in edges:
        (x0, y0), (x1, y1) = pts[a], pts[b]
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xc > x:
                inside = not inside
    return inside


def _tri_quality(P, tri):
    a, b, c = (P[w] for w in tri)
    l2 = [(a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2,
          (b[0] - c[0]) ** 2 + (b[1] - c[1]) ** 2,
          (c[0] - a[0]) ** 2 + (c[1] - a[1]) ** 2]
    area2 = _orient(a, b, c)
    if area2 <= 0.0:
        return math.inf, 0.0
    prod = math.sqrt(l2[0] * l2[1] * l2[2])
    R = prod / (2.0 * area2)
    return R / math.sqrt(min(l2)), R


def triangulate(chords: ChordSet, lt: float, smooth_iters: int = 4,
                max_points: int = 200000, split_chord_corners: bool = False) -> LinearMesh:
    """Constrained Delaunay triangulation of the chord skeleton, refined to ~2*lt edges.

    With ``split_chord_corners`` every triangle having two chord edges is split
    so that no later merge or subdivision can produce a quad with two tagged
    edges meeting at a vertex.
    """
    pts = np.asarray(chords.points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diag = float(np.hypot(*(hi - lo)))
    pad = diag + 1.0
    box = np.array([[lo[0] - pad, lo[1] - pad], [hi[0] + pad, lo[1] - pad],
                    [hi[0] + pad, hi[1] + pad], [lo[0] - pad, hi[1] + pad]])
    allp = np.vstack([pts, box])
    tm = _TriMesh(allp, diag)
    dl = Delaunay(allp)
    for s in dl.simplices:
        a, b, c = (int(v) for v in s)
        if _orient(tm.pts[a], tm.pts[b], tm.pts[c]) < 0:
            b, c = c, b
        tm.add_tri(a, b, c)
    for a, b, *_ in chords.chords:
        tm.constrained.add(_key(a, b))
    for a, b, *_ in chords.chords:
        tm.recover(a, b)
    tm.lawson()

    # label regions; drop everything outside the domain
    region_edges: dict = {r: [] for r in chords.regions}
    for a, b, _tag, _curve, regs in chords.chords:
        for r in regs:
            region_edges[r].append((a, b))
    for t in tm.alive():
        tri = tm.tris[t]
        c = tuple(sum(tm.pts[w][k] for w in tri) / 3.0 for k in range(2))
        inside = [r for r in chords.regions if _point_in_region(c, region_edges[r], tm.pts)]
        if len(inside) > 1:
            raise GeometryError(f"regions {inside} overlap near {c}")
        if not inside:
            tm.remove_tri(t)
        else:
            tm.region[t] = inside[0]

    _refine(tm, 2.0 * lt, max_points)
    nfixed = len(pts)
    for _ in range(smooth_iters):
        _smooth(tm, nfixed)
        tm.lawson()
    if split_chord_corners:
        # splitting can leave slivers next to the new vertex; refine those and
        # split again in case refinement re-created a two-chord triangle
        for _ in range(4):
            if not _split_two_chord(tm):
                break
            _refine(tm, 2.0 * lt, max_points)

    alive = tm.alive()
    used = sorted({w for t in alive for w in tm.tris[t]})
    remap = {old: i for i, old in enumerate(used)}
    mesh = LinearMesh(np.array([tm.pts[w] for w in used]))
    for t in alive:
        mesh.tris.append(tuple(remap[w] for w in tm.tris[t]))
        mesh.tri_region.append(tm.region[t])
    for a, b, tag, curve, _regs in chords.chords:
        ka, kb = remap[a], remap[b]
        k = _key(ka, kb)
        mesh.edge_tags[k] = tag
        mesh.edge_curves[k] = curve if ka < kb else curve.reversed()
    mesh.corner = {remap[w] for w in chords.corner if w in remap}
    return mesh


def _refine(tm: _TriMesh, h: float, max_points: int):
    """Circumcenter insertion for poorly shaped or oversized triangles."""
    ratio_limit = math.sqrt(2.0)
    # a right triangle with legs h is the largest accepted
    size_limit = h * math.sqrt(0.5) * (1.0 + 1e-9)
    counter = itertools.count()
    heap = []

    def push(t):
        tri = tm.tris[t]
        if tri is None:
            return
        q, R = _tri_quality(tm.pts, tri)
        if q > ratio_limit or R > size_limit:
            heapq.heappush(heap, (-R, next(counter), t, tri))

    for t in tm.alive():
        push(t)
    rejected: set[tuple[int, int, int]] = set()
    while heap and len(tm.pts) < max_points:
        _, _, t, tri = heapq.heappop(heap)
        if tm.tris[t] != tri or tri in rejected:
            continue
        cc = _circumcenter(*(tm.pts[w] for w in tri))
        if cc is None:
            rejected.add(tri)
            continue
        loc = tm.locate(t, cc)
        if loc is None:
            rejected.add(tri)
            continue
        w = tm.insert(loc, cc)
        if w is None:
            rejected.add(tri)
            continue
        for s in sorted(tm.vt[w]):
            push(s)


def _smooth(tm: _TriMesh, nfixed: int):
    """Laplacian smoothing of inserted vertices, keeping every triangle positive."""
    P = tm.pts
    for w in range(nfixed + 4, len(P)):
        ts = tm.vt[w]
        if not ts:
            continue
        nbrs = {v for t in ts for v in tm.tris[t] if v != w}
        if any(tm.is_constrained(w, v) for v in nbrs):
            continue
        target = (sum(P[v][0] for v in nbrs) / len(nbrs), sum(P[v][1] for v in nbrs) / len(nbrs))
        before = min(1.0 / _tri_quality(P, tm.tris[t])[0] for t in ts)
        old = P[w]
        P[w] = target
        after = min(1.0 / _tri_quality(P, tm.tris[t])[0] for t in ts)
        if after <= 0.0 or after < 0.9 * before:
            P[w] = old


def _split_two_chord(tm: _TriMesh):
    """Split triangles with two chord edges.

    Such a triangle would otherwise end up, after subdivision, as a quad with
    two tagged edges at their shared vertex. Returns the number of splits.
    """
    count = 0
    for t in tm.alive():
        tri = tm.tris[t]
        if tri is None:
            continue
        for i in range(3):
            a, b, c = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
            if tm.is_constrained(a, b) and tm.is_constrained(b, c):
                if tm.is_constrained(c, a):
                    P = tm.pts
                    tm.split_triangle(t, ((P[a][0] + P[b][0] + P[c][0]) / 3.0,
                                          (P[a][1] + P[b][1] + P[c][1]) / 3.0))
                else:
                    w = tm.split_edge(c, a)
                    nbrs = {v for s in tm.vt[w] for v in tm.tris[s] if v != w}
                    tm.lawson({_key(x, y) for x in nbrs for y in nbrs if tm.has_edge(x, y)}, frozen={w})
                count += 1
                break
    return count


# ---------------------------------------------------------------------------
# quad quality and matching
# ---------------------------------------------------------------------------

def quad_quality(q) -> float:
    """Corner shape quality of a linear quad, clamped to [0, 1].

    Minimum over the four corners of ``2 cross(e1, e2) / (|e1|^2 + |e2|^2)``
    where e1, e2 are the edges leaving the corner. Equals 1 only for a
    square; a 2:1 rectangle scores 0.8; any reflex or flat corner scores 0.
    """
    p = np.asarray(q, dtype=float).reshape(4, 2)
    worst = math.inf
    for i in range(4):
        e1 = p[(i + 1) % 4] - p[i]
        e2 = p[(i - 1) % 4] - p[i]
        n = e1 @ e1 + e2 @ e2
        if n == 0.0 or e1 @ e1 == 0.0 or e2 @ e2 == 0.0:
            raise ValueError("quad has repeated vertices")
        worst = min(worst, 2.0 * (e1[0] * e2[1] - e1[1] * e2[0]) / n)
    return float(min(max(worst, 0.0), 1.0))


@dataclass
class DualGraph:
    graph: nx.Graph
    quads: dict[tuple[int, int], tuple[int, int, int, int]]
    costs: dict[tuple[int, int], float]


def _merged_quad(t1, t2):
    """Counterclockwise quad from two triangles sharing an edge."""
    for i in range(3):
        u, v = t1[i], t1[(i + 1) % 3]
        if v in t2 and u in t2:
            x = t1[(i + 2) % 3]
            y = next(w for w in t2 if w != u and w != v)
            return (u, y, v, x)
    return None


def _adjacent_tagged(mesh: LinearMesh, quad) -> bool:
    for i in range(4):
        a, b, c = quad[i - 1], quad[i], quad[(i + 1) % 4]
        if mesh.tagged(a, b) and mesh.tagged(b, c):
            return True
    return False


def build_dual(mesh: LinearMesh, zeta: float = ZETA) -> DualGraph:
    """Dual graph over triangles; edges are admissible merges with their cost.

    Merges across tagged edges, into quads of quality below
    ``MIN_MERGE_QUALITY`` or into quads with two tagged edges sharing a
    vertex are not admissible. Other quads with two or more tagged edges
    (opposite sides) carry the penalty ``zeta``.
    """
    g = nx.Graph()
    g.add_nodes_from(range(len(mesh.tris)))
    owner: dict[tuple[int, int], int] = {}
    quads = {}
    costs = {}
    for t, tri in enumerate(mesh.tris):
        for i in range(3):
            u, v = tri[i], tri[(i + 1) % 3]
            k = _key(u, v)
            if k in owner:
                s = owner[k]
                if k in mesh.edge_tags or mesh.tri_region[s] != mesh.tri_region[t]:
                    continue
                q = _merged_quad(mesh.tris[s], tri)
                beta = quad_quality(mesh.vertices[list(q)])
                if beta <= 0.0 or beta < MIN_MERGE_QUALITY or _adjacent_tagged(mesh, q):
                    continue
                ntag = sum(mesh.tagged(q[j], q[(j + 1) % 4]) for j in range(4))
                cost = (1.0 - beta) + (zeta if ntag >= 2 else 0.0)
                e = (min(s, t), max(s, t))
                quads[e] = q
                costs[e] = cost
                g.add_edge(e[0], e[1], cost=cost)
            else:
                owner[k] = t
    return DualGraph(g, quads, costs)


def match_dual(dual: DualGraph) -> list[tuple[int, int]]:
    """Maximum-cardinality matching of minimum total cost."""
    if dual.graph.number_of_edges() == 0:
        return []
    big = max(dual.costs.values()) + 1.0
    g = nx.Graph()
    g.add_nodes_from(dual.graph.nodes)
    for (a, b), c in sorted(dual.costs.items()):
        g.add_edge(a, b, weight=big - c)
    m = nx.max_weight_matching(g, maxcardinality=True)
    return sorted((min(a, b), max(a, b)) for a, b in m)


def matching_cost(dual: DualGraph, matching) -> float:
    return float(sum(dual.costs[e] for e in matching))


# ---------------------------------------------------------------------------
# merge and subdivide
# ---------------------------------------------------------------------------

def merge_and_subdivide(mesh: LinearMesh, matching) -> LinearMesh:
    """Merge matched pairs into quads, then split every element into quads.

    Quads split into four and triangles into three. A tagged edge is split
    at the arc-length midpoint of its curve; the two halves keep exact
    sub-curves of it.
    """
    matched: dict[int, int] = {}
    for a, b in matching:
        matched[a] = b
        matched[b] = a
    coarse: list[tuple[tuple[int, ...], object]] = []
    for t, tri in enumerate(mesh.tris):
        if t in matched:
            s = matched[t]
            if s < t:
                continue
            coarse.append((_merged_quad(tri, mesh.tris[s]), mesh.tri_region[t]))
        else:
            coarse.append((tri, mesh.tri_region[t]))
    for q, r in zip(mesh.quads, mesh.quad_region):
        coarse.append((q, r))

    verts = [tuple(p) for p in mesh.vertices]
    out = LinearMesh(np.empty((0, 2)))
    out.corner = set(mesh.corner)
    mids: dict[tuple[int, int], int] = {}

    def midpoint(a, b):
        k = _key(a, b)
        if k in mids:
            return mids[k]
        curve = mesh.edge_curves.get(k)
        if curve is None:
            p = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
            verts.append((float(p[0]), float(p[1])))
            m = len(verts) - 1
        else:
            point, t = arc_midpoint(curve)
            verts.append((float(point[0]), float(point[1])))
            m = len(verts) - 1
            first, second = curve.split(t)
            tag = mesh.edge_tags[k]
            # first half runs k[0] -> m, second half m -> k[1]
            out.edge_tags[_key(k[0], m)] = tag
            out.edge_curves[_key(k[0], m)] = first
            out.edge_tags[_key(k[1], m)] = tag
            out.edge_curves[_key(k[1], m)] = second.reversed()
        mids[k] = m
        return m

    for elem, region in coarse:
        n = len(elem)
        ms = [midpoint(elem[i], elem[(i + 1) % n]) for i in range(n)]
        c = mesh.vertices[list(elem)].mean(axis=0)
        verts.append((float(c[0]), float(c[1])))
        f = len(verts) - 1
        for i in range(n):
            out.quads.append((elem[i], ms[i], f, ms[i - 1]))
            out.quad_region.append(region)
    out.vertices = np.array(verts)
    areas = out.signed_areas()
    out.flagged = [i for i, a in enumerate(areas) if a <= 0.0]
    return out


# ---------------------------------------------------------------------------
# reconstruction -> chord skeleton
# ---------------------------------------------------------------------------

def chords_from_reconstruction(rec) -> ChordSet:
    """Vertices and tagged chords of every reconstructed piece."""
    net = rec.network
    pts: list[np.ndarray] = []
    net_map: dict[int, int] = {}

    def net_vertex(v):
        if v not in net_map:
            net_map[v] = len(pts)
            pts.append(net.vertices[v])
        return net_map[v]

    chords = []
    corner: set[int] = set()
    for ch in rec.chains:
        ids = []
        for j, s in enumerate(ch.joints):
            if not ch.closed and j == 0:
                ids.append(net_vertex(ch.end_vertices[0]))
            elif not ch.closed and j == len(ch.joints) - 1:
                ids.append(net_vertex(ch.end_vertices[1]))
            else:
                pts.append(ch.pieces[j].curve.nodes[0])
                ids.append(len(pts) - 1)
        if not ch.closed:
            corner.add(ids[0])
            corner.add(ids[-1])
        for i, piece in enumerate(ch.pieces):
            a = ids[i]
            b = ids[(i + 1) % len(ids)] if ch.closed else ids[i + 1]
            chords.append((a, b, EdgeTag(ch.index, i, ch.kind), piece.bezier, ch.regions))
    return ChordSet(np.array(pts), chords, corner, list(net.regions))


def mesh_from_reconstruction(rec, lt: float) -> tuple[LinearMesh, LinearMesh, list]:
    """Triangulate, match and subdivide. Returns (triangles, quads, matching)."""
    tri_mesh = triangulate(chords_from_reconstruction(rec), lt, split_chord_corners=True)
    dual = build_dual(tri_mesh)
    matching = match_dual(dual)
    return tri_mesh, merge_and_subdivide(tri_mesh, matching), matching
