"""Lifting a linear quad mesh to degree-n curved elements.

Every quad gets an ``(n+1) x (n+1)`` grid of equidistant Lagrange nodes by
bilinear placement. Edge nodes live in one global table, so neighbours share
them. Nodes on tagged edges are then moved onto their curve, and the
interior nodes of the affected elements follow through a composite mean
value mapping from the old boundary polygon to the new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import BezierSegment, DegenerateError, SECTOR_SENTINEL, direction_sector, lagrange_to_bezier_matrix
from .linear_mesh import LinearMesh, _key

__all__ = [
    "HighOrderQuadMesh",
    "ControlVectorSectors",
    "DeformationError",
    "elevate",
    "snap_boundary_nodes",
    "mvc_weights",
    "mvc_deform",
    "deform_mesh",
    "sector_certificate",
    "boundary_indices",
    "bezier_net",
]


class DeformationError(RuntimeError):
    """An interior node kept leaving the intermediate polygon."""


@dataclass
class HighOrderQuadMesh:
    """Degree-n quads over a global node table.

    ``elements[e]`` holds the node ids of element ``e`` on its local grid,
    flattened as ``i + (n + 1) * j`` with ``i`` running along xi (corner 0 to
    corner 1) and ``j`` along eta (corner 0 to corner 3).
    """

    degree: int
    nodes: np.ndarray
    elements: np.ndarray
    region: list
    linear: LinearMesh
    edge_nodes: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    interior_nodes: list[list[int]] = field(default_factory=list)
    deformed: list[int] = field(default_factory=list)

    def grid(self, e: int) -> np.ndarray:
        """Node coordinates of element ``e`` as an ``(n+1, n+1, 2)`` array indexed [i, j]."""
        n1 = self.degree + 1
        return self.nodes[self.elements[e]].reshape(n1, n1, 2).transpose(1, 0, 2)

    @property
    def element_count(self) -> int:
        return len(self.elements)

    def tagged_edges(self):
        """Yield ``(node ids along the edge, tag)`` for every tagged edge."""
        for k, tag in sorted(self.linear.edge_tags.items()):
            a, b = k
            yield [a] + self.edge_nodes[k] + [b], tag


def _grid_index(n: int, i: int, j: int) -> int:
    return i + (n + 1) * j


def boundary_indices(n: int) -> list[int]:
    """Flat local indices of the element boundary, counterclockwise from corner 0."""
    out = [_grid_index(n, i, 0) for i in range(n)]
    out += [_grid_index(n, n, j) for j in range(n)]
    out += [_grid_index(n, i, n) for i in range(n, 0, -1)]
    out += [_grid_index(n, 0, j) for j in range(n, 0, -1)]
    return out


def _edge_local(n: int, side: int) -> list[int]:
    """Local indices of one side from its start corner to its end corner."""
    if side == 0:
        return [_grid_index(n, i, 0) for i in range(n + 1)]
    if side == 1:
        return [_grid_index(n, n, j) for j in range(n + 1)]
    if side == 2:
        return [_grid_index(n, i, n) for i in range(n, -1, -1)]
    return [_grid_index(n, 0, j) for j in range(n, -1, -1)]


def elevate(mesh: LinearMesh, n: int) -> HighOrderQuadMesh:
    """Equidistant degree-n nodes placed by the bilinear map of each quad."""
    if n < 2:
        raise ValueError("order must be >= 2; order 1 is the linear mesh itself")
    if mesh.tris:
        raise ValueError("elevation needs a pure quad mesh")
    nodes: list[np.ndarray] = [p for p in mesh.vertices]
    edge_nodes: dict[tuple[int, int], list[int]] = {}
    u = np.arange(n + 1) / n
    elements = np.empty((len(mesh.quads), (n + 1) ** 2), dtype=np.int64)
    interior: list[list[int]] = []
    for e, quad in enumerate(mesh.quads):
        c = mesh.vertices[list(quad)]
        local = -np.ones((n + 1) ** 2, dtype=np.int64)
        for k, (i, j) in enumerate(((0, 0), (n, 0), (n, n), (0, n))):
            local[_grid_index(n, i, j)] = quad[k]
        for side in range(4):
            a, b = quad[side], quad[(side + 1) % 4]
            key = _key(a, b)
            if key not in edge_nodes:
                pa, pb = mesh.vertices[key[0]], mesh.vertices[key[1]]
                ids = []
                for i in range(1, n):
                    nodes.append(pa + (pb - pa) * (i / n))
                    ids.append(len(nodes) - 1)
                edge_nodes[key] = ids
            ids = edge_nodes[key] if a == key[0] else edge_nodes[key][::-1]
            loc = _edge_local(n, side)
            for pos, nid in zip(loc[1:-1], ids):
                local[pos] = nid
        mine = []
        for j in range(1, n):
            for i in range(1, n):
                x, y = u[i], u[j]
                p = ((1 - x) * (1 - y) * c[0] + x * (1 - y) * c[1] + x * y * c[2] + (1 - x) * y * c[3])
                nodes.append(p)
                local[_grid_index(n, i, j)] = len(nodes) - 1
                mine.append(len(nodes) - 1)
        interior.append(mine)
        elements[e] = local
    return HighOrderQuadMesh(n, np.array(nodes, dtype=float), elements, list(mesh.quad_region),
                             mesh, edge_nodes, interior)


def _curve_nodes(curve: BezierSegment, n: int) -> np.ndarray:
    while curve.degree < n:
        curve = curve.elevate()
    if curve.degree != n:
        raise ValueError(f"edge curve has degree {curve.degree}, mesh order is {n}")
    return curve.to_lagrange().nodes


def snap_boundary_nodes(ho: HighOrderQuadMesh) -> HighOrderQuadMesh:
    """Place the nodes of every tagged edge on its curve (in place)."""
    n = ho.degree
    for key, curve in sorted(ho.linear.edge_curves.items()):
        pts = _curve_nodes(curve, n)
        for nid, p in zip(ho.edge_nodes[key], pts[1:-1]):
            ho.nodes[nid] = p
    return ho


def mvc_weights(polygon, x) -> np.ndarray:
    """Mean value coordinates of ``x`` with respect to a closed polygon.

    Weights are normalised to sum to one. A point within ``1e-12 * bbox`` of
    a vertex gets that vertex's indicator; a point on an edge gets the linear
    weights of the edge endpoints.
    """
    P = np.asarray(polygon, dtype=float)
    x = np.asarray(x, dtype=float)
    d = P - x
    r = np.hypot(d[:, 0], d[:, 1])
    scale = float(np.hypot(*(P.max(axis=0) - P.min(axis=0))))
    m = len(P)
    i0 = int(np.argmin(r))
    if r[i0] <= 1e-12 * scale:
        w = np.zeros(m)
        w[i0] = 1.0
        return w
    dn = np.roll(d, -1, axis=0)
    rn = np.roll(r, -1)
    cross = d[:, 0] * dn[:, 1] - d[:, 1] * dn[:, 0]
    dot = (d * dn).sum(axis=1)
    on_edge = (np.abs(cross) <= 1e-14 * r * rn) & (dot < 0.0)
    if on_edge.any():
        i = int(np.argmax(on_edge))
        w = np.zeros(m)
        w[i] = rn[i] / (r[i] + rn[i])
        w[(i + 1) % m] = r[i] / (r[i] + rn[i])
        return w
    # tan of the half angle; pick the form without cancellation
    rr = r * rn
    with np.errstate(divide="ignore", invalid="ignore"):
        half_tan = np.where(dot >= 0.0, cross / (rr + dot), (rr - dot) / cross)
    w = (np.roll(half_tan, 1) + half_tan) / r
    return w / w.sum()


def _inside(poly: np.ndarray, p: np.ndarray) -> bool:
    x, y = p
    inside = False
    q = np.roll(poly, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(poly, q):
        if (y0 > y) != (y1 > y):
            if x0 + (y - y0) * (x1 - x0) / (y1 - y0) > x:
                inside = not inside
    return inside


def mvc_deform(source, target, interior, steps: int | None = None, retries: int = 3) -> np.ndarray:
    """Carry interior points from polygon ``source`` to ``target`` by composite MVC.

    The boundary is interpolated linearly in ``k`` steps; at each step every
    point is expressed in mean value coordinates of the previous polygon and
    re-evaluated on the next. ``k`` defaults to the smallest count that
    keeps each step below 10% of the polygon diameter; it is doubled when a
    point leaves an intermediate polygon.
    """
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    pts = np.asarray(interior, dtype=float).reshape(-1, 2)
    if steps is None:
        diam = float(np.hypot(*(src.max(axis=0) - src.min(axis=0))))
        disp = float(np.hypot(*(tgt - src).T).max())
        steps = max(1, math.ceil(disp / (0.1 * diam))) if diam > 0 else 1
    k = steps
    for _ in range(retries + 1):
        cur = pts.copy()
        ok = True
        for s in range(1, k + 1):
            prev = src + (tgt - src) * ((s - 1) / k)
            nxt = src + (tgt - src) * (s / k)
            for idx in range(len(cur)):
                cur[idx] = mvc_weights(prev, cur[idx]) @ nxt
                if not _inside(nxt, cur[idx]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return cur
        k *= 2
    raise DeformationError(f"interior node left the intermediate polygon with {k // 2} steps")


def deform_mesh(ho: HighOrderQuadMesh, before: np.ndarray, steps: int | None = None) -> HighOrderQuadMesh:
    """Move interior nodes of elements whose boundary changed since ``before``."""
    n = ho.degree
    bidx = boundary_indices(n)
    ho.deformed = []
    for e in range(ho.element_count):
        ids = ho.elements[e][bidx]
        src = before[ids]
        tgt = ho.nodes[ids]
        if np.array_equal(src, tgt):
            continue
        inner = ho.interior_nodes[e]
        ho.nodes[inner] = mvc_deform(src, tgt, before[inner], steps)
        ho.deformed.append(e)
    return ho


# ---------------------------------------------------------------------------
# validity certificate
# ---------------------------------------------------------------------------

@dataclass
class ControlVectorSectors:
    r0: tuple[float, float] | None
    r1: tuple[float, float] | None
    valid: bool
    skipped: int = 0

    @property
    def verdict(self) -> str:
        return "valid" if self.valid else "inconclusive"


def bezier_net(grid: np.ndarray) -> np.ndarray:
    """Tensor Bezier control net of an ``(n+1, n+1, 2)`` Lagrange node grid."""
    n = grid.shape[0] - 1
    A = lagrange_to_bezier_matrix(n)
    return np.einsum("ai,ijc,bj->abc", A, grid, A)


def sector_certificate(grid: np.ndarray) -> ControlVectorSectors:
    """Sufficient positivity test for the Jacobian of one element.

    ``r0`` and ``r1`` are the sectors of the control vectors along xi and
    eta. The element is certified when every xi vector turns
    counterclockwise, by less than pi, onto every eta vector: then both
    sectors are disjoint, their union is narrower than pi, and every
    Jacobian determinant (a positive combination of these cross products)
    is positive.
    """
    Q = bezier_net(np.asarray(grid, dtype=float))
    d0 = (Q[1:, :, :] - Q[:-1, :, :]).reshape(-1, 2)
    d1 = (Q[:, 1:, :] - Q[:, :-1, :]).reshape(-1, 2)
    scale = float(np.hypot(*(Q.reshape(-1, 2).max(axis=0) - Q.reshape(-1, 2).min(axis=0))))
    tiny = 1e-13 * max(scale, 1e-300)
    n0 = np.hypot(d0[:, 0], d0[:, 1])
    n1 = np.hypot(d1[:, 0], d1[:, 1])
    keep0, keep1 = d0[n0 > tiny], d1[n1 > tiny]
    skipped = int((n0 <= tiny).sum() + (n1 <= tiny).sum())
    if len(keep0) == 0 or len(keep1) == 0:
        return ControlVectorSectors(None, None, False, skipped)
    r0 = direction_sector(keep0)
    r1 = direction_sector(keep1)
    if r0[1] == SECTOR_SENTINEL or r1[1] == SECTOR_SENTINEL:
        return ControlVectorSectors(r0, r1, False, skipped)
    u = keep0 / n0[n0 > tiny, None]
    v = keep1 / n1[n1 > tiny, None]
    cross = u[:, None, 0] * v[None, :, 1] - u[:, None, 1] * v[None, :, 0]
    return ControlVectorSectors(r0, r1, bool((cross > 1e-12).all()), skipped)
