"""Deterministic SVG renderings of meshes and intermediate stages.

Elements are filled from a five-stop viridis ramp over [0, 1] of the chosen
metric (per-element minimum). Elements with a non-positive minimum are drawn
in the reserved inversion color.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..curves import lagrange_matrix

__all__ = ["COLORMAP", "INVERTED_COLOR", "colormap", "render_mesh", "render_linear", "render_chains", "svg_mesh"]

COLORMAP = [(0.0, (68, 1, 84)), (0.25, (59, 82, 139)), (0.5, (33, 145, 140)),
            (0.75, (94, 201, 98)), (1.0, (253, 231, 37))]
INVERTED_COLOR = "#ff00ff"
REGION_COLORS = ["#a6cee3", "#b2df8a", "#fb9a99", "#fdbf6f", "#cab2d6", "#ffff99"]


def colormap(v: float) -> str:
    """Hex color for ``v`` in [0, 1]; values outside are clamped."""
    v = min(max(float(v), 0.0), 1.0)
    for (a, ca), (b, cb) in zip(COLORMAP, COLORMAP[1:]):
        if v <= b:
            w = 0.0 if b == a else (v - a) / (b - a)
            rgb = [round(x + w * (y - x)) for x, y in zip(ca, cb)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % COLORMAP[-1][1]


def _fmt(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".") if x != 0 else "0"


class _Canvas:
    def __init__(self, points: np.ndarray, width: float = 800.0):
        if len(points):
            lo, hi = points.min(axis=0), points.max(axis=0)
        else:
            lo, hi = np.zeros(2), np.ones(2)
        span = max(float((hi - lo).max()), 1e-300)
        self.lo, self.hi = lo, hi
        self.s = width / span
        self.pad = 10.0
        self.w = (hi[0] - lo[0]) * self.s + 2 * self.pad
        self.h = (hi[1] - lo[1]) * self.s + 2 * self.pad
        self.body: list[str] = []

    def xy(self, p) -> str:
        x = (p[0] - self.lo[0]) * self.s + self.pad
        y = (self.hi[1] - p[1]) * self.s + self.pad
        return f"{_fmt(x)},{_fmt(y)}"

    def polygon(self, pts, fill: str, stroke: str = "#333333", width: float = 0.5):
        self.body.append(f'<polygon points="{" ".join(self.xy(p) for p in pts)}" fill="{fill}" '
                         f'stroke="{stroke}" stroke-width="{width}"/>')

    def polyline(self, pts, stroke: str, width: float = 1.0):
        self.body.append(f'<polyline points="{" ".join(self.xy(p) for p in pts)}" fill="none" '
                         f'stroke="{stroke}" stroke-width="{width}"/>')

    def circle(self, p, r: float, fill: str):
        x, y = self.xy(p).split(",")
        self.body.append(f'<circle cx="{x}" cy="{y}" r="{r}" fill="{fill}"/>')

    def text(self) -> str:
        head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                f'width="{_fmt(self.w)}" height="{_fmt(self.h)}" '
                f'viewBox="0 0 {_fmt(self.w)} {_fmt(self.h)}">\n')
        return head + "\n".join(self.body) + ("\n" if self.body else "") + "</svg>\n"


def _element_outline(grid: np.ndarray, samples: int = 16) -> np.ndarray:
    """Boundary of one curved element, 16 samples per side."""
    n = grid.shape[0] - 1
    t = np.linspace(0.0, 1.0, samples + 1)
    L = lagrange_matrix(n, t)
    sides = [grid[:, 0], grid[n, :], grid[::-1, n], grid[0, ::-1]]
    return np.vstack([(L @ s)[:-1] for s in sides])


def svg_mesh(mesh, color_by: str = "Jm", report=None) -> str:
    if color_by not in ("Jm", "Jk", "region", "none"):
        raise ValueError(f"unknown color mode {color_by!r}")
    canvas = _Canvas(mesh.nodes if mesh.element_count else np.zeros((0, 2)))
    if color_by in ("Jm", "Jk") and report is None and mesh.element_count:
        from ..quality import assess
        report = assess(mesh)
    regions = list(dict.fromkeys(mesh.region))
    for e in range(mesh.element_count):
        outline = _element_outline(mesh.grid(e))
        if color_by == "none":
            fill = "#ffffff"
        elif color_by == "region":
            fill = REGION_COLORS[regions.index(mesh.region[e]) % len(REGION_COLORS)]
        else:
            st = report.per_element[e]
            v = st.min_jm if color_by == "Jm" else st.min_jk
            fill = INVERTED_COLOR if st.min_jm <= 0.0 else colormap(v)
        canvas.polygon(outline, fill)
    return canvas.text()


def render_mesh(mesh, path, color_by: str = "Jm", report=None):
    Path(path).write_text(svg_mesh(mesh, color_by, report), encoding="utf-8")


def render_linear(mesh, path, matching=None):
    """Triangles/quads of a linear mesh; matched pairs share a fill color."""
    canvas = _Canvas(mesh.vertices)
    paired = {}
    for k, (a, b) in enumerate(matching or []):
        paired[a] = paired[b] = k
    for t, tri in enumerate(mesh.tris):
        fill = REGION_COLORS[paired[t] % len(REGION_COLORS)] if t in paired else "#ffffff"
        canvas.polygon(mesh.vertices[list(tri)], fill)
    for q in mesh.quads:
        canvas.polygon(mesh.vertices[list(q)], "#ffffff")
    for (a, b) in sorted(mesh.edge_tags):
        canvas.polyline(mesh.vertices[[a, b]], "#d62728", 1.5)
    Path(path).write_text(canvas.text(), encoding="utf-8")


def render_chains(rec, path):
    """Reconstructed pieces (alternating colors) with their joints."""
    allpts = np.vstack([p.curve.nodes for _, _, p in rec.pieces()])
    canvas = _Canvas(allpts)
    t = np.linspace(0.0, 1.0, 17)
    for ch in rec.chains:
        for i, p in enumerate(ch.pieces):
            canvas.polyline(p.bezier.evaluate(t), "#1f77b4" if i % 2 == 0 else "#ff7f0e", 1.5)
        for pt, fixed in zip(ch.joint_points(), ch.fixed):
            canvas.circle(pt, 2.0, "#000000" if fixed else "#2ca02c")
    Path(path).write_text(canvas.text(), encoding="utf-8")
