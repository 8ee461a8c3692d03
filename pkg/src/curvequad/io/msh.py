"""MSH 4.1 ASCII writer for high-order quadrilateral meshes."""

from __future__ import annotations

import warnings
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = ["QUAD_TYPES", "LINE_TYPES", "msh_quad_order", "msh_line_order", "write_msh", "msh_text"]

QUAD_TYPES = {1: 3, 2: 10, 3: 36, 4: 37}
LINE_TYPES = {1: 1, 2: 8, 3: 26, 4: 27}


@lru_cache(maxsize=None)
def msh_quad_order(n: int) -> tuple[tuple[int, int], ...]:
    """Grid positions ``(i, j)`` in MSH node order for a degree-n quadrangle.

    Corners counterclockwise, then each edge's interior nodes in edge
    direction, then the interior grid ordered the same way recursively.
    """
    def rec(m: int, off: int):
        if m == 0:
            return [(off, off)]
        out = [(off, off), (off + m, off), (off + m, off + m), (off, off + m)]
        out += [(off + i, off) for i in range(1, m)]
        out += [(off + m, off + j) for j in range(1, m)]
        out += [(off + m - i, off + m) for i in range(1, m)]
        out += [(off, off + m - j) for j in range(1, m)]
        if m >= 2:
            out += rec(m - 2, off + 1)
        return out

    return tuple(rec(n, 0))


def msh_line_order(n: int) -> tuple[int, ...]:
    """Positions along an edge in MSH order: both ends, then the interior."""
    return (0, n) + tuple(range(1, n))


def msh_text(mesh) -> str:
    n = mesh.degree
    if n not in QUAD_TYPES:
        raise ValueError(f"MSH output supports orders 1-4, not {n}")
    regions = list(dict.fromkeys(mesh.region))
    region_tag = {r: i + 1 for i, r in enumerate(regions)}
    chains: dict[int, str] = {}
    for _nodes, tag in mesh.tagged_edges():
        chains.setdefault(tag.chain, tag.kind)
    chain_ids = sorted(chains)
    curve_tag = {c: i + 1 for i, c in enumerate(chain_ids)}
    nodes = mesh.nodes
    # repr of a Python float round-trips exactly; numpy scalars would print as np.float64(...)
    lo = nodes.min(axis=0).tolist() if len(nodes) else [0.0, 0.0]
    hi = nodes.max(axis=0).tolist() if len(nodes) else [0.0, 0.0]
    box = f"{lo[0]!r} {lo[1]!r} 0 {hi[0]!r} {hi[1]!r} 0"

    out = ["$MeshFormat", "4.1 0 8", "$EndMeshFormat", "$PhysicalNames",
           str(len(regions) + len(chain_ids))]
    for c in chain_ids:
        out.append(f'1 {curve_tag[c]} "{chains[c]}:{c}"')
    for r in regions:
        out.append(f'2 {region_tag[r]} "region:{r}"')
    out.append("$EndPhysicalNames")

    out += ["$Entities", f"0 {len(chain_ids)} {len(regions)} 0"]
    for c in chain_ids:
        out.append(f"{curve_tag[c]} {box} 1 {curve_tag[c]} 0")
    for r in regions:
        out.append(f"{region_tag[r]} {box} 1 {region_tag[r]} 0")
    out.append("$EndEntities")

    nn = len(nodes)
    first = region_tag[regions[0]] if regions else 1
    out += ["$Nodes", f"1 {nn} {1 if nn else 0} {nn}", f"2 {first} 0 {nn}"]
    out += [str(i + 1) for i in range(nn)]
    out += [f"{x!r} {y!r} 0" for x, y in nodes.tolist()]
    out.append("$EndNodes")

    blocks = []
    for c in chain_ids:
        rows = [nodes_ for nodes_, tag in mesh.tagged_edges() if tag.chain == c]
        blocks.append((1, curve_tag[c], LINE_TYPES[n], [[e[k] for k in msh_line_order(n)] for e in rows]))
    order = [i + (n + 1) * j for i, j in msh_quad_order(n)]
    for r in regions:
        rows = [mesh.elements[e][order] for e in range(mesh.element_count) if mesh.region[e] == r]
        blocks.append((2, region_tag[r], QUAD_TYPES[n], rows))
    total = sum(len(b[3]) for b in blocks)
    out += ["$Elements", f"{len(blocks)} {total} {1 if total else 0} {total}"]
    tag = 1
    for dim, ent, etype, rows in blocks:
        out.append(f"{dim} {ent} {etype} {len(rows)}")
        for row in rows:
            out.append(f"{tag} " + " ".join(str(int(v) + 1) for v in row))
            tag += 1
    out.append("$EndElements")
    return "\n".join(out) + "\n"


def write_msh(mesh, path) -> bool:
    """Write MSH 4.1; returns False (with a warning) for orders above 4."""
    if mesh.degree not in QUAD_TYPES:
        warnings.warn(f"order {mesh.degree} has no MSH quadrangle type; wrote JSON only", stacklevel=2)
        return False
    Path(path).write_text(msh_text(mesh), encoding="utf-8")
    return True
