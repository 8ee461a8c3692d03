"""JSON input documents, JSON mesh sidecars and JSON reports."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from ..curves import LagrangeSegment
from ..high_order import HighOrderQuadMesh, _edge_local
from ..linear_mesh import EdgeTag, LinearMesh, _key
from ..reconstruct import CurveNetwork, TopologyError

__all__ = [
    "InputError",
    "INPUT_SCHEMA",
    "parse_input",
    "network_from_document",
    "network_to_document",
    "write_input",
    "write_mesh_json",
    "read_mesh_json",
    "mesh_to_document",
    "write_report",
]

INPUT_FORMAT = "curvequad-input"
MESH_FORMAT = "curvequad-mesh"
VERSION = 1


class InputError(ValueError):
    """Unreadable or invalid input document."""


_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_ID = {"type": ["string", "integer"]}

INPUT_SCHEMA = {
    "type": "object",
    "required": ["degree", "points", "segments", "regions"],
    "properties": {
        "format": {"const": INPUT_FORMAT},
        "version": {"const": VERSION},
        "degree": {"type": "integer", "minimum": 1},
        "points": {"type": "array", "items": _POINT, "minItems": 2},
        "segments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "nodes"],
                "properties": {
                    "id": _ID,
                    "nodes": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2},
                },
                "additionalProperties": False,
            },
        },
        "regions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "loops"],
                "properties": {
                    "id": _ID,
                    "loops": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "array",
                                "prefixItems": [_ID, {"enum": [1, -1]}],
                                "minItems": 2,
                                "maxItems": 2,
                            },
                        },
                    },
                },
                "additionalProperties": False,
            },
        },
    },
}


def network_from_document(doc: dict) -> CurveNetwork:
    """Validate a decoded input document and build the network."""
    validator = jsonschema.Draft202012Validator(INPUT_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise InputError(f"schema violation at {e.json_path}: {e.message}")
    degree = doc["degree"]
    pts = np.array(doc["points"], dtype=float)
    if not np.all(np.isfinite(pts)):
        raise InputError("schema violation at $.points: non-finite coordinate")
    index = {}
    segments = []
    for i, seg in enumerate(doc["segments"]):
        sid = seg["id"]
        if sid in index:
            raise InputError(f"duplicate segment id {sid!r} at $.segments[{i}]")
        nodes = seg["nodes"]
        if len(nodes) != degree + 1:
            raise InputError(f"$.segments[{i}].nodes has {len(nodes)} entries; degree {degree} needs {degree + 1}")
        if max(nodes) >= len(pts):
            raise InputError(f"$.segments[{i}].nodes references point {max(nodes)} of {len(pts)}")
        index[sid] = i
        segments.append(LagrangeSegment(pts[nodes]))
    regions = {}
    for r, reg in enumerate(doc["regions"]):
        if reg["id"] in regions:
            raise InputError(f"duplicate region id {reg['id']!r} at $.regions[{r}]")
        loops = []
        for li, loop in enumerate(reg["loops"]):
            refs = []
            for k, (sid, sign) in enumerate(loop):
                if sid not in index:
                    raise InputError(f"$.regions[{r}].loops[{li}][{k}] names unknown segment {sid!r}")
                refs.append((index[sid], sign))
            loops.append(refs)
        regions[reg["id"]] = loops
    try:
        return CurveNetwork(segments, regions, segment_ids=[s["id"] for s in doc["segments"]])
    except TopologyError as exc:
        raise InputError(f"topology error: {exc}") from exc


def parse_input(path) -> CurveNetwork:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise InputError(f"input file not found: {path}") from exc
    except OSError as exc:
        raise InputError(f"cannot read input file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return network_from_document(doc)


def network_to_document(net: CurveNetwork) -> dict:
    """Input document for a network; shared endpoints become shared points."""
    pts: list[list[float]] = []
    lookup: dict[tuple[float, float], int] = {}

    def pid(p):
        key = (float(p[0]), float(p[1]))
        if key not in lookup:
            lookup[key] = len(pts)
            pts.append([key[0], key[1]])
        return lookup[key]

    vert_point = {}
    segs = []
    for k, seg in enumerate(net.segments):
        ids = []
        for i, p in enumerate(seg.nodes):
            if i in (0, seg.degree):
                v = int(net.seg_verts[k][0 if i == 0 else 1])
                if v not in vert_point:
                    vert_point[v] = pid(net.vertices[v])
                ids.append(vert_point[v])
            else:
                pts.append([float(p[0]), float(p[1])])
                ids.append(len(pts) - 1)
        segs.append({"id": net.segment_ids[k], "nodes": ids})
    regions = [{"id": rid, "loops": [[[net.segment_ids[k], sg] for k, sg in loop] for loop in loops]}
               for rid, loops in net.regions.items()]
    return {"format": INPUT_FORMAT, "version": VERSION, "degree": net.degree,
            "points": pts, "segments": segs, "regions": regions}


def write_input(net: CurveNetwork, path):
    Path(path).write_text(json.dumps(network_to_document(net), indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# mesh sidecar
# ---------------------------------------------------------------------------

def mesh_to_document(mesh: HighOrderQuadMesh) -> dict:
    tagged = []
    for nodes, tag in mesh.tagged_edges():
        tagged.append({"nodes": [int(v) for v in nodes], "chain": tag.chain, "piece": tag.piece,
                       "kind": tag.kind})
    return {
        "format": MESH_FORMAT,
        "version": VERSION,
        "degree": mesh.degree,
        "layout": "element node k sits at grid (i, j) with k = i + (degree + 1) * j",
        "vertex_count": int(len(mesh.linear.vertices)),
        "nodes": [[float(x), float(y)] for x, y in mesh.nodes],
        "elements": [[int(v) for v in e] for e in mesh.elements],
        "regions": list(mesh.region),
        "tagged_edges": tagged,
        "deformed": [int(e) for e in mesh.deformed],
    }


def write_mesh_json(mesh: HighOrderQuadMesh, path):
    Path(path).write_text(json.dumps(mesh_to_document(mesh)) + "\n", encoding="utf-8")


def read_mesh_json(path) -> HighOrderQuadMesh:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MESH_FORMAT:
        raise InputError(f"{path}: not a {MESH_FORMAT} document")
    n = int(doc["degree"])
    nodes = np.array(doc["nodes"], dtype=float).reshape(-1, 2)
    elements = np.array(doc["elements"], dtype=np.int64).reshape(-1, (n + 1) ** 2)
    nv = int(doc["vertex_count"])
    lin = LinearMesh(nodes[:nv].copy())
    corners = [0, n, (n + 1) ** 2 - 1, n * (n + 1)]
    edge_nodes: dict[tuple[int, int], list[int]] = {}
    interior = []
    for e in elements:
        q = tuple(int(e[c]) for c in corners)
        lin.quads.append(q)
        for side in range(4):
            ids = [int(e[k]) for k in _edge_local(n, side)]
            a, b = ids[0], ids[-1]
            edge_nodes[_key(a, b)] = ids[1:-1] if a < b else ids[-2:0:-1]
        interior.append([int(e[i + (n + 1) * j]) for j in range(1, n) for i in range(1, n)])
    lin.quad_region = list(doc["regions"])
    for t in doc["tagged_edges"]:
        ids = t["nodes"]
        lin.edge_tags[_key(ids[0], ids[-1])] = EdgeTag(t["chain"], t["piece"], t["kind"])
    ho = HighOrderQuadMesh(n, nodes, elements, list(doc["regions"]), lin, edge_nodes, interior)
    ho.deformed = list(doc.get("deformed", []))
    return ho


def write_report(report, config, path, timings: bool = True):
    doc = {"config": config.to_dict(), "report": report.to_dict(timings=timings)}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
