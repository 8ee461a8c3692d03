from __future__ import annotations

import copy
import json
import warnings

import meshio
import numpy as np
import pytest

from curvequad import corpus
from curvequad.cli import EXIT_INPUT, EXIT_OK, EXIT_PIPELINE, main
from curvequad.high_order import HighOrderQuadMesh, elevate
from curvequad.io.formats import (
    InputError,
    mesh_to_document,
    network_from_document,
    network_to_document,
    parse_input,
    read_mesh_json,
    write_input,
    write_mesh_json,
)
from curvequad.io.msh import msh_quad_order, msh_text, write_msh
from curvequad.io.svg import INVERTED_COLOR, colormap, svg_mesh
from curvequad.linear_mesh import LinearMesh

SQUARE_DOC = {
    "format": "curvequad-input",
    "version": 1,
    "degree": 2,
    "points": [[0, 0], [0.5, 0], [1, 0], [1, 0.5], [1, 1], [0.5, 1], [0, 1], [0, 0.5]],
    "segments": [
        {"id": "s0", "nodes": [0, 1, 2]},
        {"id": "s1", "nodes": [2, 3, 4]},
        {"id": "s2", "nodes": [4, 5, 6]},
        {"id": "s3", "nodes": [6, 7, 0]},
    ],
    "regions": [{"id": "plate", "loops": [[["s0", 1], ["s1", 1], ["s2", 1], ["s3", 1]]]}],
}


def unit_square_mesh(n=2):
    m = LinearMesh(np.array([(0, 0), (1, 0), (1, 1), (0, 1)], float))
    m.quads = [(0, 1, 2, 3)]
    m.quad_region = ["plate"]
    return elevate(m, n)


# -- input documents ------------------------------------------------------------------

def test_square_document():
    net = network_from_document(SQUARE_DOC)
    assert len(net.segments) == 4 and list(net.regions) == ["plate"]
    assert set(net.kind) == {"boundary"}


def test_shared_segment_becomes_interface():
    doc = network_to_document(corpus.two_half_disks())
    net = network_from_document(doc)
    assert sum(k == "interface" for k in net.kind) == 2


def test_document_roundtrip(tmp_path):
    for name in ("annulus", "square_with_inclusion"):
        net = corpus.build(name)
        write_input(net, tmp_path / "in.json")
        back = parse_input(tmp_path / "in.json")
        assert back.regions == net.regions
        for a, b in zip(net.segments, back.segments):
            assert np.array_equal(a.nodes, b.nodes)


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.pop("segments"), "segments"),
    (lambda d: d.__setitem__("degree", 0), "degree"),
    (lambda d: d["points"].__setitem__(3, [1, "x"]), "points"),
    (lambda d: d["segments"][1].__setitem__("nodes", [2, 4]), "segments[1]"),
    (lambda d: d["segments"][1].__setitem__("nodes", [2, 3, 40]), "references point"),
    (lambda d: d["regions"][0]["loops"][0][2].__setitem__(1, 2), "regions"),
    (lambda d: d["regions"][0]["loops"][0][2].__setitem__(0, "nope"), "unknown segment"),
    (lambda d: d["segments"][1].__setitem__("id", "s0"), "duplicate"),
])
def test_schema_errors_carry_paths(mutate, fragment):
    doc = copy.deepcopy(SQUARE_DOC)
    mutate(doc)
    with pytest.raises(InputError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        network_from_document(doc)


def test_gap_names_joint():
    doc = copy.deepcopy(SQUARE_DOC)
    doc["points"].append([1.0, 0.1])
    doc["segments"][1]["nodes"] = [8, 3, 4]
    with pytest.raises(InputError, match="topology"):
        network_from_document(doc)


def test_bad_json_and_missing_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InputError, match="line 1"):
        parse_input(p)
    with pytest.raises(InputError, match="missing.json"):
        parse_input(tmp_path / "missing.json")


# -- mesh sidecar and MSH ------------------------------------------------------------------

def test_mesh_json_roundtrip_lossless(tmp_path, corpus_runs):
    for name in ("two_half_disks", "ellipse"):
        mesh = corpus_runs[name].mesh
        write_mesh_json(mesh, tmp_path / "m.json")
        back = read_mesh_json(tmp_path / "m.json")
        assert np.array_equal(back.nodes, mesh.nodes)
        assert np.array_equal(back.elements, mesh.elements)
        assert back.region == mesh.region
        assert mesh_to_document(back) == mesh_to_document(mesh)


def test_single_quadratic_element_msh(tmp_path):
    mesh = unit_square_mesh(2)
    write_msh(mesh, tmp_path / "sq.msh")
    m = meshio.read(tmp_path / "sq.msh")
    assert len(m.points) == 9
    assert [c.type for c in m.cells] == ["quad9"]
    # MSH order: corners, edge midpoints, centre
    np.testing.assert_allclose(m.points[m.cells[0].data[0]][:, :2],
                               [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0), (1, 0.5), (0.5, 1), (0, 0.5), (0.5, 0.5)])


@pytest.mark.parametrize("n, kind", [(2, "quad9"), (3, "quad16"), (4, "quad25")])
def test_msh_loads_in_meshio(tmp_path, n, kind, corpus_runs):
    from curvequad.pipeline import PipelineConfig, run

    res = run(corpus.two_half_disks(), PipelineConfig(order=n))
    write_msh(res.mesh, tmp_path / "m.msh")
    m = meshio.read(tmp_path / "m.msh")
    quads = [c for c in m.cells if c.type == kind]
    assert sum(len(c.data) for c in quads) == res.mesh.element_count
    assert len(quads) == 2  # one physical surface per region
    assert len(m.points) == len(res.mesh.nodes)
    # each element's MSH node list is its grid in hierarchical order
    order = msh_quad_order(n)
    g = res.mesh.grid(0)
    np.testing.assert_array_equal(m.points[quads[0].data[0]][:, :2], [g[i, j] for i, j in order])


def test_msh_structure(corpus_runs):
    text = msh_text(corpus_runs["square_with_inclusion"].mesh)
    sections = [l for l in text.splitlines() if l.startswith("$")]
    assert sections == ["$MeshFormat", "$EndMeshFormat", "$PhysicalNames", "$EndPhysicalNames",
                        "$Entities", "$EndEntities", "$Nodes", "$EndNodes", "$Elements", "$EndElements"]
    lines = text.splitlines()
    i = lines.index("$Nodes")
    _, nn, lo, hi = map(int, lines[i + 1].split())
    assert (lo, hi) == (1, nn)
    assert '"region:matrix"' in text and '"region:inclusion"' in text


def test_high_order_msh_warns(tmp_path):
    m = unit_square_mesh(5)
    with pytest.warns(UserWarning, match="JSON only"):
        assert write_msh(m, tmp_path / "x.msh") is False
    assert not (tmp_path / "x.msh").exists()


# -- SVG ------------------------------------------------------------------------------------

def test_empty_svg():
    empty = HighOrderQuadMesh(2, np.zeros((0, 2)), np.zeros((0, 9), dtype=np.int64), [], LinearMesh(np.zeros((0, 2))))
    text = svg_mesh(empty)
    assert text.startswith("<?xml") and text.rstrip().endswith("</svg>") and "<polygon" not in text


def test_identity_square_color_and_inverted():
    text = svg_mesh(unit_square_mesh(2))
    assert text.count("<polygon") == 1 and f'fill="{colormap(1.0)}"' in text
    bad = unit_square_mesh(2)
    bad.nodes[[0, 1]] = bad.nodes[[1, 0]]
    assert INVERTED_COLOR in svg_mesh(bad)
    with pytest.raises(ValueError):
        svg_mesh(bad, "weird")


def test_svg_deterministic(corpus_runs):
    mesh = corpus_runs["flower"].mesh
    assert svg_mesh(mesh, "Jm", corpus_runs["flower"].report) == svg_mesh(mesh, "Jm", corpus_runs["flower"].report)
    assert svg_mesh(mesh, "region") == svg_mesh(mesh, "region")


# -- command line ---------------------------------------------------------------------------

@pytest.fixture
def disk_json(tmp_path):
    p = tmp_path / "disk.json"
    write_input(corpus.disk(), p)
    return p


def test_cli_success(tmp_path, disk_json, capsys):
    out, rep, svg = tmp_path / "disk.msh", tmp_path / "r.json", tmp_path / "d.svg"
    code = main(["--input", str(disk_json), "--out", str(out), "--report", str(rep), "--svg", str(svg)])
    assert code == EXIT_OK
    assert out.exists() and out.with_suffix(".json").exists() and svg.exists()
    doc = json.loads(rep.read_text())
    assert doc["config"]["lt"] == 0.05 and doc["report"]["inverted"] == 0
    assert "min Jm" in capsys.readouterr().out


def test_cli_json_only_and_high_order(tmp_path, disk_json, capsys):
    assert main(["--input", str(disk_json), "--out", str(tmp_path / "m.json")]) == EXIT_OK
    assert read_mesh_json(tmp_path / "m.json").degree == 2
    assert main(["--input", str(disk_json), "--out", str(tmp_path / "m5.msh"), "--order", "5"]) == EXIT_OK
    assert "warning" in capsys.readouterr().err
    assert (tmp_path / "m5.json").exists() and not (tmp_path / "m5.msh").exists()


def test_cli_input_errors(tmp_path, disk_json, capsys):
    missing = tmp_path / "nowhere.json"
    assert main(["--input", str(missing), "--out", str(tmp_path / "x.msh")]) == EXIT_INPUT
    assert "nowhere.json" in capsys.readouterr().err
    assert main(["--input", str(disk_json), "--out", str(tmp_path / "x.msh"), "--eps", "-1"]) == EXIT_INPUT
    assert "eps" in capsys.readouterr().err
    assert main(["--input", str(disk_json), "--out", "x.msh", "--bogus"]) == EXIT_INPUT
    assert "usage" in capsys.readouterr().err
    assert main(["--input", str(disk_json), "--out", "x.msh", "--order", "x"]) == EXIT_INPUT


def test_cli_pipeline_failure(tmp_path, disk_json, monkeypatch, capsys):
    from curvequad import pipeline

    def boom(*_a, **_k):
        raise RuntimeError("no convergence")

    monkeypatch.setattr(pipeline, "deform_mesh", boom)
    assert main(["--input", str(disk_json), "--out", str(tmp_path / "x.msh")]) == EXIT_PIPELINE
    assert "deform" in capsys.readouterr().err


def test_cli_outputs_byte_identical(tmp_path, disk_json):
    for k in (1, 2):
        assert main(["--input", str(disk_json), "--out", str(tmp_path / f"m{k}.msh"),
                     "--svg", str(tmp_path / f"m{k}.svg")]) == EXIT_OK
    for ext in (".msh", ".json", ".svg"):
        assert (tmp_path / f"m1{ext}").read_bytes() == (tmp_path / f"m2{ext}").read_bytes()
