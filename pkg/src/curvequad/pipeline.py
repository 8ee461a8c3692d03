"""End-to-end driver: reconstruction, linear quads, lifting, quality report."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .high_order import HighOrderQuadMesh, deform_mesh, elevate, snap_boundary_nodes
from .linear_mesh import LinearMesh, build_dual, chords_from_reconstruction, match_dual, merge_and_subdivide, triangulate
from .quality import QualityReport, assess
from .reconstruct import CurveNetwork, Reconstruction, Reconstructor

__all__ = ["PipelineConfig", "PipelineResult", "StageError", "run"]


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    """Run parameters. ``lt`` and ``eps`` are fractions of the bounding-box
    diagonal unless ``absolute_units`` is set."""

    lt: float = 0.05
    eps: float = 0.001
    tau: float = math.pi / 4
    alpha: float = 2.3
    k0: int = 20
    lloyd_iters: int = 5
    order: int | str = "auto"
    seed: int = 0
    absolute_units: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (isinstance(self.lt, (int, float)) and math.isfinite(self.lt) and self.lt > 0):
            raise ValueError(f"lt must be a positive number, got {self.lt!r}")
        if not (isinstance(self.eps, (int, float)) and math.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"eps must be >= 0, got {self.eps!r}")
        if not 0 < self.tau < math.pi:
            raise ValueError(f"tau must lie in (0, pi), got {self.tau!r}")
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha!r}")
        if int(self.k0) < 1:
            raise ValueError("k0 must be >= 1")
        if int(self.lloyd_iters) < 0:
            raise ValueError("lloyd_iters must be >= 0")
        if self.order != "auto" and (not isinstance(self.order, int) or self.order < 2):
            raise ValueError(f"order must be 'auto' or an integer >= 2, got {self.order!r}")

    def absolute(self, scale: float) -> tuple[float, float]:
        if self.absolute_units:
            return float(self.lt), float(self.eps)
        return float(self.lt) * scale, float(self.eps) * scale

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PipelineResult:
    mesh: HighOrderQuadMesh
    report: QualityReport
    reconstruction: Reconstruction
    triangles: LinearMesh
    quads: LinearMesh
    matching: list[tuple[int, int]]
    config: PipelineConfig
    stage_seconds: dict[str, float] = field(default_factory=dict)


def _stage(name, timings, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    except (KeyboardInterrupt, MemoryError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    timings[name] = time.perf_counter() - t0
    return out


def run(net: CurveNetwork, cfg: PipelineConfig | None = None, debug_dir: str | Path | None = None) -> PipelineResult:
    """Mesh one curve network. Deterministic for a given (network, config)."""
    cfg = cfg or PipelineConfig()
    cfg.validate()
    order = net.degree if cfg.order == "auto" else int(cfg.order)
    if order < net.degree:
        raise ValueError(f"order {order} is below the input degree {net.degree}")
    if order < 2:
        raise ValueError("linear input needs an explicit --order >= 2")
    lt, eps = cfg.absolute(net.scale)
    timings: dict[str, float] = {}
    start = time.perf_counter()

    rec = _stage("reconstruct", timings,
                 Reconstructor(net, eps, lt, cfg.tau, cfg.alpha, cfg.k0, cfg.lloyd_iters).run)
    tri = _stage("triangulate", timings, lambda: triangulate(chords_from_reconstruction(rec), lt,
                                                         split_chord_corners=True))
    dual = _stage("dual", timings, build_dual, tri)
    matching = _stage("match", timings, match_dual, dual)
    quads = _stage("subdivide", timings, merge_and_subdivide, tri, matching)
    ho = _stage("elevate", timings, elevate, quads, order)
    before = ho.nodes.copy()
    _stage("snap", timings, snap_boundary_nodes, ho)
    _stage("deform", timings, deform_mesh, ho, before)
    report = _stage("quality", timings, assess, ho, rec)
    report.wall_time_seconds = time.perf_counter() - start
    report.stage_seconds = dict(timings)
    report.counts = dict(rec.counts)
    report.counts.update(triangles=len(tri.tris), matched_pairs=len(matching),
                         leftover_triangles=len(tri.tris) - 2 * len(matching),
                         flagged_after_subdivision=len(quads.flagged))

    result = PipelineResult(ho, report, rec, tri, quads, matching, cfg, stage_seconds=timings)
    if debug_dir is not None:
        _write_debug(result, Path(debug_dir))
    return result


def _write_debug(result: PipelineResult, out: Path):
    from .io.svg import render_chains, render_linear

    out.mkdir(parents=True, exist_ok=True)
    render_chains(result.reconstruction, out / "01_reconstruction.svg")
    render_linear(result.triangles, out / "02_triangulation.svg")
    render_linear(result.triangles, out / "03_matching.svg", matching=result.matching)
    render_linear(result.quads, out / "04_linear_quads.svg")
