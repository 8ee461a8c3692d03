"""Planar high-order quadrilateral meshing of curve networks."""

from .pipeline import PipelineConfig, PipelineResult, run
from .reconstruct import CurveNetwork

__all__ = ["CurveNetwork", "PipelineConfig", "PipelineResult", "run"]
__version__ = "0.1.0"
