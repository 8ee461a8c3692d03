"""Certified upper bounds on the Hausdorff distance between Bezier curves.

The basic bound is the largest distance between corresponding control
points. It is tightened by bisecting one curve, splitting the other at the
closest point to the bisection point, and descending into the worst pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .curves import BezierSegment, closest_point

__all__ = [
    "BoundResult",
    "GeometryMismatchError",
    "control_point_distance",
    "bound_one_sided",
    "bound_symmetric",
    "bound_chain_vs_curve",
]

K0_DEFAULT = 20


class GeometryMismatchError(ValueError):
    """Chain joints do not project onto the target curve in order."""


@dataclass
class BoundResult:
    bound: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def _match_degree(a: BezierSegment, b: BezierSegment) -> tuple[BezierSegment, BezierSegment]:
    while a.degree < b.degree:
        a = a.elevate()
    while b.degree < a.degree:
        b = b.elevate()
    return a, b


def control_point_distance(l1: BezierSegment, l2: BezierSegment, elevate: bool = False) -> float:
    """Max distance between corresponding control points.

    Degrees must agree unless ``elevate`` is set, in which case the lower
    degree curve is degree-elevated first.
    """
    if l1.degree != l2.degree:
        if not elevate:
            raise ValueError(f"degree mismatch: {l1.degree} vs {l2.degree}")
        l1, l2 = _match_degree(l1, l2)
    d = l1.ctrl - l2.ctrl
    return float(np.sqrt((d * d).sum(axis=1)).max())


def bound_one_sided(l1: BezierSegment, l2: BezierSegment, eps: float,
                    k0: int = K0_DEFAULT) -> BoundResult:
    """Bound obtained by bisecting ``l1`` and splitting ``l2`` at closest points.

    The pair list always partitions both curves (a piece of ``l2`` may be
    shared by two ``l1`` halves when the closest point falls on an end of
    ``l2``), so the max of the per-pair control distances stays an upper
    bound on the Hausdorff distance.
    """
    l1, l2 = _match_degree(l1, l2)
    bound, k, history = K.one_sided(l1.ctrl, l2.ctrl, float(eps), int(k0))
    return BoundResult(float(bound), int(k), bool(bound <= eps), history.tolist())


def bound_symmetric(l1: BezierSegment, l2: BezierSegment, eps: float,
                    k0: int = K0_DEFAULT) -> BoundResult:
    """Minimum of the two one-sided runs (roles of the curves swapped)."""
    fwd = bound_one_sided(l1, l2, eps, k0)
    if fwd.bound == 0.0:
        return fwd
    bwd = bound_one_sided(l2, l1, eps, k0)
    return fwd if fwd.bound <= bwd.bound else bwd


def bound_chain_vs_curve(chain, l: BezierSegment, eps: float,
                         k0: int = K0_DEFAULT) -> BoundResult:
    """Bound on the Hausdorff distance between a contiguous chain and one curve.

    ``l`` is split at the closest points to the chain's interior joints and
    each chain piece is bounded against its matching part of ``l``.
    """
    chain = list(chain)
    if not chain:
        raise ValueError("empty chain")
    if len(chain) == 1:
        return bound_symmetric(chain[0], l, eps, k0)
    params = [closest_point(l, seg.end)[0] for seg in chain[:-1]]
    prev = 0.0
    for t in params:
        if not prev < t < 1.0:
            raise GeometryMismatchError(
                f"chain joints project to non-monotone parameters {params}")
        prev = t
    parts = []
    rest = l
    consumed = 0.0
    for t in params:
        local = (t - consumed) / (1.0 - consumed)
        left, rest = rest.split(local)
        parts.append(left)
        consumed = t
    parts.append(rest)
    worst = None
    for seg, part in zip(chain, parts):
        res = bound_symmetric(seg, part, eps, k0)
        if worst is None or res.bound > worst.bound:
            worst = BoundResult(res.bound, res.iterations, res.converged, res.history)
    worst.converged = worst.bound <= eps
    return worst
