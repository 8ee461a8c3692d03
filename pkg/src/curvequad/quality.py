"""Jacobian-based element quality and mesh fidelity metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .curves import lagrange_deriv_matrix, lagrange_matrix
from .hausdorff import K0_DEFAULT, bound_chain_vs_curve

__all__ = [
    "QualityReport",
    "ElementStats",
    "gauss_lobatto",
    "jacobian",
    "jacobians",
    "shape_measure",
    "skew_measure",
    "evaluate_element",
    "count_singular",
    "relative_geometric_error",
    "assess",
]


@lru_cache(maxsize=None)
def gauss_lobatto(m: int = 10) -> np.ndarray:
    """``m`` Gauss-Lobatto abscissae mapped to [0, 1], endpoints included.

    Interior points are the roots of the derivative of the degree ``m-1``
    Legendre polynomial, found by Newton iteration from Chebyshev guesses.
    """
    if m < 2:
        raise ValueError("need at least two Lobatto points")
    N = m - 1
    x = -np.cos(np.pi * np.arange(1, N) / N)
    leg = np.polynomial.legendre.Legendre.basis(N)
    d1 = leg.deriv()
    d2 = leg.deriv(2)
    for _ in range(100):
        step = d1(x) / d2(x)
        x = x - step
        if np.max(np.abs(step)) < 1e-16:
            break
    pts = np.concatenate([[-1.0], np.sort(x), [1.0]])
    pts = 0.5 * (pts - pts[::-1])  # exact symmetry about 0
    out = 0.5 * (pts + 1.0)
    out[0], out[-1] = 0.0, 1.0
    out.setflags(write=False)
    return out


def jacobians(grid: np.ndarray, xs, ys) -> np.ndarray:
    """Jacobians at the tensor grid ``xs x ys``; shape ``(len(xs), len(ys), 2, 2)``.

    Column 0 is d(psi)/d(xi), column 1 is d(psi)/d(eta).
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.shape[0] - 1
    Lx, Ly = lagrange_matrix(n, xs), lagrange_matrix(n, ys)
    Dx, Dy = lagrange_deriv_matrix(n, xs), lagrange_deriv_matrix(n, ys)
    dxi = np.einsum("ai,bj,ijc->abc", Dx, Ly, grid)
    deta = np.einsum("ai,bj,ijc->abc", Lx, Dy, grid)
    return np.stack([dxi, deta], axis=-1)


def jacobian(grid: np.ndarray, xi: float, eta: float) -> np.ndarray:
    if not (0.0 <= xi <= 1.0 and 0.0 <= eta <= 1.0):
        raise ValueError("reference point outside [0, 1]^2")
    return jacobians(grid, [xi], [eta])[0, 0]


def _det(J):
    return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]


def shape_measure(J) -> float | np.ndarray:
    """``2 det(J) / |J|_F^2``; zero where the Frobenius norm vanishes."""
    J = np.asarray(J, dtype=float)
    fro = (J * J).sum(axis=(-2, -1))
    det = _det(J)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(fro > 0.0, 2.0 * det / np.where(fro > 0, fro, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def skew_measure(J) -> float | np.ndarray:
    """``det(J) / (|j1| |j2|)`` with j1, j2 the Jacobian columns."""
    J = np.asarray(J, dtype=float)
    n1 = np.hypot(J[..., 0, 0], J[..., 1, 0])
    n2 = np.hypot(J[..., 0, 1], J[..., 1, 1])
    den = n1 * n2
    det = _det(J)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0.0, det / np.where(den > 0, den, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class ElementStats:
    min_jm: float
    avg_jm: float
    min_jk: float
    avg_jk: float
    certified: bool = False


def evaluate_element(grid: np.ndarray, samples: int = 10) -> tuple[ElementStats, np.ndarray, np.ndarray]:
    """Shape and skew measures on the ``samples x samples`` Lobatto grid."""
    g = gauss_lobatto(samples)
    J = jacobians(grid, g, g)
    jm = shape_measure(J)
    jk = skew_measure(J)
    stats = ElementStats(float(jm.min()), float(jm.mean()), float(jk.min()), float(jk.mean()))
    return stats, jm, jk


def count_singular(quads, boundary_vertices=(), interior_only: bool = False) -> int:
    """Number of vertices whose valence differs from the regular value.

    Interior vertices are regular at valence 4. Vertices in
    ``boundary_vertices`` are regular at valence 2 or 3, or skipped
    entirely with ``interior_only``.
    """
    valence: dict[int, int] = {}
    for q in quads:
        for v in q:
            valence[v] = valence.get(v, 0) + 1
    bset = set(boundary_vertices)
    count = 0
    for v, k in valence.items():
        if v in bset:
            if not interior_only and k not in (2, 3):
                count += 1
        elif k != 4:
            count += 1
    return count


def relative_geometric_error(rec, k0: int = K0_DEFAULT) -> float:
    """Largest certified piece-to-arc bound divided by the bounding-box diagonal.

    Each bound is recomputed with a zero target so the full iteration budget
    tightens it; it never exceeds the bound certified during reconstruction.
    """
    worst = 0.0
    for ch, _i, piece in rec.pieces():
        if piece.bound == 0.0:
            continue
        res = bound_chain_vs_curve(ch.source.pieces(piece.arc.start, piece.arc.end),
                                   piece.bezier, 0.0, k0)
        worst = max(worst, min(res.bound, piece.bound))
    return worst / rec.network.scale


@dataclass
class QualityReport:
    per_element: list[ElementStats]
    min_jm: float
    avg_jm: float
    min_jk: float
    avg_jk: float
    n_singular: int
    n_singular_interior: int
    b_e: float
    element_count: int
    inverted: int
    certified: int
    wall_time_seconds: float = 0.0
    stage_seconds: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        d["per_element"] = [asdict(s) for s in self.per_element]
        if not timings:
            d.pop("wall_time_seconds")
            d.pop("stage_seconds")
        return d


def assess(ho, rec=None) -> QualityReport:
    """Quality report for a high-order mesh (and its reconstruction, for b_e)."""
    from .high_order import sector_certificate

    per = []
    jm_all = []
    jk_all = []
    for e in range(ho.element_count):
        grid = ho.grid(e)
        stats, jm, jk = evaluate_element(grid)
        stats.certified = sector_certificate(grid).valid
        per.append(stats)
        jm_all.append(jm)
        jk_all.append(jk)
    if per:
        jm_all = np.concatenate([a.ravel() for a in jm_all])
        jk_all = np.concatenate([a.ravel() for a in jk_all])
        mins = (float(jm_all.min()), float(jm_all.mean()), float(jk_all.min()), float(jk_all.mean()))
    else:
        mins = (math.nan,) * 4
    bverts = ho.linear.tagged_vertices()
    quads = ho.linear.quads
    return QualityReport(
        per_element=per,
        min_jm=mins[0], avg_jm=mins[1], min_jk=mins[2], avg_jk=mins[3],
        n_singular=count_singular(quads, bverts),
        n_singular_interior=count_singular(quads, bverts, interior_only=True),
        b_e=relative_geometric_error(rec) if rec is not None else 0.0,
        element_count=ho.element_count,
        inverted=sum(s.min_jm <= 0.0 for s in per),
        certified=sum(s.certified for s in per),
        notes=["avg_jm and avg_jk are plain means over all Lobatto samples of all elements"],
    )
