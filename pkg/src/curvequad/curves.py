"""Polynomial curve kernel.

Planar degree-n curves in two interchangeable forms: Lagrange (interpolating
n+1 points at uniform parameters i/n) and Bezier (Bernstein control points).
Also hosts :class:`CurveChain`, an arc-length parameterised run of Bezier
segments, and :func:`build_h`, which resamples a sub-arc of a chain into a
new Lagrange segment with arc-length-uniform nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _kernels as K

__all__ = [
    "DegenerateError",
    "LagrangeSegment",
    "BezierSegment",
    "ArcRef",
    "CurveChain",
    "bernstein_basis",
    "lagrange_basis",
    "bernstein_matrix",
    "lagrange_matrix",
    "lagrange_deriv_matrix",
    "lagrange_to_bezier",
    "bezier_to_lagrange",
    "subdivide",
    "evaluate",
    "derivative",
    "curvature",
    "arc_length",
    "arc_midpoint",
    "param_at_length",
    "closest_point",
    "build_h",
    "bbox_diagonal",
    "direction_sector",
    "SECTOR_SENTINEL",
]


class DegenerateError(ValueError):
    """Raised for degenerate geometric input (zero-length arc, t at an end, ...)."""


def bbox_diagonal(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))


SECTOR_SENTINEL = 2.0 * math.pi


def direction_sector(vectors, tiny: float = 0.0) -> tuple[float, float]:
    """Smallest angular sector ``(start, width)`` holding every direction.

    Zero vectors (norm <= ``tiny``) are skipped. The sector is the complement
    of the largest gap between sorted direction angles; a width of pi or more
    is reported as the sentinel width ``2*pi``.
    """
    v = np.asarray(vectors, dtype=float).reshape(-1, 2)
    norms = np.hypot(v[:, 0], v[:, 1])
    v = v[norms > tiny]
    if len(v) == 0:
        raise DegenerateError("all control vectors are zero")
    ang = np.sort(np.arctan2(v[:, 1], v[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2.0 * math.pi]]))
    k = int(np.argmax(gaps))
    width = 2.0 * math.pi - float(gaps[k])
    start = float(ang[(k + 1) % len(ang)])
    if width >= math.pi:
        return start, SECTOR_SENTINEL
    return start, max(width, 0.0)


# ---------------------------------------------------------------------------
# basis functions
# ---------------------------------------------------------------------------

def bernstein_basis(n: int, i: int, t: float) -> float:
    """Value of the Bernstein polynomial ``C(n,i) t^i (1-t)^(n-i)``."""
    if n < 0 or not 0 <= i <= n:
        raise ValueError(f"index {i} out of range for degree {n}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"parameter {t} outside [0, 1]")
    return math.comb(n, i) * t**i * (1.0 - t) ** (n - i)


def lagrange_basis(n: int, i: int, t: float) -> float:
    """Lagrange basis on uniform nodes ``t_j = j/n``."""
    if n < 1:
        raise ValueError("Lagrange basis needs degree >= 1 in curve contexts")
    if not 0 <= i <= n:
        raise ValueError(f"index {i} out of range for degree {n}")
    ti = i / n
    val = 1.0
    for j in range(n + 1):
        if j != i:
            tj = j / n
            val *= (t - tj) / (ti - tj)
    return val


def bernstein_matrix(n: int, ts) -> np.ndarray:
    """Rows are ``[B_0^n(t), ..., B_n^n(t)]`` for each t."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    i = np.arange(n + 1)
    coef = np.array([math.comb(n, k) for k in i], dtype=float)
    return coef * ts[:, None] ** i * (1.0 - ts[:, None]) ** (n - i)


def lagrange_matrix(n: int, ts) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    nodes = np.arange(n + 1) / n
    out = np.ones((ts.size, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            if j != i:
                out[:, i] *= (ts - nodes[j]) / (nodes[i] - nodes[j])
    return out


def lagrange_deriv_matrix(n: int, ts) -> np.ndarray:
    """Derivatives ``L_i'(t)`` of the uniform-node Lagrange basis."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    nodes = np.arange(n + 1) / n
    out = np.zeros((ts.size, n + 1))
    for i in range(n + 1):
        for m in range(n + 1):
            if m == i:
                continue
            term = np.full(ts.size, 1.0 / (nodes[i] - nodes[m]))
            for j in range(n + 1):
                if j != i and j != m:
                    term *= (ts - nodes[j]) / (nodes[i] - nodes[j])
            out[:, i] += term
    return out


@lru_cache(maxsize=None)
def _basis_change(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(M, M^-1) with ``M[i, j] = B_j^n(i/n)``, inverted in exact arithmetic."""
    m = [[Fraction(math.comb(n, j)) * Fraction(i, n) ** j * (1 - Fraction(i, n)) ** (n - j)
          for j in range(n + 1)] for i in range(n + 1)]
    size = n + 1
    aug = [row[:] + [Fraction(int(r == c)) for c in range(size)] for r, row in enumerate(m)]
    for col in range(size):
        piv = next(r for r in range(col, size) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(size):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    fwd = np.array([[float(v) for v in row] for row in m])
    inv = np.array([[float(v) for v in row[size:]] for row in aug])
    fwd.setflags(write=False)
    inv.setflags(write=False)
    return fwd, inv


def lagrange_to_bezier_matrix(n: int) -> np.ndarray:
    """Matrix taking Lagrange nodes to Bezier control points."""
    return _basis_change(n)[1]


def bezier_to_lagrange_matrix(n: int) -> np.ndarray:
    return _basis_change(n)[0]


# ---------------------------------------------------------------------------
# segment types
# ---------------------------------------------------------------------------

def _as_points(pts, name: str) -> np.ndarray:
    arr = np.array(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise ValueError(f"{name} must be an (n+1, 2) array with n >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LagrangeSegment:
    """Degree-n curve interpolating ``nodes[i]`` at ``t = i/n``."""

    nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _as_points(self.nodes, "nodes"))

    @property
    def degree(self) -> int:
        return self.nodes.shape[0] - 1

    def evaluate(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = lagrange_matrix(self.degree, t_arr) @ self.nodes
        return out[0] if np.ndim(t) == 0 else out

    def to_bezier(self) -> BezierSegment:
        return lagrange_to_bezier(self)

    def reversed(self) -> LagrangeSegment:
        return LagrangeSegment(self.nodes[::-1])


@dataclass(frozen=True, eq=False)
class BezierSegment:
    """Degree-n Bezier curve with control points ``ctrl``."""

    ctrl: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ctrl", _as_points(self.ctrl, "ctrl"))

    @property
    def degree(self) -> int:
        return self.ctrl.shape[0] - 1

    @property
    def start(self) -> np.ndarray:
        return self.ctrl[0]

    @property
    def end(self) -> np.ndarray:
        return self.ctrl[-1]

    def scale(self) -> float:
        """Bounding-box diagonal of the control polygon (tolerance unit)."""
        return bbox_diagonal(self.ctrl)

    def evaluate(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = bernstein_matrix(self.degree, t_arr) @ self.ctrl
        return out[0] if np.ndim(t) == 0 else out

    def hodograph(self) -> np.ndarray:
        """Control points ``n * Delta_i`` of the derivative curve."""
        return self.degree * np.diff(self.ctrl, axis=0)

    def control_vectors(self) -> np.ndarray:
        return np.diff(self.ctrl, axis=0)

    def derivative(self, t, order: int = 1):
        pts = self.ctrl
        n = self.degree
        factor = 1.0
        for k in range(order):
            if n - k < 1:
                zero = np.zeros(2)
                return zero if np.ndim(t) == 0 else np.zeros((np.size(t), 2))
            factor *= n - k
            pts = np.diff(pts, axis=0)
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = factor * (bernstein_matrix(n - order, t_arr) @ pts)
        return out[0] if np.ndim(t) == 0 else out

    def split(self, t: float) -> tuple[BezierSegment, BezierSegment]:
        return subdivide(self, t)

    def sub(self, a: float, b: float) -> BezierSegment:
        """Exact reparameterised piece covering ``[a, b]``."""
        if not 0.0 <= a < b <= 1.0:
            raise DegenerateError(f"bad sub-interval [{a}, {b}]")
        seg = self
        if b < 1.0:
            seg = _casteljau(seg.ctrl, b)[0]
        else:
            seg = self.ctrl
        if a > 0.0:
            seg = _casteljau(seg, a / b)[1]
        return BezierSegment(seg)

    def elevate(self) -> BezierSegment:
        n = self.degree
        q = self.ctrl
        out = np.empty((n + 2, 2))
        out[0] = q[0]
        out[-1] = q[-1]
        for i in range(1, n + 1):
            a = i / (n + 1)
            out[i] = a * q[i - 1] + (1.0 - a) * q[i]
        return BezierSegment(out)

    def reversed(self) -> BezierSegment:
        return BezierSegment(self.ctrl[::-1])

    def to_lagrange(self) -> LagrangeSegment:
        return bezier_to_lagrange(self)


def _casteljau(ctrl: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    return K.split(np.ascontiguousarray(ctrl, dtype=float), float(t))


def lagrange_to_bezier(seg: LagrangeSegment) -> BezierSegment:
    return BezierSegment(lagrange_to_bezier_matrix(seg.degree) @ seg.nodes)


def bezier_to_lagrange(seg: BezierSegment) -> LagrangeSegment:
    return LagrangeSegment(bezier_to_lagrange_matrix(seg.degree) @ seg.ctrl)


def subdivide(seg: BezierSegment, t: float) -> tuple[BezierSegment, BezierSegment]:
    """De Casteljau split at interior parameter ``t``."""
    if not 0.0 < t < 1.0:
        raise DegenerateError(f"cannot split at t={t}; need 0 < t < 1")
    left, right = _casteljau(seg.ctrl, t)
    return BezierSegment(left), BezierSegment(right)


def evaluate(seg: BezierSegment, t):
    return seg.evaluate(t)


def derivative(seg: BezierSegment, t):
    return seg.derivative(t)


def curvature(seg: BezierSegment, t: float) -> tuple[float, bool]:
    """Unsigned curvature at ``t`` and a flag set at zero-speed points."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"parameter {t} outside [0, 1]")
    d1 = seg.derivative(t)
    speed = math.hypot(d1[0], d1[1])
    if speed < 1e-14 * max(seg.scale(), 1e-300):
        return 0.0, True
    d2 = seg.derivative(t, order=2)
    return abs(d1[0] * d2[1] - d1[1] * d2[0]) / speed**3, False


def _curvatures(seg: BezierSegment, ts: np.ndarray) -> np.ndarray:
    d1 = seg.derivative(ts)
    d2 = seg.derivative(ts, order=2)
    speed = np.hypot(d1[:, 0], d1[:, 1])
    cross = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    tiny = 1e-14 * max(seg.scale(), 1e-300)
    out = np.zeros_like(speed)
    ok = speed >= tiny
    out[ok] = cross[ok] / speed[ok] ** 3
    return out


# ---------------------------------------------------------------------------
# arc length
# ---------------------------------------------------------------------------

_GL_X, _GL_W = K._GL_X, K._GL_W


def _speed(seg: BezierSegment, ts: np.ndarray) -> np.ndarray:
    d = seg.derivative(ts)
    return np.hypot(d[:, 0], d[:, 1])


def arc_length(seg: BezierSegment, a: float = 0.0, b: float = 1.0, rtol: float = 1e-9) -> float:
    """Length of ``seg`` between parameters a and b (adaptive Gauss-Legendre)."""
    if not 0.0 <= a <= b <= 1.0:
        raise ValueError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")
    if a == b:
        return 0.0
    return K.adaptive_length(seg.ctrl, float(a), float(b), rtol, _GL_X, _GL_W)


class _LengthTable:
    """Cumulative arc length of one Bezier segment at 33 uniform parameters."""

    knots = np.linspace(0.0, 1.0, 33)

    def __init__(self, seg: BezierSegment):
        self.seg = seg
        self.ctrl = np.ascontiguousarray(seg.ctrl)
        parts = [K.adaptive_length(self.ctrl, a, b, 1e-10, _GL_X, _GL_W)
                 for a, b in zip(self.knots[:-1], self.knots[1:])]
        self.cum = np.concatenate([[0.0], np.cumsum(parts)])
        self.length = float(self.cum[-1])

    def s_of_t(self, t: float) -> float:
        k = min(int(t * 32), 31)
        a = self.knots[k]
        if t == a:
            return float(self.cum[k])
        return float(self.cum[k]) + K.gl_length(self.ctrl, a, float(t), _GL_X, _GL_W)

    def t_of_s(self, s: float) -> float:
        return K.t_of_s(self.ctrl, self.knots, self.cum, float(s), _GL_X, _GL_W)


def param_at_length(seg: BezierSegment, s: float) -> float:
    """Parameter where the cumulative arc length from t=0 equals ``s``."""
    return _LengthTable(seg).t_of_s(s)


def arc_midpoint(seg: BezierSegment) -> tuple[np.ndarray, float]:
    """Point and parameter at half the total arc length."""
    table = _LengthTable(seg)
    t = table.t_of_s(0.5 * table.length)
    return seg.evaluate(t), t


# ---------------------------------------------------------------------------
# closest point
# ---------------------------------------------------------------------------

def closest_point(seg: BezierSegment, p) -> tuple[float, np.ndarray, float]:
    """Global minimiser of ``|seg(t) - p|`` over ``[0, 1]``.

    Coarse sampling (65 points) seeds Newton at every sampled local minimum;
    the curve is then recursively subdivided, discarding pieces whose
    control-polygon box lies farther than the best distance so far, and
    surviving leaves are polished by Newton as well.
    """
    p = np.asarray(p, dtype=float)
    t, d = K.closest_point(seg.ctrl, float(p[0]), float(p[1]))
    return t, seg.evaluate(t), d


# ---------------------------------------------------------------------------
# chains and arc resampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArcRef:
    """Arc ``[start, end]`` (arc-length positions) on chain ``source``.

    On a closed chain ``end`` may exceed the chain length; positions wrap.
    """

    source: int
    start: float
    end: float

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"arc start {self.start} must precede end {self.end}")

    @property
    def length(self) -> float:
        return self.end - self.start


class CurveChain:
    """Contiguous run of Bezier segments parameterised by arc length."""

    def __init__(self, segments, closed: bool = False):
        self.segments = [s if isinstance(s, BezierSegment) else BezierSegment(s) for s in segments]
        if not self.segments:
            raise ValueError("empty chain")
        self.closed = closed
        self._tables = [_LengthTable(s) for s in self.segments]
        lengths = [t.length for t in self._tables]
        self.offsets = np.concatenate([[0.0], np.cumsum(lengths)])
        self.length = float(self.offsets[-1])
        pts = np.vstack([s.ctrl for s in self.segments])
        self.scale = bbox_diagonal(pts)

    @property
    def joints(self) -> np.ndarray:
        """Arc-length positions of segment joints, endpoints included."""
        return self.offsets.copy()

    def _wrap(self, s: float) -> float:
        if self.closed:
            s = s % self.length
        return min(max(s, 0.0), self.length)

    def locate(self, s: float) -> tuple[int, float]:
        s = self._wrap(s)
        k = int(np.searchsorted(self.offsets, s, side="right")) - 1
        k = min(max(k, 0), len(self.segments) - 1)
        return k, self._tables[k].t_of_s(s - self.offsets[k])

    def position(self, k: int, t: float) -> float:
        return float(self.offsets[k]) + self._tables[k].s_of_t(t)

    def point(self, s: float) -> np.ndarray:
        if not self.closed and s >= self.length:
            return self.segments[-1].ctrl[-1].copy()
        k, t = self.locate(s)
        return self.segments[k].evaluate(t)

    def points(self, ss) -> np.ndarray:
        return np.array([self.point(s) for s in ss])

    def curvature(self, s: float) -> float:
        k, t = self.locate(s)
        return curvature(self.segments[k], t)[0]

    def _spans(self, s0: float, s1: float):
        """Yield (segment index, t0, t1) covering ``[s0, s1]`` in order."""
        if self.closed:
            shift = math.floor(s0 / self.length) * self.length
            s0 -= shift
            s1 -= shift
            if s1 - s0 > self.length * (1 + 1e-12):
                raise ValueError("arc longer than closed chain")
        else:
            s0 = max(s0, 0.0)
            s1 = min(s1, self.length)
        snap = 1e-12 * max(self.length, 1e-300)
        out = []
        base = 0.0
        while s0 < s1 - snap:
            local0 = s0 - base
            local1 = s1 - base
            for k in range(len(self.segments)):
                a, b = self.offsets[k], self.offsets[k + 1]
                lo = max(local0, a)
                hi = min(local1, b)
                if hi - lo <= snap:
                    continue
                t0 = 0.0 if lo - a <= snap else self._tables[k].t_of_s(lo - a)
                t1 = 1.0 if b - hi <= snap else self._tables[k].t_of_s(hi - a)
                if t1 > t0:
                    out.append((k, t0, t1))
            if not self.closed:
                break
            base += self.length
            s0 = base
        return out

    def pieces(self, s0: float, s1: float) -> list[BezierSegment]:
        """Exact Bezier pieces of the chain between two arc-length positions."""
        out = []
        for k, t0, t1 in self._spans(s0, s1):
            seg = self.segments[k]
            out.append(seg if (t0 == 0.0 and t1 == 1.0) else seg.sub(t0, t1))
        if not out:
            raise DegenerateError(f"empty arc [{s0}, {s1}]")
        return out

    def single_span(self, s0: float, s1: float):
        spans = self._spans(s0, s1)
        return spans[0] if len(spans) == 1 else None

    def density_moments(self, a: float, b: float) -> tuple[float, float]:
        """``(int rho ds, int s rho ds)`` over ``[a, b]`` with rho = 1 + curvature.

        ``s`` is measured in the unwrapped frame of ``a`` so closed chains can
        integrate across the seam.
        """
        m0 = 0.0
        m1 = 0.0
        pos = a
        for k, t0, t1 in self._spans(a, b):
            table = self._tables[k]
            s_start = pos - table.s_of_t(t0)
            tiny = 1e-14 * max(self.segments[k].scale(), 1e-300)
            d0, d1 = K.density_moments(table.ctrl, table.knots, table.cum, t0, t1,
                                       s_start, _GL_X, _GL_W, tiny)
            m0 += d0
            m1 += d1
            pos = s_start + table.s_of_t(t1)
        return m0, m1


def build_h(chain: CurveChain, arc: ArcRef, n: int) -> LagrangeSegment:
    """Degree-n curve through arc-length-uniform points of ``arc``.

    Endpoints are the arc endpoints; interior nodes sit at arc-length
    fractions i/n along the arc.
    """
    if n < 1:
        raise ValueError("degree must be >= 1")
    if arc.length <= 1e-14 * max(chain.scale, 1e-300):
        raise DegenerateError("zero-length arc")
    ss = arc.start + arc.length * np.arange(n + 1) / n
    nodes = chain.points(ss)
    nodes[0] = chain.point(arc.start)
    nodes[-1] = chain.point(arc.end)
    return LagrangeSegment(nodes)
