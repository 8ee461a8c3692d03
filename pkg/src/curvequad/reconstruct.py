"""Error-bounded reconstruction of a curve network.

The input network is cut into chains at junctions, tag changes and corners.
Each chain is re-segmented into degree-n pieces that stay within a certified
Hausdorff bound of the original arc they replace:

1. neighbouring pieces are merged while the merged curve stays within ``eps``;
2. pieces are bisected until their control-vector sector is at most ``tau``
   and their length is below ``2 * lt``;
3. pieces are bisected where a nearby, non-adjacent piece asks for a smaller
   size (narrow channels, strong size contrast);
4. movable joints are relaxed by a few Lloyd iterations with density
   ``1 + curvature``.

After every step each piece is re-certified and violators are bisected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .curves import (
    ArcRef,
    BezierSegment,
    CurveChain,
    DegenerateError,
    LagrangeSegment,
    SECTOR_SENTINEL,
    arc_length,
    bbox_diagonal,
    build_h,
    direction_sector,
)
from .hausdorff import K0_DEFAULT, GeometryMismatchError, bound_chain_vs_curve, bound_symmetric

__all__ = [
    "TopologyError",
    "NonConvergenceError",
    "CurveNetwork",
    "Piece",
    "ReconstructedChain",
    "Reconstruction",
    "Reconstructor",
    "sector_angle",
    "proximity_target",
    "reconstruct",
]

CORNER_TOL = math.radians(5.0)
MAX_DEPTH = 40


class TopologyError(ValueError):
    """Malformed network: open loop, overused segment, mixed degrees."""


class NonConvergenceError(RuntimeError):
    """Bisection failed to reach the requested bound within the depth limit."""


# ---------------------------------------------------------------------------
# input network
# ---------------------------------------------------------------------------

class CurveNetwork:
    """Regions bounded by oriented loops of degree-n Lagrange segments.

    ``regions`` maps a region id to a list of loops; a loop is a list of
    ``(segment index, sign)`` with sign +1 for the stored direction and -1
    for the reversed one. A segment used by two loops is an interface.
    """

    def __init__(self, segments, regions, segment_ids=None):
        self.segments = [s if isinstance(s, LagrangeSegment) else LagrangeSegment(s)
                         for s in segments]
        if not self.segments:
            raise TopologyError("network has no segments")
        degrees = {s.degree for s in self.segments}
        if len(degrees) != 1:
            raise TopologyError(f"segments have mixed degrees {sorted(degrees)}")
        self.degree = degrees.pop()
        self.segment_ids = list(segment_ids) if segment_ids is not None else list(range(len(self.segments)))
        self.regions = {rid: [[(int(k), int(sg)) for k, sg in loop] for loop in loops]
                        for rid, loops in regions.items()}
        self.beziers = [s.to_bezier() for s in self.segments]
        pts = np.vstack([s.nodes for s in self.segments])
        self.bbox_min = pts.min(axis=0)
        self.bbox_max = pts.max(axis=0)
        self.scale = bbox_diagonal(pts)
        if self.scale <= 0.0:
            raise TopologyError("network has zero extent")
        self._validate()
        self._merge_vertices()

    def _validate(self):
        users: list[list[tuple]] = [[] for _ in self.segments]
        tol = 1e-9 * self.scale
        for rid, loops in self.regions.items():
            if not loops:
                raise TopologyError(f"region {rid!r} has no loops")
            for li, loop in enumerate(loops):
                if not loop:
                    raise TopologyError(f"region {rid!r} loop {li} is empty")
                for k, sg in loop:
                    if not 0 <= k < len(self.segments):
                        raise TopologyError(f"region {rid!r} references unknown segment {k}")
                    if sg not in (1, -1):
                        raise TopologyError(f"region {rid!r}: orientation must be +1 or -1")
                    users[k].append((rid, sg))
                for pos, ((k0, s0), (k1, s1)) in enumerate(zip(loop, loop[1:] + loop[:1])):
                    a = self._end(k0, s0)
                    b = self._start(k1, s1)
                    if np.hypot(*(a - b)) > tol:
                        raise TopologyError(
                            f"region {rid!r} loop {li} is open at joint {pos} between segments "
                            f"{self.segment_ids[k0]} and {self.segment_ids[k1]}")
        for k, us in enumerate(users):
            if len(us) > 2:
                raise TopologyError(f"segment {self.segment_ids[k]} is used by {len(us)} loops")
            if len(us) == 2 and us[0][1] == us[1][1]:
                raise TopologyError(
                    f"segment {self.segment_ids[k]} is shared with the same orientation twice")
        self.users = users
        self.kind = ["interface" if len(u) == 2 else ("boundary" if u else "free") for u in users]

    def _start(self, k, sign):
        n = self.segments[k].nodes
        return n[0] if sign > 0 else n[-1]

    def _end(self, k, sign):
        n = self.segments[k].nodes
        return n[-1] if sign > 0 else n[0]

    def _merge_vertices(self):
        """Give every segment endpoint a shared vertex id."""
        tol = 1e-9 * self.scale
        ends = np.array([[s.nodes[0], s.nodes[-1]] for s in self.segments]).reshape(-1, 2)
        tree = cKDTree(ends)
        ids = -np.ones(len(ends), dtype=int)
        verts = []
        for i in range(len(ends)):
            if ids[i] >= 0:
                continue
            group = tree.query_ball_point(ends[i], tol)
            for j in group:
                if ids[j] < 0:
                    ids[j] = len(verts)
            verts.append(ends[i].copy())
        self.vertices = np.array(verts)
        self.seg_verts = ids.reshape(-1, 2)

    def region_ids(self) -> list:
        return list(self.regions)

    def segment_regions(self, k: int) -> tuple:
        return tuple(sorted({rid for rid, _ in self.users[k]}, key=str))


# ---------------------------------------------------------------------------
# reconstructed chains
# ---------------------------------------------------------------------------

@dataclass
class Piece:
    arc: ArcRef
    curve: LagrangeSegment
    bezier: BezierSegment
    bound: float

    @property
    def length(self) -> float:
        return arc_length(self.bezier)


@dataclass
class ReconstructedChain:
    """A corner-free run of the network together with its current pieces.

    ``joints`` are arc-length positions on ``source``. Open chains store
    ``m + 1`` joints for ``m`` pieces (both ends included); closed chains
    store ``m`` joints and the last piece wraps to ``joints[0] + length``.
    """

    index: int
    source: CurveChain
    refs: list[tuple[int, int]]
    regions: tuple
    kind: str
    closed: bool
    end_vertices: tuple[int, int] | None
    joints: list[float] = field(default_factory=list)
    fixed: list[bool] = field(default_factory=list)
    pieces: list[Piece] = field(default_factory=list)

    def arcs(self) -> list[tuple[float, float]]:
        j = self.joints
        if self.closed:
            return [(j[i], j[i + 1] if i + 1 < len(j) else j[0] + self.source.length)
                    for i in range(len(j))]
        return list(zip(j[:-1], j[1:]))

    def joint_points(self) -> np.ndarray:
        return np.array([self.source.point(s) for s in self.joints])

    @property
    def max_bound(self) -> float:
        return max(p.bound for p in self.pieces)


def sector_angle(seg: BezierSegment) -> float:
    """Width of the smallest sector holding every control-vector direction.

    Returns ``2*pi`` when no half-plane contains them all.
    """
    return direction_sector(seg.control_vectors(), tiny=1e-14 * max(seg.scale(), 1e-300))[1]


def proximity_target(length: float, other: float, d_h: float, alpha: float) -> float:
    """Proximity-driven size target ``z`` for a piece of a given length.

    ``length`` and ``other`` are the arc lengths of the piece and its nearest
    non-adjacent neighbour, ``d_h`` their Hausdorff distance estimate. The
    formula is written for the shorter piece ``a`` against the longer ``b``
    and applied to both.
    """
    a, b = min(length, other), max(length, other)
    if d_h >= b:
        ratio = d_h / b
        gamma = -1
        total = 0.0
        while True:
            nxt = total + alpha ** (gamma + 1)
            if ratio > nxt:
                gamma += 1
                total = nxt
            else:
                break
        return alpha ** max(gamma, 0) * b
    if d_h > a:
        w = (d_h - a) / (b - a)
        return (1.0 - w) * (a + d_h) / 2.0 + w * (b + a) / 2.0
    return d_h


@dataclass
class Reconstruction:
    network: CurveNetwork
    chains: list[ReconstructedChain]
    counts: dict[str, int]
    eps: float
    lt: float

    def pieces(self):
        for ch in self.chains:
            for i, p in enumerate(ch.pieces):
                yield ch, i, p

    @property
    def piece_count(self) -> int:
        return sum(len(ch.pieces) for ch in self.chains)

    @property
    def max_bound(self) -> float:
        return max(ch.max_bound for ch in self.chains)


class Reconstructor:
    """Runs the reconstruction steps on one network with fixed parameters.

    ``eps``, ``lt`` are absolute lengths. ``eps == 0`` switches to exact
    mode: no merging, original joints pinned, every piece an exact sub-curve
    of one original segment.
    """

    def __init__(self, net: CurveNetwork, eps: float, lt: float, tau: float = math.pi / 4,
                 alpha: float = 2.3, k0: int = K0_DEFAULT, lloyd_iters: int = 5):
        if eps < 0:
            raise ValueError("eps must be >= 0")
        if lt <= 0:
            raise ValueError("lt must be > 0")
        if not 0 < tau < math.pi:
            raise ValueError("tau must lie in (0, pi)")
        if alpha <= 1:
            raise ValueError("alpha must be > 1")
        self.net = net
        self.eps = float(eps)
        self.lt = float(lt)
        self.tau = float(tau)
        self.alpha = float(alpha)
        self.k0 = int(k0)
        self.lloyd_iters = int(lloyd_iters)
        self.exact = self.eps == 0.0
        self.degree = net.degree
        self.min_length = lt * 2.0 ** -10
        self._cache: dict[tuple, Piece] = {}

    # -- certification ------------------------------------------------------

    def passes(self, bound: float) -> bool:
        return bound == 0.0 or bound < self.eps

    def certify(self, ch: ReconstructedChain, s0: float, s1: float) -> Piece:
        key = (ch.index, s0, s1)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        arc = ArcRef(ch.index, s0, s1)
        span = ch.source.single_span(s0, s1)
        if span is not None and (self.exact or (span[1] == 0.0 and span[2] == 1.0)):
            k, t0, t1 = span
            seg = ch.source.segments[k]
            bez = seg if (t0 == 0.0 and t1 == 1.0) else seg.sub(t0, t1)
            lag = bez.to_lagrange()
            nodes = lag.nodes.copy()
            nodes[0] = ch.source.point(s0)
            nodes[-1] = ch.source.point(s1)
            piece = Piece(arc, LagrangeSegment(nodes), bez, 0.0)
        elif self.exact:
            raise NonConvergenceError(f"exact mode arc [{s0}, {s1}] spans several segments")
        else:
            lag = build_h(ch.source, arc, self.degree)
            bez = lag.to_bezier()
            try:
                bound = bound_chain_vs_curve(ch.source.pieces(s0, s1), bez, self.eps, self.k0).bound
            except (GeometryMismatchError, DegenerateError):
                bound = math.inf
            piece = Piece(arc, lag, bez, bound)
        self._cache[key] = piece
        return piece

    def _rebuild(self, ch: ReconstructedChain):
        ch.pieces = [self.certify(ch, a, b) for a, b in ch.arcs()]

    # -- chain extraction ---------------------------------------------------

    def split_at_corners(self) -> list[ReconstructedChain]:
        """Cut the network into chains; each chain's joints start as its segment joints."""
        net = self.net
        nseg = len(net.segments)
        incident: dict[int, list[tuple[int, int]]] = {}
        for k in range(nseg):
            a, b = net.seg_verts[k]
            incident.setdefault(int(a), []).append((k, 0))
            incident.setdefault(int(b), []).append((k, 1))

        def key(k):
            return (net.kind[k], net.segment_regions(k))

        def tangent(k, sign, at_end):
            bz = net.beziers[k]
            d = bz.derivative(1.0 if (at_end == (sign > 0)) else 0.0)
            if np.hypot(*d) == 0.0:
                d = bz.ctrl[-1] - bz.ctrl[0] if sign > 0 else bz.ctrl[0] - bz.ctrl[-1]
            return d * sign

        def continues(v, k_in, s_in):
            """Segment continuing through vertex v after oriented (k_in, s_in), or None."""
            inc = incident[v]
            if len(inc) != 2:
                return None
            arriving = (k_in, 1 if s_in > 0 else 0)
            others = [e for e in inc if e != arriving]
            if len(others) != 1:
                return None
            other, end = others[0]
            if key(other) != key(k_in):
                return None
            s_out = 1 if end == 0 else -1
            t0 = tangent(k_in, s_in, True)
            t1 = tangent(other, s_out, False)
            c = float(np.dot(t0, t1) / (np.hypot(*t0) * np.hypot(*t1)))
            if math.acos(max(-1.0, min(1.0, c))) > CORNER_TOL:
                return None
            return other, s_out

        def end_vertex(k, s):
            return int(net.seg_verts[k][1 if s > 0 else 0])

        def start_vertex(k, s):
            return int(net.seg_verts[k][0 if s > 0 else 1])

        seen = [False] * nseg
        chains: list[ReconstructedChain] = []
        for k in range(nseg):
            if seen[k] or net.kind[k] == "free":
                continue
            seen[k] = True
            fwd = [(k, 1)]
            closed = False
            while True:
                kk, ss = fwd[-1]
                nxt = continues(end_vertex(kk, ss), kk, ss)
                if nxt is None:
                    break
                if nxt[0] == k:
                    closed = True
                    break
                if seen[nxt[0]]:
                    break
                seen[nxt[0]] = True
                fwd.append(nxt)
            back: list[tuple[int, int]] = []
            if not closed:
                while True:
                    kk, ss = back[-1] if back else (k, 1)
                    prv = continues(start_vertex(kk, ss), kk, -ss)
                    if prv is None:
                        break
                    pk, ps = prv[0], -prv[1]
                    if seen[pk]:
                        break
                    seen[pk] = True
                    back.append((pk, ps))
            refs = back[::-1] + fwd
            segs = [net.beziers[kk] if ss > 0 else net.beziers[kk].reversed() for kk, ss in refs]
            src = CurveChain(segs, closed=closed)
            ends = None if closed else (start_vertex(*refs[0]), end_vertex(*refs[-1]))
            ch = ReconstructedChain(len(chains), src, refs, net.segment_regions(k), net.kind[k],
                                    closed, ends)
            ch.joints = [float(x) for x in (src.offsets[:-1] if closed else src.offsets)]
            ch.fixed = [True] * len(ch.joints)
            self._rebuild(ch)
            chains.append(ch)
        return chains

    # -- stage 1: bounded-error approximation --------------------------------

    def merge_pass(self, ch: ReconstructedChain) -> ReconstructedChain:
        """Merge neighbouring pieces while the merged curve stays within eps."""
        if self.exact:
            return ch
        rejected: set[tuple[float, float]] = set()
        while True:
            m = len(ch.pieces)
            if ch.closed and m <= 3:
                break
            arcs = ch.arcs()
            merged = False
            candidates = range(m) if ch.closed else range(1, m)
            for i in candidates:
                left = arcs[i - 1] if i > 0 else (arcs[-1][0] - ch.source.length, arcs[-1][1] - ch.source.length)
                s0, s1 = left[0], arcs[i][1]
                if (s0, s1) in rejected:
                    continue
                piece = self.certify(ch, s0, s1)
                if not self.passes(piece.bound):
                    rejected.add((s0, s1))
                    continue
                if ch.closed and i == 0:
                    # the seam joint goes away; restart the joint list at joint 1
                    ch.joints = ch.joints[1:]
                    ch.fixed = ch.fixed[1:]
                else:
                    del ch.joints[i]
                    del ch.fixed[i]
                self._rebuild(ch)
                merged = True
                break
            if not merged:
                break
        return ch

    def bisect_to_tolerance(self, ch: ReconstructedChain, i: int, fixed: bool = True,
                            depth: int = 0) -> int:
        """Bisect piece ``i`` at source-arc midpoints until every part passes.

        Returns the number of pieces that replaced piece ``i``.
        """
        piece = ch.pieces[i]
        if self.passes(piece.bound):
            return 1
        if depth >= MAX_DEPTH:
            raise NonConvergenceError(
                f"chain {ch.index}: piece [{piece.arc.start:.6g}, {piece.arc.end:.6g}] "
                f"still has bound {piece.bound:.3g} >= eps {self.eps:.3g} after {MAX_DEPTH} bisections")
        self._split(ch, i, fixed)
        right = self.bisect_to_tolerance(ch, i + 1, fixed, depth + 1)
        left = self.bisect_to_tolerance(ch, i, fixed, depth + 1)
        return left + right

    def _split(self, ch: ReconstructedChain, i: int, fixed: bool):
        s0, s1 = ch.arcs()[i]
        mid = 0.5 * (s0 + s1)
        ch.joints.insert(i + 1, mid)
        ch.fixed.insert(i + 1, fixed)
        ch.pieces[i:i + 1] = [self.certify(ch, s0, mid), self.certify(ch, mid, s1)]

    def enforce_error(self, ch: ReconstructedChain) -> ReconstructedChain:
        """Re-certify every piece and bisect the violators."""
        i = 0
        while i < len(ch.pieces):
            i += self.bisect_to_tolerance(ch, i, fixed=True)
        return ch

    def _ensure_closed_minimum(self, ch: ReconstructedChain):
        while ch.closed and len(ch.pieces) < 3:
            lengths = [b - a for a, b in ch.arcs()]
            self._split(ch, int(np.argmax(lengths)), fixed=True)

    # -- stage 2: refinement -------------------------------------------------

    def _needs_angular_size(self, p: Piece) -> bool:
        if p.arc.length <= self.min_length:
            return False
        return sector_angle(p.bezier) > self.tau or p.length >= 2.0 * self.lt

    def angular_size_refine(self, ch: ReconstructedChain) -> ReconstructedChain:
        """Bisect until every piece has sector angle <= tau and length < 2*lt."""
        i = 0
        guard = 0
        while i < len(ch.pieces):
            if self._needs_angular_size(ch.pieces[i]):
                guard += 1
                if guard > 1 << 16:
                    raise NonConvergenceError(f"chain {ch.index}: angular/size refinement runaway")
                self._split(ch, i, fixed=False)
                self.bisect_to_tolerance(ch, i + 1)
                self.bisect_to_tolerance(ch, i)
                continue
            i += 1
        return ch

    def _nearest_pieces(self, chains):
        """For every piece, the nearest piece not sharing an endpoint with it."""
        items = [(ch, i, p) for ch in chains for i, p in enumerate(ch.pieces)]
        ts = np.linspace(0.0, 1.0, 17)
        samples = np.array([p.bezier.evaluate(ts) for _, _, p in items])
        flat = samples.reshape(-1, 2)
        owner = np.repeat(np.arange(len(items)), len(ts))
        tol = 1e-9 * self.net.scale
        ends = np.array([[p.curve.nodes[0], p.curve.nodes[-1]] for _, _, p in items]).reshape(-1, 2)
        etree = cKDTree(ends)
        adjacent = [set() for _ in items]
        for a, b in etree.query_pairs(tol):
            adjacent[a // 2].add(b // 2)
            adjacent[b // 2].add(a // 2)
        tree = cKDTree(flat)
        out = []
        kq = min(len(flat), 96)
        for idx in range(len(items)):
            banned = adjacent[idx] | {idx}
            if len(banned) >= len(items):
                out.append(None)
                continue
            dist, nb = tree.query(samples[idx], k=kq)
            dist = np.atleast_2d(dist)
            nb = np.atleast_2d(nb)
            best = (math.inf, -1)
            for row_d, row_n in zip(dist, nb):
                for d, j in zip(row_d, row_n):
                    o = owner[j]
                    if o not in banned:
                        if d < best[0]:
                            best = (d, o)
                        break
            if best[1] < 0:
                mask = ~np.isin(owner, list(banned))
                diff = flat[mask][None, :, :] - samples[idx][:, None, :]
                dd = np.hypot(diff[..., 0], diff[..., 1])
                pos = np.unravel_index(np.argmin(dd), dd.shape)
                best = (dd[pos], owner[mask][pos[1]])
            out.append(best[1])
        return items, out

    def proximity_refine(self, chains: list[ReconstructedChain]) -> list[ReconstructedChain]:
        """Bisect pieces that are too long relative to their nearest neighbour."""
        for _ in range(64):
            items, nearest = self._nearest_pieces(chains)
            marks: dict[int, set[int]] = {}
            for idx, (ch, i, p) in enumerate(items):
                k = nearest[idx]
                if k is None or p.arc.length <= self.min_length:
                    continue
                other = items[k][2].bezier
                if np.hypot(*(other.end - p.bezier.start)) < np.hypot(*(other.start - p.bezier.start)):
                    other = other.reversed()
                d_h = bound_symmetric(p.bezier, other, 0.0, self.k0).bound
                length = p.length
                z = proximity_target(length, items[k][2].length, d_h, self.alpha)
                if z > 0 and length / z > self.alpha:
                    marks.setdefault(ch.index, set()).add(i)
            if not marks:
                break
            for ch in chains:
                for i in sorted(marks.get(ch.index, ()), reverse=True):
                    self._split(ch, i, fixed=False)
                    self.bisect_to_tolerance(ch, i + 1)
                    self.bisect_to_tolerance(ch, i)
        return chains

    def lloyd_optimize(self, ch: ReconstructedChain, iterations: int | None = None) -> ReconstructedChain:
        """Move movable joints to the density-weighted centroid of their cell."""
        iterations = self.lloyd_iters if iterations is None else iterations
        L = ch.source.length
        for _ in range(iterations):
            j = ch.joints
            m = len(j)
            new = list(j)
            moved = False
            for i in range(m):
                if ch.fixed[i]:
                    continue
                if ch.closed:
                    left = j[i - 1] if i > 0 else j[-1] - L
                    right = j[i + 1] if i + 1 < m else j[0] + L
                else:
                    left, right = j[i - 1], j[i + 1]
                a = 0.5 * (left + j[i])
                b = 0.5 * (j[i] + right)
                m0, m1 = ch.source.density_moments(a, b)
                c = m1 / m0
                if not a <= c <= b:
                    raise RuntimeError(f"centroid {c} left its cell [{a}, {b}]")
                if c != j[i]:
                    new[i] = c
                    moved = True
            if not moved:
                break
            ch.joints = new
            self._rebuild(ch)
            self.enforce_error(ch)
        return ch

    # -- driver ---------------------------------------------------------------

    def run(self) -> Reconstruction:
        chains = self.split_at_corners()
        counts = {"input": len(self.net.segments)}
        for ch in chains:
            self.merge_pass(ch)
            self._ensure_closed_minimum(ch)
            self.enforce_error(ch)
            ch.fixed = [True] * len(ch.joints)
        counts["approximated"] = sum(len(ch.pieces) for ch in chains)
        for ch in chains:
            self.angular_size_refine(ch)
            self.enforce_error(ch)
        self.proximity_refine(chains)
        for ch in chains:
            self.enforce_error(ch)
            self.lloyd_optimize(ch)
            # Lloyd moves joints, so the shape and size limits are checked again
            self.angular_size_refine(ch)
            self.enforce_error(ch)
        counts["refined"] = sum(len(ch.pieces) for ch in chains)
        return Reconstruction(self.net, chains, counts, self.eps, self.lt)


def reconstruct(net: CurveNetwork, eps: float, lt: float, **kwargs) -> Reconstruction:
    return Reconstructor(net, eps, lt, **kwargs).run()
