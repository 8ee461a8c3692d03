from __future__ import annotations

import math

import numpy as np
import pytest

from curvequad import corpus
from curvequad.curves import BezierSegment
from curvequad.hausdorff import bound_symmetric
from curvequad.reconstruct import (
    CurveNetwork,
    Reconstructor,
    TopologyError,
    proximity_target,
    reconstruct,
    sector_angle,
)


def make(net, eps_rel=1e-3, lt_rel=0.05, **kw):
    return Reconstructor(net, eps_rel * net.scale, lt_rel * net.scale, **kw)


def square_net(per_edge=1, size=1.0):
    pts = [(0, 0), (size, 0), (size, size), (0, size)]
    return corpus._single_loop(corpus._polygon(pts, 2, per_edge))


def _to_polyline(pts, poly):
    """Distance from each point to a polyline; chord error is O(h^2), unlike point sampling."""
    a, b = poly[:-1], poly[1:]
    d = b - a
    L2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    out = np.empty(len(pts))
    for i, x in enumerate(pts):
        t = np.clip(np.einsum("ij,ij->i", x - a, d) / L2, 0.0, 1.0)
        out[i] = np.min(np.hypot(*(a + t[:, None] * d - x).T))
    return out


def piece_error(ch, p, samples=3000):
    """Sampled Hausdorff distance between a piece and its source arc."""
    s = np.linspace(p.arc.start, p.arc.end, samples)
    src = ch.source.points(s)
    cur = p.bezier.evaluate(np.linspace(0, 1, samples))
    return float(max(_to_polyline(src, cur).max(), _to_polyline(cur, src).max()))


# -- network validation ----------------------------------------------------------

def test_network_classifies_interfaces():
    net = corpus.two_half_disks()
    kinds = set(net.kind)
    assert kinds == {"boundary", "interface"}
    assert sum(k == "interface" for k in net.kind) == 2


def test_network_rejects_open_loop():
    segs = corpus._polygon([(0, 0), (1, 0), (1, 1), (0, 1)], 2)
    segs[3] = segs[3].copy()
    segs[3][-1] = (0.0, 0.2)
    with pytest.raises(TopologyError, match="joint|close"):
        CurveNetwork(segs, {"r": [[(k, 1) for k in range(4)]]})


def test_network_rejects_mixed_degree():
    with pytest.raises(TopologyError):
        CurveNetwork([[(0, 0), (1, 0)], [(1, 0), (0.5, 1), (0, 0)]], {"r": [[(0, 1), (1, 1)]]})


def test_network_rejects_same_direction_reuse():
    net = corpus.square()
    segs = [s.nodes for s in net.segments]
    loop = [(k, 1) for k in range(4)]
    with pytest.raises(TopologyError):
        CurveNetwork(segs, {"a": [loop], "b": [loop]})


# -- sector angle and proximity target -------------------------------------------

def test_sector_angle_examples():
    assert sector_angle(BezierSegment([(0, 0), (1, 0), (2, 0)])) == 0.0
    assert sector_angle(BezierSegment([(0, 0), (1, 1), (2, 0)])) == pytest.approx(math.pi / 2)
    reversing = BezierSegment([(0, 0), (1, 0), (1, 1), (0, 0.99)])
    assert sector_angle(reversing) == 2 * math.pi


def test_proximity_target_cases():
    # far apart, equal lengths: gamma = 0, z = |c_k|
    assert proximity_target(1.0, 1.0, 5.0, 2.3) == pytest.approx(2.3 ** 1 if 5.0 > 1 + 2.3 else 1.0)
    assert proximity_target(1.0, 1.0, 1.0, 2.3) == pytest.approx(1.0)
    # narrow channel: z = d_H for both pieces
    assert proximity_target(1.0, 4.0, 0.5, 2.3) == pytest.approx(0.5)
    assert proximity_target(4.0, 1.0, 0.5, 2.3) == pytest.approx(0.5)
    assert 1.0 / 0.5 <= 2.3 < 4.0 / 0.5
    # middle case: w = 0.5
    assert proximity_target(1.0, 3.0, 2.0, 2.3) == pytest.approx(1.75)


def test_proximity_target_gamma_series():
    # ratio d/b = 4 exceeds 1 + 2.3 = 3.3 but not 1 + 2.3 + 2.3^2: gamma = 1
    assert proximity_target(1.0, 1.0, 4.0, 2.3) == pytest.approx(2.3)
    # ratio below 1 + alpha keeps gamma = 0
    assert proximity_target(1.0, 1.0, 3.0, 2.3) == pytest.approx(1.0)


# -- corner splitting --------------------------------------------------------------

def test_square_has_four_chains():
    chains = make(corpus.square()).split_at_corners()
    assert len(chains) == 4
    assert not any(ch.closed for ch in chains)


def test_circle_is_one_closed_chain():
    chains = make(corpus.disk()).split_at_corners()
    assert len(chains) == 1 and chains[0].closed


def test_l_shape_corners_fixed():
    chains = make(corpus.l_shape()).split_at_corners()
    assert len(chains) == 6
    for ch in chains:
        assert ch.fixed[0] and ch.fixed[-1]


def test_interface_chain_shared_by_both_regions():
    rec = reconstruct(corpus.two_half_disks(), 1e-3 * 2.83, 0.05 * 2.83)
    shared = [ch for ch in rec.chains if ch.kind == "interface"]
    assert shared and all(len(ch.regions) == 2 for ch in shared)


# -- merging and bisection ----------------------------------------------------------

def test_merge_collinear_halves():
    r = make(square_net(per_edge=2))
    chains = r.split_at_corners()
    assert sum(len(c.pieces) for c in chains) == 8
    for ch in chains:
        r.merge_pass(ch)
    assert sum(len(c.pieces) for c in chains) == 4
    assert all(p.bound == 0.0 for c in chains for p in c.pieces)


def test_merge_rejects_high_curvature_pair():
    net = corpus.disk()
    r = make(net, eps_rel=1e-7)
    ch = r.split_at_corners()[0]
    before = len(ch.pieces)
    r.merge_pass(ch)
    assert len(ch.pieces) == before


def test_bisect_half_circle_tight_eps():
    net = corpus.disk()
    r = make(net, eps_rel=1e-5)
    ch = r.split_at_corners()[0]
    # merge two quarter arcs into one piece, then force it through bisection
    ch.joints = ch.joints[::4]
    ch.fixed = ch.fixed[::4]
    r._rebuild(ch)
    assert any(not r.passes(p.bound) for p in ch.pieces)
    r.enforce_error(ch)
    for p in ch.pieces:
        assert p.bound < r.eps
        # the polyline oracle carries its own chord error of about h^2 k / 8 ~ 1e-8
        assert piece_error(ch, p) <= p.bound + 1e-7


def test_enforce_repairs_displaced_joint():
    net = corpus.disk()
    r = make(net)
    ch = r.split_at_corners()[0]
    r.angular_size_refine(ch)
    ch.joints[3] += 0.4 * (ch.joints[4] - ch.joints[3])
    ch.fixed[3] = False
    r._rebuild(ch)
    r.enforce_error(ch)
    assert max(p.bound for p in ch.pieces) < r.eps


def test_enforce_identity_when_passing():
    r = make(corpus.square())
    chains = r.split_at_corners()
    before = [list(c.joints) for c in chains]
    for c in chains:
        r.enforce_error(c)
    assert [c.joints for c in chains] == before


# -- refinement --------------------------------------------------------------------

def test_angular_refine_quarter_circle():
    net = corpus.disk()
    r = make(net, lt_rel=10.0)  # size limit inactive
    ch = r.split_at_corners()[0]
    ch.joints = ch.joints[::2]
    ch.fixed = ch.fixed[::2]
    r._rebuild(ch)
    r.angular_size_refine(ch)
    assert all(sector_angle(p.bezier) <= math.pi / 4 for p in ch.pieces)


def test_size_refine_long_straight_piece():
    net = square_net(size=5.0)
    r = Reconstructor(net, 1e-3, 1.0)
    chains = r.split_at_corners()
    for ch in chains:
        r.angular_size_refine(ch)
        assert all(p.length < 2.0 for p in ch.pieces)
        assert len(ch.pieces) == 4


def test_tiny_straight_piece_unchanged():
    r = Reconstructor(square_net(size=0.01), 1e-6, 1.0)
    chains = r.split_at_corners()
    for ch in chains:
        r.angular_size_refine(ch)
        assert len(ch.pieces) == 1


def test_proximity_refines_narrow_channel():
    # long thin rectangle: the long sides see each other at a small gap
    net = corpus._single_loop(corpus._polygon([(0, 0), (4, 0), (4, 0.2), (0, 0.2)], 2))
    r = Reconstructor(net, 1e-4, 10.0)
    chains = r.split_at_corners()
    r.proximity_refine(chains)
    assert sum(len(c.pieces) for c in chains) > 8
    items, nearest = r._nearest_pieces(chains)
    for (ch, i, p), k in zip(items, nearest):
        other = items[k][2]
        ob = other.bezier
        if np.hypot(*(ob.end - p.bezier.start)) < np.hypot(*(ob.start - p.bezier.start)):
            ob = ob.reversed()
        d_h = bound_symmetric(p.bezier, ob, 0.0, r.k0).bound
        z = proximity_target(p.length, other.length, d_h, r.alpha)
        assert p.length / z <= r.alpha * (1 + 1e-9)


# -- Lloyd --------------------------------------------------------------------------

def _straight_side():
    r = Reconstructor(square_net(size=3.0), 1e-3, 100.0)
    ch = r.split_at_corners()[0]
    return r, ch


def test_lloyd_uniform_oracle():
    r, ch = _straight_side()
    L = ch.source.length
    ch.joints = [0.0, 0.1 * L, 0.9 * L, L]
    ch.fixed = [True, False, False, True]
    r._rebuild(ch)
    r.lloyd_optimize(ch, 5)
    assert abs(ch.joints[1] - L / 3) <= 0.15 * L / 3
    assert abs(ch.joints[2] - 2 * L / 3) <= 0.15 * L / 3


def test_lloyd_fixed_point_on_uniform_joints():
    r, ch = _straight_side()
    L = ch.source.length
    ch.joints = [0.0, L / 4, L / 2, 3 * L / 4, L]
    ch.fixed = [True, False, False, False, True]
    r._rebuild(ch)
    r.lloyd_optimize(ch, 5)
    np.testing.assert_allclose(ch.joints, [0, L / 4, L / 2, 3 * L / 4, L], atol=1e-12 * L)


def test_lloyd_energy_nonincreasing_on_straight_chain(rng):
    r, ch = _straight_side()
    L = ch.source.length
    inner = np.sort(rng.uniform(0.05, 0.95, 5)) * L
    ch.joints = [0.0, *inner, L]
    ch.fixed = [True] + [False] * 5 + [True]
    r._rebuild(ch)

    def energy(j):
        j = np.asarray(j)
        mids = np.concatenate([[0.0], 0.5 * (j[1:] + j[:-1]), [L]])
        return sum(((b - x) ** 3 - (a - x) ** 3) / 3 for a, b, x in zip(mids[:-1], mids[1:], j))

    last = energy(ch.joints)
    for _ in range(5):
        r.lloyd_optimize(ch, 1)
        e = energy(ch.joints)
        assert e <= last + 1e-12
        last = e


def test_lloyd_pulls_joints_toward_curvature():
    # ellipse: curvature peaks at the ends of the major axis
    net = corpus.ellipse()
    r = make(net)
    ch = r.split_at_corners()[0]
    L = ch.source.length
    a = 0.1 * L
    b = 0.2 * L
    m0, m1 = ch.source.density_moments(a, b)
    s = np.linspace(a, b, 20001)
    k = np.array([ch.source.curvature(x) for x in s])
    rho = 1 + k
    oracle = float(np.trapezoid(s * rho, s) / np.trapezoid(rho, s))
    assert m1 / m0 == pytest.approx(oracle, rel=1e-6)
    # curvature is larger near s = 0 (major-axis end), so the centroid shifts that way
    assert m1 / m0 < 0.5 * (a + b)


# -- full reconstruction --------------------------------------------------------------

@pytest.mark.parametrize("name", ["disk", "flower", "l_shape", "square_with_inclusion"])
def test_run_invariants(name):
    net = corpus.build(name)
    eps, lt = 1e-3 * net.scale, 0.05 * net.scale
    rec = reconstruct(net, eps, lt)
    assert rec.max_bound < eps
    corner_points = set()
    for ch in rec.chains:
        if not ch.closed:
            corner_points.add(tuple(np.round(ch.source.point(0.0), 12)))
        for p in ch.pieces:
            assert sector_angle(p.bezier) <= math.pi / 4 + 1e-12 or p.arc.length <= lt * 2 ** -10
            assert p.length < 2 * lt
        # joints are points of the original chain
        for s, pt in zip(ch.joints, ch.joint_points()):
            k, t = ch.source.locate(s)
            assert np.hypot(*(ch.source.segments[k].evaluate(t) - pt)) <= 1e-9 * net.scale
        # contiguity of the reconstructed pieces
        for p, q in zip(ch.pieces, ch.pieces[1:]):
            assert np.array_equal(p.curve.nodes[-1], q.curve.nodes[0])
    # corners survive
    for ch in rec.chains:
        if not ch.closed:
            assert ch.fixed[0] and ch.fixed[-1]
            assert ch.joints[0] == 0.0 and ch.joints[-1] == pytest.approx(ch.source.length)


def test_exact_mode_keeps_segments():
    net = corpus.disk()
    rec = reconstruct(net, 0.0, 10 * net.scale)
    assert rec.counts["approximated"] == len(net.segments)
    assert rec.max_bound == 0.0


def test_stage_counts_on_retraced_input():
    net = corpus.retraced_input()
    rec = reconstruct(net, 1e-3 * net.scale, 0.05 * net.scale)
    c = rec.counts
    assert c["input"] == 47
    assert c["approximated"] < c["input"] < c["refined"]
    assert 34 * 0.8 <= c["approximated"] <= 34 * 1.2
    assert 72 * 0.8 <= c["refined"] <= 72 * 1.2


def test_reconstruction_deterministic():
    net = corpus.flower()
    a = reconstruct(net, 1e-3 * net.scale, 0.05 * net.scale)
    b = reconstruct(net, 1e-3 * net.scale, 0.05 * net.scale)
    assert [c.joints for c in a.chains] == [c.joints for c in b.chains]
    assert [p.bound for _, _, p in a.pieces()] == [p.bound for _, _, p in b.pieces()]


def test_parameter_validation():
    net = corpus.disk()
    with pytest.raises(ValueError):
        Reconstructor(net, -1.0, 0.1)
    with pytest.raises(ValueError):
        Reconstructor(net, 1e-3, 0.0)
    with pytest.raises(ValueError):
        Reconstructor(net, 1e-3, 0.1, tau=math.pi)
    with pytest.raises(ValueError):
        Reconstructor(net, 1e-3, 0.1, alpha=1.0)
