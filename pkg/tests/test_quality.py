from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import perturbed_element
from curvequad import corpus
from curvequad.curves import lagrange_matrix
from curvequad.high_order import elevate, sector_certificate
from curvequad.linear_mesh import LinearMesh
from curvequad.quality import (
    assess,
    count_singular,
    evaluate_element,
    gauss_lobatto,
    jacobian,
    jacobians,
    relative_geometric_error,
    shape_measure,
    skew_measure,
)
from curvequad.reconstruct import reconstruct

IDENTITY = perturbed_element(np.random.default_rng(0), 3, 0.0)


def psi(grid, x, y):
    n = grid.shape[0] - 1
    return np.einsum("i,j,ijc->c", lagrange_matrix(n, [x])[0], lagrange_matrix(n, [y])[0], grid)


def grid_mesh(k):
    u = np.linspace(0, 1, k + 1)
    verts = np.array([(x, y) for y in u for x in u])
    m = LinearMesh(verts)
    for j in range(k):
        for i in range(k):
            a = j * (k + 1) + i
            m.quads.append((a, a + 1, a + k + 2, a + k + 1))
            m.quad_region.append("r")
    return m


# -- Jacobian ----------------------------------------------------------------------

def test_identity_and_scaled_jacobians():
    for x, y in [(0, 0), (0.3, 0.8), (1, 1)]:
        np.testing.assert_allclose(jacobian(IDENTITY, x, y), np.eye(2), atol=1e-13)
        np.testing.assert_allclose(jacobian(2.5 * IDENTITY, x, y), 2.5 * np.eye(2), atol=1e-12)
    with pytest.raises(ValueError):
        jacobian(IDENTITY, 1.2, 0.5)


def test_jacobian_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(20):
        n = int(rng.integers(2, 5))
        g = perturbed_element(rng, n, 0.1 / n)
        x, y = rng.uniform(0.1, 0.9, 2)
        J = jacobian(g, x, y)
        fd = np.c_[(psi(g, x + h, y) - psi(g, x - h, y)) / (2 * h),
                   (psi(g, x, y + h) - psi(g, x, y - h)) / (2 * h)]
        np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-6 * np.abs(J).max())


# -- measures ----------------------------------------------------------------------

def test_measure_examples():
    assert shape_measure(np.eye(2)) == 1.0 and skew_measure(np.eye(2)) == 1.0
    D = np.diag([2.0, 1.0])
    assert shape_measure(D) == pytest.approx(0.8)
    assert skew_measure(D) == pytest.approx(1.0)
    S = np.array([[1.0, 1.0], [0.0, 1.0]])  # columns (1,0) and (1,1)
    assert shape_measure(S) == pytest.approx(2 / 3)
    assert skew_measure(S) == pytest.approx(1 / np.sqrt(2))
    assert shape_measure(np.zeros((2, 2))) == 0.0 and skew_measure(np.zeros((2, 2))) == 0.0


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_measures_bounded_and_signed(vals):
    J = np.reshape(vals, (2, 2))
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    jm, jk = shape_measure(J), skew_measure(J)
    assert -1 - 1e-12 <= jm <= 1 + 1e-12 and -1 - 1e-12 <= jk <= 1 + 1e-12
    if abs(det) > 1e-9 * max(1.0, float(np.abs(J).max()) ** 2):
        assert np.sign(jm) == np.sign(jk) == np.sign(det)


def test_similarity_invariance(rng):
    g = perturbed_element(rng, 3, 0.05)
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    moved = g @ R.T + (3.0, -1.0)
    a, _, _ = evaluate_element(g)
    b, _, _ = evaluate_element(moved)
    c, _, _ = evaluate_element(4.0 * g)
    for s in (b, c):
        assert s.min_jm == pytest.approx(a.min_jm, abs=1e-12)
        assert s.avg_jk == pytest.approx(a.avg_jk, abs=1e-12)


# -- Lobatto sampling -----------------------------------------------------------------

def test_gauss_lobatto_nodes():
    g = gauss_lobatto(10)
    assert len(g) == 10 and g[0] == 0.0 and g[-1] == 1.0
    np.testing.assert_allclose(g + g[::-1], 1.0, atol=1e-15)
    assert np.all(np.diff(g) > 0)
    # the 10-point rule integrates degree-17 polynomials exactly; build its weights
    x = 2 * g - 1
    leg = np.polynomial.legendre.Legendre.basis(9)
    w = 2.0 / (90 * leg(x) ** 2)
    assert np.dot(w, x ** 16) == pytest.approx(2 / 17, rel=1e-12)


def test_evaluate_identity_and_inverted():
    s, jm, jk = evaluate_element(IDENTITY)
    assert jm.shape == (10, 10)
    assert s.min_jm == s.avg_jm == pytest.approx(1.0)
    assert s.min_jk == pytest.approx(1.0)
    swapped = IDENTITY.copy()
    swapped[[0, -1], 0] = swapped[[-1, 0], 0]  # swap two corners
    assert evaluate_element(swapped)[0].min_jm < 0


def test_certified_elements_positive_at_lobatto_points(rng):
    for _ in range(200):
        g = perturbed_element(rng, 3, rng.uniform(0, 0.1))
        if sector_certificate(g).valid:
            assert evaluate_element(g)[0].min_jm > 0


# -- singular vertices -------------------------------------------------------------------

def test_structured_grid_has_no_singular_vertices():
    m = grid_mesh(4)
    bnd = {v for v, p in enumerate(m.vertices) if p.min() == 0 or p.max() == 1}
    corners = {0, 4, 20, 24}
    # grid corners have valence 1, which the boundary rule counts
    assert count_singular(m.quads, bnd) == len(corners)
    assert count_singular(m.quads, bnd, interior_only=True) == 0
    assert count_singular([(0, 1, 2, 3)], {0, 1, 2, 3}, interior_only=True) == 0


def test_edge_rotation_makes_two_three_five_pairs():
    m = grid_mesh(4)
    bnd = {v for v, p in enumerate(m.vertices) if p.min() == 0 or p.max() == 1}
    assert count_singular(m.quads, bnd, interior_only=True) == 0
    # rotate the edge b-e shared by (a, b, e, d) and (b, c, f, e): b and e drop
    # to valence 3 while a and f rise to 5
    a, b, c = 6, 7, 8
    d, e, f = 11, 12, 13
    quads = [q for q in m.quads if q not in [(a, b, e, d), (b, c, f, e)]]
    quads += [(a, b, c, f), (a, f, e, d)]
    valence = {v: sum(v in q for q in quads) for v in (a, b, e, f)}
    assert valence == {a: 5, b: 3, e: 3, f: 5}
    assert count_singular(quads, bnd, interior_only=True) == 4


# -- fidelity ------------------------------------------------------------------------------

def test_exact_mode_zero_error():
    net = corpus.disk()
    rec = reconstruct(net, 0.0, 0.05 * net.scale)
    assert relative_geometric_error(rec) == 0.0


def test_relative_error_below_eps_and_doubling():
    net = corpus.flower()
    for eps in (1e-3, 2e-3):
        rec = reconstruct(net, eps * net.scale, 0.05 * net.scale)
        assert relative_geometric_error(rec) < eps
    fine = reconstruct(net, 1e-3 * net.scale, 10 * net.scale, lloyd_iters=0)
    coarse = reconstruct(net, 2e-3 * net.scale, 10 * net.scale, lloyd_iters=0)
    assert fine.counts["approximated"] >= coarse.counts["approximated"]


def test_report_consistency(corpus_runs):
    for name, res in corpus_runs.items():
        r = res.report
        assert r.min_jm <= r.avg_jm and r.min_jk <= r.avg_jk
        assert r.b_e >= 0.0 and r.element_count == len(r.per_element)
        assert r.certified <= r.element_count
        assert r.n_singular_interior <= r.n_singular
        for s in r.per_element:
            assert s.min_jm <= s.avg_jm + 1e-15


def test_assess_without_reconstruction():
    ho = elevate(grid_mesh(2), 2)
    r = assess(ho)
    assert r.b_e == 0.0 and r.inverted == 0 and r.min_jm == pytest.approx(1.0)
    assert set(r.to_dict(timings=False)) >= {"min_jm", "avg_jm", "n_singular", "b_e"}
    assert "wall_time_seconds" not in r.to_dict(timings=False)
