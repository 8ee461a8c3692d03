from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.spatial.distance import directed_hausdorff

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def sampled_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two dense point samples (exact for the samples)."""
    return float(max(directed_hausdorff(a, b, seed=0)[0], directed_hausdorff(b, a, seed=0)[0]))


def curve_hausdorff(c1, c2, samples: int = 100_000) -> float:
    """Dense-sample Hausdorff distance that never exceeds the true one.

    A plain sample-to-sample distance can overshoot by up to half the sample
    spacing; the farthest sample is therefore projected exactly onto the
    other curve, which gives a genuine point-to-curve distance.
    """
    from curvequad.curves import closest_point

    t = np.linspace(0.0, 1.0, samples)
    a, b = c1.evaluate(t), c2.evaluate(t)
    out = 0.0
    for pts, other_pts, other in ((a, b, c2), (b, a, c1)):
        d, i, _ = directed_hausdorff(pts, other_pts, seed=0)
        out = max(out, min(d, closest_point(other, pts[i])[2]))
    return float(out)


def self_intersects(curve, samples: int = 400) -> bool:
    """Polyline test for a proper crossing between non-adjacent sample edges."""
    p = curve.evaluate(np.linspace(0.0, 1.0, samples))
    a, b = p[:-1], p[1:]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    for i in range(len(a)):
        j = np.arange(i + 2, len(a))
        if not len(j):
            continue
        box = np.all((lo[j] <= hi[i]) & (hi[j] >= lo[i]), axis=1)
        for k in j[box]:
            if _cross(a[i], b[i], a[k], b[k]):
                return True
    return False


def _cross(p, q, r, s) -> bool:
    def o(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])
    return o(p, q, r) * o(p, q, s) < 0 and o(r, s, p) * o(r, s, q) < 0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus_runs():
    """Every bundled shape meshed once with default parameters."""
    from curvequad import corpus, pipeline

    return {name: pipeline.run(corpus.build(name)) for name in corpus.SHAPES}


def perturbed_element(rng, n: int, amp: float) -> np.ndarray:
    """Unit-square degree-n node grid ``[i, j]`` with every node jittered by up to ``amp``."""
    u = np.arange(n + 1) / n
    grid = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1)
    return grid + rng.uniform(-amp, amp, grid.shape)


def min_det(grid: np.ndarray, samples: int = 100) -> float:
    from curvequad.quality import jacobians

    s = np.linspace(0.0, 1.0, samples)
    J = jacobians(grid, s, s)
    return float((J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]).min())


def brute_force(dual):
    """Minimum cost among maximum-cardinality matchings, by exhaustive search."""
    import itertools
    import math

    edges = sorted(dual.costs)
    best = (-1, math.inf)
    for r in range(len(edges), -1, -1):
        for combo in itertools.combinations(edges, r):
            used = [v for e in combo for v in e]
            if len(used) != len(set(used)):
                continue
            cost = sum(dual.costs[e] for e in combo)
            if (r, -cost) > (best[0], -best[1]):
                best = (r, cost)
        if best[0] == r:
            break
    return best


def small_fixture(rng, tag_fraction: float = 0.6):
    """Delaunay triangulation of 5-8 random points (2-12 triangles), hull edges partly tagged."""
    from scipy.spatial import Delaunay

    from curvequad.linear_mesh import EdgeTag, LinearMesh

    while True:
        pts = rng.uniform(0, 1, (int(rng.integers(5, 9)), 2))
        dl = Delaunay(pts)
        if 2 <= len(dl.simplices) <= 12:
            break
    mesh = LinearMesh(pts)
    for s in dl.simplices:
        a, b, c = (int(v) for v in s)
        u, w = pts[b] - pts[a], pts[c] - pts[a]
        if u[0] * w[1] - u[1] * w[0] < 0:
            b, c = c, b
        mesh.tris.append((a, b, c))
        mesh.tri_region.append("r")
    hull = dl.convex_hull
    for a, b in hull[rng.random(len(hull)) < tag_fraction]:
        mesh.edge_tags[(int(min(a, b)), int(max(a, b)))] = EdgeTag(0, 0, "boundary")
    return mesh
