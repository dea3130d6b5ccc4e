import numpy as np
import pytest
from scipy.sparse import csgraph

from shellopt import _kernels, fixtures


def _dense_distances(graph):
    return csgraph.floyd_warshall(graph.toarray(), directed=False)


@pytest.mark.parametrize("radius", [0.5, 1.5, 3.0, 100.0])
def test_bounded_dijkstra_matches_all_pairs(kernel_backend, radius):
    mesh = fixtures.box(4)
    g = mesh.graph
    full = _dense_distances(g)
    sources = np.array([0, 5, 17, mesh.n_vertices - 1])
    ptr, targets, dists = _kernels.bounded_dijkstra(g.indptr, g.indices, g.data, sources, radius)
    for k, s in enumerate(sources):
        want = np.flatnonzero(full[s] <= radius)
        got = targets[ptr[k]:ptr[k + 1]]
        assert np.array_equal(got, want)
        np.testing.assert_allclose(dists[ptr[k]:ptr[k + 1]], full[s, want], rtol=0, atol=1e-12)


def test_dijkstra_backends_agree():
    mesh = fixtures.limbs()
    g = mesh.graph
    src = mesh.boundary
    _kernels.USE_NUMBA, saved = True, _kernels.USE_NUMBA
    try:
        a = _kernels.bounded_dijkstra(g.indptr, g.indices, g.data, src, 4.0)
        _kernels.USE_NUMBA = False
        b = _kernels.bounded_dijkstra(g.indptr, g.indices, g.data, src, 4.0)
    finally:
        _kernels.USE_NUMBA = saved
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


def test_clip_fraction_lone_corner(kernel_backend):
    # one corner at twice the cut, three at zero: corner tet scaled by 1/2
    got = _kernels.clip_fractions(np.array([[2.0, 0.0, 0.0, 0.0]]), 1.0)
    assert got[0] == pytest.approx(0.125, abs=1e-15)


def test_clip_fraction_extremes_and_ties(kernel_backend):
    t = np.array([[0.0, 0.0, 0.0, 0.0], [5.0, 6.0, 7.0, 8.0], [1.0, 1.0, 1.0, 1.0], [1.0, 0.0, 0.0, 0.0]])
    got = _kernels.clip_fractions(t, 1.0)
    np.testing.assert_array_equal(got[:3], [0.0, 1.0, 1.0])
    assert got[3] == pytest.approx(0.0, abs=1e-15)


def _monte_carlo_fraction(temps, tc, n, rng):
    # uniform barycentric samples from a Dirichlet(1,1,1,1)
    w = rng.exponential(size=(n, 4))
    w /= w.sum(axis=1, keepdims=True)
    return float(np.mean(w @ temps >= tc))


@pytest.mark.parametrize("temps", [
    [0.3, 1.7, 2.2, 0.9],   # two below
    [0.1, 0.2, 0.5, 3.0],   # three below
    [4.0, 0.2, 1.5, 1.1],   # one below
    [0.0, 2.0, 0.5, 1.5],
])
def test_clip_fraction_against_monte_carlo(kernel_backend, temps, rng):
    temps = np.array(temps)
    got = _kernels.clip_fractions(temps[None], 1.0)[0]
    est = _monte_carlo_fraction(temps, 1.0, 2_000_000, rng)
    # binomial standard error is at most 3.6e-4 at this sample count
    assert got == pytest.approx(est, abs=2e-3)


def test_clip_fraction_complement_symmetry(kernel_backend, rng):
    t = rng.uniform(0, 2, size=(500, 4))
    above = _kernels.clip_fractions(t, 1.0)
    below = _kernels.clip_fractions(2.0 - t, 1.0)  # {2 - T >= 1} = {T <= 1}
    np.testing.assert_allclose(above + below, 1.0, atol=1e-12)


def test_clip_fraction_permutation_invariant(kernel_backend, rng):
    t = rng.uniform(0, 2, size=(200, 4))
    base = _kernels.clip_fractions(t, 1.0)
    for perm in ([1, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]):
        np.testing.assert_allclose(_kernels.clip_fractions(t[:, perm], 1.0), base, atol=1e-13)


def test_clip_backends_agree(rng):
    t = rng.uniform(0, 3, size=(5000, 4))
    saved = _kernels.USE_NUMBA
    try:
        _kernels.USE_NUMBA = True
        a = _kernels.clip_fractions(t, 1.0)
        _kernels.USE_NUMBA = False
        b = _kernels.clip_fractions(t, 1.0)
    finally:
        _kernels.USE_NUMBA = saved
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_scatter_add(kernel_backend, rng):
    idx = rng.integers(0, 50, size=1000)
    vals = rng.normal(size=1000)
    want = np.zeros(50)
    for i, v in zip(idx, vals):
        want[i] += v
    np.testing.assert_allclose(_kernels.scatter_add(idx, vals, 50), want, atol=1e-12)
