import itertools

import numpy as np
import pytest
from scipy.sparse import csgraph

from shellopt import fixtures, surrogate
from shellopt.errors import SampleCountError
from shellopt.surrogate import (ContactRegion, ReducedBases, boundary_force_magnitudes, build_bases,
                                build_force_samples, estimate_envelope, fit_map, hierarchical_critical_search,
                                laplacian_eigenbasis, quadratic_features, sample_contacts)


@pytest.fixture(scope="module")
def bar_mesh():
    return fixtures.bar(nx=2, ny=2, nz=8)


def _edge_line(mesh, ks):
    return np.array([np.flatnonzero(np.all(np.isclose(mesh.vertices, [0, 0, k]), axis=1))[0] for k in ks])


def _surface_distance(mesh, a, b):
    return csgraph.dijkstra(mesh.boundary_graph, directed=False, indices=mesh.boundary_local[a])[mesh.boundary_local[b]]


def test_fps_path_region_picks_endpoints(bar_mesh):
    region = _edge_line(bar_mesh, range(2, 7))
    assert region[0] == region.min()
    picked = sample_contacts(bar_mesh, region, 2)
    best = max(itertools.combinations(region.tolist(), 2), key=lambda p: _surface_distance(bar_mesh, *p))
    assert sorted(picked.tolist()) == sorted(best)
    assert sorted(best) == sorted([region[0], region[-1]])


def test_fps_seed_and_exhaustion(bar_mesh):
    region = _edge_line(bar_mesh, range(2, 7))
    assert sample_contacts(bar_mesh, region, 1).tolist() == [region.min()]
    assert sorted(sample_contacts(bar_mesh, region, len(region)).tolist()) == sorted(region.tolist())
    with pytest.raises(SampleCountError):
        sample_contacts(bar_mesh, region, len(region) + 1)


def test_fps_is_greedy_maxmin(ball_mesh):
    region = ball_mesh.boundary[ball_mesh.vertices[ball_mesh.boundary, 2] > 0.3]
    picked = sample_contacts(ball_mesh, region, 8)
    assert len(set(picked.tolist())) == 8
    dist = csgraph.dijkstra(ball_mesh.boundary_graph, directed=False, indices=ball_mesh.boundary_local[region])
    dist = dist[:, ball_mesh.boundary_local[region]]
    pos = np.searchsorted(region, picked)
    for k in range(1, 8):
        nearest = dist[pos[:k]].min(axis=0)
        assert nearest[pos[k]] == pytest.approx(nearest.max())


def test_force_samples_sum_to_magnitude(ball_mesh):
    region = ContactRegion(ball_mesh.boundary[ball_mesh.vertices[ball_mesh.boundary, 2] > 0.5],
                           ball_mesh.boundary[ball_mesh.vertices[ball_mesh.boundary, 2] < -0.8], 2.5,
                           3 * ball_mesh.mean_edge_length)
    samples = build_force_samples(ball_mesh, region, region.candidates[:20])
    for c, (nodes, values) in zip(samples.contacts, samples.forces):
        assert np.linalg.norm(values, axis=1).sum() == pytest.approx(2.5, rel=1e-9)
        assert not np.isin(nodes, region.fixed).any()
        # compressive: pushes against the outward normal at the contact
        assert np.dot(values.sum(axis=0), ball_mesh.vertex_normals[c]) < 0
    mags = boundary_force_magnitudes(ball_mesh, samples)
    np.testing.assert_allclose(mags.sum(axis=1), 2.5, rtol=1e-9)


def test_laplacian_eigenbasis(ball_mesh):
    vals, vecs = laplacian_eigenbasis(ball_mesh, 15)
    assert (np.diff(vals) >= -1e-10).all()
    assert abs(vals[0]) < 1e-9
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(15), atol=1e-9)
    np.testing.assert_allclose(vecs[:, 0], vecs[0, 0], rtol=1e-9)
    first = np.argmax(np.abs(vecs) > 1e-10, axis=0)
    assert (vecs[first, np.arange(15)] > 0).all()


def test_sparse_eigensolver_agrees(ball_mesh, monkeypatch):
    dense_vals, dense_vecs = laplacian_eigenbasis(ball_mesh, 6)
    monkeypatch.setattr(surrogate, "DENSE_EIGEN_LIMIT", 0)
    vals, vecs = laplacian_eigenbasis(ball_mesh, 6)
    np.testing.assert_allclose(vals, dense_vals, atol=1e-8)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(6), atol=1e-9)


def _eigen(n_b, s, rng):
    q, _ = np.linalg.qr(rng.standard_normal((n_b, s)))
    return np.arange(s, dtype=float), q


def test_pca_full_rank_reconstruction(ball_mesh, rng):
    stresses = rng.random((6, 50))
    bases = build_bases(ball_mesh, None, stresses, 3, eigen=_eigen(len(ball_mesh.boundary), 3, rng))
    assert bases.stress_basis.shape == (50, 5)
    np.testing.assert_allclose(bases.stress_basis.T @ bases.stress_basis, np.eye(5), atol=1e-12)
    assert (np.diff(bases.explained_variance) <= 1e-12).all()
    back = bases.reconstruct(bases.stress_coefficients(stresses))
    np.testing.assert_allclose(back, stresses, atol=1e-9)


def test_pca_identical_fields_give_zero_components(ball_mesh, rng):
    row = rng.random(50)
    bases = build_bases(ball_mesh, None, np.tile(row, (4, 1)), 3, eigen=_eigen(len(ball_mesh.boundary), 3, rng))
    assert not bases.stress_basis.any()
    np.testing.assert_allclose(bases.stress_mean, row)


def _random_bases(rng, n_b=30, s=3, p=8, n=40):
    forces = rng.random((p, n_b))
    stresses = rng.random((p, n))
    _, fb = _eigen(n_b, s, rng)
    mean = stresses.mean(axis=0)
    u, sv, _ = np.linalg.svd((stresses - mean).T, full_matrices=False)
    return ReducedBases(fb, np.arange(s, dtype=float), mean, u[:, :p - 1], sv[:p - 1]), forces, stresses


def test_feature_count():
    for s in (1, 3, 15):
        assert quadratic_features(np.zeros((2, s))).shape[1] == 1 + s + s * (s + 1) // 2


def test_ridge_matches_dense_oracle(rng):
    bases, forces, stresses = _random_bases(rng)
    qmap = fit_map(bases, forces, stresses, ridge=1e-3)
    c = forces @ bases.force_basis
    feats = [[1.0] + list(row) + [row[i] * row[j] for i in range(len(row)) for j in range(i, len(row))] for row in c]
    feats = np.array(feats)
    target = (stresses - bases.stress_mean) @ bases.stress_basis
    ref = np.linalg.inv(feats.T @ feats + 1e-3 * np.eye(feats.shape[1])) @ feats.T @ target
    np.testing.assert_allclose(qmap.weights, ref, rtol=1e-9, atol=1e-9 * np.abs(ref).max())
    assert qmap.n_features == 10


def test_ridge_limits(rng):
    bases, forces, stresses = _random_bases(rng, s=2, p=6)
    exact = fit_map(bases, forces, stresses, ridge=0.0)
    c = bases.force_coefficients(forces)
    np.testing.assert_allclose(exact.predict(c), bases.stress_coefficients(stresses), atol=1e-8)
    heavy = fit_map(bases, forces, stresses, ridge=1e12)
    assert np.abs(heavy.weights).max() < 1e-8 * np.abs(exact.weights).max()
    default = fit_map(bases, forces, stresses)
    assert default.ridge > 0


def test_envelope_estimate_consistency(rng):
    bases, forces, stresses = _random_bases(rng, s=2, p=6)
    qmap = fit_map(bases, forces, stresses, ridge=0.0)
    est = estimate_envelope(qmap, bases, forces)
    np.testing.assert_allclose(est.envelope.values, stresses.max(axis=0), atol=1e-8)
    np.testing.assert_allclose(est.peaks, stresses.max(axis=1), atol=1e-8)
    zero = estimate_envelope(qmap, bases, np.zeros((1, forces.shape[1])))
    bias = np.maximum(bases.reconstruct(qmap.weights[0]), 0)
    np.testing.assert_allclose(zero.envelope.values, bias, atol=1e-12)


def _path_neighbors(n):
    return [np.array([j for j in (k - 1, k + 1) if 0 <= j < n]) for k in range(n)]


def test_hierarchical_search_exhaustive_and_perfect(rng):
    true = rng.random(30)
    calls = []

    def evaluate(k):
        calls.append(k)
        return true[k]

    sigma, best, exact = hierarchical_critical_search(rng.random(30), evaluate, 30, _path_neighbors(30))
    assert sigma == true.max() and best == int(np.argmax(true))
    calls.clear()
    sigma, best, _ = hierarchical_critical_search(true, evaluate, 1, _path_neighbors(30))
    assert calls[0] == int(np.argmax(true)) and sigma == true.max()


def test_hierarchical_search_climbs(rng):
    true = -np.abs(np.arange(40) - 31.0)
    estimate = -np.abs(np.arange(40) - 20.0)  # biased ranking
    sigma, best, exact = hierarchical_critical_search(estimate, lambda k: true[k], 3, _path_neighbors(40))
    assert best == 31 and sigma == 0.0
    assert all(exact[k] == true[k] for k in exact)
    sigma2, _, _ = hierarchical_critical_search(estimate, lambda k: true[k], 3, _path_neighbors(40),
                                                known={0: true[0]})
    assert sigma2 == sigma
