import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csgraph

from shellopt import fixtures
from shellopt.errors import EmptyEnvelopeError, OrphanVertexError
from shellopt.mesh import build_mesh
from shellopt.stress import SELF_DISTANCE_FLOOR, BoundaryProjector, effective_boundary_stress, max_envelope


def test_envelope_identity_and_idempotence(rng):
    f = rng.random(50)
    np.testing.assert_array_equal(max_envelope([f]).values, f)
    env = max_envelope([f, f])
    np.testing.assert_array_equal(env.values, f)
    assert (env.case_index == 0).all()


def test_envelope_matches_loop_oracle(rng):
    fields = [rng.random(100) for _ in range(3)]
    env = max_envelope(fields)
    for i in range(100):
        vals = [f[i] for f in fields]
        assert env.values[i] == max(vals)
        assert env.case_index[i] == vals.index(max(vals))
        assert all(env.values[i] >= v for v in vals)
    assert env.critical == max(map(max, fields))
    assert env.values[env.critical_vertex] == env.critical


def test_envelope_errors():
    with pytest.raises(EmptyEnvelopeError):
        max_envelope([])
    with pytest.raises(ValueError):
        max_envelope([np.zeros(3), np.zeros(4)])


def _dense_projection(mesh, stress, radius, exponent):
    dist = csgraph.dijkstra(mesh.graph, directed=False)
    floor = SELF_DISTANCE_FLOOR * mesh.mean_edge_length
    tau = np.zeros(len(mesh.boundary))
    for i in range(mesh.n_vertices):
        weights = {}
        for j, b in enumerate(mesh.boundary):
            d = dist[i, b]
            if d <= radius:
                weights[j] = max(d, floor) ** -exponent
        total = sum(weights.values())
        for j, w in weights.items():
            tau[j] += stress[i] * w / total
    return tau


def test_projection_matches_dense_oracle(box_mesh, rng):
    h = box_mesh.mean_edge_length
    stress = rng.random(box_mesh.n_vertices)
    proj = BoundaryProjector(box_mesh, radius=3 * h, exponent=3)
    ref = _dense_projection(box_mesh, stress, 3 * h, 3)
    np.testing.assert_allclose(proj(stress).values, ref, rtol=1e-10, atol=0)
    np.testing.assert_allclose(effective_boundary_stress(stress, box_mesh, 3 * h, 3).values, ref, rtol=1e-10)


def _squeezed_bar(x_positions):
    base = fixtures.bar(nx=2, ny=2, nz=6)
    v = base.vertices.copy()
    v[:, 0] = np.asarray(x_positions)[v[:, 0].astype(int)]
    return build_mesh(v, base.tets, base.skeleton)


def test_single_target_receives_full_stress():
    mesh = _squeezed_bar([0.0, 0.4, 1.0])
    proj = BoundaryProjector(mesh, radius=0.5)
    for v in mesh.skeleton[(mesh.vertex_class[mesh.skeleton] != 0)]:
        s = np.zeros(mesh.n_vertices)
        s[v] = 2.5
        tau = proj(s).values
        target = mesh.boundary_local[np.flatnonzero(np.all(np.isclose(mesh.vertices, mesh.vertices[v] - [0.4, 0, 0]), axis=1))[0]]
        assert tau[target] == pytest.approx(2.5, rel=1e-14)
        assert np.count_nonzero(tau) == 1


def test_equidistant_targets_split_evenly():
    mesh = _squeezed_bar([0.0, 0.5, 1.0])
    proj = BoundaryProjector(mesh, radius=0.5)
    for v in mesh.skeleton[(mesh.vertex_class[mesh.skeleton] != 0)]:
        s = np.zeros(mesh.n_vertices)
        s[v] = 3.0
        tau = proj(s).values
        assert np.count_nonzero(tau) == 2
        np.testing.assert_allclose(tau[tau > 0], 1.5, rtol=1e-14)


def test_boundary_vertex_keeps_dominant_share(box_mesh):
    m = BoundaryProjector(box_mesh).matrix.toarray()
    b = box_mesh.boundary
    own = m[np.arange(len(b)), b]
    assert (own > 0.99).all()


def test_orphan_vertex_raises(ball_mesh):
    with pytest.raises(OrphanVertexError):
        BoundaryProjector(ball_mesh, radius=0.1 * ball_mesh.mean_edge_length)


@pytest.fixture(scope="module")
def limbs_projector(limbs_mesh):
    return BoundaryProjector(limbs_mesh, radius=4 * limbs_mesh.mean_edge_length)




@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100))
def test_conservation_scale_and_monotonicity(limbs_mesh, limbs_projector, seed, c):
    rng = np.random.default_rng(seed)
    s = rng.random(limbs_mesh.n_vertices)
    tau = limbs_projector(s).values
    assert tau.sum() == pytest.approx(s.sum(), rel=1e-9)
    np.testing.assert_allclose(limbs_projector(c * s).values, c * tau, rtol=1e-12)
    bumped = s.copy()
    bumped[rng.integers(len(s))] += rng.random()
    assert (limbs_projector(bumped).values >= tau - 1e-12).all()


def test_locality(limbs_mesh, limbs_projector, rng):
    radius = limbs_projector.radius
    dist = csgraph.dijkstra(limbs_mesh.graph, directed=False, indices=limbs_mesh.boundary)
    s = rng.random(limbs_mesh.n_vertices)
    tau = limbs_projector(s).values
    for v in rng.choice(limbs_mesh.n_vertices, 20, replace=False):
        bumped = s.copy()
        bumped[v] += 5.0
        far = dist[:, v] > radius
        np.testing.assert_array_equal(limbs_projector(bumped).values[far], tau[far])
