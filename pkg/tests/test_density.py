import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shellopt import fixtures
from shellopt.density import (DensityField, TriangleSurface, compute_densities, extract_isosurface, is_watertight,
                              read_obj, self_intersections, tet_clip_fraction, void_component_count, write_obj)
from shellopt.density import cavity_component_count
from shellopt.heat import HeatSolver, TemperatureField
from shellopt.mesh import VolumetricMesh, build_mesh

temps = st.floats(min_value=-5, max_value=5, allow_nan=False, allow_infinity=False)


def test_clip_fraction_examples():
    assert tet_clip_fraction([2, 2, 2, 2], 1.0) == 1.0
    assert tet_clip_fraction([0, 0, 0, 0], 1.0) == 0.0
    assert tet_clip_fraction([2, 0, 0, 0], 1.0) == pytest.approx(0.125, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.lists(temps, min_size=4, max_size=4), st.permutations(range(4)))
def test_clip_fraction_properties(t, perm):
    t = np.array(t)
    f = tet_clip_fraction(t, 0.5)
    assert 0.0 <= f <= 1.0
    assert tet_clip_fraction(t[list(perm)], 0.5) == pytest.approx(f, abs=1e-12)
    if not np.any(t == 0.5):
        assert f + tet_clip_fraction(1.0 - t, 0.5) == pytest.approx(1.0, abs=1e-12)


def _field(values, t_cut=1.0):
    return TemperatureField(np.asarray(values, float), t_cut)


def test_densities_solid_void_and_boundary_layer(ball_mesh, rng):
    hs = HeatSolver(ball_mesh)
    f = hs(np.full(len(ball_mesh.boundary), 100.0))
    d = compute_densities(ball_mesh, f)
    corner = f.values[ball_mesh.tets]
    assert (d.rho[(corner >= 1.0).all(axis=1)] == 1.0).all()
    free = ~np.isin(np.arange(ball_mesh.n_tets), ball_mesh.boundary_layer)
    assert (d.rho[(corner <= 1.0).all(axis=1) & free] == 0.0).all()
    assert (d.rho[ball_mesh.boundary_layer] == 1.0).all()
    assert (d.rho < 1).any()


def test_all_above_cut_is_full_solid(box_mesh):
    d = compute_densities(box_mesh, _field(np.full(box_mesh.n_vertices, 3.0)))
    assert (d.rho == 1).all()
    assert d.mass(box_mesh) == pytest.approx(box_mesh.total_volume)
    assert d.n_intermediate == 0


def _radial_field(mesh, scale):
    return _field(scale * np.linalg.norm(mesh.vertices, axis=1))


def test_sphere_shell_volume_and_area(ball_mesh):
    # T = 2 |x| puts the cut at radius 1/2
    f = _radial_field(ball_mesh, 2.0)
    d = compute_densities(ball_mesh, f)
    shell = 4.0 / 3.0 * np.pi * (1.0 - 0.5 ** 3)
    assert d.mass(ball_mesh) == pytest.approx(shell, rel=0.02)
    s = extract_isosurface(ball_mesh, f)
    assert s.area() == pytest.approx(4 * np.pi * 0.25, rel=0.03)
    r = np.linalg.norm(s.vertices, axis=1)
    np.testing.assert_allclose(r, 0.5, atol=0.05)
    assert void_component_count(d, ball_mesh) == 1


def _tet_mesh(v):
    edges = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
    return VolumetricMesh(np.asarray(v, float), np.array([[0, 1, 2, 3]]), np.zeros((0, 3), int),
                          np.zeros(4, np.int8), edges, np.linalg.norm(v[edges[:, 0]] - v[edges[:, 1]], axis=1))


def test_isosurface_single_tet_midpoints():
    v, _ = fixtures.single_tet()
    s = extract_isosurface(_tet_mesh(v), _field([2, 0, 0, 0]))
    assert s.triangles.shape == (1, 3)
    np.testing.assert_allclose(np.sort(s.vertices, axis=0), np.sort(0.5 * (v[0] + v[1:]), axis=0))
    # normal points toward the hot corner
    n = s.face_normals()[0]
    assert np.dot(n, v[0] - s.vertices.mean(axis=0)) > 0


def test_isosurface_orientation_on_sheared_tet():
    # the midpoint triangle's normal is +z while the gradient has a -z part
    v = np.array([[0.0, 0, 0], [10, 0, 1], [11, 1, 1], [10, 1, 1]])
    grad = np.array([1.0, 0.0, -5.0])
    for sign in (1.0, -1.0):
        s = extract_isosurface(_tet_mesh(v), _field(1.0 + sign * (v @ grad - 1.0)))
        assert np.dot(s.face_normals()[0], sign * grad) > 0


def test_isosurface_empty_when_all_above(box_mesh):
    assert extract_isosurface(box_mesh, _field(np.full(box_mesh.n_vertices, 2.0))).is_empty


def test_isosurface_vertices_on_cut(ball_mesh, rng):
    hs = HeatSolver(ball_mesh)
    f = hs(rng.uniform(1, 4, len(ball_mesh.boundary)))
    s = extract_isosurface(ball_mesh, f)
    # re-interpolate T at each surface vertex from its generating edge
    e = ball_mesh.edges
    below = f.values < 1.0
    crossed = below[e[:, 0]] != below[e[:, 1]]
    t0, t1 = f.values[e[crossed, 0]], f.values[e[crossed, 1]]
    p0, p1 = ball_mesh.vertices[e[crossed, 0]], ball_mesh.vertices[e[crossed, 1]]
    lam = np.linalg.norm(s.vertices - p0, axis=1) / np.linalg.norm(p1 - p0, axis=1)
    np.testing.assert_allclose(t0 + lam * (t1 - t0), 1.0, atol=1e-6)
    assert is_watertight(s)


def _flood_fill_components(mask, adjacency_pairs):
    n = len(mask)
    nbrs = [[] for _ in range(n)]
    for a, b in adjacency_pairs:
        nbrs[a].append(b)
        nbrs[b].append(a)
    seen = np.zeros(n, bool)
    count = 0
    for s in range(n):
        if not mask[s] or seen[s]:
            continue
        count += 1
        stack = [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            for w in nbrs[u]:
                if mask[w] and not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return count


def _face_pairs(mesh):
    faces = {}
    pairs = []
    for k, t in enumerate(mesh.tets.tolist()):
        for f in ((t[1], t[2], t[3]), (t[0], t[2], t[3]), (t[0], t[1], t[3]), (t[0], t[1], t[2])):
            key = tuple(sorted(f))
            if key in faces:
                pairs.append((faces[key], k))
            else:
                faces[key] = k
    return pairs


def test_void_count_matches_flood_fill(limbs_mesh, rng):
    pairs = _face_pairs(limbs_mesh)
    for _ in range(5):
        rho = (rng.random(limbs_mesh.n_tets) < 0.4).astype(float)
        d = DensityField(rho)
        assert void_component_count(d, limbs_mesh) == _flood_fill_components(rho == 0, pairs)
    assert void_component_count(DensityField(np.ones(limbs_mesh.n_tets)), limbs_mesh) == 0


def _vertex_flood_fill(mask, edges):
    nbrs = {i: [] for i in np.flatnonzero(mask)}
    for a, b in edges.tolist():
        if mask[a] and mask[b]:
            nbrs[a].append(b)
            nbrs[b].append(a)
    seen, count = set(), 0
    for s in nbrs:
        if s in seen:
            continue
        count += 1
        stack = [s]
        seen.add(s)
        while stack:
            for w in nbrs[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
    return count


def test_cavity_count_matches_flood_fill(limbs_mesh, rng):
    for _ in range(5):
        values = rng.uniform(0, 2, limbs_mesh.n_vertices)
        want = _vertex_flood_fill(values < 1.0, limbs_mesh.edges)
        assert cavity_component_count(limbs_mesh, _field(values)) == want
    assert cavity_component_count(limbs_mesh, _field(np.full(limbs_mesh.n_vertices, 2.0))) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-1.5, 2.0))
def test_sub_cut_region_is_one_cavity(bar_mesh, seed, log_scale):
    # harmonic fields have no interior minima, so every cold vertex reaches the skeleton
    rng = np.random.default_rng(seed)
    tb = 1.0 + 10 ** log_scale * rng.random(len(bar_mesh.boundary))
    assert cavity_component_count(bar_mesh, HeatSolver(bar_mesh)(tb)) == 1


def test_mass_monotone_in_boundary_temperature(limbs_mesh, rng):
    hs = HeatSolver(limbs_mesh)
    tb = rng.uniform(1, 3, len(limbs_mesh.boundary))
    base = compute_densities(limbs_mesh, hs(tb)).mass(limbs_mesh)
    for j in rng.choice(len(tb), 10, replace=False):
        up = tb.copy()
        up[j] += 2.0
        assert compute_densities(limbs_mesh, hs(up)).mass(limbs_mesh) >= base - 1e-12


def test_skeleton_inside_void(ball_mesh, rng):
    hs = HeatSolver(ball_mesh)
    f = hs(rng.uniform(1, 3, len(ball_mesh.boundary)))
    d = compute_densities(ball_mesh, f)
    void_vertices = np.unique(ball_mesh.tets[d.rho == 0])
    assert np.isin(ball_mesh.skeleton, void_vertices).all()
    s = extract_isosurface(ball_mesh, f)
    # surface stays strictly inside the outer boundary
    assert np.linalg.norm(s.vertices, axis=1).max() < 1.0 - 1e-6


def test_self_intersection_detects_crossing():
    v = np.array([[0.0, 0, 0], [2, 0, 0], [0, 2, 0], [0.5, 0.5, -1], [0.5, 0.5, 1], [1.5, 1.5, 0.5]])
    s = TriangleSurface(v, np.array([[0, 1, 2], [3, 4, 5]]))
    assert self_intersections(s) == 1
    s2 = TriangleSurface(v + [0, 0, 0], np.array([[0, 1, 2], [3, 5, 4]]))
    assert self_intersections(s2) == 1
    apart = TriangleSurface(np.r_[v[:3], v[:3] + [0, 0, 1]], np.array([[0, 1, 2], [3, 4, 5]]))
    assert self_intersections(apart) == 0


def test_obj_round_trip(tmp_path, ball_mesh):
    s = extract_isosurface(ball_mesh, _radial_field(ball_mesh, 2.0))
    write_obj(tmp_path / "s.obj", s)
    back = read_obj(tmp_path / "s.obj")
    np.testing.assert_array_equal(back.vertices, s.vertices)
    np.testing.assert_array_equal(back.triangles, s.triangles)


def test_watertight_rejects_open_surface():
    s = TriangleSurface(np.eye(3), np.array([[0, 1, 2]]))
    assert not is_watertight(s)
