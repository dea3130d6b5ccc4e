"""Steady-state temperature field with Dirichlet values on boundary and skeleton."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DegenerateTetError, SingularInteriorError
from .linalg import SparseFactor
from .mesh import DEGENERATE_RTOL, VertexClass, barycentric_gradients

log = logging.getLogger(__name__)

# scaled temperature convention: only ratios matter to the optimizer
T_SKELETON = 0.0
T_CUTOFF = 1.0
T_UPPER = 100.0


@dataclass(frozen=True, eq=False)
class TemperatureField:
    values: np.ndarray
    t_cut: float = T_CUTOFF
    t_skeleton: float = T_SKELETON
    t_upper: float = T_UPPER
    clamped: int = 0


def assemble_laplacian(mesh, kind="fem"):
    """Symmetric Laplacian on all vertices (row sums zero).

    ``kind="fem"`` is the P1 stiffness matrix ``V_e grad(phi_i) . grad(phi_j)``;
    ``kind="graph"`` is the combinatorial edge-graph Laplacian.
    """
    n = mesh.n_vertices
    if kind == "graph":
        i, j = mesh.edges.T
        adj = sparse.coo_matrix((np.ones(2 * len(i)), (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
        deg = np.asarray(adj.sum(axis=1)).ravel()
        return (sparse.diags(deg) - adj).tocsr()
    if kind != "fem":
        raise ValueError(f"unknown Laplacian kind {kind!r}")
    vol = mesh.volumes
    if (vol <= DEGENERATE_RTOL * mesh.mean_edge_length ** 3).any():
        raise DegenerateTetError("near-degenerate tet in Laplacian assembly")
    g = barycentric_gradients(mesh.vertices, mesh.tets)
    ke = np.einsum("eik,ejk->eij", g, g) * vol[:, None, None]
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()
    cols = np.tile(mesh.tets, (1, 4)).ravel()
    lap = sparse.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    lap.sum_duplicates()
    return lap


class InteriorFactorization:
    """One-time factorization of the interior block, reused for every boundary update."""

    def __init__(self, laplacian, vertex_class):
        vertex_class = np.asarray(vertex_class)
        self.n_vertices = len(vertex_class)
        self.boundary = np.flatnonzero(vertex_class == VertexClass.BOUNDARY)
        self.skeleton = np.flatnonzero(vertex_class == VertexClass.SKELETON)
        self.interior = np.flatnonzero(vertex_class == VertexClass.INTERIOR)
        lap = sparse.csr_matrix(laplacian)
        rows = lap[self.interior]
        self.block = rows[:, self.interior].tocsc()
        self.coupling_b = rows[:, self.boundary].tocsr()
        self.coupling_s = rows[:, self.skeleton].tocsr()
        self.factor = SparseFactor(self.block, SingularInteriorError)

    def solve(self, t_boundary, t_skeleton=T_SKELETON):
        t_boundary = np.asarray(t_boundary, float)
        if t_boundary.shape != (len(self.boundary),):
            raise ValueError(f"expected {len(self.boundary)} boundary temperatures, got {t_boundary.shape}")
        rhs = -(self.coupling_b @ t_boundary) - self.coupling_s @ np.full(len(self.skeleton), float(t_skeleton))
        return self.factor.solve(rhs)


def factorize_interior(laplacian, vertex_class):
    return InteriorFactorization(laplacian, vertex_class)


def solve_temperature(fact, t_boundary, t_skeleton=T_SKELETON, t_cut=T_CUTOFF, t_upper=T_UPPER):
    """Harmonic interior temperatures for the given Dirichlet data.

    Interior values outside ``[min(T_S, min T_B), max(T_S, max T_B)]`` (possible
    on meshes whose Laplacian is not an M-matrix) are clamped with a warning.
    """
    t_boundary = np.asarray(t_boundary, float)
    t_in = fact.solve(t_boundary, t_skeleton)
    values = np.empty(fact.n_vertices)
    values[fact.boundary] = t_boundary
    values[fact.skeleton] = t_skeleton
    clamped = 0
    if t_in.size:
        lo = min(t_skeleton, t_boundary.min()) if t_boundary.size else t_skeleton
        hi = max(t_skeleton, t_boundary.max()) if t_boundary.size else t_skeleton
        tol = 1e-9 * max(1.0, abs(hi - lo))
        out = (t_in < lo - tol) | (t_in > hi + tol)
        clamped = int(out.sum())
        if clamped:
            log.warning("maximum principle violated at %d interior vertices; clamping", clamped)
        t_in = np.clip(t_in, lo, hi)
    values[fact.interior] = t_in
    return TemperatureField(values, t_cut, t_skeleton, t_upper, clamped)


class HeatSolver:
    """Mesh-bound convenience wrapper: assemble, factorize once, solve repeatedly."""

    def __init__(self, mesh, kind="fem", t_cut=T_CUTOFF, t_upper=T_UPPER, t_skeleton=T_SKELETON):
        self.mesh = mesh
        self.t_cut, self.t_upper, self.t_skeleton = t_cut, t_upper, t_skeleton
        self.laplacian = assemble_laplacian(mesh, kind)
        self.factorization = factorize_interior(self.laplacian, mesh.vertex_class)

    def __call__(self, t_boundary):
        return solve_temperature(self.factorization, t_boundary, self.t_skeleton, self.t_cut, self.t_upper)
