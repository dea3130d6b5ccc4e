"""Linear elasticity on the fixed tet mesh with SIMP-scaled element stiffness."""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import _kernels
from .errors import JacobianError, LoadCaseError, SingularSystemError
from .linalg import SparseFactor
from .mesh import TET_EDGES, barycentric_gradients, build_quadratic, edge_index, signed_volumes

# 4-point rule, exact for quadratic integrands over a tet
_A, _B = 0.5854101966249685, 0.1381966011250105
GAUSS4 = np.array([[_A, _B, _B, _B], [_B, _A, _B, _B], [_B, _B, _A, _B], [_B, _B, _B, _A]])
GAUSS4_W = np.full(4, 0.25)


@dataclass(frozen=True)
class MaterialModel:
    youngs_modulus: float
    poisson_ratio: float
    yield_strength: float = 1.0
    safety_factor: float = 1.0
    void_scale: float = 1e-8
    penalty: float = 3.0

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise ValueError("Young's modulus must be positive")
        if not 0 <= self.poisson_ratio < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")
        if not self.yield_strength > 0:
            raise ValueError("yield strength must be positive")
        if not self.safety_factor >= 1:
            raise ValueError("safety factor must be >= 1")
        if not 0 < self.void_scale < 1e-2:
            raise ValueError("void scale must be small and positive")
        if not self.penalty >= 1:
            raise ValueError("penalization exponent must be >= 1")

    @property
    def allowable(self):
        return self.yield_strength / self.safety_factor

    def elasticity_matrix(self):
        E, nu = self.youngs_modulus, self.poisson_ratio
        lam = E * nu / ((1 + nu) * (1 - 2 * nu))
        mu = E / (2 * (1 + nu))
        d = np.zeros((6, 6))
        d[:3, :3] = lam
        d[np.arange(3), np.arange(3)] = lam + 2 * mu
        d[np.arange(3, 6), np.arange(3, 6)] = mu
        return d

    def simp_scale(self, rho):
        rho = np.asarray(rho, float)
        eps = self.void_scale
        return eps + rho ** self.penalty * (1.0 - eps)


@dataclass(eq=False)
class LoadCase:
    """Zero-displacement (or prescribed) vertices plus nodal forces.

    Force node ids below ``mesh.n_vertices`` are corner vertices; larger ids
    are quadratic mid-side nodes, one per row of ``mesh.edges``.
    """

    fixed: np.ndarray
    force_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    force_values: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    prescribed: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        self.fixed = np.unique(np.asarray(self.fixed, np.int64))
        self.force_nodes = np.asarray(self.force_nodes, np.int64).ravel()
        self.force_values = np.asarray(self.force_values, float).reshape(-1, 3)
        if self.fixed.size == 0:
            raise LoadCaseError(f"load case {self.name!r} has no fixed vertices")
        if len(self.force_nodes) != len(self.force_values):
            raise LoadCaseError("force nodes and values differ in length")
        if np.intersect1d(self.fixed, self.force_nodes).size:
            raise LoadCaseError(f"load case {self.name!r} applies force to a fixed vertex")
        if self.prescribed is not None:
            self.prescribed = np.asarray(self.prescribed, float).reshape(len(self.fixed), 3)

    @property
    def total_force(self):
        return self.force_values.sum(axis=0)

    def scaled(self, factor):
        return LoadCase(self.fixed, self.force_nodes, self.force_values * factor, self.prescribed, self.name)


# ---------------------------------------------------------------------------
# element matrices
# ---------------------------------------------------------------------------

def _shape_gradient_coeffs(bary):
    """Coefficients mapping barycentric gradients to 10-node shape gradients at ``bary``."""
    c = np.zeros((10, 4))
    for i in range(4):
        c[i, i] = 4 * bary[i] - 1
    for k, (i, j) in enumerate(TET_EDGES):
        c[4 + k, i] = 4 * bary[j]
        c[4 + k, j] = 4 * bary[i]
    return c


def strain_matrices(grads):
    """Voigt strain-displacement matrices from nodal shape gradients.

    ``grads`` has shape (..., n, 3); the result has shape (..., 6, 3n) with
    rows xx, yy, zz, yz, xz, xy (engineering shear).
    """
    n = grads.shape[-2]
    gx, gy, gz = grads[..., 0], grads[..., 1], grads[..., 2]
    b = np.zeros(grads.shape[:-2] + (6, 3 * n))
    b[..., 0, 0::3] = gx
    b[..., 1, 1::3] = gy
    b[..., 2, 2::3] = gz
    b[..., 3, 1::3] = gz
    b[..., 3, 2::3] = gy
    b[..., 4, 0::3] = gz
    b[..., 4, 2::3] = gx
    b[..., 5, 0::3] = gy
    b[..., 5, 1::3] = gx
    return b


def quadrature_strains(corners, order=2, rule=None):
    """Strain matrices at quadrature points for straight-edged tets.

    Returns ``(B, weights, volumes)`` with ``B`` of shape (m, q, 6, 3n).
    """
    tets = np.asarray(corners, float).reshape(-1, 4, 3)
    flat = tets.reshape(-1, 3)
    idx = np.arange(len(flat)).reshape(-1, 4)
    vol = signed_volumes(flat, idx)
    if (vol <= 0).any():
        raise JacobianError(f"element {int(np.flatnonzero(vol <= 0)[0])} has a non-positive Jacobian")
    g = barycentric_gradients(flat, idx)
    if order == 1:
        return strain_matrices(g)[:, None], np.ones(1), vol
    pts, w = (GAUSS4, GAUSS4_W) if rule is None else rule
    coeffs = np.stack([_shape_gradient_coeffs(p) for p in pts])  # (q, 10, 4)
    dn = np.einsum("qak,ekd->eqad", coeffs, g)
    return strain_matrices(dn), np.asarray(w), vol


def element_stiffness_batch(corners, material, order=2, rule=None):
    b, w, vol = quadrature_strains(corners, order, rule)
    d = material.elasticity_matrix()
    return np.einsum("q,eqsi,st,eqtj->eij", w, b, d, b, optimize=True) * vol[:, None, None]


def element_stiffness_solid(coords, material, order=2):
    """Solid stiffness of one element; ``coords`` holds its corner (and mid) nodes."""
    coords = np.asarray(coords, float)
    if order == 2 and len(coords) == 10:
        mids = 0.5 * (coords[TET_EDGES[:, 0]] + coords[TET_EDGES[:, 1]])
        if not np.allclose(mids, coords[4:], rtol=0, atol=1e-12 * np.ptp(coords)):
            raise JacobianError("mid-side nodes are not edge midpoints")
    return element_stiffness_batch(coords[None, :4], material, order)[0]


def interpolate_stiffness(rho, k_solid, material):
    k_void = material.void_scale * k_solid
    return k_void + rho ** material.penalty * (k_solid - k_void)


def von_mises(stress):
    """Von Mises stress from Voigt components ``(xx, yy, zz, yz, xz, xy)`` along the last axis."""
    s = np.asarray(stress, float)
    xx, yy, zz, yz, xz, xy = np.moveaxis(s, -1, 0)
    return np.sqrt(0.5 * ((xx - yy) ** 2 + (yy - zz) ** 2 + (zz - xx) ** 2) + 3.0 * (yz ** 2 + xz ** 2 + xy ** 2))


# ---------------------------------------------------------------------------
# global model
# ---------------------------------------------------------------------------

class ElasticityModel:
    """Solid element matrices and the sparse assembly pattern, computed once per mesh."""

    def __init__(self, mesh, material, order=2):
        if order not in (1, 2):
            raise ValueError("element order must be 1 or 2")
        self.mesh = mesh
        self.material = material
        self.order = order
        if order == 2:
            q = build_quadratic(mesh)
            self.nodes, self.elements = q.nodes, q.elements
        else:
            self.nodes, self.elements = mesh.vertices, mesh.tets
        self.n_nodes = len(self.nodes)
        self.n_dofs = 3 * self.n_nodes
        corners = mesh.vertices[mesh.tets]
        self.strains, self.weights, self.volumes = quadrature_strains(corners, order)
        d = material.elasticity_matrix()
        self.k_solid = np.einsum("q,eqsi,st,eqtj->eij", self.weights, self.strains, d, self.strains,
                                 optimize=True) * self.volumes[:, None, None]
        self.dofs = (3 * self.elements[:, :, None] + np.arange(3)).reshape(len(self.elements), -1)
        nd = self.dofs.shape[1]
        rows = np.repeat(self.dofs, nd, axis=1).ravel()
        cols = np.tile(self.dofs, (1, nd)).ravel()
        keys, self._scatter = np.unique(rows * self.n_dofs + cols, return_inverse=True)
        self._scatter = self._scatter.ravel()
        self._row = keys // self.n_dofs
        self._col = keys % self.n_dofs
        self._indptr = np.r_[0, np.cumsum(np.bincount(self._row, minlength=self.n_dofs))]
        # corner stresses are linear in the element; recover them from the Gauss values
        self._extrap = np.linalg.inv(GAUSS4) if order == 2 else None
        self._mid_edges = mesh.edges if order == 2 else np.zeros((0, 2), np.int64)
        self._symbolic = {}  # fill-reducing analysis per Dirichlet set

    # -- assembly -----------------------------------------------------------
    def global_data(self, rho):
        scale = self.material.simp_scale(rho)
        vals = (self.k_solid * scale[:, None, None]).ravel()
        return _kernels.scatter_add(self._scatter, vals, len(self._row))

    def stiffness(self, rho):
        data = self.global_data(rho)
        return sparse.csr_matrix((data, self._col, self._indptr), shape=(self.n_dofs, self.n_dofs))

    def fixed_nodes(self, fixed_vertices):
        """Corner vertices plus the mid-nodes of edges with both ends fixed."""
        fixed_vertices = np.asarray(fixed_vertices, np.int64)
        if self.order == 1:
            return fixed_vertices
        mask = np.zeros(self.mesh.n_vertices, bool)
        mask[fixed_vertices] = True
        both = np.flatnonzero(mask[self._mid_edges[:, 0]] & mask[self._mid_edges[:, 1]])
        return np.r_[fixed_vertices, self.mesh.n_vertices + both]

    def factorize(self, rho, fixed_vertices):
        return FactoredSystem(self, rho, fixed_vertices)

    def force_vector(self, case):
        """Global load vector; in linear mode a mid-node force is split between its edge ends."""
        nodes, values = case.force_nodes, case.force_values
        nv = self.mesh.n_vertices
        if nodes.size and nodes.max() >= nv + len(self.mesh.edges):
            raise LoadCaseError(f"load case {case.name!r} references node {int(nodes.max())} outside the mesh")
        if self.order == 1:
            mid = nodes >= nv
            ends = self.mesh.edges[nodes[mid] - nv]
            half = 0.5 * values[mid]
            nodes = np.r_[nodes[~mid], ends[:, 0], ends[:, 1]]
            values = np.vstack([values[~mid], half, half])
        f = np.zeros((self.n_nodes, 3))
        np.add.at(f, nodes, values)
        return f.ravel()

    def solve(self, rho, case):
        return self.factorize(rho, case.fixed).solve(case)

    # -- stress recovery -------------------------------------------------------
    def corner_stresses(self, rho, u):
        """Per-element Voigt stress at the four corners, shape (m, 4, 6)."""
        ue = np.asarray(u, float).reshape(-1)[self.dofs]
        d = self.material.elasticity_matrix() * 1.0
        strain = np.einsum("eqsi,ei->eqs", self.strains, ue)
        stress = np.einsum("st,eqt->eqs", d, strain) * self.material.simp_scale(rho)[:, None, None]
        if self.order == 1:
            return np.repeat(stress, 4, axis=1)
        return np.einsum("iq,eqs->eis", self._extrap, stress)

    def nodal_stress(self, rho, u):
        """Volume-weighted average of element corner stresses at each mesh vertex, shape (n, 6)."""
        cs = self.corner_stresses(rho, u)
        n = self.mesh.n_vertices
        tets = self.mesh.tets.ravel()
        w = np.repeat(self.volumes, 4)
        den = np.bincount(tets, weights=w, minlength=n)
        out = np.empty((n, 6))
        flat = cs.reshape(-1, 6)
        for k in range(6):
            out[:, k] = np.bincount(tets, weights=w * flat[:, k], minlength=n)
        return out / den[:, None]

    def von_mises(self, rho, u):
        return von_mises(self.nodal_stress(rho, u))


class FactoredSystem:
    """Reduced stiffness for one Dirichlet set, factorized once for any number of right-hand sides."""

    def __init__(self, model, rho, fixed_vertices):
        self.model = model
        fixed_vertices = np.unique(np.asarray(fixed_vertices, np.int64))
        pts = model.mesh.vertices[fixed_vertices]
        if len(pts) < 3 or np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-9 * np.ptp(model.mesh.vertices)) < 2:
            raise SingularSystemError("fixed vertices do not suppress rigid-body rotation")
        self.fixed_vertices = fixed_vertices
        self.fixed_nodes = model.fixed_nodes(fixed_vertices)
        fixed_dofs = (3 * self.fixed_nodes[:, None] + np.arange(3)).ravel()
        free = np.ones(model.n_dofs, bool)
        free[fixed_dofs] = False
        self.free = free
        self.fixed_dofs = fixed_dofs
        data = model.global_data(rho)
        keep = free[model._row] & free[model._col]
        renum = np.cumsum(free) - 1
        nf = int(free.sum())
        rows = renum[model._row[keep]]
        indptr = np.r_[0, np.cumsum(np.bincount(rows, minlength=nf))]
        self.matrix = sparse.csr_matrix((data[keep], renum[model._col[keep]], indptr), shape=(nf, nf))
        self._full_data = data
        key = fixed_vertices.tobytes()
        self.factor = SparseFactor(self.matrix.tocsc(), SingularSystemError, model._symbolic.get(key))
        if self.factor.symbolic is not None:
            model._symbolic[key] = self.factor.symbolic

    def _coupling(self):
        m = self.model
        k = sparse.csr_matrix((self._full_data, m._col, m._indptr), shape=(m.n_dofs, m.n_dofs))
        return k[self.free][:, self.fixed_dofs]

    def solve(self, case):
        m = self.model
        if not np.array_equal(np.unique(case.fixed), self.fixed_vertices):
            raise LoadCaseError("load case fixed set differs from the factorized one")
        f = m.force_vector(case)
        if np.any(f[self.fixed_dofs]):
            raise LoadCaseError(f"load case {case.name!r} applies force to a fixed node")
        u = np.zeros(m.n_dofs)
        rhs = f[self.free]
        if case.prescribed is not None:
            up = np.zeros((m.n_nodes, 3))
            up[case.fixed] = case.prescribed
            if m.order == 2:
                mids = self.fixed_nodes[len(case.fixed):] - m.mesh.n_vertices
                e = m._mid_edges[mids]
                up[self.fixed_nodes[len(case.fixed):]] = 0.5 * (up[e[:, 0]] + up[e[:, 1]])
            u_fixed = up.ravel()[self.fixed_dofs]
            u[self.fixed_dofs] = u_fixed
            rhs = rhs - self._coupling() @ u_fixed
        uf = self.factor.solve(rhs)
        if not np.all(np.isfinite(uf)):
            raise SingularSystemError("non-finite displacement")
        res = np.linalg.norm(self.matrix @ uf - rhs)
        if res > 1e-8 * max(np.linalg.norm(rhs), 1e-300) and np.linalg.norm(rhs) > 0:
            raise SingularSystemError(f"solve residual {res:.3e} exceeds tolerance")
        u[self.free] = uf
        return u.reshape(-1, 3)


def assemble_and_solve(model, rho, case):
    return model.solve(rho, case)


def nodal_von_mises(model, rho, u):
    return model.von_mises(rho, u)


# ---------------------------------------------------------------------------
# load construction
# ---------------------------------------------------------------------------

def traction_load(mesh, vertices, total_force):
    """Consistent nodal loads of a uniform traction over the boundary faces spanned by ``vertices``.

    For quadratic faces a uniform traction loads only the mid-side nodes, each
    taking one third of every adjacent selected face.  Mid-node ``k`` has node
    id ``mesh.n_vertices + k`` where ``k`` indexes ``mesh.edges``.  If no
    complete face is selected the force is split uniformly over the vertices.
    """
    vertices = np.unique(np.asarray(vertices, np.int64))
    sel = np.zeros(mesh.n_vertices, bool)
    sel[vertices] = True
    faces = mesh.boundary_faces
    full = sel[faces].all(axis=1)
    if not full.any():
        return uniform_load(vertices, total_force)
    faces, areas = faces[full], mesh.boundary_face_areas[full]
    w = np.zeros(len(mesh.edges))
    for a, b in ((0, 1), (1, 2), (2, 0)):
        np.add.at(w, edge_index(mesh, np.stack([faces[:, a], faces[:, b]], axis=1)), areas / 3.0)
    mids = np.flatnonzero(w)
    w = w[mids] / w[mids].sum()
    return mesh.n_vertices + mids, w[:, None] * np.asarray(total_force, float)[None, :]


def uniform_load(vertices, total_force):
    vertices = np.unique(np.asarray(vertices, np.int64))
    return vertices, np.tile(np.asarray(total_force, float) / len(vertices), (len(vertices), 1))
