"""Reduced-order stress prediction for loads whose contact point is uncertain.

A load is a fixed-magnitude normal push at any vertex of a boundary region.
A few contacts spread by farthest-point sampling get an exact FEA each; the
rest are predicted by a quadratic ridge regression from force coefficients in
a surface Laplacian basis to stress coefficients in a PCA basis.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as spla

from .errors import EigenSolverError, SampleCountError
from .fea import LoadCase
from .mesh import surface_graph_laplacian
from .stress import StressEnvelope

DENSE_EIGEN_LIMIT = 3000


@dataclass(frozen=True, eq=False)
class ContactRegion:
    """Candidate contact vertices plus the support and load shared by every instant."""

    candidates: np.ndarray
    fixed: np.ndarray
    magnitude: float
    spread_radius: float

    def __post_init__(self):
        object.__setattr__(self, "candidates", np.unique(np.asarray(self.candidates, np.int64)))
        object.__setattr__(self, "fixed", np.unique(np.asarray(self.fixed, np.int64)))
        if self.candidates.size == 0:
            raise SampleCountError("contact region is empty")

    def __len__(self):
        return len(self.candidates)


@dataclass(frozen=True, eq=False)
class ForceSampleSet:
    contacts: np.ndarray
    forces: list  # per contact: (mesh vertex ids, (k, 3) nodal forces)
    spread_radius: float
    magnitude: float

    def load_case(self, k, fixed):
        nodes, values = self.forces[k]
        return LoadCase(fixed, nodes, values, name=f"contact {int(self.contacts[k])}")


@dataclass(frozen=True, eq=False)
class ReducedBases:
    force_basis: np.ndarray  # (n_b, s), orthonormal columns
    eigenvalues: np.ndarray
    stress_mean: np.ndarray  # (n,)
    stress_basis: np.ndarray  # (n, p - 1)
    singular_values: np.ndarray

    @property
    def explained_variance(self):
        return self.singular_values ** 2

    def force_coefficients(self, boundary_forces):
        return np.asarray(boundary_forces, float) @ self.force_basis

    def stress_coefficients(self, stresses):
        return (np.asarray(stresses, float) - self.stress_mean) @ self.stress_basis

    def reconstruct(self, coeffs):
        return self.stress_mean + np.asarray(coeffs, float) @ self.stress_basis.T


@dataclass(frozen=True, eq=False)
class QuadraticMap:
    weights: np.ndarray  # (n_features, n_stress_coeffs)
    ridge: float
    n_coeffs: int

    @property
    def n_features(self):
        return self.weights.shape[0]

    def predict(self, force_coeffs):
        return quadratic_features(force_coeffs) @ self.weights


@dataclass(frozen=True, eq=False)
class SurrogateEstimate:
    envelope: StressEnvelope
    peaks: np.ndarray  # estimated peak stress per candidate


# ---------------------------------------------------------------------------
# sampling and load construction
# ---------------------------------------------------------------------------

def _surface_distances(mesh, local_sources):
    return csgraph.dijkstra(mesh.boundary_graph, directed=False, indices=local_sources)


def sample_contacts(mesh, region, count):
    """Farthest-point sampling of ``count`` region vertices under boundary-graph distance.

    Starts from the lowest-index region vertex; ties go to the lower index.
    """
    region = np.unique(np.asarray(region, np.int64))
    if count < 1 or count > len(region):
        raise SampleCountError(f"cannot draw {count} samples from a region of {len(region)} vertices")
    local = mesh.boundary_local[region]
    if (local < 0).any():
        raise SampleCountError("contact region contains non-boundary vertices")
    chosen = [0]
    nearest = _surface_distances(mesh, local[0])[local]
    for _ in range(count - 1):
        nearest[chosen] = -1.0
        k = int(np.argmax(nearest))
        chosen.append(k)
        nearest = np.minimum(nearest, _surface_distances(mesh, local[k])[local])
    return region[np.array(chosen)]


def contact_force(mesh, contact, magnitude, spread_radius, exclude=()):
    """Inward normal push of total ``magnitude`` split evenly over boundary nodes near ``contact``.

    Nodes in ``exclude`` (typically the supports) take no share.
    """
    local = mesh.boundary_local[contact]
    if local < 0:
        raise SampleCountError(f"contact vertex {contact} is not on the boundary")
    d = _surface_distances(mesh, local)
    nodes = mesh.boundary[np.flatnonzero(d <= spread_radius)]
    nodes = nodes[~np.isin(nodes, exclude)]
    if len(nodes) == 0:
        raise SampleCountError(f"contact vertex {contact} has no loadable node within the spread radius")
    direction = -mesh.vertex_normals[contact]
    return nodes, np.tile(direction * (magnitude / len(nodes)), (len(nodes), 1))


def build_force_samples(mesh, region, contacts):
    forces = [contact_force(mesh, c, region.magnitude, region.spread_radius, region.fixed) for c in contacts]
    return ForceSampleSet(np.asarray(contacts, np.int64), forces, region.spread_radius, region.magnitude)


def boundary_force_magnitudes(mesh, samples):
    """Per-boundary-vertex force magnitude for every sample, shape (count, n_b)."""
    out = np.zeros((len(samples.contacts), len(mesh.boundary)))
    for k, (nodes, values) in enumerate(samples.forces):
        out[k, mesh.boundary_local[nodes]] = np.linalg.norm(values, axis=1)
    return out


# ---------------------------------------------------------------------------
# bases and regression
# ---------------------------------------------------------------------------

def _fix_signs(vectors):
    scale = np.abs(vectors).max(axis=0, keepdims=True)
    first = np.argmax(np.abs(vectors) > 1e-10 * scale, axis=0)
    sign = np.sign(vectors[first, np.arange(vectors.shape[1])])
    sign[sign == 0] = 1.0
    return vectors * sign


def laplacian_eigenbasis(mesh, s):
    lap = surface_graph_laplacian(mesh)
    n = lap.shape[0]
    if s < 1 or s > n:
        raise ValueError(f"basis size {s} outside [1, {n}]")
    if n <= DENSE_EIGEN_LIMIT:
        vals, vecs = linalg.eigh(lap.toarray(), subset_by_index=[0, s - 1])
    else:
        try:
            vals, vecs = spla.eigsh(sparse.csc_matrix(lap), k=s, sigma=-1e-6, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError(f"Laplacian eigensolver did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        vecs, _ = np.linalg.qr(vecs)
    return vals, _fix_signs(vecs)


def build_bases(mesh, training_forces, training_stresses, s, eigen=None):
    """Force basis from the surface Laplacian and stress basis from PCA of the training fields.

    ``training_stresses`` has one row per sample.  Principal directions whose
    singular value is negligible are returned as zero columns.
    """
    stresses = np.asarray(training_stresses, float)
    p = stresses.shape[0]
    if p < 2:
        raise SampleCountError("need at least two training samples")
    vals, vecs = laplacian_eigenbasis(mesh, s) if eigen is None else eigen
    mean = stresses.mean(axis=0)
    u, sv, _ = np.linalg.svd((stresses - mean).T, full_matrices=False)
    u, sv = u[:, :p - 1], sv[:p - 1]
    tiny = sv <= 1e-12 * max(np.abs(stresses).max(), 1e-300) * np.sqrt(stresses.size)
    u = _fix_signs(u)
    u[:, tiny] = 0.0
    sv = np.where(tiny, 0.0, sv)
    return ReducedBases(vecs, vals, mean, u, sv)


def quadratic_features(coeffs):
    """Bias, linear terms, then products ``c_i c_j`` for ``i <= j``."""
    c = np.atleast_2d(np.asarray(coeffs, float))
    i, j = np.triu_indices(c.shape[1])
    return np.hstack([np.ones((len(c), 1)), c, c[:, i] * c[:, j]])


def fit_map(bases, training_forces, training_stresses, ridge=None):
    feats = quadratic_features(bases.force_coefficients(training_forces))
    target = bases.stress_coefficients(training_stresses)
    gram = feats.T @ feats
    if ridge is None:
        ridge = 1e-6 * np.trace(gram) / feats.shape[1]
    if ridge == 0:
        w = np.linalg.lstsq(feats, target, rcond=None)[0]
    else:
        w = linalg.solve(gram + ridge * np.eye(len(gram)), feats.T @ target, assume_a="pos")
    return QuadraticMap(w, float(ridge), bases.force_basis.shape[1])


def estimate_envelope(qmap, bases, boundary_forces, chunk=256):
    """Predicted stress envelope and per-instant peak over all candidate instants."""
    boundary_forces = np.asarray(boundary_forces, float)
    env = np.full(len(bases.stress_mean), -np.inf)
    arg = np.zeros(len(bases.stress_mean), np.int64)
    peaks = np.empty(len(boundary_forces))
    for s0 in range(0, len(boundary_forces), chunk):
        fields = np.maximum(bases.reconstruct(qmap.predict(bases.force_coefficients(boundary_forces[s0:s0 + chunk]))), 0.0)
        peaks[s0:s0 + chunk] = fields.max(axis=1)
        k = np.argmax(fields, axis=0)
        best = fields[k, np.arange(fields.shape[1])]
        better = best > env
        env[better] = best[better]
        arg[better] = k[better] + s0
    return SurrogateEstimate(StressEnvelope(env, arg), peaks)


# ---------------------------------------------------------------------------
# exact critical stress
# ---------------------------------------------------------------------------

def candidate_neighbors(mesh, candidates):
    """Boundary-graph neighbours of each candidate restricted to the candidate set."""
    candidates = np.asarray(candidates, np.int64)
    pos = np.full(mesh.n_vertices, -1)
    pos[candidates] = np.arange(len(candidates))
    g = mesh.boundary_graph.tocsr()
    b = mesh.boundary
    out = []
    for c in candidates:
        loc = mesh.boundary_local[c]
        nb = pos[b[g.indices[g.indptr[loc]:g.indptr[loc + 1]]]]
        out.append(np.sort(nb[nb >= 0]))
    return out


def hierarchical_critical_search(peaks, evaluate, top_k, neighbors, known=None):
    """Exact critical stress from the surrogate ranking.

    Evaluates the ``top_k`` candidates with the largest predicted peaks, then
    climbs from the current exact maximum to unevaluated neighbours until no
    neighbour is higher.  ``evaluate(k)`` returns the exact peak for candidate
    ``k``; ``known`` maps candidates to already computed exact peaks.
    Returns ``(sigma_cr, candidate, exact)`` where ``exact`` holds every
    exact value computed or supplied.
    """
    exact = dict(known or {})
    peaks = np.asarray(peaks, float)
    order = np.lexsort((np.arange(len(peaks)), -peaks))
    for k in order[:max(1, top_k)]:
        k = int(k)
        if k not in exact:
            exact[k] = float(evaluate(k))
    best = max(exact, key=lambda k: (exact[k], -k))
    while True:
        fresh = [int(k) for k in neighbors[best] if int(k) not in exact]
        for k in fresh:
            exact[k] = float(evaluate(k))
        nxt = max(exact, key=lambda k: (exact[k], -k))
        if nxt == best:
            break
        best = nxt
    return exact[best], best, exact
