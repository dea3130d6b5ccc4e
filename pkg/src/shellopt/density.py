"""Temperature field to element densities, inner isosurface, void connectivity."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import _kernels
from .mesh import edge_index


@dataclass(frozen=True, eq=False)
class DensityField:
    rho: np.ndarray

    @property
    def n_intermediate(self):
        return int(np.count_nonzero((self.rho > 0.0) & (self.rho < 1.0)))

    def mass(self, mesh):
        return float(np.dot(self.rho, mesh.volumes))


@dataclass(frozen=True, eq=False)
class TriangleSurface:
    vertices: np.ndarray
    triangles: np.ndarray
    oriented: bool = True

    @property
    def is_empty(self):
        return len(self.triangles) == 0

    def face_normals(self):
        p = self.vertices[self.triangles]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)

    def area(self):
        p = self.vertices[self.triangles]
        return float(0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1).sum())


def tet_clip_fraction(corner_temps, t_cut):
    """Volume fraction of a linear tet where ``T >= t_cut`` (ties count as solid)."""
    return float(_kernels.clip_fractions(np.reshape(corner_temps, (1, 4)), t_cut)[0])


def compute_densities(mesh, field, t_cut=None):
    t_cut = field.t_cut if t_cut is None else t_cut
    rho = _kernels.clip_fractions(field.values[mesh.tets], t_cut)
    rho[mesh.boundary_layer] = 1.0
    return DensityField(rho)


def extract_isosurface(mesh, field, t_cut=None):
    """Marching-tetrahedra triangulation of ``{T = t_cut}``.

    One surface vertex per crossed mesh edge, so neighbouring tets share
    vertices exactly.  Triangles are oriented with normals toward higher
    temperature.
    """
    t_cut = field.t_cut if t_cut is None else t_cut
    t = field.values
    below = t < t_cut
    e0, e1 = mesh.edges.T
    crossed = below[e0] != below[e1]
    if not crossed.any():
        return TriangleSurface(np.zeros((0, 3)), np.zeros((0, 3), np.int64))
    s = (t_cut - t[e0[crossed]]) / (t[e1[crossed]] - t[e0[crossed]])
    p0, p1 = mesh.vertices[e0[crossed]], mesh.vertices[e1[crossed]]
    verts = p0 + s[:, None] * (p1 - p0)
    vid = np.full(len(mesh.edges), -1, np.int64)
    vid[crossed] = np.arange(crossed.sum())

    tb = below[mesh.tets]
    nb = tb.sum(axis=1)
    tris = []
    owner = []
    # one corner on the minority side: a single triangle around it
    for count, minority in ((1, True), (3, False)):
        sel = np.flatnonzero(nb == count)
        if not len(sel):
            continue
        tet = mesh.tets[sel]
        lone = np.argmax(tb[sel] == minority, axis=1)
        others = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])[lone]
        a = tet[np.arange(len(sel)), lone]
        pairs = np.stack([np.stack([a, tet[np.arange(len(sel)), others[:, k]]], axis=1) for k in range(3)], axis=1)
        tris.append(vid[edge_index(mesh, pairs)])
        owner.append(sel)
    sel = np.flatnonzero(nb == 2)
    if len(sel):
        tet = mesh.tets[sel]
        order = np.argsort(~tb[sel], axis=1, kind="stable")  # below corners first
        a, b, c, d = (tet[np.arange(len(sel)), order[:, k]] for k in range(4))
        ac, ad, bc, bd = (vid[edge_index(mesh, np.stack(x, axis=1))] for x in ((a, c), (a, d), (b, c), (b, d)))
        tris.append(np.stack([ac, ad, bd], axis=1))
        tris.append(np.stack([ac, bd, bc], axis=1))
        owner.extend([sel, sel])
    tris = np.concatenate(tris)
    owner = np.concatenate(owner)

    # orient on the edge-midpoint triangles (same orientation, never degenerate)
    # so the normal points from the below-cut corners to the others
    corners = mesh.vertices[mesh.tets[owner]]
    cold = tb[owner][:, :, None]
    toward_hot = (corners * ~cold).sum(1) / (~cold).sum(1) - (corners * cold).sum(1) / cold.sum(1)
    mids = 0.5 * (p0 + p1)
    p = mids[tris]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("ij,ij->i", n, toward_hot) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    order = np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0], owner))
    return TriangleSurface(verts, tris[order])


def void_component_count(density, mesh):
    """Number of face-connected components of fully void (rho == 0) tets."""
    void = density.rho == 0.0
    k = int(void.sum())
    if k == 0:
        return 0
    loc = np.full(mesh.n_tets, -1)
    loc[void] = np.arange(k)
    adj = mesh.tet_adjacency
    keep = void[adj[:, 0]] & void[adj[:, 1]]
    a, b = loc[adj[keep, 0]], loc[adj[keep, 1]]
    g = sparse.coo_matrix((np.ones(len(a)), (a, b)), shape=(k, k))
    ncomp, _ = csgraph.connected_components(g, directed=False)
    return int(ncomp)


def cavity_component_count(mesh, field, t_cut=None):
    """Number of connected components of the region ``{T < t_cut}``.

    Within a tet the linear sub-level set is convex and holds every corner
    below the cut, so the region's components are the edge-connected
    components of the below-cut vertices.  Unlike ``void_component_count``
    this also resolves cavities thinner than one element.
    """
    t_cut = field.t_cut if t_cut is None else t_cut
    below = field.values < t_cut
    k = int(below.sum())
    if k == 0:
        return 0
    loc = np.full(mesh.n_vertices, -1)
    loc[below] = np.arange(k)
    e = mesh.edges[below[mesh.edges].all(axis=1)]
    g = sparse.coo_matrix((np.ones(len(e)), (loc[e[:, 0]], loc[e[:, 1]])), shape=(k, k))
    ncomp, _ = csgraph.connected_components(g, directed=False)
    return int(ncomp)


# ---------------------------------------------------------------------------
# surface checks
# ---------------------------------------------------------------------------

def surface_edge_counts(surface):
    """Number of triangles incident to each undirected surface edge."""
    t = surface.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return counts


def is_watertight(surface):
    if surface.is_empty:
        return True
    t = surface.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    # closed and consistently oriented: every directed edge appears once, reversed once
    fwd = {tuple(e) for e in directed.tolist()}
    if len(fwd) != len(directed):
        return False
    return all((b, a) in fwd for a, b in fwd)


def _segment_hits_triangle(p, q, a, b, c, eps):
    d = q - p
    e1, e2 = b - a, c - a
    h = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > eps
    inv = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
    s = p - a
    u = inv * np.einsum("ij,ij->i", s, h)
    qv = np.cross(s, e1)
    v = inv * np.einsum("ij,ij->i", d, qv)
    t = inv * np.einsum("ij,ij->i", e2, qv)
    tol = 1e-9
    return ok & (u > tol) & (v > tol) & (u + v < 1 - tol) & (t > tol) & (t < 1 - tol)


def self_intersections(surface, chunk=200_000):
    """Count intersecting pairs among triangles that share no vertex.

    Every pair with overlapping bounding boxes is tested exactly (edge against
    triangle, both ways), so the result covers all pairs.
    """
    if surface.is_empty:
        return 0
    p = surface.vertices[surface.triangles]
    lo, hi = p.min(axis=1), p.max(axis=1)
    span = np.ptp(surface.vertices, axis=0).max()
    pad = 1e-12 * span
    order = np.argsort(lo[:, 0], kind="stable")
    lo_s, hi_s = lo[order], hi[order]
    # sweep along x: candidates j > i with lo_j.x <= hi_i.x
    stop = np.searchsorted(lo_s[:, 0], hi_s[:, 0] + pad, side="right")
    counts = stop - np.arange(len(order)) - 1
    ii = np.repeat(np.arange(len(order)), counts)
    jj = np.arange(len(ii)) - np.repeat(np.cumsum(counts) - counts, counts) + ii + 1
    hits = 0
    tri = surface.triangles
    eps = 1e-14 * span * span
    for s0 in range(0, len(ii), chunk):
        i = order[ii[s0:s0 + chunk]]
        j = order[jj[s0:s0 + chunk]]
        box = np.all((lo[i] <= hi[j] + pad) & (lo[j] <= hi[i] + pad), axis=1)
        shared = (tri[i][:, :, None] == tri[j][:, None, :]).any(axis=(1, 2))
        keep = box & ~shared
        i, j = i[keep], j[keep]
        if not len(i):
            continue
        hit = np.zeros(len(i), bool)
        for x, y in ((i, j), (j, i)):
            a, b, c = p[y, 0], p[y, 1], p[y, 2]
            for k0, k1 in ((0, 1), (1, 2), (2, 0)):
                hit |= _segment_hits_triangle(p[x, k0], p[x, k1], a, b, c, eps)
        hits += int(hit.sum())
    return hits


# ---------------------------------------------------------------------------
# ASCII triangle-mesh interchange (Wavefront OBJ with per-face normals)
# ---------------------------------------------------------------------------

def write_obj(path, surface):
    normals = surface.face_normals()
    with open(path, "w") as fh:
        fh.write("# inner shell boundary\n")
        for x, y, z in surface.vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for x, y, z in normals:
            fh.write(f"vn {x:.17g} {y:.17g} {z:.17g}\n")
        for k, (a, b, c) in enumerate(surface.triangles + 1):
            fh.write(f"f {a}//{k + 1} {b}//{k + 1} {c}//{k + 1}\n")


def read_obj(path):
    verts, tris = [], []
    with open(path) as fh:
        for line in fh:
            head = line.split()
            if not head:
                continue
            if head[0] == "v":
                verts.append([float(v) for v in head[1:4]])
            elif head[0] == "f":
                tris.append([int(tok.split("/")[0]) - 1 for tok in head[1:4]])
    return TriangleSurface(np.array(verts, float).reshape(-1, 3), np.array(tris, np.int64).reshape(-1, 3))
