"""Fixed volumetric analysis domain: tets, vertex classes, edges, graph queries."""

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import _kernels
from .errors import (
    BoundaryTagMismatchError,
    DegenerateTetError,
    DisconnectedSkeletonError,
    MeshParseError,
    NonManifoldBoundaryError,
    SkeletonMissingError,
)


class VertexClass(IntEnum):
    BOUNDARY = 0
    SKELETON = 1
    INTERIOR = 2


# outward-facing faces of a positively oriented tet (a, b, c, d)
TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])
# local edge order shared with the 10-node element
TET_EDGES = np.array([[0, 1], [1, 2], [0, 2], [0, 3], [1, 3], [2, 3]])

DEGENERATE_RTOL = 1e-12


def signed_volumes(vertices, tets):
    p = vertices[tets]
    return np.einsum("ij,ij->i", p[:, 1] - p[:, 0], np.cross(p[:, 2] - p[:, 0], p[:, 3] - p[:, 0])) / 6.0


def barycentric_gradients(vertices, tets):
    """Constant gradients of the four barycentric coordinates of each tet, shape (m, 4, 3)."""
    p = vertices[tets]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=2)
    inv = np.linalg.inv(jac)
    return np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)


@dataclass(frozen=True, eq=False)
class VolumetricMesh:
    vertices: np.ndarray
    tets: np.ndarray
    boundary_faces: np.ndarray
    vertex_class: np.ndarray
    edges: np.ndarray
    edge_lengths: np.ndarray

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    @cached_property
    def volumes(self):
        return signed_volumes(self.vertices, self.tets)

    @property
    def total_volume(self):
        return float(self.volumes.sum())

    @cached_property
    def boundary(self):
        return np.flatnonzero(self.vertex_class == VertexClass.BOUNDARY)

    @cached_property
    def skeleton(self):
        return np.flatnonzero(self.vertex_class == VertexClass.SKELETON)

    @cached_property
    def interior(self):
        return np.flatnonzero(self.vertex_class == VertexClass.INTERIOR)

    @cached_property
    def boundary_local(self):
        """Map from global vertex id to position in ``boundary`` (-1 elsewhere)."""
        loc = np.full(self.n_vertices, -1, np.int64)
        loc[self.boundary] = np.arange(len(self.boundary))
        return loc

    @cached_property
    def mean_edge_length(self):
        return float(self.edge_lengths.mean())

    @cached_property
    def graph(self):
        """Symmetric CSR adjacency of the full edge graph, Euclidean weights."""
        n = self.n_vertices
        i, j = self.edges.T
        g = sparse.coo_matrix(
            (np.r_[self.edge_lengths, self.edge_lengths], (np.r_[i, j], np.r_[j, i])), shape=(n, n)
        ).tocsr()
        g.sort_indices()
        return g

    @cached_property
    def boundary_edges(self):
        f = self.boundary_faces
        e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def boundary_graph(self):
        """Weighted CSR graph over boundary vertices (local indexing)."""
        nb = len(self.boundary)
        e = self.boundary_local[self.boundary_edges]
        w = np.linalg.norm(self.vertices[self.boundary_edges[:, 0]] - self.vertices[self.boundary_edges[:, 1]], axis=1)
        g = sparse.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(nb, nb)).tocsr()
        g.sort_indices()
        return g

    @cached_property
    def _face_table(self):
        faces = self.tets[:, TET_FACES].reshape(-1, 3)
        key = np.sort(faces, axis=1)
        uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return faces, inverse.ravel(), counts

    @cached_property
    def boundary_face_tets(self):
        """Index of the tet owning each boundary face."""
        faces, inverse, counts = self._face_table
        idx = np.flatnonzero(counts[inverse] == 1)
        return idx // 4

    @cached_property
    def boundary_layer(self):
        """Boolean mask of tets that own at least one boundary face."""
        mask = np.zeros(self.n_tets, bool)
        mask[self.boundary_face_tets] = True
        return mask

    @cached_property
    def tet_adjacency(self):
        """Pairs of tets sharing a face, shape (k, 2)."""
        faces, inverse, counts = self._face_table
        order = np.argsort(inverse, kind="stable")
        inv_sorted = inverse[order]
        shared = np.flatnonzero(counts == 2)
        starts = np.searchsorted(inv_sorted, shared)
        return np.stack([order[starts] // 4, order[starts + 1] // 4], axis=1)

    @cached_property
    def vertex_normals(self):
        """Outward unit normals at boundary vertices (area weighted), global indexing."""
        f = self.boundary_faces
        p = self.vertices
        fn = np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]])
        vn = np.zeros_like(p)
        for k in range(3):
            np.add.at(vn, f[:, k], fn)
        norm = np.linalg.norm(vn, axis=1)
        ok = norm > 0
        vn[ok] /= norm[ok, None]
        return vn

    @cached_property
    def boundary_face_areas(self):
        p = self.vertices
        f = self.boundary_faces
        return 0.5 * np.linalg.norm(np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]]), axis=1)

    def enclosed_volume(self):
        """Volume bounded by ``boundary_faces`` via the divergence theorem."""
        p = self.vertices[self.boundary_faces]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def build_mesh(vertices, tets, skeleton, boundary=None):
    """Validate raw arrays and assemble a :class:`VolumetricMesh`.

    ``skeleton`` lists the tagged skeleton vertices.  ``boundary``, if given,
    must equal the vertex set of the extracted outer surface.
    """
    vertices = np.ascontiguousarray(vertices, np.float64)
    tets = np.array(tets, np.int64, copy=True).reshape(-1, 4)
    n = len(vertices)
    if tets.size and (tets.min() < 0 or tets.max() >= n):
        raise MeshParseError("tet references a vertex that does not exist")

    vol = signed_volumes(vertices, tets)
    edges_all = np.sort(tets[:, TET_EDGES].reshape(-1, 2), axis=1)
    edges = np.unique(edges_all, axis=0)
    lengths = np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)
    scale = lengths.mean() ** 3 if len(lengths) else 1.0
    bad = np.abs(vol) <= DEGENERATE_RTOL * scale
    if bad.any():
        raise DegenerateTetError(f"tet {int(np.flatnonzero(bad)[0])} has (near) zero volume")
    flip = vol < 0
    tets[flip] = tets[flip][:, [0, 1, 3, 2]]

    faces = tets[:, TET_FACES].reshape(-1, 3)
    key = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if (counts > 2).any():
        raise NonManifoldBoundaryError("a face is shared by more than two tets")
    bfaces = faces[counts[inverse] == 1]
    if len(bfaces) == 0:
        raise NonManifoldBoundaryError("mesh has no boundary surface")
    be = np.sort(np.concatenate([bfaces[:, [0, 1]], bfaces[:, [1, 2]], bfaces[:, [2, 0]]]), axis=1)
    _, ecount = np.unique(be, axis=0, return_counts=True)
    if (ecount != 2).any():
        raise NonManifoldBoundaryError("boundary surface has an edge not shared by exactly two faces")

    on_surface = np.zeros(n, bool)
    on_surface[bfaces.ravel()] = True
    if boundary is not None and len(boundary):
        tagged = np.zeros(n, bool)
        tagged[np.asarray(boundary, np.int64)] = True
        if (tagged != on_surface).any():
            raise BoundaryTagMismatchError(
                f"{int((tagged != on_surface).sum())} vertices disagree between boundary tags and the extracted surface"
            )

    skeleton = np.unique(np.asarray(skeleton, np.int64)) if skeleton is not None else np.zeros(0, np.int64)
    if skeleton.size == 0:
        raise SkeletonMissingError("no skeleton vertices are tagged")
    if on_surface[skeleton].any():
        raise BoundaryTagMismatchError("a skeleton vertex lies on the outer boundary")

    vclass = np.full(n, VertexClass.INTERIOR, np.int8)
    vclass[on_surface] = VertexClass.BOUNDARY
    vclass[skeleton] = VertexClass.SKELETON

    in_skel = np.zeros(n, bool)
    in_skel[skeleton] = True
    se = edges[in_skel[edges[:, 0]] & in_skel[edges[:, 1]]]
    loc = np.full(n, -1)
    loc[skeleton] = np.arange(skeleton.size)
    sg = sparse.coo_matrix((np.ones(len(se)), (loc[se[:, 0]], loc[se[:, 1]])), shape=(skeleton.size,) * 2)
    ncomp, _ = csgraph.connected_components(sg, directed=False)
    if ncomp != 1:
        raise DisconnectedSkeletonError(f"skeleton has {ncomp} connected components")

    return VolumetricMesh(vertices, tets, bfaces, vclass, edges, lengths)


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def load_mesh(path):
    """Read the ``nodes`` / ``tets`` / ``tags`` text format."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise MeshParseError(f"cannot read {path}: {exc}") from exc
    section = None
    ids, coords, tets, tags = [], [], [], []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()
        if head[0].lower() in ("nodes", "tets", "tags") and len(head) <= 2:
            section = head[0].lower()
            continue
        try:
            if section == "nodes":
                ids.append(int(head[0]))
                coords.append([float(v) for v in head[1:4]])
                if len(head) != 4:
                    raise ValueError
            elif section == "tets":
                if len(head) != 5:
                    raise ValueError
                tets.append([int(v) for v in head[1:5]])
            elif section == "tags":
                if len(head) != 2 or head[1].lower() not in ("boundary", "skeleton"):
                    raise ValueError
                tags.append((int(head[0]), head[1].lower()))
            else:
                raise MeshParseError(f"{path}:{lineno}: data outside of a section")
        except ValueError:
            raise MeshParseError(f"{path}:{lineno}: malformed {section} line: {raw!r}") from None
    if not ids or not tets:
        raise MeshParseError(f"{path}: missing nodes or tets section")
    index = {vid: k for k, vid in enumerate(ids)}
    if len(index) != len(ids):
        raise MeshParseError(f"{path}: duplicate node id")
    try:
        tets = [[index[v] for v in t] for t in tets]
        skeleton = [index[v] for v, kind in tags if kind == "skeleton"]
        boundary = [index[v] for v, kind in tags if kind == "boundary"]
    except KeyError as exc:
        raise MeshParseError(f"{path}: reference to unknown node id {exc.args[0]}") from None
    return build_mesh(np.array(coords), np.array(tets), skeleton, boundary or None)


def write_mesh(path, mesh):
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_vertices}\n")
        for k, (x, y, z) in enumerate(mesh.vertices):
            fh.write(f"{k} {x:.17g} {y:.17g} {z:.17g}\n")
        fh.write(f"tets {mesh.n_tets}\n")
        for k, t in enumerate(mesh.tets):
            fh.write(f"{k} {t[0]} {t[1]} {t[2]} {t[3]}\n")
        tagged = [(v, "boundary") for v in mesh.boundary] + [(v, "skeleton") for v in mesh.skeleton]
        fh.write(f"tags {len(tagged)}\n")
        for v, kind in sorted(tagged):
            fh.write(f"{v} {kind}\n")


# ---------------------------------------------------------------------------
# quadratic elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadraticMesh:
    base: VolumetricMesh
    nodes: np.ndarray        # corner vertices followed by one mid-node per edge
    elements: np.ndarray     # (m, 10): corners, then mid-nodes in TET_EDGES order

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def mid_nodes(self):
        return self.nodes[self.base.n_vertices:]


def edge_index(mesh, pairs):
    """Row of ``mesh.edges`` for each (i, j) vertex pair."""
    pairs = np.sort(np.asarray(pairs, np.int64), axis=-1)
    n = mesh.n_vertices
    keys = mesh.edges[:, 0] * n + mesh.edges[:, 1]
    q = pairs[..., 0] * n + pairs[..., 1]
    pos = np.searchsorted(keys, q)
    return pos


def build_quadratic(mesh):
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    nodes = np.vstack([mesh.vertices, mids])
    local = mesh.tets[:, TET_EDGES]  # (m, 6, 2)
    eidx = edge_index(mesh, local)
    elements = np.hstack([mesh.tets, mesh.n_vertices + eidx])
    return QuadraticMesh(mesh, nodes, elements)


# ---------------------------------------------------------------------------
# graph queries
# ---------------------------------------------------------------------------

def bounded_graph_distances(mesh, source, radius):
    """Shortest-path distances from ``source`` over the edge graph, kept up to ``radius``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    g = mesh.graph
    ptr, tgt, dist = _kernels.bounded_dijkstra(g.indptr, g.indices, g.data, [source], radius)
    return dict(zip(tgt.tolist(), dist.tolist()))


def boundary_distance_table(mesh, radius):
    """Truncated distances seeded from every boundary vertex, CSR layout.

    Row ``k`` belongs to ``mesh.boundary[k]``.
    """
    g = mesh.graph
    return _kernels.bounded_dijkstra(g.indptr, g.indices, g.data, mesh.boundary, radius)


def surface_graph_laplacian(mesh):
    """Combinatorial Laplacian of the boundary edge graph (boundary-local indexing)."""
    g = mesh.boundary_graph.copy()
    g.data[:] = 1.0
    deg = np.asarray(g.sum(axis=1)).ravel()
    return (sparse.diags(deg) - g).tocsr()
