"""Small procedural meshes: voxel solids split into Kuhn tets, a mapped ball."""

from itertools import permutations

import numpy as np

from .mesh import build_mesh

_KUHN = [np.array(p) for p in permutations(range(3))]


def voxel_tets(occupancy, mirror_at=None):
    """Split every occupied voxel into 6 tets sharing one main diagonal.

    Returns ``(lattice, tets)`` where ``lattice`` holds the integer lattice
    coordinates of the used vertices.  The split is conforming across voxels.
    With ``mirror_at`` (a lattice point) the split is reflected per octant so
    that every diagonal points away from that point; this keeps tets well
    shaped when the lattice is later projected onto a sphere.
    """
    occ = np.asarray(occupancy, bool)
    shape = np.array(occ.shape) + 1
    vox = np.argwhere(occ)
    if mirror_at is None:
        step = np.ones_like(vox)
    else:
        step = np.where(vox + 0.5 - np.asarray(mirror_at) > 0, 1, -1)
    start = vox + (step < 0)
    tets = []
    for perm in _KUHN:
        cur = start
        corners = [cur]
        for axis in perm:
            cur = cur.copy()
            cur[:, axis] += step[:, axis]
            corners.append(cur)
        tets.append(np.stack([np.ravel_multi_index(c.T, shape) for c in corners], axis=1))
    # voxel-major order keeps neighbouring tets close in memory
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    used, inverse = np.unique(tets, return_inverse=True)
    lattice = np.stack(np.unravel_index(used, shape), axis=1)
    return lattice, inverse.reshape(-1, 4)


def _lattice_lookup(lattice):
    return {tuple(p): k for k, p in enumerate(lattice.tolist())}


def bar(nx=6, ny=6, nz=46, cell=1.0, margin=1):
    """Box of ``nx*ny*nz`` voxels with an axial skeleton along z.

    ``nx`` and ``ny`` must be even so a vertex line runs through the centre.
    The skeleton stops ``margin`` cells short of each end face.
    """
    if nx % 2 or ny % 2:
        raise ValueError("cross-section cell counts must be even")
    lattice, tets = voxel_tets(np.ones((nx, ny, nz), bool))
    look = _lattice_lookup(lattice)
    skel = [look[(nx // 2, ny // 2, k)] for k in range(margin, nz - margin + 1)]
    return build_mesh(lattice * float(cell), tets, skel)


def box(n=4, cell=1.0):
    """Cube of ``n**3`` voxels (``n`` even) with a single-vertex central skeleton."""
    if n % 2:
        raise ValueError("n must be even")
    lattice, tets = voxel_tets(np.ones((n, n, n), bool))
    look = _lattice_lookup(lattice)
    return build_mesh(lattice * float(cell), tets, [look[(n // 2,) * 3]])


def ball(n=6, radius=1.0, core=1):
    """Ball meshed by radially projecting a ``(2n)**3`` voxel cube.

    The map keeps each concentric lattice shell on a sphere, so the skeleton
    (every vertex within ``core`` lattice rings of the centre) is a small
    sphere of radius ``core * radius / n`` filled to the centre.
    """
    lattice, tets = voxel_tets(np.ones((2 * n,) * 3, bool), mirror_at=(n, n, n))
    c = lattice - n
    inf = np.abs(c).max(axis=1).astype(float)
    two = np.linalg.norm(c, axis=1)
    scale = np.divide(inf, two, out=np.zeros_like(two), where=two > 0)
    pts = c * scale[:, None] * (radius / n)
    skel = np.flatnonzero(inf <= core)
    return build_mesh(pts, tets, skel)


def limbs(arm=5, body=4, width=2):
    """Multi-limb solid: a cubic body with five square arms, skeleton along the arm axes."""
    if body % 2 or width % 2:
        raise ValueError("body and width must be even")
    n = body + 2 * arm
    occ = np.zeros((n, n, arm + body), bool)
    lo, hi = arm, arm + body
    occ[lo:hi, lo:hi, :body] = True
    mid = arm + body // 2
    a, b = mid - width // 2, mid + width // 2
    occ[:lo, a:b, body // 2 - width // 2:body // 2 + width // 2] = True
    occ[hi:, a:b, body // 2 - width // 2:body // 2 + width // 2] = True
    occ[a:b, :lo, body // 2 - width // 2:body // 2 + width // 2] = True
    occ[a:b, hi:, body // 2 - width // 2:body // 2 + width // 2] = True
    occ[a:b, a:b, body:] = True
    lattice, tets = voxel_tets(occ)
    look = _lattice_lookup(lattice)
    zc = body // 2
    skel = set()
    for i in range(1, n):
        skel.add(look[(i, mid, zc)])
        skel.add(look[(mid, i, zc)])
    for k in range(zc, arm + body):
        skel.add(look[(mid, mid, k)])
    return build_mesh(lattice.astype(float), tets, sorted(skel))


def single_tet():
    return (
        np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]),
        np.array([[0, 1, 2, 3]]),
    )


def split_tet():
    """Regular-ish tet split into four around an interior centroid vertex."""
    v = np.array([[0.0, 0, 0], [2, 0, 0], [0, 2, 0], [0, 0, 2], [0.5, 0.5, 0.5]])
    t = np.array([[0, 1, 2, 4], [0, 1, 4, 3], [0, 4, 2, 3], [4, 1, 2, 3]])
    return v, t


def contact_patch(mesh, direction=(0.8, 0.2, 0.56), count=200):
    """The ``count`` boundary vertices closest to the unit vector ``direction``, sorted by id."""
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    b = mesh.boundary
    near = np.argsort(np.linalg.norm(mesh.vertices[b] - d, axis=1), kind="stable")[:count]
    return np.sort(b[near])
