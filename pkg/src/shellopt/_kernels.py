"""Hot inner loops, each with a numba kernel and a pure numpy/scipy twin.

The numba path is used when numba imports cleanly and the environment
variable ``SHELLOPT_DISABLE_NUMBA`` is unset (or ``0``).  Both paths return
identical results up to floating-point summation order; the test-suite runs
them against each other.
"""

import os

import numpy as np
from scipy.sparse import csgraph, csr_matrix

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SHELLOPT_DISABLE_NUMBA", "0") in ("", "0")


def backend():
    return "numba" if USE_NUMBA else "numpy"


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# truncated single-source shortest paths, many sources
# ---------------------------------------------------------------------------

@_njit
def _heap_push(hd, hv, size, d, v):
    i = size
    hd[i] = d
    hv[i] = v
    while i > 0:
        p = (i - 1) // 2
        if hd[p] <= hd[i]:
            break
        hd[p], hd[i] = hd[i], hd[p]
        hv[p], hv[i] = hv[i], hv[p]
        i = p
    return size + 1


@_njit
def _heap_pop(hd, hv, size):
    d = hd[0]
    v = hv[0]
    size -= 1
    hd[0] = hd[size]
    hv[0] = hv[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        c = l
        r = l + 1
        if r < size and hd[r] < hd[l]:
            c = r
        if hd[i] <= hd[c]:
            break
        hd[c], hd[i] = hd[i], hd[c]
        hv[c], hv[i] = hv[i], hv[c]
        i = c
    return d, v, size


@_njit
def _bounded_dijkstra_nb(indptr, indices, weights, sources, radius):
    n = indptr.size - 1
    dist = np.full(n, np.inf)
    done = np.zeros(n, np.bool_)
    touched = np.empty(n, np.int64)
    hd = np.empty(indices.size + 1)
    hv = np.empty(indices.size + 1, np.int64)
    out_ptr = np.zeros(sources.size + 1, np.int64)
    cap = max(64, 8 * sources.size)
    out_t = np.empty(cap, np.int64)
    out_d = np.empty(cap)
    pos = 0
    for si in range(sources.size):
        s = sources[si]
        start = pos
        dist[s] = 0.0
        touched[0] = s
        ntouch = 1
        hsize = _heap_push(hd, hv, 0, 0.0, s)
        while hsize > 0:
            d, v, hsize = _heap_pop(hd, hv, hsize)
            if done[v]:
                continue
            done[v] = True
            if pos == cap:
                cap *= 2
                nt = np.empty(cap, np.int64)
                nd_ = np.empty(cap)
                nt[:pos] = out_t[:pos]
                nd_[:pos] = out_d[:pos]
                out_t = nt
                out_d = nd_
            out_t[pos] = v
            out_d[pos] = d
            pos += 1
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                nd = d + weights[k]
                if nd <= radius and nd < dist[u]:
                    if dist[u] == np.inf:
                        touched[ntouch] = u
                        ntouch += 1
                    dist[u] = nd
                    hsize = _heap_push(hd, hv, hsize, nd, u)
        order = np.argsort(out_t[start:pos])
        bt = out_t[start:pos][order]
        bd = out_d[start:pos][order]
        out_t[start:pos] = bt
        out_d[start:pos] = bd
        for k in range(ntouch):
            dist[touched[k]] = np.inf
            done[touched[k]] = False
        out_ptr[si + 1] = pos
    return out_ptr, out_t[:pos].copy(), out_d[:pos].copy()


def _bounded_dijkstra_np(indptr, indices, weights, sources, radius, chunk=256):
    n = indptr.size - 1
    graph = csr_matrix((weights, indices, indptr), shape=(n, n))
    ptr = [0]
    targets, dists = [], []
    for lo in range(0, sources.size, chunk):
        block = csgraph.dijkstra(graph, directed=True, indices=sources[lo:lo + chunk], limit=radius)
        rows, cols = np.nonzero(block <= radius)
        counts = np.bincount(rows, minlength=block.shape[0])
        ptr.extend((ptr[-1] + np.cumsum(counts)).tolist())
        targets.append(cols.astype(np.int64))
        dists.append(block[rows, cols])
    if not targets:
        return np.zeros(1, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.asarray(ptr, np.int64), np.concatenate(targets), np.concatenate(dists)


def bounded_dijkstra(indptr, indices, weights, sources, radius):
    """Truncated shortest paths from each source over a weighted CSR graph.

    Returns ``(ptr, targets, dists)`` in CSR layout: the reachable vertices of
    ``sources[k]`` with distance ``<= radius`` are ``targets[ptr[k]:ptr[k+1]]``,
    sorted by vertex index.
    """
    indptr = np.ascontiguousarray(indptr, np.int64)
    indices = np.ascontiguousarray(indices, np.int64)
    weights = np.ascontiguousarray(weights, np.float64)
    sources = np.ascontiguousarray(np.atleast_1d(sources), np.int64)
    if USE_NUMBA:
        return _bounded_dijkstra_nb(indptr, indices, weights, sources, float(radius))
    return _bounded_dijkstra_np(indptr, indices, weights, sources, float(radius))


# ---------------------------------------------------------------------------
# volume fraction of {T >= Tc} inside linear tets
# ---------------------------------------------------------------------------

@_njit
def _clip_fractions_nb(temps, tc):
    m = temps.shape[0]
    out = np.empty(m)
    t = np.empty(4)
    for e in range(m):
        for k in range(4):
            t[k] = temps[e, k]
        # insertion sort; the fraction is permutation invariant
        for i in range(1, 4):
            x = t[i]
            j = i - 1
            while j >= 0 and t[j] > x:
                t[j + 1] = t[j]
                j -= 1
            t[j + 1] = x
        nb = 0
        for k in range(4):
            if t[k] < tc:
                nb += 1
        if nb == 0:
            out[e] = 1.0
        elif nb == 4:
            out[e] = 0.0
        elif nb == 1:
            v = 1.0
            for k in range(1, 4):
                v *= (tc - t[0]) / (t[k] - t[0])
            out[e] = 1.0 - v
        elif nb == 3:
            s = 1.0
            for k in range(3):
                s *= (t[3] - tc) / (t[3] - t[k])
            out[e] = s
        else:
            out[e] = 1.0 - _prism_fraction(t[0], t[1], t[2], t[3], tc)
    return out


@_njit
def _det3(ax, ay, az, bx, by, bz, cx, cy, cz):
    return ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx)


@_njit
def _prism_fraction(ta, tb, tc_, td, iso):
    # reference tet a=0, b=e1, c=e2, d=e3; a, b below iso
    sac = (iso - ta) / (tc_ - ta)
    sad = (iso - ta) / (td - ta)
    sbc = (iso - tb) / (tc_ - tb)
    sbd = (iso - tb) / (td - tb)
    # prism A=(a, pac, pad), B=(b, pbc, pbd)
    a0 = (0.0, 0.0, 0.0)
    a1 = (0.0, sac, 0.0)
    a2 = (0.0, 0.0, sad)
    b0 = (1.0, 0.0, 0.0)
    b1 = (1.0 - sbc, sbc, 0.0)
    b2 = (1.0 - sbd, 0.0, sbd)
    v = 0.0
    for p, q, r, s in ((a0, a1, a2, b2), (a0, a1, b1, b2), (a0, b0, b1, b2)):
        v += abs(_det3(q[0] - p[0], q[1] - p[1], q[2] - p[2],
                       r[0] - p[0], r[1] - p[1], r[2] - p[2],
                       s[0] - p[0], s[1] - p[1], s[2] - p[2]))
    return v


def _clip_fractions_np(temps, tc):
    t = np.sort(np.asarray(temps, float), axis=1)
    nb = np.count_nonzero(t < tc, axis=1)
    out = np.where(nb == 0, 1.0, 0.0)

    m1 = nb == 1
    if m1.any():
        s = t[m1]
        v = np.prod((tc - s[:, :1]) / (s[:, 1:] - s[:, :1]), axis=1)
        out[m1] = 1.0 - v

    m3 = nb == 3
    if m3.any():
        s = t[m3]
        out[m3] = np.prod((s[:, 3:] - tc) / (s[:, 3:] - s[:, :3]), axis=1)

    m2 = nb == 2
    if m2.any():
        s = t[m2]
        ta, tb, tcc, td = s.T
        sac = (tc - ta) / (tcc - ta)
        sad = (tc - ta) / (td - ta)
        sbc = (tc - tb) / (tcc - tb)
        sbd = (tc - tb) / (td - tb)
        k = len(s)
        zero, one = np.zeros(k), np.ones(k)
        a0 = np.stack([zero, zero, zero], 1)
        a1 = np.stack([zero, sac, zero], 1)
        a2 = np.stack([zero, zero, sad], 1)
        b0 = np.stack([one, zero, zero], 1)
        b1 = np.stack([one - sbc, sbc, zero], 1)
        b2 = np.stack([one - sbd, zero, sbd], 1)
        v = np.zeros(k)
        for p, q, r, w in ((a0, a1, a2, b2), (a0, a1, b1, b2), (a0, b0, b1, b2)):
            v += np.abs(np.linalg.det(np.stack([q - p, r - p, w - p], 1)))
        out[m2] = 1.0 - v
    return out


def clip_fractions(temps, tc):
    """Per-tet volume fraction of the region ``T >= tc`` under linear interpolation."""
    temps = np.ascontiguousarray(np.atleast_2d(temps), np.float64)
    if USE_NUMBA:
        return _clip_fractions_nb(temps, float(tc))
    return _clip_fractions_np(temps, float(tc))


# ---------------------------------------------------------------------------
# deterministic scatter-add (sparse assembly)
# ---------------------------------------------------------------------------

@_njit
def _scatter_add_nb(index, values, size):
    out = np.zeros(size)
    for k in range(index.size):
        out[index[k]] += values[k]
    return out


def scatter_add(index, values, size):
    """``out[index[k]] += values[k]`` in index order."""
    index = np.ascontiguousarray(index, np.int64)
    values = np.ascontiguousarray(values, np.float64).ravel()
    if USE_NUMBA:
        return _scatter_add_nb(index, values, int(size))
    return np.bincount(index, weights=values, minlength=int(size)).astype(np.float64)
