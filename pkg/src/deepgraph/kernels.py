"""Hot inner loops over CSR graphs.

Every public kernel has a numba implementation (``_*_nb``) and a
vectorised numpy implementation (``_*_np``). The public function
dispatches on ``_accel.USE_NUMBA`` at call time, so both paths stay
reachable from tests and the benchmark.
"""

import numpy as np

from . import _accel
from ._accel import njit

# ---------------------------------------------------------------- spmm


@njit(cache=True)
def _spmm_nb(indptr, indices, data, h):
    n = indptr.shape[0] - 1
    k = h.shape[1]
    out = np.zeros((n, k))
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(k):
                out[i, c] += v * h[j, c]
    return out


def _spmm_np(indptr, indices, data, h):
    n = indptr.shape[0] - 1
    out = np.zeros((n, h.shape[1]), dtype=np.result_type(data, h))
    if indices.size == 0:
        return out
    prod = data[:, None] * h[indices]
    lens = np.diff(indptr)
    nonempty = lens > 0
    out[nonempty] = np.add.reduceat(prod, indptr[:-1][nonempty], axis=0)
    return out


def spmm(indptr, indices, data, h):
    """Dense ``S @ h`` for a CSR matrix ``S`` given by its three arrays.

    Non-float64 operands (e.g. extended precision) always take the numpy path.
    """
    dtype = np.result_type(data, h, np.float64)
    h = np.ascontiguousarray(h, dtype=dtype)
    if _accel.USE_NUMBA and dtype == np.float64:
        return _spmm_nb(indptr, indices, data, h)
    return _spmm_np(indptr, indices, data, h)


# ----------------------------------------------------------------- BFS


@njit(cache=True)
def _bfs_nb(indptr, indices, source):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if dist[v] < 0:
                dist[v] = du
                queue[tail] = v
                tail += 1
    return dist


def _gather_neighbors(indptr, indices, nodes):
    starts = indptr[nodes]
    lens = indptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return indices[:0]
    offsets = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
    return indices[offsets]


def _bfs_np(indptr, indices, source):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        nbrs = _gather_neighbors(indptr, indices, frontier)
        nbrs = np.unique(nbrs[dist[nbrs] < 0])
        level += 1
        dist[nbrs] = level
        frontier = nbrs
    return dist


def bfs_distances(indptr, indices, source):
    """Hop distances from ``source``; ``-1`` marks unreachable nodes."""
    if _accel.USE_NUMBA:
        return _bfs_nb(indptr, indices, source)
    return _bfs_np(indptr, indices, source)


@njit(cache=True)
def _components_nb(indptr, indices):
    n = indptr.shape[0] - 1
    comp = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    count = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = count
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for p in range(indptr[u], indptr[u + 1]):
                v = indices[p]
                if comp[v] < 0:
                    comp[v] = count
                    queue[tail] = v
                    tail += 1
        count += 1
    return comp, count


def _components_np(indptr, indices):
    n = indptr.shape[0] - 1
    comp = np.full(n, -1, dtype=np.int64)
    count = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[_bfs_np(indptr, indices, s) >= 0] = count
        count += 1
    return comp, count


def component_labels(indptr, indices):
    """BFS labelling; ids are dense and ordered by smallest member node."""
    if _accel.USE_NUMBA:
        comp, count = _components_nb(indptr, indices)
        return comp, int(count)
    return _components_np(indptr, indices)


@njit(cache=True)
def _eccentricities_nb(indptr, indices, sources):
    out = np.empty(sources.shape[0], dtype=np.int64)
    for t in range(sources.shape[0]):
        out[t] = _bfs_nb(indptr, indices, sources[t]).max()
    return out


def eccentricities(indptr, indices, sources):
    """Max BFS depth from each source (within its own component)."""
    sources = np.asarray(sources, dtype=np.int64)
    if _accel.USE_NUMBA:
        return _eccentricities_nb(indptr, indices, sources)
    return np.array(
        [_bfs_np(indptr, indices, s).max() for s in sources], dtype=np.int64
    )


# ------------------------------------------------------- hamming rows


@njit(cache=True)
def _common_sorted(indices, a0, a1, b0, b1):
    common = 0
    while a0 < a1 and b0 < b1:
        x = indices[a0]
        y = indices[b0]
        if x == y:
            common += 1
            a0 += 1
            b0 += 1
        elif x < y:
            a0 += 1
        else:
            b0 += 1
    return common


@njit(cache=True)
def _is_adjacent(indptr, indices, i, j):
    lo = indptr[i]
    hi = indptr[i + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        v = indices[mid]
        if v == j:
            return True
        if v < j:
            lo = mid + 1
        else:
            hi = mid
    return False


@njit(cache=True)
def _hamming_one(indptr, indices, i, j):
    if i == j:
        return 0
    di = indptr[i + 1] - indptr[i]
    dj = indptr[j + 1] - indptr[j]
    common = _common_sorted(indices, indptr[i], indptr[i + 1], indptr[j], indptr[j + 1])
    if _is_adjacent(indptr, indices, i, j):
        # i and j each sit in both self-looped rows
        common += 2
    return (di + 1) + (dj + 1) - 2 * common


@njit(cache=True)
def _hamming_block_nb(indptr, indices, rows_a, rows_b):
    out = np.empty((rows_a.shape[0], rows_b.shape[0]), dtype=np.int64)
    for s in range(rows_a.shape[0]):
        for t in range(rows_b.shape[0]):
            out[s, t] = _hamming_one(indptr, indices, rows_a[s], rows_b[t])
    return out


def _indicator_rows(indptr, indices, rows, n):
    dense = np.zeros((rows.shape[0], n))
    lens = indptr[rows + 1] - indptr[rows]
    owner = np.repeat(np.arange(rows.shape[0]), lens)
    dense[owner, _gather_neighbors(indptr, indices, rows)] = 1.0
    dense[np.arange(rows.shape[0]), rows] = 1.0
    return dense


def _hamming_block_np(indptr, indices, rows_a, rows_b):
    n = indptr.shape[0] - 1
    ia = _indicator_rows(indptr, indices, rows_a, n)
    ib = _indicator_rows(indptr, indices, rows_b, n)
    common = ia @ ib.T
    sizes_a = ia.sum(axis=1)
    sizes_b = ib.sum(axis=1)
    return np.rint(sizes_a[:, None] + sizes_b[None, :] - 2.0 * common).astype(np.int64)


def hamming_block(indptr, indices, rows_a, rows_b):
    """Hamming distances between self-looped adjacency rows, all pairs of
    ``rows_a`` x ``rows_b``."""
    rows_a = np.asarray(rows_a, dtype=np.int64)
    rows_b = np.asarray(rows_b, dtype=np.int64)
    if _accel.USE_NUMBA:
        return _hamming_block_nb(indptr, indices, rows_a, rows_b)
    return _hamming_block_np(indptr, indices, rows_a, rows_b)
