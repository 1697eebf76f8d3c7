"""Sparse undirected graphs, GCN renormalisation and topology statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph in CSR form.

    Neighbour lists are sorted and symmetric and never contain the node
    itself; self-loops only appear in :func:`normalize`.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_edges(
        cls,
        num_nodes,
        edges,
        features=None,
        labels=None,
        train_mask=None,
        val_mask=None,
        test_mask=None,
        num_classes=None,
        meta=None,
    ):
        """Build a graph from an iterable/array of ``(i, j)`` pairs.

        Direction is ignored. Duplicate edges and self-loops are dropped
        and counted in ``meta`` (``duplicate_edges``, ``self_loops``).
        """
        n = int(num_nodes)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        loops = e[:, 0] == e[:, 1]
        n_loops = int(loops.sum())
        e = e[~loops]
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keys = np.unique(lo * n + hi) if e.size else np.empty(0, dtype=np.int64)
        n_dups = int(e.shape[0] - keys.size)
        lo, hi = (keys // n, keys % n) if n else (keys, keys)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        indices = dst.astype(np.int64)

        if features is None:
            features = np.zeros((n, 0))
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.shape[0] != n:
            raise ValueError(f"features have {features.shape[0]} rows, expected {n}")
        labels = np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if n else 0
        empty = np.zeros(n, dtype=bool)
        meta = dict(meta or {})
        meta.setdefault("duplicate_edges", 0)
        meta.setdefault("self_loops", 0)
        meta["duplicate_edges"] += n_dups
        meta["self_loops"] += n_loops
        if n_dups or n_loops:
            log.warning("dropped %d duplicate edges and %d self-loops", n_dups, n_loops)
        g = cls(
            num_nodes=n,
            indptr=indptr,
            indices=indices,
            features=features,
            labels=labels,
            train_mask=empty.copy() if train_mask is None else np.asarray(train_mask, dtype=bool),
            val_mask=empty.copy() if val_mask is None else np.asarray(val_mask, dtype=bool),
            test_mask=empty.copy() if test_mask is None else np.asarray(test_mask, dtype=bool),
            num_classes=int(num_classes),
            meta=meta,
        )
        g.validate()
        return g

    def replace(self, **changes):
        """Copy with some fields swapped (structure is shared)."""
        fields = dict(
            num_nodes=self.num_nodes,
            indptr=self.indptr,
            indices=self.indices,
            features=self.features,
            labels=self.labels,
            train_mask=self.train_mask,
            val_mask=self.val_mask,
            test_mask=self.test_mask,
            num_classes=self.num_classes,
            meta=dict(self.meta),
        )
        fields.update(changes)
        g = Graph(**fields)
        g.validate()
        return g

    @property
    def num_edges(self):
        return int(self.indices.size // 2)

    @property
    def feature_dim(self):
        return int(self.features.shape[1])

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def neighbors(self, i):
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def has_edge(self, i, j):
        nb = self.neighbors(i)
        pos = np.searchsorted(nb, j)
        return bool(pos < nb.size and nb[pos] == j)

    def edge_list(self):
        """Undirected edges as an ``(m, 2)`` array with ``i < j``, sorted."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees)
        keep = src < self.indices
        return np.stack([src[keep], self.indices[keep]], axis=1)

    def validate(self):
        n = self.num_nodes
        if self.indptr.shape != (n + 1,) or self.indptr[0] != 0 or self.indptr[-1] != self.indices.size:
            raise ValueError("malformed indptr")
        src = np.repeat(np.arange(n), self.degrees)
        if np.any(src == self.indices):
            raise ValueError("self-loop stored in adjacency")
        if self.indices.size:
            same_row = src[1:] == src[:-1]
            if np.any(self.indices[1:][same_row] <= self.indices[:-1][same_row]):
                raise ValueError("neighbour lists must be strictly increasing")
            fwd = np.sort(src * n + self.indices)
            back = np.sort(self.indices * n + src)
            if not np.array_equal(fwd, back):
                raise ValueError("adjacency is not symmetric")
        for name in ("labels", "train_mask", "val_mask", "test_mask"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        masks = self.train_mask.astype(int) + self.val_mask.astype(int) + self.test_mask.astype(int)
        if np.any(masks > 1):
            raise ValueError("split masks overlap")
        labeled = self.train_mask | self.val_mask | self.test_mask
        if np.any(self.labels[labeled] < 0) or np.any(self.labels[labeled] >= self.num_classes):
            raise ValueError("label outside [0, num_classes)")


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """CSR matrix D~^-1/2 (A + I) D~^-1/2 with one self-loop per row."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def shape(self):
        return (self.n, self.n)

    def matmul(self, h):
        h = np.asarray(h)
        if h.ndim != 2 or h.shape[0] != self.n:
            raise ValueError(f"spmm shape mismatch: ({self.n}, {self.n}) @ {h.shape}")
        return kernels.spmm(self.indptr, self.indices, self.data, h)

    __matmul__ = matmul

    def to_dense(self):
        dense = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        dense[rows, self.indices] = self.data
        return dense


def _self_looped_structure(graph):
    n = graph.num_nodes
    deg = graph.degrees
    src = np.concatenate([np.repeat(np.arange(n), deg), np.arange(n)])
    dst = np.concatenate([graph.indices, np.arange(n)])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg + 1, out=indptr[1:])
    return indptr, src[order], dst[order].astype(np.int64)


def normalize(graph: Graph) -> NormalizedAdjacency:
    indptr, rows, cols = _self_looped_structure(graph)
    dt = (graph.degrees + 1).astype(np.float64)
    # product is commutative, so value(i, j) == value(j, i) bit for bit
    data = 1.0 / np.sqrt(dt[rows] * dt[cols])
    return NormalizedAdjacency(graph.num_nodes, indptr, cols, data)


def row_normalized(graph: Graph) -> NormalizedAdjacency:
    """D~^-1 (A + I): the mean-aggregation operator (not symmetric)."""
    indptr, rows, cols = _self_looped_structure(graph)
    dt = (graph.degrees + 1).astype(np.float64)
    return NormalizedAdjacency(graph.num_nodes, indptr, cols, 1.0 / dt[rows])


def hamming_distance(graph: Graph, i: int, j: int) -> int:
    """Hamming distance between rows ``i`` and ``j`` of A + I."""
    return int(kernels.hamming_block(graph.indptr, graph.indices, [i], [j])[0, 0])


def hamming_matrix(graph: Graph, rows_a, rows_b) -> np.ndarray:
    return kernels.hamming_block(graph.indptr, graph.indices, rows_a, rows_b)


def connected_components(graph: Graph):
    """Returns ``(component id per node, component count)``."""
    return kernels.component_labels(graph.indptr, graph.indices)


def shortest_path_lengths(graph: Graph, source: int) -> np.ndarray:
    return kernels.bfs_distances(graph.indptr, graph.indices, source)


def largest_component(graph: Graph) -> np.ndarray:
    """Node ids of the largest component (lowest id wins ties)."""
    comp, count = connected_components(graph)
    if count == 0:
        return np.empty(0, dtype=np.int64)
    sizes = np.bincount(comp, minlength=count)
    return np.flatnonzero(comp == int(np.argmax(sizes)))


def diameter_largest_component(graph: Graph, approx: bool = False) -> int:
    """Exact diameter of the largest component via all-sources BFS.

    With ``approx=True`` a double sweep is used instead, which only gives a
    lower bound.
    """
    if graph.num_nodes < 1:
        raise ValueError("diameter of an empty graph is undefined")
    nodes = largest_component(graph)
    if approx:
        d0 = shortest_path_lengths(graph, int(nodes[0]))
        far = int(np.argmax(d0))
        return int(shortest_path_lengths(graph, far).max())
    return int(kernels.eccentricities(graph.indptr, graph.indices, nodes).max())


def path_graph(n, **kwargs):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], **kwargs)


def cycle_graph(n, **kwargs):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], **kwargs)


def complete_graph(n, **kwargs):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], **kwargs)


def star_graph(leaves, **kwargs):
    """Hub 0 joined to nodes ``1..leaves``."""
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)], **kwargs)
