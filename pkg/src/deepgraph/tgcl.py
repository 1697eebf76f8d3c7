"""Topology-guided contrastive loss.

Positives of a central node are its 1-hop neighbours; negatives are nodes
not adjacent to it. Each pair is weighted by the Hamming distance between
self-looped adjacency rows::

    sigma_ij = 1 - dist(i, j) / n      (positives, in (0, 1])
    gamma_ik = 1 + dist(i, k) / n      (negatives, in (1, 2])

and the per-pair loss is
``-log(sigma f_ij / (sigma f_ij + sum_k gamma_ik f_ik))`` with
``f(a, b) = exp(cos(a, b) / tau)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import Graph, hamming_distance, hamming_matrix

log = logging.getLogger(__name__)

BRUTEFORCE_MAX_NODES = 2000


@dataclass
class TgclConfig:
    alpha: float = 0.0
    per_class_centrals: int = 10
    positives_per_central: int = 5
    tau: float = 1.0
    projection: str = "identity"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.projection not in ("identity", "linear"):
            raise ValueError(f"unknown projection {self.projection!r}")


@dataclass
class ContrastBatch:
    centrals: np.ndarray
    positives: list
    negatives: list
    sigma: list
    gamma: list

    def __len__(self):
        return len(self.centrals)

    def weight_range_violations(self):
        """Count of weights outside sigma in (0, 1] / gamma in (1, 2]."""
        bad = 0
        for s, g in zip(self.sigma, self.gamma):
            bad += int(np.sum((s <= 0) | (s > 1)))
            bad += int(np.sum((g <= 1) | (g > 2)))
        return bad

    def num_pairs(self):
        return sum(p.size for p in self.positives), sum(k.size for k in self.negatives)


def sigma_weight(graph: Graph, i: int, j: int) -> float:
    if not graph.has_edge(i, j):
        raise ValueError(f"sigma needs an adjacent pair, ({i}, {j}) is not an edge")
    return 1.0 - hamming_distance(graph, i, j) / graph.num_nodes


def gamma_weight(graph: Graph, i: int, k: int) -> float:
    if i == k or graph.has_edge(i, k):
        raise ValueError(f"gamma needs a distinct non-adjacent pair, got ({i}, {k})")
    return 1.0 + hamming_distance(graph, i, k) / graph.num_nodes


def _non_adjacent(graph, i, candidates):
    return candidates[(candidates != i) & ~np.isin(candidates, graph.neighbors(i))]


def _attach_weights(graph, centrals, positives, negatives):
    n = graph.num_nodes
    pool = np.unique(np.concatenate([centrals] + positives + negatives)) if len(centrals) else np.empty(0, np.int64)
    dist = hamming_matrix(graph, centrals, pool)
    col = {int(v): t for t, v in enumerate(pool)}
    sigma, gamma = [], []
    for row, (p, k) in enumerate(zip(positives, negatives)):
        sigma.append(1.0 - dist[row, [col[int(v)] for v in p]] / n)
        gamma.append(1.0 + dist[row, [col[int(v)] for v in k]] / n)
    return ContrastBatch(np.asarray(centrals, dtype=np.int64), positives, negatives, sigma, gamma)


def sample_batch(graph: Graph, rng, cfg: TgclConfig) -> ContrastBatch:
    """Star-subgraph batch: per class up to ``m`` training centrals, each with
    up to ``k`` neighbours as positives; negatives of a central are the other
    batch members it is not adjacent to."""
    centrals, positives = [], []
    for c in range(graph.num_classes):
        pool = np.flatnonzero(graph.train_mask & (graph.labels == c))
        if pool.size == 0:
            log.warning("class %d has no training nodes; skipped in contrastive batch", c)
            continue
        picked = rng.choice(pool, size=min(cfg.per_class_centrals, pool.size), replace=False)
        for i in picked:
            nb = graph.neighbors(i)
            if nb.size == 0:
                continue
            if nb.size > cfg.positives_per_central:
                nb = np.sort(rng.choice(nb, size=cfg.positives_per_central, replace=False))
            centrals.append(int(i))
            positives.append(nb.astype(np.int64))
    if not centrals:
        return ContrastBatch(np.empty(0, np.int64), [], [], [], [])
    members = np.unique(np.concatenate([np.asarray(centrals)] + positives))
    negatives = [_non_adjacent(graph, i, members) for i in centrals]
    return _attach_weights(graph, np.asarray(centrals, dtype=np.int64), positives, negatives)


def full_batch(graph: Graph) -> ContrastBatch:
    """Every node with a neighbour as central, all neighbours as positives and
    the whole non-adjacent complement as negatives."""
    everyone = np.arange(graph.num_nodes)
    centrals = np.flatnonzero(graph.degrees > 0)
    positives = [graph.neighbors(i).astype(np.int64) for i in centrals]
    negatives = [_non_adjacent(graph, i, everyone) for i in centrals]
    return _attach_weights(graph, centrals, positives, negatives)


def _unit_rows(z):
    norms = np.sqrt(np.einsum("ij,ij->i", z, z))
    safe = np.where(norms > 0, norms, 1.0)
    return z / safe[:, None], norms


def _pair_arrays(batch: ContrastBatch):
    """Flattened (central slot, partner) index arrays for all pairs."""
    n_pos = np.array([p.size for p in batch.positives], dtype=np.int64)
    n_neg = np.array([k.size for k in batch.negatives], dtype=np.int64)
    slots = np.arange(len(batch))
    return (
        np.repeat(slots, n_pos),
        np.concatenate(batch.positives),
        np.concatenate(batch.sigma),
        np.repeat(slots, n_neg),
        np.concatenate(batch.negatives) if n_neg.sum() else np.empty(0, np.int64),
        np.concatenate(batch.gamma) if n_neg.sum() else np.empty(0),
        n_pos,
    )


def _segment_sum(slot, values, size):
    # np.bincount would round its weights to float64
    out = np.zeros(size, dtype=values.dtype)
    np.add.at(out, slot, values)
    return out


def _scatter_pair_grads(dz, zhat, inv_norm, a, b, cos, g):
    # d cos(z_a, z_b) / d z_a = (zhat_b - cos * zhat_a) / |z_a|
    np.add.at(dz, a, (inv_norm[a] * g)[:, None] * (zhat[b] - cos[:, None] * zhat[a]))
    np.add.at(dz, b, (inv_norm[b] * g)[:, None] * (zhat[a] - cos[:, None] * zhat[b]))


def tgcl_loss(z, batch: ContrastBatch, tau: float = 1.0):
    """Mean over centrals of the mean over their positives; returns
    ``(loss, d loss / d z)``."""
    dz = np.zeros_like(z)
    if len(batch) == 0:
        return 0.0, dz
    pos_t, pos_j, sig, neg_t, neg_k, gam, n_pos = _pair_arrays(batch)
    if np.any(n_pos == 0):
        raise ValueError(f"central node {batch.centrals[np.argmin(n_pos)]} has no positives")
    n_central = len(batch)
    zhat, norms = _unit_rows(z)
    inv_norm = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
    pos_i = batch.centrals[pos_t]
    neg_i = batch.centrals[neg_t]
    cp = np.einsum("ij,ij->i", zhat[pos_i], zhat[pos_j])
    cn = np.einsum("ij,ij->i", zhat[neg_i], zhat[neg_k])
    fp = np.exp(cp / tau)
    fn = np.exp(cn / tau)
    neg_mass = _segment_sum(neg_t, gam * fn, n_central)
    pos_mass = sig * fp
    per_pair = np.log1p(neg_mass[pos_t] / pos_mass)
    loss = np.mean(_segment_sum(pos_t, per_pair, n_central) / n_pos)

    share = 1.0 / (n_central * n_pos[pos_t])
    denom = pos_mass + neg_mass[pos_t]
    g_cp = share * (pos_mass / denom - 1.0) / tau
    inv_sum = _segment_sum(pos_t, share / denom, n_central)
    g_cn = gam * fn * inv_sum[neg_t] / tau
    _scatter_pair_grads(dz, zhat, inv_norm, pos_i, pos_j, cp, g_cp)
    _scatter_pair_grads(dz, zhat, inv_norm, neg_i, neg_k, cn, g_cn)
    return loss, dz


def tgcl_loss_bruteforce(graph: Graph, z, tau: float = 1.0) -> float:
    """Exact loss over all nodes, all neighbours and full complements,
    computed densely (independent of the CSR kernels)."""
    n = graph.num_nodes
    if n > BRUTEFORCE_MAX_NODES:
        raise ValueError(f"brute-force loss limited to {BRUTEFORCE_MAX_NODES} nodes, got {n}")
    adj = np.zeros((n, n))
    src = np.repeat(np.arange(n), graph.degrees)
    adj[src, graph.indices] = 1.0
    looped = adj + np.eye(n)
    sizes = looped.sum(axis=1)
    dist = sizes[:, None] + sizes[None, :] - 2.0 * (looped @ looped.T)
    zhat, _ = _unit_rows(np.asarray(z, dtype=np.float64))
    f = np.exp((zhat @ zhat.T) / tau)
    complement = (looped == 0).astype(np.float64)
    neg_mass = np.sum(complement * (1.0 + dist / n) * f, axis=1)
    per_node = []
    for i in range(n):
        nb = np.flatnonzero(adj[i])
        if nb.size == 0:
            continue
        pos_mass = (1.0 - dist[i, nb] / n) * f[i, nb]
        per_node.append(np.mean(np.log1p(neg_mass[i] / pos_mass)))
    return float(np.mean(per_node)) if per_node else 0.0


def pairnorm_special_case(z_i, z_j, z_k):
    """Unit weights, one negative, f(a, b) = exp(-|a - b|^2).

    Returns ``(exact, approx, gap_bound)`` where ``exact = log(1 + x)``,
    ``x = exp(|z_i - z_j|^2 - |z_i - z_k|^2)``, ``approx = log x`` and
    ``gap_bound = 1/x`` bounds ``exact - approx`` whenever ``x >= 1``.
    """
    z_i, z_j, z_k = (np.asarray(v, dtype=np.float64) for v in (z_i, z_j, z_k))
    approx = float(np.sum((z_i - z_j) ** 2) - np.sum((z_i - z_k) ** 2))
    exact = float(np.logaddexp(0.0, approx))
    return exact, approx, float(np.exp(-approx))


def complement_sizes(graph: Graph) -> np.ndarray:
    """Number of non-adjacent nodes other than itself, per node."""
    return graph.num_nodes - 1 - graph.degrees


def mi_bound_diagnostic(graph: Graph, loss: float) -> float:
    """``-loss + mean_i log |non-neighbours of i|``."""
    sizes = complement_sizes(graph)
    if np.any(sizes < 1):
        raise ValueError("every node needs at least one non-adjacent node")
    return float(-loss + np.mean(np.log(sizes)))


def project(h, proj=None):
    """Encoder g: identity, or a linear map when ``proj`` is given."""
    return h if proj is None else h @ proj
