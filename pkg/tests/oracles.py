"""Slow, independent reference implementations used only by the tests."""

import math

import numpy as np


def dense_adjacency(graph):
    a = np.zeros((graph.num_nodes, graph.num_nodes))
    for i, j in graph.edge_list():
        a[i, j] = a[j, i] = 1.0
    return a


def dense_normalized(graph):
    a = dense_adjacency(graph) + np.eye(graph.num_nodes)
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))


def floyd_warshall(graph):
    n = graph.num_nodes
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0)
    for i, j in graph.edge_list():
        dist[i, j] = dist[j, i] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    return dist


def diameter_of_largest_component(graph):
    dist = floyd_warshall(graph)
    reach = np.isfinite(dist)
    sizes = reach.sum(axis=1)
    root = int(np.argmax(sizes))
    members = np.flatnonzero(reach[root])
    return int(dist[np.ix_(members, members)].max())


def component_count(graph):
    reach = np.isfinite(floyd_warshall(graph))
    return len({tuple(np.flatnonzero(row)) for row in reach})


def hamming(graph, i, j):
    a = dense_adjacency(graph) + np.eye(graph.num_nodes)
    return int(np.sum(a[i] != a[j]))


def naive_tgcl(graph, z, tau=1.0):
    """Double loop over nodes with plain Python floats."""
    n = graph.num_nodes
    adj = dense_adjacency(graph) + np.eye(n)

    def f(a, b):
        na = math.sqrt(sum(x * x for x in z[a]))
        nb = math.sqrt(sum(x * x for x in z[b]))
        cos = 0.0 if na == 0 or nb == 0 else sum(x * y for x, y in zip(z[a], z[b])) / (na * nb)
        return math.exp(cos / tau)

    def dist(a, b):
        return sum(1 for t in range(n) if adj[a, t] != adj[b, t])

    per_node = []
    for i in range(n):
        pos = [j for j in range(n) if j != i and adj[i, j]]
        if not pos:
            continue
        neg_mass = 0.0
        for k in range(n):
            if not adj[i, k]:
                neg_mass += (1 + dist(i, k) / n) * f(i, k)
        terms = []
        for j in pos:
            p = (1 - dist(i, j) / n) * f(i, j)
            terms.append(-math.log(p / (p + neg_mass)))
        per_node.append(sum(terms) / len(terms))
    return sum(per_node) / len(per_node) if per_node else 0.0


def dense_forward(adj_dense, x, weights, variant="vanilla", lam=None):
    """Dropout-free forward pass over a dense normalized adjacency."""
    hidden = [x]
    for l, w in enumerate(weights[:-1], start=1):
        ht = np.maximum(adj_dense @ hidden[-1] @ w, 0)
        if l >= 3 and variant != "vanilla":
            if variant == "resnet":
                a = 1.0
            elif variant == "wdg_s":
                a = math.exp(-l / lam)
            else:
                cos = []
                for u, v in zip(hidden[1], ht):
                    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
                    cos.append(0.0 if nu == 0 or nv == 0 else u @ v / (nu * nv))
                a = math.exp(sum(cos) / len(cos) - l / lam)
            ht = a * ht + hidden[l - 2]
        hidden.append(ht)
    return adj_dense @ hidden[-1] @ weights[-1], hidden
