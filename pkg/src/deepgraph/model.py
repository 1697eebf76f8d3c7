"""Deep GCN stacks with plain, ResNet and weight-decaying residual links.

Layer ``l`` (1-based, ``1 <= l <= L``) computes

    Ht[l] = relu(A_hat @ dropout(H[l-1]) @ W_l)

and for ``l >= 3`` the residual variants combine it with ``H[l-2]``:

    resnet : H[l] = Ht[l] + H[l-2]
    wdg    : H[l] = exp(cos(H[1], Ht[l]) - l/lam) * Ht[l] + H[l-2]
    wdg_s  : H[l] = exp(-l/lam) * Ht[l] + H[l-2]

A final GCN layer maps ``H[L]`` to class logits without activation.
Gradients are propagated by hand through the cached forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, row_normalized
from .numerics import Parameter, dropout, glorot_uniform, relu

VARIANTS = ("vanilla", "resnet", "wdg", "wdg_s")


@dataclass
class ModelConfig:
    depth: int
    num_classes: int
    hidden_dim: int = 50
    variant: str = "vanilla"
    lam: float | None = None
    dropout_rate: float = 0.5
    stop_grad_sim: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.depth < 2:
            raise ValueError("depth must be at least 2")
        if self.variant in ("wdg", "wdg_s"):
            if self.lam is None or self.lam <= 0:
                raise ValueError(f"variant {self.variant} needs lambda > 0")
        elif self.lam is not None:
            raise ValueError(f"lambda is only meaningful for wdg variants, not {self.variant}")


@dataclass
class ForwardCache:
    variant: str
    hidden: list  # H[0..L]; H[0] is the raw feature matrix
    tilde: list  # Ht[l], index 0 unused
    pre: list  # pre-activation A_hat @ In @ W, index 0 unused
    inputs: list  # dropped-out layer inputs, index L+1 is the classifier input
    scales: list  # dropout scale masks (None when no dropout)
    weights: dict = field(default_factory=dict)  # l -> applied residual weight
    cosines: dict = field(default_factory=dict)  # l -> cos(H[1], Ht[l]) (wdg only)
    logits: np.ndarray = None

    @property
    def depth(self):
        return len(self.hidden) - 1


def init_params(config: ModelConfig, in_dim: int, rng, projection: bool = False):
    """Glorot-uniform weights ``W1..WL, W_out`` (+ ``proj`` when requested)."""
    h = config.hidden_dim
    dims = [in_dim] + [h] * config.depth
    params = [
        Parameter(f"W{l}", glorot_uniform(dims[l - 1], dims[l], rng))
        for l in range(1, config.depth + 1)
    ]
    params.append(Parameter("W_out", glorot_uniform(h, config.num_classes, rng)))
    if projection:
        params.append(Parameter("proj", glorot_uniform(h, h, rng)))
    return params


def decay_factor(l, lam):
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return math.exp(-l / lam)


def _row_norms(h):
    return np.sqrt(np.einsum("ij,ij->i", h, h))


def _mean_cosine(h1, hl):
    n1 = _row_norms(h1)
    n2 = _row_norms(hl)
    ok = (n1 > 0) & (n2 > 0)
    dots = np.einsum("ij,ij->i", h1[ok], hl[ok])
    return np.sum(dots / (n1[ok] * n2[ok])) / h1.shape[0]


def layer_cosine_similarity(h1, hl):
    """Mean over nodes of the row-wise cosine; zero rows contribute 0."""
    if h1.shape != hl.shape:
        raise ValueError(f"shape mismatch {h1.shape} vs {hl.shape}")
    return float(_mean_cosine(h1, hl))


def _cosine_grads(h1, hl):
    """Gradients of :func:`layer_cosine_similarity` w.r.t. ``h1`` and ``hl``."""
    n = h1.shape[0]
    n1 = _row_norms(h1)
    n2 = _row_norms(hl)
    ok = (n1 > 0) & (n2 > 0)
    g1 = np.zeros_like(h1)
    g2 = np.zeros_like(hl)
    u, v = h1[ok], hl[ok]
    a, b = n1[ok][:, None], n2[ok][:, None]
    cos = np.einsum("ij,ij->i", u, v)[:, None] / (a * b)
    g1[ok] = (v / (a * b) - cos * u / (a * a)) / n
    g2[ok] = (u / (a * b) - cos * v / (b * b)) / n
    return g1, g2


def residual_combine(variant, h_tilde, h_prev2, h1, l, lam):
    """Returns ``(H[l], applied weight)`` for one residual layer."""
    if variant == "vanilla":
        return h_tilde, 1.0
    if variant == "resnet":
        return h_tilde + h_prev2, 1.0
    if variant == "wdg":
        w = math.exp(layer_cosine_similarity(h1, h_tilde) - l / lam)
    elif variant == "wdg_s":
        w = decay_factor(l, lam)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return w * h_tilde + h_prev2, w


def gcn_layer(adj, h, w, activate=True):
    """``relu(A_hat @ h @ w)`` (no relu when ``activate`` is false)."""
    if h.shape[1] != w.shape[0]:
        raise ValueError(f"gcn_layer shape mismatch: {h.shape} @ {w.shape}")
    z = adj.matmul(h @ w)
    return relu(z)[0] if activate else z


def forward(config: ModelConfig, adj, features, params, rng=None, training=False):
    L = config.depth
    if len(params) < L + 1:
        raise ValueError(f"expected at least {L + 1} parameters, got {len(params)}")
    rate = config.dropout_rate if training else 0.0
    cache = ForwardCache(
        variant=config.variant,
        hidden=[features],
        tilde=[None],
        pre=[None],
        inputs=[None],
        scales=[None],
    )
    for l in range(1, L + 1):
        x, scale = dropout(cache.hidden[l - 1], rate, rng, training)
        z = adj.matmul(x @ params[l - 1].value)
        ht = np.maximum(z, 0.0)
        if l >= 3 and config.variant == "wdg":
            # kept as numpy scalars so extended-precision inputs stay extended
            c = _mean_cosine(cache.hidden[1], ht)
            w = np.exp(c - l / config.lam)
            h = w * ht + cache.hidden[l - 2]
            cache.weights[l] = w
            cache.cosines[l] = c
        elif l >= 3 and config.variant != "vanilla":
            h, cache.weights[l] = residual_combine(
                config.variant, ht, cache.hidden[l - 2], cache.hidden[1], l, config.lam
            )
        else:
            h = ht
        cache.inputs.append(x)
        cache.scales.append(scale)
        cache.pre.append(z)
        cache.tilde.append(ht)
        cache.hidden.append(h)
    x, scale = dropout(cache.hidden[L], rate, rng, training)
    cache.inputs.append(x)
    cache.scales.append(scale)
    cache.logits = adj.matmul(x @ params[L].value)
    return cache.logits, cache


def _accumulate(slots, idx, g):
    if slots[idx] is None:
        slots[idx] = g.copy()
    else:
        slots[idx] += g


def backward(config: ModelConfig, adj, params, cache: ForwardCache, dlogits, dhidden=None):
    """Add d(loss)/d(weights) into ``params[*].grad``.

    ``dlogits`` is the upstream gradient of the logits; ``dhidden`` an
    optional extra gradient on ``H[L]`` (the contrastive term).
    """
    L = config.depth
    grads_h = [None] * (L + 1)

    w_out = params[L]
    g_xw = adj.matmul(dlogits)
    w_out.grad += cache.inputs[L + 1].T @ g_xw
    g_in = g_xw @ w_out.value.T
    if cache.scales[L + 1] is not None:
        g_in *= cache.scales[L + 1]
    _accumulate(grads_h, L, g_in)
    if dhidden is not None:
        grads_h[L] += dhidden

    for l in range(L, 0, -1):
        g = grads_h[l]
        if g is None:
            g = np.zeros_like(cache.hidden[l])
        if l in cache.weights:
            a = cache.weights[l]
            g_tilde = a * g
            _accumulate(grads_h, l - 2, g)
            if config.variant == "wdg" and not config.stop_grad_sim:
                # d/dc of exp(c - l/lam) is the weight itself
                s = a * np.sum(g * cache.tilde[l])
                d_h1, d_ht = _cosine_grads(cache.hidden[1], cache.tilde[l])
                g_tilde += s * d_ht
                _accumulate(grads_h, 1, s * d_h1)
        else:
            g_tilde = g
        g_z = np.where(cache.pre[l] > 0, g_tilde, 0.0)
        g_xw = adj.matmul(g_z)
        w = params[l - 1]
        w.grad += cache.inputs[l].T @ g_xw
        if l > 1:
            g_in = g_xw @ w.value.T
            if cache.scales[l] is not None:
                g_in *= cache.scales[l]
            _accumulate(grads_h, l - 1, g_in)


def unrolled_terms(cache: ForwardCache):
    """Residual chain of ``H[L]`` as ``[(layer, weight, Ht[layer]), ...]``,
    deepest layer first; the chain start carries weight 1."""
    if cache.variant == "vanilla":
        raise ValueError("no residual chain")
    terms = []
    l = cache.depth
    while l >= 3:
        terms.append((l, cache.weights[l], cache.tilde[l]))
        l -= 2
    terms.append((l, 1.0, cache.tilde[l]))
    return terms


def unrolled_expansion(cache: ForwardCache):
    """Recompute ``H[L]`` as the explicit weighted sum of layer outputs."""
    total = np.zeros_like(cache.hidden[-1])
    for _, w, term in unrolled_terms(cache):
        total += w * term
    return total


def layer_weight_report(cache: ForwardCache):
    return [(l, float(w)) for l, w in sorted(cache.weights.items())]


def node_influence(graph: Graph, source: int, center: int, hops: int) -> float:
    """|d h_center / d h_source| after ``hops`` rounds of mean aggregation
    over A + I with identity weights and activation."""
    op = row_normalized(graph)
    x = np.zeros((graph.num_nodes, 1))
    x[source, 0] = 1.0
    for _ in range(hops):
        x = op.matmul(x)
    return float(abs(x[center, 0]))
