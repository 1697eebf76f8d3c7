"""Full-batch training with cross-entropy + L2 + alpha * contrastive loss,
plus the sweep / gradcheck / stats / missing-feature drivers."""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import datasets
from .graph import Graph, NormalizedAdjacency, connected_components, diameter_largest_component, normalize
from .model import ModelConfig, backward, forward, init_params, layer_weight_report
from .numerics import RmsPropState, finite_difference_check, rmsprop_step, softmax_cross_entropy
from .tgcl import TgclConfig, mi_bound_diagnostic, project, sample_batch, tgcl_loss

log = logging.getLogger(__name__)

GRADCHECK_FAIL_THRESHOLD = 1e-4
GRADCHECK_MAX_NODES = 50


class DivergenceError(RuntimeError):
    def __init__(self, message, record):
        super().__init__(message)
        self.record = record


@dataclass
class TrainConfig:
    dataset: str = "circles"
    depth: int = 2
    hidden: int = 50
    variant: str = "vanilla"
    lam: float | None = None
    dropout: float = 0.5
    stop_grad_sim: bool = False
    tgcl: TgclConfig = field(default_factory=TgclConfig)
    lr: float = 0.001
    weight_decay: float = 0.0005
    iterations: int = 1500
    seed: int = 0
    split: str = "random"  # "random" or "given" (keep masks stored with the graph)
    train_frac: float = 0.03
    val_frac: float = 0.10
    split_seed: int | None = None
    mask_rate: float = 0.0
    circles_points: int = 1000
    circles_noise: float = 0.01
    circles_threshold: float = 0.1
    rms_decay: float = 0.9
    rms_eps: float = 1e-8
    check_weights: bool = False
    eval_every: int = 1

    def model_config(self, num_classes):
        return ModelConfig(
            depth=self.depth,
            num_classes=num_classes,
            hidden_dim=self.hidden,
            variant=self.variant,
            lam=self.lam if self.variant in ("wdg", "wdg_s") else None,
            dropout_rate=self.dropout,
            stop_grad_sim=self.stop_grad_sim,
        )

    def replace(self, **changes):
        cfg = copy.deepcopy(self)
        for k, v in changes.items():
            if k in ("alpha", "tau", "per_class_centrals", "positives_per_central", "projection"):
                setattr(cfg.tgcl, k, v)
            else:
                setattr(cfg, k, v)
        return cfg

    def to_dict(self):
        return asdict(self)


@dataclass
class RunRecord:
    config: dict
    train_loss: list = field(default_factory=list)
    gnn_loss: list = field(default_factory=list)
    tgcl_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    mi_bound: list = field(default_factory=list)
    best_iteration: int = 0
    best_val_acc: float = float("nan")
    test_acc: float = float("nan")
    layer_weights: list = field(default_factory=list)
    weight_pairs_checked: int = 0
    wall_time: float = 0.0
    status: str = "ok"

    def to_dict(self):
        return asdict(self)


def prepare_graph(config: TrainConfig, graph: Graph | None = None) -> Graph:
    """Load (unless given), mask features and split according to ``config``."""
    if graph is None:
        graph = datasets.load_dataset(
            config.dataset,
            num_points=config.circles_points,
            noise=config.circles_noise,
            threshold=config.circles_threshold,
            seed=config.seed,
        )
    if config.mask_rate:
        graph = datasets.mask_features(graph, config.mask_rate, seed=config.seed)
    if config.split == "random":
        seed = config.seed if config.split_seed is None else config.split_seed
        graph = datasets.with_random_split(graph, config.train_frac, config.val_frac, seed)
    elif config.split != "given":
        raise ValueError(f"unknown split mode {config.split!r}")
    return graph


@dataclass
class _Cast:
    name: str
    value: np.ndarray


class Objective:
    """Overall loss ``CE + weight_decay/2 * sum |W|^2 + alpha * TGCL`` and its
    gradient for one graph and one model configuration.

    With ``dtype=np.longdouble`` the loss (not the gradient) is evaluated in
    extended precision, which is what the finite-difference oracle uses.
    """

    def __init__(self, graph, model_cfg, tgcl_cfg, weight_decay, dtype=np.float64):
        self.graph = graph
        self.dtype = np.dtype(dtype)
        adj = normalize(graph)
        if self.dtype != np.float64:
            adj = NormalizedAdjacency(adj.n, adj.indptr, adj.indices, adj.data.astype(self.dtype))
        self.adj = adj
        self.features = graph.features.astype(self.dtype)
        self.model_cfg = model_cfg
        self.tgcl_cfg = tgcl_cfg
        self.weight_decay = weight_decay
        self.depth = model_cfg.depth

    def _proj(self, params):
        return params[self.depth + 1] if self.tgcl_cfg.projection == "linear" else None

    def evaluate(self, params, batch=None, rng=None, training=False):
        """Forward only; returns ``(total, parts, cache)``."""
        return self._run(params, batch, rng, training, grad=False)

    def value_and_grad(self, params, batch=None, rng=None, training=True):
        if self.dtype != np.float64:
            raise TypeError("gradients are only computed in float64")
        for p in params:
            p.zero_grad()
        return self._run(params, batch, rng, training, grad=True)

    def _run(self, params, batch, rng, training, grad):
        g = self.graph
        if self.dtype != np.float64:
            params = [_Cast(p.name, p.value.astype(self.dtype)) for p in params]
        logits, cache = forward(self.model_cfg, self.adj, self.features, params, rng, training)
        gnn, dlogits = softmax_cross_entropy(logits, g.labels, g.train_mask)
        l2 = 0.5 * self.weight_decay * sum(np.sum(p.value * p.value) for p in params)
        alpha = self.tgcl_cfg.alpha
        contrast, dhidden = 0.0, None
        proj = self._proj(params)
        if alpha > 0 and batch is not None and len(batch):
            h_top = cache.hidden[-1]
            z = project(h_top, None if proj is None else proj.value)
            contrast, dz = tgcl_loss(z, batch, self.tgcl_cfg.tau)
            if grad:
                if proj is None:
                    dhidden = alpha * dz
                else:
                    dhidden = alpha * (dz @ proj.value.T)
                    proj.grad += alpha * (h_top.T @ dz)
        if grad:
            backward(self.model_cfg, self.adj, params, cache, dlogits, dhidden)
            for p in params:
                p.grad += self.weight_decay * p.value
        total = gnn + l2 + alpha * contrast
        return total, {"gnn": gnn, "l2": l2, "tgcl": contrast}, cache


def accuracy(logits, labels, mask):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return float("nan")
    return float(np.mean(np.argmax(logits[idx], axis=1) == labels[idx]))


def train(config: TrainConfig, graph: Graph | None = None) -> RunRecord:
    start = time.perf_counter()
    graph = prepare_graph(config, graph)
    model_cfg = config.model_config(graph.num_classes)
    objective = Objective(graph, model_cfg, config.tgcl, config.weight_decay)
    init_ss, drop_ss, batch_ss = np.random.SeedSequence(config.seed).spawn(3)
    params = init_params(
        model_cfg, graph.feature_dim, np.random.default_rng(init_ss), projection=config.tgcl.projection == "linear"
    )
    drop_rng = np.random.default_rng(drop_ss)
    batch_rng = np.random.default_rng(batch_ss)
    state = RmsPropState(decay=config.rms_decay, epsilon=config.rms_eps)
    record = RunRecord(config=config.to_dict())

    def eval_logits(ps):
        logits, cache = forward(model_cfg, objective.adj, graph.features, ps, training=False)
        return logits, cache

    logits, _ = eval_logits(params)
    best_val = accuracy(logits, graph.labels, graph.val_mask)
    best = [p.value.copy() for p in params]
    record.best_val_acc = best_val
    use_tgcl = config.tgcl.alpha > 0

    for it in range(1, config.iterations + 1):
        batch = sample_batch(graph, batch_rng, config.tgcl) if use_tgcl else None
        if batch is not None and config.check_weights:
            bad = batch.weight_range_violations()
            record.weight_pairs_checked += sum(batch.num_pairs())
            if bad:
                raise AssertionError(f"iteration {it}: {bad} contrastive weights outside their ranges")
        total, parts, _ = objective.value_and_grad(params, batch, drop_rng, training=True)
        if not np.isfinite(total):
            record.status = "diverged"
            record.wall_time = time.perf_counter() - start
            raise DivergenceError(f"non-finite loss at iteration {it}", record)
        rmsprop_step(params, state, config.lr)
        record.train_loss.append(total)
        record.gnn_loss.append(parts["gnn"])
        record.tgcl_loss.append(parts["tgcl"])
        if use_tgcl:
            try:
                record.mi_bound.append(mi_bound_diagnostic(graph, parts["tgcl"]))
            except ValueError:
                pass
        if it % config.eval_every == 0 or it == config.iterations:
            logits, _ = eval_logits(params)
            val = accuracy(logits, graph.labels, graph.val_mask)
            record.val_acc.append(val)
            # strict improvement keeps the earliest best iterate
            if np.isnan(best_val) or val > best_val:
                best_val = val
                best = [p.value.copy() for p in params]
                record.best_iteration = it

    if np.isnan(best_val):
        best = [p.value.copy() for p in params]
        record.best_iteration = config.iterations
    for p, v in zip(params, best):
        p.value[...] = v
    logits, cache = eval_logits(params)
    record.best_val_acc = float(best_val)
    record.test_acc = accuracy(logits, graph.labels, graph.test_mask)
    record.layer_weights = [[int(l), float(w)] for l, w in layer_weight_report(cache)]
    record.wall_time = time.perf_counter() - start
    return record


def sweep(config: TrainConfig, param: str, values, graph: Graph | None = None):
    """One run per value with a shared seed; rows of (value, test, best val)."""
    if param not in ("lambda", "alpha"):
        raise ValueError("sweep parameter must be 'lambda' or 'alpha'")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    rows = []
    for v in values:
        cfg = config.replace(lam=v) if param == "lambda" else config.replace(alpha=v)
        rec = train(cfg, graph)
        rows.append({"value": v, "test_acc": rec.test_acc, "best_val_acc": rec.best_val_acc})
    return rows


def missing_feature_study(config: TrainConfig, rates, depths, graph: Graph | None = None):
    """Test accuracy on a (mask rate x depth) grid; returns ``(rows, best)``
    where ``best`` maps each rate to its best depth and accuracy."""
    rows, best = [], {}
    for rate in rates:
        if not 0 <= rate <= 100:
            raise ValueError("mask rates must lie in [0, 100]")
        for depth in depths:
            rec = train(config.replace(mask_rate=rate, depth=depth), graph)
            rows.append({"rate": rate, "depth": depth, "test_acc": rec.test_acc})
            if rate not in best or rec.test_acc > best[rate]["test_acc"]:
                best[rate] = {"depth": depth, "test_acc": rec.test_acc}
    return rows, best


def graph_stats(graph: Graph, approx: bool = False):
    _, count = connected_components(graph)
    diam = diameter_largest_component(graph, approx=approx)
    return {
        "nodes": graph.num_nodes,
        "edges": graph.num_edges,
        "components": int(count),
        "diameter": int(diam),
        "lambda_range": [max(1, diam - 5), diam + 5],
    }


@dataclass
class GradcheckReport:
    variant: str
    depth: int
    alpha: float
    max_rel_error: float
    per_param: dict
    coordinates: int
    passed: bool


def gradcheck(
    variant="wdg",
    depth=6,
    alpha=0.03,
    hidden=16,
    lam=5.0,
    num_nodes=30,
    edge_prob=0.15,
    graph_seed=7,
    seed=0,
    eps=1e-6,
    max_coords=None,
    precision="extended",
    projection="identity",
    weight_decay=0.0005,
    stop_grad_sim=False,
    corrupt=False,
    graph: Graph | None = None,
):
    """Central-difference check of the full training objective on a small
    random graph with dropout off and one frozen contrastive batch.

    ``precision="extended"`` evaluates the differenced loss in long double:
    at ``eps=1e-6`` float64 rounding of an O(1) loss alone contributes
    ~1e-10 to each numeric derivative, which swamps gradients near 1e-7.
    ``precision="double"`` keeps the plain float64 loss.
    """
    if precision not in ("extended", "double"):
        raise ValueError("precision must be 'extended' or 'double'")
    if graph is None:
        graph = datasets.erdos_renyi(num_nodes, edge_prob, seed=graph_seed)
        graph = graph.replace(train_mask=np.ones(graph.num_nodes, dtype=bool))
    if graph.num_nodes > GRADCHECK_MAX_NODES:
        raise ValueError(f"gradcheck is limited to {GRADCHECK_MAX_NODES} nodes")
    model_cfg = ModelConfig(
        depth=depth,
        num_classes=graph.num_classes,
        hidden_dim=hidden,
        variant=variant,
        lam=lam if variant in ("wdg", "wdg_s") else None,
        dropout_rate=0.0,
        stop_grad_sim=stop_grad_sim,
    )
    tgcl_cfg = TgclConfig(alpha=alpha, projection=projection)
    rng = np.random.default_rng(seed)
    params = init_params(model_cfg, graph.feature_dim, rng, projection=projection == "linear")
    objective = Objective(graph, model_cfg, tgcl_cfg, weight_decay)
    batch = sample_batch(graph, rng, tgcl_cfg) if alpha > 0 else None
    objective.value_and_grad(params, batch, training=False)
    if corrupt:
        for p in params:
            p.grad *= 1.1
    oracle = objective
    if precision == "extended":
        oracle = Objective(graph, model_cfg, tgcl_cfg, weight_decay, dtype=np.longdouble)
    worst, per_param = finite_difference_check(
        lambda: oracle.evaluate(params, batch)[0], params, eps=eps, max_coords=max_coords, rng=rng
    )
    total = sum(p.value.size for p in params)
    return GradcheckReport(
        variant=variant,
        depth=depth,
        alpha=alpha,
        max_rel_error=worst,
        per_param=per_param,
        coordinates=total if max_coords is None else min(total, max_coords),
        passed=worst <= GRADCHECK_FAIL_THRESHOLD,
    )
