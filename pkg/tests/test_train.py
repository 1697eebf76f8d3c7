import numpy as np
import pytest

from deepgraph import datasets
from deepgraph.graph import path_graph
from deepgraph.model import VARIANTS
from deepgraph.tgcl import TgclConfig
from deepgraph.train import (
    DivergenceError,
    Objective,
    TrainConfig,
    accuracy,
    gradcheck,
    graph_stats,
    missing_feature_study,
    prepare_graph,
    sweep,
    train,
)


@pytest.fixture(scope="module")
def toy():
    return datasets.two_circles(num_points=120, noise=0.01, threshold=0.2, seed=0)


def _cfg(**kw):
    base = dict(iterations=15, hidden=8, train_frac=0.2, val_frac=0.2)
    base.update(kw)
    return TrainConfig(**base)


class TestConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.lr, cfg.weight_decay, cfg.iterations) == (0.001, 0.0005, 1500)
        assert cfg.tgcl.per_class_centrals == 10 and cfg.tgcl.positives_per_central == 5

    def test_replace_routes_contrastive_fields(self):
        cfg = TrainConfig().replace(alpha=0.5, depth=7)
        assert cfg.tgcl.alpha == 0.5 and cfg.depth == 7
        assert TrainConfig().tgcl.alpha == 0.0

    def test_lambda_dropped_for_plain_variants(self):
        assert TrainConfig(lam=3.0).model_config(2).lam is None

    def test_given_split_keeps_masks(self, toy):
        g = datasets.with_random_split(toy, 0.1, 0.1, seed=5)
        assert np.array_equal(prepare_graph(_cfg(split="given"), g).train_mask, g.train_mask)
        with pytest.raises(ValueError):
            prepare_graph(_cfg(split="other"), g)


class TestTrain:
    def test_deterministic(self, toy):
        cfg = _cfg(variant="wdg", lam=5.0, depth=4, tgcl=TgclConfig(alpha=0.1))
        a, b = train(cfg, toy), train(cfg, toy)
        assert a.train_loss == b.train_loss
        assert a.val_acc == b.val_acc and a.test_acc == b.test_acc

    def test_seed_changes_run(self, toy):
        a = train(_cfg(seed=0), toy)
        b = train(_cfg(seed=1), toy)
        assert a.train_loss != b.train_loss

    def test_zero_iterations(self, toy):
        rec = train(_cfg(iterations=0, variant="resnet", depth=4), toy)
        assert rec.train_loss == [] and rec.best_iteration == 0
        assert 0 <= rec.test_acc <= 1
        assert [l for l, _ in rec.layer_weights] == [3, 4]

    def test_history_lengths(self, toy):
        rec = train(_cfg(tgcl=TgclConfig(alpha=0.1)), toy)
        assert len(rec.train_loss) == len(rec.gnn_loss) == len(rec.tgcl_loss) == len(rec.val_acc) == 15
        assert all(t > 0 for t in rec.tgcl_loss)

    def test_loss_decreases(self, toy):
        rec = train(_cfg(iterations=200, dropout=0.0, lr=0.01), toy)
        assert rec.gnn_loss[-1] < 0.5 * rec.gnn_loss[0]

    def test_test_accuracy_comes_from_best_validation_snapshot(self, toy, monkeypatch):
        import deepgraph.train as tr

        snapshots = []
        real = tr.forward

        def spy(cfg, adj, x, params, rng=None, training=False):
            out = real(cfg, adj, x, params, rng, training)
            if not training:
                snapshots.append(out[0])
            return out

        monkeypatch.setattr(tr, "forward", spy)
        cfg = _cfg(iterations=40, lr=0.01)
        rec = train(cfg, toy)
        g = prepare_graph(cfg, toy)
        # eval calls: initial, one per iteration, final
        best = snapshots[rec.best_iteration]
        assert rec.best_val_acc == accuracy(best, g.labels, g.val_mask)
        assert rec.best_val_acc == max([accuracy(snapshots[0], g.labels, g.val_mask)] + rec.val_acc)
        assert np.array_equal(snapshots[-1], best)
        assert rec.test_acc == accuracy(best, g.labels, g.test_mask)

    def test_divergence(self, toy):
        bad = toy.replace(features=np.full_like(toy.features, np.nan))
        with pytest.raises(DivergenceError) as info:
            train(_cfg(), bad)
        assert info.value.record.status == "diverged"

    def test_weight_assertion_mode_counts_pairs(self, toy):
        rec = train(_cfg(tgcl=TgclConfig(alpha=0.1), check_weights=True), toy)
        assert rec.weight_pairs_checked > 0

    def test_mi_bound_recorded(self, toy):
        rec = train(_cfg(tgcl=TgclConfig(alpha=0.1)), toy)
        assert len(rec.mi_bound) == 15

    def test_linear_projection(self, toy):
        rec = train(_cfg(tgcl=TgclConfig(alpha=0.1, projection="linear")), toy)
        assert np.isfinite(rec.train_loss).all()

    def test_record_serializes(self, toy):
        import json

        rec = train(_cfg(variant="wdg", lam=3.0, depth=4), toy)
        data = json.loads(json.dumps(rec.to_dict()))
        assert data["config"]["variant"] == "wdg"
        assert data["layer_weights"][0][0] == 3


class TestObjective:
    def test_parts_add_up(self, er_graph):
        from deepgraph.model import ModelConfig, init_params
        from deepgraph.tgcl import sample_batch

        mc = ModelConfig(depth=3, num_classes=3, hidden_dim=6, dropout_rate=0.0)
        tc = TgclConfig(alpha=0.2)
        params = init_params(mc, er_graph.feature_dim, np.random.default_rng(0))
        obj = Objective(er_graph, mc, tc, 0.01)
        batch = sample_batch(er_graph, np.random.default_rng(0), tc)
        total, parts, _ = obj.evaluate(params, batch)
        assert total == pytest.approx(parts["gnn"] + parts["l2"] + 0.2 * parts["tgcl"], rel=1e-15)
        assert parts["l2"] == pytest.approx(0.005 * sum(np.sum(p.value**2) for p in params))

    def test_extended_objective_has_no_gradient(self, er_graph):
        from deepgraph.model import ModelConfig, init_params

        mc = ModelConfig(depth=2, num_classes=3, hidden_dim=4)
        obj = Objective(er_graph, mc, TgclConfig(), 0.0, dtype=np.longdouble)
        params = init_params(mc, er_graph.feature_dim, np.random.default_rng(0))
        assert obj.evaluate(params)[0].dtype == np.longdouble
        with pytest.raises(TypeError):
            obj.value_and_grad(params)


class TestDrivers:
    def test_single_value_sweep_is_one_run(self, toy):
        cfg = _cfg(tgcl=TgclConfig(alpha=0.05))
        rows = sweep(cfg, "alpha", [0.05], graph=toy)
        rec = train(cfg, toy)
        assert rows == [{"value": 0.05, "test_acc": rec.test_acc, "best_val_acc": rec.best_val_acc}]

    def test_alpha_zero_row_is_baseline(self, toy):
        rows = sweep(_cfg(), "alpha", [0.0, 0.1], graph=toy)
        assert rows[0]["test_acc"] == train(_cfg(), toy).test_acc

    def test_lambda_sweep(self, toy):
        rows = sweep(_cfg(variant="wdg_s", lam=1.0, depth=4), "lambda", [2.0, 8.0], graph=toy)
        assert [r["value"] for r in rows] == [2.0, 8.0]

    def test_sweep_arguments(self, toy):
        with pytest.raises(ValueError):
            sweep(_cfg(), "lr", [0.1], graph=toy)
        with pytest.raises(ValueError):
            sweep(_cfg(), "alpha", [], graph=toy)

    def test_study_grid(self, toy):
        rows, best = missing_feature_study(_cfg(), [0, 50], [2, 3], graph=toy)
        assert [(r["rate"], r["depth"]) for r in rows] == [(0, 2), (0, 3), (50, 2), (50, 3)]
        assert rows[0]["test_acc"] == train(_cfg(), toy).test_acc
        assert set(best) == {0, 50}
        with pytest.raises(ValueError):
            missing_feature_study(_cfg(), [150], [2], graph=toy)

    def test_stats_p4(self):
        report = graph_stats(path_graph(4))
        assert report == {"nodes": 4, "edges": 3, "components": 1, "diameter": 3, "lambda_range": [1, 8]}


class TestGradcheck:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_variants_pass(self, variant):
        report = gradcheck(variant=variant, alpha=0.03, max_coords=250)
        assert report.max_rel_error <= 1e-5
        assert report.passed and report.coordinates == 250

    def test_vanilla_without_contrast(self):
        assert gradcheck(variant="vanilla", alpha=0.0, max_coords=250).max_rel_error <= 1e-6

    def test_projection_and_stop_grad(self):
        assert gradcheck(variant="wdg", projection="linear", max_coords=250).passed
        # with the similarity detached the analytic gradient is no longer the true one
        assert not gradcheck(variant="wdg", stop_grad_sim=True, max_coords=250).passed

    def test_corrupted_gradients_fail(self):
        report = gradcheck(variant="wdg", corrupt=True, max_coords=100)
        assert not report.passed and report.max_rel_error > 0.05

    def test_size_limit(self):
        with pytest.raises(ValueError, match="limited"):
            gradcheck(num_nodes=60)

    def test_precision_argument(self):
        with pytest.raises(ValueError):
            gradcheck(precision="half")
