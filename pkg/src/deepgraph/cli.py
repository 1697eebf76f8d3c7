"""``deepgraph`` command-line entry point."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import _accel, datasets
from .model import VARIANTS
from .tgcl import TgclConfig
from .train import DivergenceError, TrainConfig, gradcheck, graph_stats, missing_feature_study, sweep, train

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_GRADCHECK = 0, 1, 2, 3

log = logging.getLogger("deepgraph")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_train_flags(p):
    p.add_argument("--dataset", default="circles", help="circles, a canonical file, or a dataset directory")
    p.add_argument("--variant", choices=VARIANTS, default="vanilla")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=50)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--weight-decay", type=float, default=0.0005)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--iters", type=int, default=1500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-rate", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--centrals", type=int, default=10)
    p.add_argument("--positives", type=int, default=5)
    p.add_argument("--projection", choices=("identity", "linear"), default="identity")
    p.add_argument("--stop-grad-sim", action="store_true")
    p.add_argument("--split", choices=("random", "given"), default="random")
    p.add_argument("--train-frac", type=float, default=0.03)
    p.add_argument("--val-frac", type=float, default=0.10)
    p.add_argument("--circles-points", type=int, default=1000)
    p.add_argument("--circles-noise", type=float, default=0.01)
    p.add_argument("--circles-threshold", type=float, default=0.1)
    p.add_argument("--check-weights", action="store_true", help="assert contrastive weight ranges every batch")
    p.add_argument("--out", default=None, help="output JSON (train) or CSV (sweep, study-missing)")


def build_parser():
    parser = _Parser(prog="deepgraph", description="Deep GCN training with weight-decaying residuals.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="one training run")
    _add_train_flags(p)
    p.add_argument("--weights-csv", default=None, help="write the layer-weight snapshot here")

    p = sub.add_parser("sweep", help="lambda or alpha sweep")
    p.add_argument("--param", choices=("lambda", "alpha"), required=True)
    p.add_argument("--values", type=_floats, required=True)
    _add_train_flags(p)

    p = sub.add_parser("stats", help="graph statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--approx", action="store_true", help="double-sweep lower bound on the diameter")

    p = sub.add_parser("gradcheck", help="finite-difference check of the training loss")
    p.add_argument("--variant", choices=VARIANTS, default="wdg")
    p.add_argument("--layers", type=int, default=6)
    p.add_argument("--alpha", type=float, default=0.03)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--lambda", dest="lam", type=float, default=5.0)
    p.add_argument("--nodes", type=int, default=30)
    p.add_argument("--edge-prob", type=float, default=0.15)
    p.add_argument("--graph-seed", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--coords", type=int, default=None, help="sample this many coordinates")
    p.add_argument("--precision", choices=("extended", "double"), default="extended")
    p.add_argument("--projection", choices=("identity", "linear"), default="identity")
    p.add_argument("--stop-grad-sim", action="store_true")
    p.add_argument("--corrupt", action="store_true", help="self-test: perturb analytic gradients")

    p = sub.add_parser("study-missing", help="feature-masking rate x depth grid")
    p.add_argument("--rates", type=_floats, required=True)
    p.add_argument("--depths", type=_ints, required=True)
    _add_train_flags(p)
    return parser


def config_from_args(args) -> TrainConfig:
    return TrainConfig(
        dataset=args.dataset,
        depth=args.layers,
        hidden=args.hidden,
        variant=args.variant,
        lam=args.lam,
        dropout=args.dropout,
        stop_grad_sim=args.stop_grad_sim,
        tgcl=TgclConfig(
            alpha=args.alpha,
            per_class_centrals=args.centrals,
            positives_per_central=args.positives,
            tau=args.tau,
            projection=args.projection,
        ),
        lr=args.lr,
        weight_decay=args.weight_decay,
        iterations=args.iters,
        seed=args.seed,
        split=args.split,
        train_frac=args.train_frac,
        val_frac=args.val_frac,
        mask_rate=args.mask_rate,
        circles_points=args.circles_points,
        circles_noise=args.circles_noise,
        circles_threshold=args.circles_threshold,
        check_weights=args.check_weights,
    )


def _validate(config: TrainConfig):
    if config.variant in ("wdg", "wdg_s") and config.lam is None:
        raise ValueError(f"--lambda is required for variant {config.variant}")
    if config.iterations < 0:
        raise ValueError("--iters must be non-negative")
    config.model_config(2)  # runs the model-level checks


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)


def _print_rows(rows, header):
    print(",".join(header))
    for row in rows:
        print(",".join(str(row[h]) for h in header))


def _cmd_train(args):
    config = config_from_args(args)
    _validate(config)
    record = train(config)
    print(f"best_val_acc={record.best_val_acc:.4f} test_acc={record.test_acc:.4f} "
          f"best_iter={record.best_iteration} time={record.wall_time:.1f}s")
    if args.out:
        Path(args.out).write_text(json.dumps(record.to_dict(), indent=1))
    if args.weights_csv:
        _write_csv(args.weights_csv, [{"layer": l, "weight": w} for l, w in record.layer_weights], ["layer", "weight"])
    return EXIT_OK


def _cmd_sweep(args):
    config = config_from_args(args)
    if args.param == "lambda":
        config = config.replace(lam=args.values[0])
    _validate(config)
    rows = sweep(config, args.param, args.values)
    header = ["value", "test_acc", "best_val_acc"]
    _print_rows(rows, header)
    if args.out:
        _write_csv(args.out, rows, header)
    return EXIT_OK


def _cmd_study(args):
    config = config_from_args(args)
    _validate(config)
    rows, best = missing_feature_study(config, args.rates, args.depths)
    header = ["rate", "depth", "test_acc"]
    _print_rows(rows, header)
    for rate, info in best.items():
        print(f"# rate {rate:g}: best depth {info['depth']} ({info['test_acc']:.4f})")
    if args.out:
        _write_csv(args.out, rows, header)
    return EXIT_OK


def _cmd_stats(args):
    graph = datasets.load_dataset(args.dataset)
    report = graph_stats(graph, approx=args.approx)
    lo, hi = report["lambda_range"]
    print(f"nodes {report['nodes']}")
    print(f"edges {report['edges']}")
    print(f"components {report['components']}")
    print(f"diameter {report['diameter']}{' (lower bound)' if args.approx else ''}")
    print(f"lambda range [{lo}, {hi}]")
    return EXIT_OK


def _cmd_gradcheck(args):
    report = gradcheck(
        variant=args.variant,
        depth=args.layers,
        alpha=args.alpha,
        hidden=args.hidden,
        lam=args.lam,
        num_nodes=args.nodes,
        edge_prob=args.edge_prob,
        graph_seed=args.graph_seed,
        seed=args.seed,
        eps=args.eps,
        max_coords=args.coords,
        precision=args.precision,
        projection=args.projection,
        stop_grad_sim=args.stop_grad_sim,
        corrupt=args.corrupt,
    )
    for name, err in report.per_param.items():
        print(f"{name:8s} {err:.3e}")
    verdict = "ok" if report.passed else "FAILED"
    print(f"max relative error {report.max_rel_error:.3e} over {report.coordinates} coordinates: {verdict}")
    return EXIT_OK if report.passed else EXIT_GRADCHECK


COMMANDS = {
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "stats": _cmd_stats,
    "gradcheck": _cmd_gradcheck,
    "study-missing": _cmd_study,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    _accel.apply_thread_cap()
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        out = getattr(args, "out", None)
        if out:
            Path(out).write_text(json.dumps(exc.record.to_dict(), indent=1))
        return EXIT_DIVERGED
    except (ValueError, FileNotFoundError, datasets.DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
