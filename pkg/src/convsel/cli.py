"""``convsel`` command line: generate-dataset, train, evaluate, convolve, grid-info.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import dispatch, harness
from .dataset import read_features, write_dataset
from .errors import (
    AllMethodsFailed,
    ConvselError,
    DimensionMismatch,
    FormatVersionMismatch,
    InvalidShape,
    MissingShape,
    ParseError,
)
from .learners import (
    TrainReport,
    evaluate_accuracy,
    holdout_split,
    load_model,
    prune_reduced_error,
    save_model,
    train_decision_tree,
    train_naive_bayes,
)
from .shapes import LayerShape

log = logging.getLogger("convsel")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file or directory: {path}")
    return p


def _load_grid(args) -> harness.GridConfig:
    config = harness.GridConfig.from_file(_existing(args.grid)) if args.grid else harness.GridConfig()
    if args.reps is not None:
        config.repetitions = args.reps
    return config


def cmd_grid_info(args) -> int:
    config = _load_grid(args)
    shapes = harness.generate_shape_grid(config)
    print(f"combinations: {config.size}")
    print(f"feasible_shapes: {len(shapes)}")
    if args.list:
        print("W,H,C_IN,KERNEL_SIZE,C_OUT")
        for s in shapes:
            print(",".join(str(v) for v in s.key))
    return EXIT_OK


def cmd_generate(args) -> int:
    config = _load_grid(args)
    if config.repetitions < 1:
        raise UsageError("--reps must be >= 1")
    shapes = harness.generate_shape_grid(config)
    started = time.monotonic()
    records = harness.run_sweep(
        shapes,
        synthetic=args.synthetic,
        reps=config.repetitions,
        warmups=config.warmups,
        max_flops=args.max_flops,
        seed=args.seed,
    )
    if not records:
        raise DataError("every shape was above the --max-flops budget; nothing to write")
    paths = write_dataset(records, args.out)
    log.info("benchmarked %d shapes in %.1fs", len(records), time.monotonic() - started)
    print(f"records: {len(records)}")
    for key, path in paths.items():
        print(f"{key}: {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    X, y = read_features(_existing(args.dataset))
    if args.prune and not args.holdout:
        raise UsageError("--prune needs a --holdout set")
    train_idx, hold_idx = holdout_split(len(y), args.holdout or 0.0, args.seed)
    if len(train_idx) == 0:
        raise UsageError("--holdout leaves no training samples")
    X_tr, y_tr = X[train_idx], y[train_idx]
    extras = {}
    if args.kind == "dt":
        depth = None if args.max_depth == 0 else args.max_depth
        model = train_decision_tree(X_tr, y_tr, max_depth=depth, min_samples_split=args.min_samples_split)
        if args.prune:
            before = len(model.nodes)
            model = prune_reduced_error(model, X[hold_idx], y[hold_idx])
            extras["pruned_nodes"] = before - len(model.nodes)
        extras["depth"] = model.depth
        extras["leaves"] = model.n_leaves
    else:
        model = train_naive_bayes(X_tr, y_tr)
    report = TrainReport(
        args.kind,
        len(y_tr),
        evaluate_accuracy(model, X_tr, y_tr),
        evaluate_accuracy(model, X[hold_idx], y[hold_idx]) if len(hold_idx) else None,
        extras,
    )
    out = Path(args.model_out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(report.format())
    print(f"model: {out}")
    return EXIT_OK


def _timing_source(spec: str, args):
    if spec == "synthetic":
        return dispatch.SyntheticTiming()
    if spec == "measured":
        return dispatch.MeasuredTiming(args.reps, args.warmups, args.seed)
    if spec.startswith("ranking:"):
        return dispatch.RankingTiming(_existing(spec.split(":", 1)[1]))
    raise UsageError(f"--timing must be measured, synthetic or ranking:FILE, got {spec!r}")


def _load_selector(spec: str, source):
    if spec == "oracle":
        return dispatch.OracleModel(source)
    return load_model(_existing(spec))


def cmd_evaluate(args) -> int:
    source = _timing_source(args.timing, args)
    if args.network not in dispatch.BUNDLED_NETWORKS:
        _existing(args.network)
    network = dispatch.load_network(args.network)
    model = _load_selector(args.model, source)
    report = dispatch.evaluate_network(model, network, source)
    paths = dispatch.emit_report(report, args.out)
    print("\n".join(dispatch.summary_lines(report)))
    for key, path in paths.items():
        print(f"{key}: {path}")
    return EXIT_OK


def _parse_shape_arg(text: str) -> LayerShape:
    try:
        values = [int(v) for v in text.split(",")]
        if len(values) != 5:
            raise ValueError
    except ValueError:
        raise UsageError(f"--shape expects W,H,C_IN,K,C_OUT, got {text!r}") from None
    try:
        return LayerShape(*values)
    except InvalidShape as exc:
        raise UsageError(str(exc)) from None


def cmd_convolve(args) -> int:
    shape = _parse_shape_arg(args.shape)
    model = load_model(_existing(args.model))
    events: list = []
    if args.input:
        image = np.load(_existing(args.input))
        kernels = np.load(_existing(args.kernels)) if args.kernels else None
        if kernels is None:
            raise UsageError("--input needs --kernels")
        start = time.perf_counter_ns()
        out = dispatch.dispatch_convolve(model, image, kernels, shape, events)
    else:
        start = time.perf_counter_ns()
        out = dispatch.convolve_random(model, shape, args.seed, events)
    elapsed = (time.perf_counter_ns() - start) / 1000.0
    event = events[-1]
    print(f"shape: {shape}")
    print(f"predicted: {event.predicted.token}")
    print(f"executed: {event.executed.token}")
    print(f"fallback: {'yes' if event.fell_back else 'no'}")
    print(f"output_dims: {'x'.join(str(d) for d in out.shape)}")
    print(f"elapsed_us: {elapsed:.1f}")
    if args.out:
        np.save(args.out, out)
        print(f"output: {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="convsel",
        description="Pick the fastest convolution algorithm per layer with a learned model.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    parser.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def grid_flags(p):
        p.add_argument("--grid", help="JSON grid file (keys W,H,C_IN,KERNEL_SIZE,C_OUT,...)")
        p.add_argument("--reps", type=int, help="timed repetitions per measurement")

    p = sub.add_parser("generate-dataset", help="benchmark the shape grid and write dataset files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--synthetic", action="store_true", help="use the analytic cost model")
    p.add_argument("--max-flops", type=float, help="skip shapes above this flop count")
    grid_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a selector on a features CSV or ARFF file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--kind", choices=("dt", "nb"), default="dt")
    p.add_argument("--max-depth", type=int, default=12, help="0 for unlimited")
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--holdout", type=float, default=0.0, help="fraction held out for evaluation")
    p.add_argument("--prune", action="store_true", help="reduced-error pruning on the holdout")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a selector on a network layer list")
    p.add_argument("--model", required=True, help="model file, or 'oracle'")
    p.add_argument("--network", required=True,
                   help="network CSV or bundled name (" + ", ".join(dispatch.BUNDLED_NETWORKS) + ")")
    p.add_argument("--timing", default="synthetic", help="measured | synthetic | ranking:FILE")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--warmups", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("convolve", help="run one convolution through the model's choice")
    p.add_argument("--model", required=True)
    p.add_argument("--shape", required=True, help="W,H,C_IN,K,C_OUT")
    p.add_argument("--input", help=".npy image (C_IN,H,W); random if omitted")
    p.add_argument("--kernels", help=".npy kernel bank (C_OUT,C_IN,K,K)")
    p.add_argument("--out", help="write the output tensor as .npy")
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("grid-info", help="print the resolved shape grid and its size")
    grid_flags(p)
    p.add_argument("--list", action="store_true", help="print every shape")
    p.set_defaults(func=cmd_grid_info)

    for p in sub.choices.values():
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random choice")
        p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"convsel: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ParseError, FormatVersionMismatch, MissingShape, InvalidShape,
            DimensionMismatch, FileNotFoundError, IsADirectoryError) as exc:
        print(f"convsel: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvselError, AllMethodsFailed, OSError, ValueError) as exc:
        print(f"convsel: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
