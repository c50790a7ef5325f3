"""Command-line front door: gen, select, train, benchmark, eval.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 benchmark
finished with failed cells. All randomness flows from explicit --seed
flags; rerunning a command with identical flags reproduces its report
files byte for byte (wall-clock timings live in separate .timing.json
sidecars, since they can never be reproducible).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__
from ._kernels import BACKEND
from ._util import round_half_away_from_zero
from .benchmark import (
    BenchmarkGrid,
    DEFAULT_FRACTIONS,
    METRIC_KEYS,
    run_benchmark,
    run_experiment,
)
from .datamodel import (
    SyntheticSpec,
    TrainConfig,
    generate_synthetic,
    load_dataset,
    save_dataset,
    save_selection,
)
from .errors import CoreselectError, ValidationError
from .metrics import report as metrics_report
from .selection import JSCDS_MODES, METHODS, load_trace, normalize_method, save_trace, select
from .trainer import embed, load_model, predict, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code protocol."""

    def error(self, message):
        raise _UsageError(message)


def _fraction_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 < value <= 1.0):
        raise argparse.ArgumentTypeError(f"fraction must lie in (0, 1], got {value}")
    return value


def _noise_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 <= value < 1.0):
        raise argparse.ArgumentTypeError(f"noise rate must lie in [0, 1), got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _method_arg(text: str) -> str:
    try:
        return normalize_method(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _methods_list(text: str) -> tuple[str, ...]:
    return tuple(_method_arg(tok) for tok in text.split(",") if tok.strip())


def _fractions_list(text: str) -> tuple[float, ...]:
    return tuple(_fraction_arg(tok) for tok in text.split(",") if tok.strip())


def _seeds_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be integers: {text!r}") from None


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit(args, doc: dict, text: str) -> None:
    if getattr(args, "format", "text") == "json":
        print(json.dumps(doc, sort_keys=True))
    else:
        print(text)


def _add_common(parser: argparse.ArgumentParser, *, seed_default: int = 0) -> None:
    parser.add_argument("--seed", type=int, default=seed_default,
                        help="seed for all randomness in this command (default %(default)s)")
    parser.add_argument("--format", choices=("text", "json"), default="text",
                        help="stdout summary format (default %(default)s)")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=_positive_int, default=50,
                        help="training epochs (default %(default)s)")
    parser.add_argument("--learning-rate", "--lr", type=_positive_float, default=0.001,
                        dest="learning_rate", help="Adam learning rate (default %(default)s)")
    parser.add_argument("--batch-size", type=_positive_int, default=64,
                        help="batch size (default %(default)s)")
    parser.add_argument("--reselect-every", type=_positive_int, default=10,
                        help="epochs between core-set reselections (default %(default)s)")
    parser.add_argument("--hidden-width", type=_positive_int, default=32,
                        help="hidden layer width (default %(default)s)")
    parser.add_argument("--warmup-epochs", type=_nonneg_int, default=0,
                        help="full-data epochs before the first selection "
                             "(multiple of --reselect-every; default %(default)s)")


def _make_config(args, method: str, fraction: float) -> TrainConfig:
    try:
        return TrainConfig(
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            batch_size=args.batch_size,
            reselect_interval=args.reselect_every,
            hidden_width=args.hidden_width,
            seed=args.seed,
            method=method,
            fraction=fraction,
            warmup_epochs=args.warmup_epochs,
        )
    except ValidationError as exc:
        raise _UsageError(str(exc)) from None


def cmd_gen(args) -> int:
    try:
        spec = SyntheticSpec(
            num_classes=args.classes,
            samples_per_class=args.per_class,
            dims=args.dims,
            cluster_spread=args.spread,
            center_separation=args.separation,
            label_noise_rate=args.noise,
            seed=args.seed,
        )
    except ValidationError as exc:
        raise _UsageError(str(exc)) from None
    dataset = generate_synthetic(spec)
    save_dataset(dataset, args.out)
    flipped = round_half_away_from_zero(args.noise * len(dataset))
    doc = {
        "out": str(args.out),
        "n": len(dataset),
        "dims": dataset.dim,
        "num_classes": dataset.num_classes,
        "flipped_labels": flipped,
    }
    _emit(args, doc,
          f"wrote {len(dataset)} samples (d={dataset.dim}, J={dataset.num_classes}, "
          f"{flipped} flipped labels) to {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    if args.method == "forgetting" and args.trace is None:
        raise _UsageError("--method forgetting requires --trace")
    dataset = load_dataset(args.dataset)
    embeddings = None
    if args.model is not None:
        model = load_model(args.model)
        embeddings = embed(model, dataset.features)
    trace = load_trace(args.trace) if args.trace is not None else None

    tick = time.perf_counter()
    result = select(
        args.method,
        dataset,
        args.fraction,
        args.seed,
        embeddings=embeddings,
        trace=trace,
        jscds_mode=args.jscds_mode,
        stratified=args.stratified,
    )
    elapsed = time.perf_counter() - tick
    save_selection(result, args.out)

    doc = {
        "out": str(args.out),
        "method": result.method,
        "fraction": result.fraction,
        "k": len(result),
        "selection_seconds": elapsed,
    }
    text = (f"selected {len(result)}/{len(dataset)} samples with {result.method} "
            f"in {elapsed:.3f}s -> {args.out}")
    if result.scores is not None:
        values = result.scores.values
        doc["score_min"] = float(values.min())
        doc["score_avg"] = float(values.mean())
        doc["score_max"] = float(values.max())
        text += (f" (scores min/avg/max = {values.min():.6f}/"
                 f"{values.mean():.6f}/{values.max():.6f})")
    _emit(args, doc, text)
    return EXIT_OK


def cmd_train(args) -> int:
    dataset = load_dataset(args.dataset)
    config = _make_config(args, args.method, args.fraction)
    model, rep = run_experiment(dataset, config)

    prefix = str(args.out)
    report_doc = {
        "config": {
            "learning_rate": config.learning_rate,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "reselect_interval": config.reselect_interval,
            "hidden_width": config.hidden_width,
            "seed": config.seed,
            "method": config.method,
            "fraction": config.fraction,
            "warmup_epochs": config.warmup_epochs,
        },
        **rep.to_dict(),
    }
    _write_json(f"{prefix}.report.json", report_doc)
    _write_json(f"{prefix}.timing.json", rep.timing_dict())
    save_model(model, f"{prefix}.model.txt")
    save_trace(rep.trace, f"{prefix}.trace.csv")

    acc = rep.metrics.acc if rep.metrics is not None else float("nan")
    doc = {
        "report": f"{prefix}.report.json",
        "model": f"{prefix}.model.txt",
        "trace": f"{prefix}.trace.csv",
        "test_acc": acc,
        "reselect_epochs": list(rep.reselect_epochs),
    }
    _emit(args, doc,
          f"trained {config.method} at fraction {config.fraction}: test acc {acc:.4f}; "
          f"reselections at {list(rep.reselect_epochs)}; wrote {prefix}.report.json, "
          f"{prefix}.model.txt, {prefix}.trace.csv")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    dataset = load_dataset(args.dataset)
    template = _make_config(args, method="full", fraction=1.0)
    try:
        grid = BenchmarkGrid(
            methods=args.methods,
            fractions=args.fractions,
            seeds=args.seeds if args.seeds else (args.seed,),
            config=template,
        )
    except ValidationError as exc:
        raise _UsageError(str(exc)) from None

    result = run_benchmark(dataset, grid, dataset_name=Path(args.dataset).name)

    prefix = str(args.out)
    _write_json(f"{prefix}.report.json", result.report_dict())
    _write_json(f"{prefix}.timing.json", result.timing_dict())
    with open(f"{prefix}.series.csv", "w", newline="") as handle:
        fields = ["method", "fraction", "n_seeds"]
        for key in METRIC_KEYS:
            fields += [f"{key}_mean", f"{key}_std"]
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for row in result.series_rows():
            writer.writerow(row)

    failed = [c for c in result.cells + result.reference_cells if c.status == "failed"]
    doc = {
        "report": f"{prefix}.report.json",
        "series": f"{prefix}.series.csv",
        "cells": len(result.cells),
        "failed": len(failed),
    }
    text = (f"benchmark: {len(result.cells)} cells + {len(result.reference_cells)} reference "
            f"runs, {len(failed)} failed; wrote {prefix}.report.json, {prefix}.series.csv")
    if failed:
        text += "".join(
            f"\n  FAILED {c.method} fraction={c.fraction} seed={c.seed}: {c.error}"
            for c in failed
        )
    _emit(args, doc, text)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_eval(args) -> int:
    dataset = load_dataset(args.dataset)
    model = load_model(args.model)
    num_classes = max(dataset.num_classes, model.num_classes)
    rep = metrics_report(dataset.labels, predict(model, dataset.features), num_classes)
    doc = rep.to_dict()
    if args.out is not None:
        _write_json(args.out, doc)
    _emit(args, doc,
          f"acc {rep.acc:.4f}  precision {rep.precision_macro:.4f}  "
          f"recall {rep.recall_macro:.4f}  f1 {rep.f1_macro:.4f}  "
          f"specificity {rep.specificity_macro:.4f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="coreselect",
                     description="Core-set selection experiments: generate data, "
                                 "select subsets, train, and benchmark.")
    parser.add_argument("--version", action="version",
                        version=f"coreselect {__version__} (kernels: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset file")
    p.add_argument("--classes", type=_positive_int, required=True, help="number of classes")
    p.add_argument("--per-class", type=_positive_int, required=True,
                   help="samples per class")
    p.add_argument("--dims", type=_positive_int, required=True, help="feature dimensions")
    p.add_argument("--noise", type=_noise_arg, default=0.0,
                   help="fraction of labels flipped to a wrong class (default %(default)s)")
    p.add_argument("--spread", type=_positive_float, default=1.0,
                   help="per-cluster standard deviation (default %(default)s)")
    p.add_argument("--separation", type=_positive_float, default=5.0,
                   help="distance between class centers (default %(default)s)")
    p.add_argument("--out", required=True, help="dataset file to write")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("select", help="select a core set from a dataset file")
    p.add_argument("dataset", help="dataset file")
    p.add_argument("--method", type=_method_arg, required=True,
                   help=f"one of {', '.join(METHODS)}")
    p.add_argument("--fraction", type=_fraction_arg, required=True,
                   help="fraction of samples to keep, in (0, 1]")
    p.add_argument("--model", default=None,
                   help="model file; its hidden activations become the embeddings "
                        "(default: raw features)")
    p.add_argument("--trace", default=None,
                   help="epoch trace file (required for --method forgetting)")
    p.add_argument("--jscds-mode", choices=JSCDS_MODES, default="closest_avg",
                   help="band selection mode for jscds (default %(default)s)")
    p.add_argument("--stratified", action="store_true",
                   help="apportion the jscds budget per class by largest remainder")
    p.add_argument("--out", required=True, help="selection file to write")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train with periodic core-set reselection")
    p.add_argument("dataset", help="dataset file (split 8:1:1 train/val/test by --seed)")
    p.add_argument("--method", type=_method_arg, default="full",
                   help=f"selector driving reselection, one of {', '.join(METHODS)} "
                        "(default %(default)s)")
    p.add_argument("--fraction", type=_fraction_arg, default=1.0,
                   help="fraction of the training split to keep (default %(default)s)")
    _add_train_flags(p)
    p.add_argument("--out", required=True,
                   help="output prefix; writes <out>.report.json, <out>.timing.json, "
                        "<out>.model.txt, <out>.trace.csv")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="run a methods x fractions x seeds sweep")
    p.add_argument("dataset", help="dataset file")
    p.add_argument("--methods", type=_methods_list,
                   default=("random", "moderate", "kcenter_greedy", "forgetting", "jscds"),
                   help="comma-separated selector names (default %(default)s)")
    p.add_argument("--fractions", type=_fractions_list, default=DEFAULT_FRACTIONS,
                   help="comma-separated fractions in (0, 1] (default 0.1,0.3,0.5,0.7)")
    p.add_argument("--seeds", type=_seeds_list, default=(),
                   help="comma-separated seeds (default: the --seed value)")
    _add_train_flags(p)
    p.add_argument("--out", required=True,
                   help="output prefix; writes <out>.report.json, <out>.timing.json, "
                        "<out>.series.csv")
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("eval", help="evaluate a saved model on a dataset file")
    p.add_argument("dataset", help="dataset file")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--out", default=None, help="metrics JSON to write (optional)")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"coreselect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CoreselectError as exc:
        print(f"coreselect: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
