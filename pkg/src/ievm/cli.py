"""Command-line interface.

Subcommands:
  synth    write a synthetic blob dataset
  fit      fit a model from a feature file
  predict  classify a feature file with a saved model
  reduce   shrink a saved model's per-class extreme vectors
  run      execute a configured experiment and write its report
  convert  translate feature files between csv and binary
"""

from __future__ import annotations

import argparse
import json
import sys

from . import fitting, harness, io, reduction
from .errors import EVMError
from .model import EVMConfig
from .predict import predict


def _add_synth(sub) -> None:
    p = sub.add_parser("synth", help="generate a synthetic blob dataset")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")


def _add_fit(sub) -> None:
    p = sub.add_parser("fit", help="fit a model from a labelled feature file")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tail-size", type=int, default=75)
    p.add_argument("--distance-multiplier", type=float, default=0.5)
    p.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")
    p.add_argument("--rejection-threshold", type=float, default=0.5)


def _add_predict(sub) -> None:
    p = sub.add_parser("predict", help="classify a feature file with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", default=None, help="write csv here instead of stdout")


def _add_reduce(sub) -> None:
    p = sub.add_parser("reduce", help="reduce a saved model's extreme vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--mode", choices=("wksc", "set-cover", "set-cover-budget"), required=True
    )
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--coverage-threshold", type=float, default=0.5)
    p.add_argument("--bisection-tolerance", type=float, default=0.01)


def _add_run(sub) -> None:
    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("--config", required=True, help="json configuration file")
    p.add_argument("--out-report", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--include-timings", action="store_true")


def _add_convert(sub) -> None:
    p = sub.add_parser("convert", help="convert a feature file between formats")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default=None)


def _cmd_synth(args) -> int:
    data = harness.synth_blobs(
        args.classes, args.per_class, args.dim, args.spread, args.seed
    )
    io.save_features(data, args.out, args.format)
    print(f"wrote {len(data)} samples to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    data = io.load_features(args.train)
    config = EVMConfig(
        tail_size=args.tail_size,
        distance_multiplier=args.distance_multiplier,
        metric=args.metric,
        rejection_threshold=args.rejection_threshold,
    )
    model = fitting.batch_fit(data, config)
    io.save_model(model, args.out)
    print(
        f"fitted {model.n_extreme_vectors} extreme vectors over "
        f"{len(model.class_labels)} classes -> {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    model = io.load_model(args.model)
    data = io.load_features(args.data)
    lines = ["index,true_label,predicted_label,score"]
    for i, sample in enumerate(data):
        result = predict(model, sample.features, args.threshold)
        lines.append(f"{i},{sample.label},{result.label},{result.score!r}")
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def _cmd_reduce(args) -> int:
    model = io.load_model(args.model)
    if args.mode in ("wksc", "set-cover-budget") and args.budget is None:
        raise EVMError(f"--mode {args.mode} requires --budget")
    metric = model.config.metric
    before = model.n_extreme_vectors
    for label in model.class_labels:
        evs = model.classes[label]
        if args.mode == "wksc":
            kept, cache = reduction.reduce_wksc(
                evs, model.coverage_sums[label], args.budget, metric
            )
        elif args.mode == "set-cover":
            kept = reduction.reduce_set_cover(evs, args.coverage_threshold, metric)
            cache = reduction.coverage_sums(kept, metric)
        else:
            kept = reduction.reduce_set_cover_budget(
                evs, args.budget, args.bisection_tolerance, metric
            )
            cache = reduction.coverage_sums(kept, metric)
        model.classes[label] = kept
        model.coverage_sums[label] = cache
    io.save_model(model, args.out)
    print(f"reduced {before} -> {model.n_extreme_vectors} extreme vectors -> {args.out}")
    return 0


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        try:
            mapping = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EVMError(f"bad configuration file {args.config}: {exc}") from None
    config = harness.ExperimentConfig.from_mapping(mapping)
    report = harness.run_experiment(config)
    harness.emit_report(report, args.out_report, args.format, args.include_timings)
    last = report.epochs[-1]
    summary = ", ".join(
        f"DIR@{cell['far_target']:g}={cell['dir']:.3f}" for cell in last.dir_at_far
    )
    print(f"{len(report.epochs)} epochs, final {summary} -> {args.out_report}")
    return 0


def _cmd_convert(args) -> int:
    target = io.convert_features(args.src, args.out, args.format)
    print(f"converted {args.src} -> {args.out} ({target})")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "reduce": _cmd_reduce,
    "run": _cmd_run,
    "convert": _cmd_convert,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ievm", description="extreme value machine toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_synth, _add_fit, _add_predict, _add_reduce, _add_run, _add_convert):
        add(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (EVMError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
