"""``kanfis`` command line: train, eval, rules, ablate, complexity.

Exit status is 0 on success, 1 on a runtime or domain error and 2 on a
configuration or usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .baseline import complexity_csv, complexity_table
from .config import dump_config, load_config
from .data import load_csv, write_metrics
from .errors import ConfigurationError, KanfisError, SchemaError
from .estimator import _KANFISBase
from .experiments import (
    EFFECTIVE_CONFIG,
    METRICS_JSON,
    METRICS_TXT,
    ablation_csv,
    evaluate,
    run_ablation,
    run_experiment,
    rules_for,
    write_run,
)
from .interpret import render_report, write_feature_counts

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    """Bad command-line value detected after argparse (exit 2)."""


def _say(*parts):
    print(*parts, file=sys.stderr)


def _load_fitted(model_path, data_path):
    est, extra = _KANFISBase.load(model_path)
    ds = load_csv(data_path, extra["target"], extra["task"])
    names = extra["feature_names"]
    if ds.n_features != est.model_.n_features:
        raise SchemaError(f"model {model_path} takes {est.model_.n_features} features "
                          f"but data {data_path} has {ds.n_features}")
    if ds.feature_names != names:
        raise SchemaError(f"feature names differ: model {model_path} has {names}, "
                          f"data {data_path} has {ds.feature_names}")
    return est, extra, ds


def cmd_train(args):
    run = load_config(args.config)
    out = args.out or run.output_dir
    os.makedirs(out, exist_ok=True)
    result = run_experiment(run)
    write_run(result, run, out)
    for k, v in result.metrics.items():
        print(f"{k}={v!r}")
    _say(f"trained in {result.report.seconds:.1f}s; outputs in {out}")
    return EXIT_OK


def cmd_eval(args):
    est, extra, ds = _load_fitted(args.model, args.data)
    metrics = evaluate(est, ds)
    for k, v in metrics.items():
        print(f"{k}={v!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_metrics(metrics, os.path.join(args.out, METRICS_TXT),
                      os.path.join(args.out, METRICS_JSON))
    return EXIT_OK


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_text(path, text):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_rules(args):
    if not 0 < args.threshold < 1:
        raise UsageError("--threshold must lie in (0, 1)")
    est, extra, ds = _load_fitted(args.model, args.data)
    rules = rules_for(est, ds, args.threshold)
    kw = dict(task=est.model_.task, target_name=extra["target"],
              class_names=extra.get("class_names"))
    sys.stdout.write(render_report(rules, "plain", **kw))
    if args.markdown:
        _write_text(args.markdown, render_report(rules, "markdown", **kw))
    counts = args.counts or os.path.join(os.path.dirname(os.path.abspath(args.model)),
                                         "rule_feature_counts.csv")
    _ensure_parent(counts)
    write_feature_counts(rules, counts)
    return EXIT_OK


def _parse_grid(raw):
    try:
        grid = [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"--lambda-s-grid: cannot parse {raw!r}") from None
    if not grid:
        raise UsageError("--lambda-s-grid is empty")
    return grid


def cmd_ablate(args):
    run = load_config(args.config)
    grid = _parse_grid(args.lambda_s_grid)
    out = args.out or os.path.join(run.output_dir, "ablation")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, EFFECTIVE_CONFIG), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(replace(run, output_dir=os.path.abspath(out))))
        fh.write(f"; lambda_s grid: {', '.join(repr(g) for g in grid)}\n")
    rows, failures = run_ablation(run, grid, out, parallel=args.parallel, workers=args.workers)
    text = ablation_csv(rows)
    with open(os.path.join(out, "ablation.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)
    if failures:
        _say(f"{len(failures)} of {len(grid)} grid points failed:")
        for f in failures:
            _say("  " + f)
        return EXIT_RUNTIME
    return EXIT_OK


def _parse_range(raw):
    try:
        if ".." in raw:
            lo, hi = (int(p) for p in raw.split(".."))
            values = list(range(lo, hi + 1))
        else:
            values = [int(p) for p in raw.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"--n-range: expected 'a..b' or a list of integers, got {raw!r}") from None
    if not values or min(values) < 1:
        raise UsageError("--n-range must hold positive integers")
    return values


def cmd_complexity(args):
    for name in ("m", "h", "k"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name} must be a positive integer")
    rows = complexity_table(_parse_range(args.n_range), args.m, args.h, args.k)
    text = complexity_csv(rows)
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="kanfis", description="Additive neuro-fuzzy models.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a model from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="output directory (default: [output] dir)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a saved model on a CSV file")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", help="directory for metrics.txt / metrics.json")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("rules", help="print IF-THEN rules of a saved model")
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True, help="CSV used for tercile labels and firing strengths")
    r.add_argument("--threshold", type=float, default=0.5)
    r.add_argument("--markdown", help="also write a markdown table to this path")
    r.add_argument("--counts", help="feature-count CSV path (default: next to the model)")
    r.set_defaults(func=cmd_rules)

    a = sub.add_parser("ablate", help="sweep the sparsity weight")
    a.add_argument("--config", required=True)
    a.add_argument("--lambda-s-grid", required=True, help="comma-separated values, e.g. 0,1e-2")
    a.add_argument("--out", help="output directory (default: <[output] dir>/ablation)")
    a.add_argument("--parallel", action="store_true", help="run grid points in separate processes")
    a.add_argument("--workers", type=int, default=None)
    a.set_defaults(func=cmd_ablate)

    c = sub.add_parser("complexity", help="product vs additive parameter counts")
    c.add_argument("--n-range", default="2..10")
    c.add_argument("--m", type=int, default=3)
    c.add_argument("--h", type=int, default=16)
    c.add_argument("--k", type=int, default=3)
    c.add_argument("--out", help="also write the CSV to this path")
    c.set_defaults(func=cmd_complexity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigurationError, UsageError) as exc:
        _say(f"kanfis {args.command}: configuration error: {exc}")
        return EXIT_CONFIG
    except (KanfisError, OSError, ValueError, KeyError) as exc:
        msg = f"{exc.filename}: {exc.strerror}" if isinstance(exc, OSError) and exc.filename else exc
        _say(f"kanfis {args.command}: error: {msg}")
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any other failure is still a runtime error
        _say(f"kanfis {args.command}: unexpected {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
