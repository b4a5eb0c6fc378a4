"""Command-line front end: ``train``, ``sweep`` and ``weights``.

Exit status: 0 when every requested file was written, 1 for run failures
(divergence, all sweep cells failed, unreadable history), 2 for usage and
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .config import ExperimentConfig, dump_config, load_config
from .errors import ConfigError, DataFormatError, DivergenceError, PadaError
from .evaluation import evaluate, sweep_target_classes, weight_stats, write_eval_csv, write_sweep_csv
from .model import predict_labels, save_params
from .train import Mode, train_run, write_history_csv
from .weighting import ClassWeights

log = logging.getLogger("pada")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MODE_NAMES = [m.value for m in Mode]


def _resolve(args) -> ExperimentConfig:
    config = load_config(args.config, args.set or [])
    if args.mode:
        config.set("mode", args.mode)
    if args.out:
        config.set("out_dir", args.out)
    return config


def cmd_train(args) -> int:
    config = _resolve(args)
    dataset = config.dataset()
    model_config = config.model_config(dataset)
    train_config = config.train_config()
    try:
        params, history = train_run(dataset, model_config, train_config)
    except DivergenceError as exc:
        print(f"error: training diverged at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_history_csv(history, out / "history.csv", dataset.num_source_classes, dataset.target_class_set)
    save_params(params, out / "params.csv")
    (out / "config.txt").write_text(dump_config(config))
    if dataset.has_target_labels:
        report = evaluate(params, dataset)
        write_eval_csv(report, out / "eval.csv")
        print(f"target_acc={report.target_accuracy:.17g}")
    else:
        src_acc = float((predict_labels(params, dataset.source_x) == dataset.source_y).mean())
        with open(out / "eval.csv", "w", newline="") as fh:
            fh.write(f"metric,value\ntarget_acc,unavailable\nsrc_acc,{src_acc:.17g}\n")
        print("target_acc=unavailable")
    return EXIT_OK


def _parse_ks(text: Optional[str]) -> list[int]:
    if text is None:
        return []
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("ks", f"expected a comma list of integers, got {text!r}") from None


def _parse_modes(values: Optional[Sequence[str]]) -> list[Mode]:
    names = [n.strip() for v in (values or ["source-only,dann,pada"]) for n in v.split(",") if n.strip()]
    modes = []
    for name in names:
        if name not in MODE_NAMES:
            raise ConfigError("mode", f"unknown mode {name!r}; choose from {', '.join(MODE_NAMES)}")
        modes.append(Mode(name))
    return modes


def cmd_sweep(args) -> int:
    ks = _parse_ks(args.ks)
    if not ks:
        print("error: --ks needs at least one target class count", file=sys.stderr)
        return EXIT_USAGE
    modes = _parse_modes(args.mode)
    config = load_config(args.config, args.set or [])
    if args.out:
        config.set("out_dir", args.out)
    dataset = config.dataset()
    for k in ks:
        if not 1 <= k <= len(dataset.target_class_set):
            raise ConfigError("ks", f"k={k} outside [1, {len(dataset.target_class_set)}]")
    model_config = config.model_config(dataset)
    base = config.train_config()
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    rows = sweep_target_classes(
        dataset, ks, model_config, [replace(base, mode=m) for m in modes], base_seed=config.get("seed", 0), jobs=jobs
    )
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / "sweep.csv")
    for r in rows:
        print(f"k={r.k} mode={r.mode} target_acc={r.target_accuracy:.4f} status={r.status}")
    return EXIT_OK if any(r.status == "ok" for r in rows) else EXIT_FAIL


def read_final_weights(path) -> ClassWeights:
    """Last-epoch ``gamma_*`` columns of a history CSV."""
    with open(path, newline="") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",") if lines and lines[0] else []
    cols = []
    while f"gamma_{len(cols)}" in header:
        cols.append(header.index(f"gamma_{len(cols)}"))
    if not cols:
        raise DataFormatError(path, 1, "header has no gamma_0.. columns")
    last = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != len(header):
            raise DataFormatError(path, lineno, f"expected {len(header)} fields, got {len(fields)}")
        try:
            last = [float(fields[c]) for c in cols]
        except ValueError as exc:
            raise DataFormatError(path, lineno, str(exc)) from None
    if last is None:
        raise DataFormatError(path, len(lines), "history has no epochs")
    return ClassWeights(last, normalized=True)


def cmd_weights(args) -> int:
    try:
        weights = read_final_weights(args.history)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    shared = None
    if args.config or args.set:
        config = load_config(args.config, args.set or [])
        shared = config.get("target_classes") or config.dataset().target_class_set
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "weight"])
    for c, w in enumerate(weights.gamma):
        writer.writerow([c, format(w, ".17g")])
    if shared:
        stats = weight_stats(weights, shared)
        writer.writerow(["mean_shared", format(stats.mean_shared, ".17g")])
        writer.writerow(["mean_outlier", format(stats.mean_outlier, ".17g")])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "weights.csv").write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pada", description="Partial adversarial domain adaptation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
        p.add_argument("--out", help="output directory (config key out_dir)")

    p = sub.add_parser("train", help="train one model and write history, params and eval CSVs")
    common(p)
    p.add_argument("--mode", choices=MODE_NAMES)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="accuracy over target class counts and modes")
    common(p)
    p.add_argument("--ks", help="comma list of target class counts, e.g. 8,6,4,2")
    p.add_argument("--mode", action="append", help="mode or comma list of modes (repeatable)")
    p.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("weights", help="final-epoch class weights from a history CSV")
    p.add_argument("history")
    common(p)
    p.set_defaults(func=cmd_weights)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PadaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
