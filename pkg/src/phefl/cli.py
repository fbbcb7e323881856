"""Command-line front end: ``phefl run | compare | partition-report | plot-data``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import metrics
from .archive import ArchiveWriter, read_archive
from .config import load_config
from .exceptions import ConfigurationError, IngestionError, InputError, TrainingDivergence
from .model import Dataset
from .orchestrator import build_world, run_experiment
from .partition import label_matrix

EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _overrides(args) -> dict:
    pairs = {
        "strategy": args.strategy,
        "scenario": args.scenario,
        "seed": args.seed,
        "rounds": args.rounds,
        "test_mode": args.test_mode,
        "forced_alpha": args.forced_alpha,
        "edge_aggregation_frequency": args.agg_frequency,
    }
    return {k: v for k, v in pairs.items() if v is not None}


def cmd_run(args) -> int:
    config = load_config(args.config)
    config = config.replace(**_overrides(args))
    out = args.out or os.path.join(
        "results", f"{config.scenario}_{config.test_mode}_{config.strategy.value}_seed{config.seed}.jsonl"
    )
    workers = args.workers or os.cpu_count() or 1
    with ArchiveWriter(out, config) as writer:
        def on_round(record):
            writer.append(record)
            print(f"round {record.round:4d}  mean_accuracy {record.mean_accuracy:.6f}  "
                  f"({record.wall_time:.2f}s)", flush=True)
        run_experiment(config, workers=workers, on_round=on_round)
    print(f"wrote {out}")
    return 0


def _fmt(v, digits=2):
    return "-" if v is None else f"{100 * v:.{digits}f}"


def cmd_compare(args) -> int:
    archives = [read_archive(p) for p in args.archives]
    shortest = min(len(a.log) for a in archives)
    if shortest == 0:
        raise ConfigurationError("cannot compare an archive with no rounds")
    n = args.n or shortest
    labels = [a.label for a in archives]
    rows = metrics.compare_strategies([a.series for a in archives], n, args.m, labels=labels,
                                      mode=args.dropm_window_mode)
    for row, a, path in zip(rows, archives, args.archives):
        row["archive"] = path
        row["scenario"] = a.config.scenario
        row["test_mode"] = a.config.test_mode
        row["complete"] = a.complete

    acc_col, drop_col = f"Acc{n}", f"Drop{args.m:g}"
    header = f"{'strategy':<22} {'scenario':<8} {'test':<11} {acc_col:>8} {drop_col:>8} {'rank':>5}"
    print(header)
    print("-" * len(header))
    for row in rows:
        print(f"{row['strategy']:<22} {row['scenario']:<8} {row['test_mode']:<11} "
              f"{_fmt(row['acc_n']):>8} {_fmt(row['drop_m']):>8} {row['rank']:>5}")
    report = {"N": n, "M": args.m, "window_mode": args.dropm_window_mode, "rows": rows}
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)
    return 0


def _pct(count, total) -> str:
    frac = Fraction(int(count) * 100, int(total))
    return str(frac.numerator) if frac.denominator == 1 else f"{float(frac):.2f}"


def partition_report(config) -> dict:
    """Per-edge label histograms of the training shards and the edge test sets."""
    world = build_world(config)
    k = config.num_classes
    train = label_matrix([Dataset.concat(e) for e in world.shards], k)
    ttd = label_matrix(world.tests.ttd, k)
    return {
        "scenario": config.scenario,
        "test_mode": config.test_mode,
        "num_classes": k,
        "train_counts": train.tolist(),
        "train_percent": [[_pct(c, row.sum()) for c in row] for row in train],
        "ttd_counts": ttd.tolist(),
        "ttd_percent": [[_pct(c, row.sum()) for c in row] for row in ttd],
        "ttd_sizes": ttd.sum(axis=1).tolist(),
        "ptd_sizes": [len(d) for d in world.tests.ptd],
        "etd_sizes": [len(d) for d in world.tests.etd],
    }


def _print_matrix(title, rows, totals):
    k = len(rows[0])
    print(title)
    print(f"{'':<8}" + "".join(f"{'label' + str(c):>8}" for c in range(k)) + f"{'TOTAL':>8}")
    for e, (row, total) in enumerate(zip(rows, totals), start=1):
        print(f"{'Edge ' + str(e):<8}" + "".join(f"{v:>8}" for v in row) + f"{total:>8}")
    print()


def cmd_partition_report(args) -> int:
    config = load_config(args.config).replace(**_overrides(args))
    report = partition_report(config)
    n_edges = len(report["ttd_sizes"])
    _print_matrix(f"training shards, {config.scenario} (unit: %)", report["train_percent"], ["100"] * n_edges)
    if config.test_mode == "imbalanced":
        _print_matrix(f"imbalanced TTD, {config.scenario} (unit: %)", report["ttd_percent"], ["100"] * n_edges)
    else:
        _print_matrix(f"balanced TTD, {config.scenario} (unit: examples)", report["ttd_counts"], report["ttd_sizes"])
    print("PTD sizes:", " ".join(str(s) for s in report["ptd_sizes"]))
    print("ETD sizes:", " ".join(str(s) for s in report["etd_sizes"]))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)
    return 0


def plot_table(archives, labels, window):
    """Rows of ``round, raw_1, rolling_1, raw_2, rolling_2, ...``; short series padded with None."""
    columns = []
    for a in archives:
        raw = a.series
        columns.append((raw, metrics.rolling_mean(raw, window)))
    length = max(len(raw) for raw, _ in columns)
    header = ["round"]
    for label in labels:
        header += [f"{label}_raw", f"{label}_rolling"]
    rows = []
    for i in range(length):
        row = [i + 1]
        for raw, roll in columns:
            row += [raw[i], roll[i]] if i < len(raw) else [None, None]
        rows.append(row)
    return header, rows


def cmd_plot_data(args) -> int:
    archives = [read_archive(p) for p in args.archives]
    labels = []
    for a in archives:
        label = a.label
        if label in labels:
            label = f"{label}_{len(labels)}"
        labels.append(label)
    header, rows = plot_table(archives, labels, args.window)
    print("\t".join(header))
    for row in rows:
        print("\t".join("" if v is None else repr(v) for v in row))
    return 0


def _add_overrides(p):
    p.add_argument("--strategy", choices=["phe_fl", "edge_cloud", "only_edge"])
    p.add_argument("--scenario", choices=["D1", "D2", "D3", "D4"])
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--test-mode", choices=["imbalanced", "balanced"])
    p.add_argument("--forced-alpha", type=float)
    p.add_argument("--agg-frequency", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phefl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment and write a results archive")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="archive path (default: results/<scenario>_<mode>_<strategy>_seed<seed>.jsonl)")
    p.add_argument("--workers", type=int, help="training processes (default: CPU count)")
    _add_overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="AccN / DropM table over archives")
    p.add_argument("archives", nargs="+")
    p.add_argument("--n", type=int, help="AccN horizon (default: shortest archive)")
    p.add_argument("--m", type=float, default=0.0, help="DropM threshold in percent")
    p.add_argument("--dropm-window-mode", choices=list(metrics.WINDOW_MODES), default="sliding")
    p.add_argument("--json", help="also write the report as JSON here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("partition-report", help="per-edge label histograms")
    p.add_argument("--config", required=True)
    p.add_argument("--json")
    _add_overrides(p)
    p.set_defaults(func=cmd_partition_report)

    p = sub.add_parser("plot-data", help="tab-separated raw and rolling accuracy columns")
    p.add_argument("archives", nargs="+")
    p.add_argument("--window", type=int, default=metrics.DROP_WINDOW)
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, IngestionError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
