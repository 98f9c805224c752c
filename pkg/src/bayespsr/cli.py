"""Command line entry point: ``run``, ``calibrate``, ``aggregate`` and ``plot``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness


def _run(args) -> int:
    cfg = harness.ExperimentConfig.from_json(args.config)
    cal = harness.calibrate(cfg)
    records = harness.run_experiment(cfg, workers=args.workers, calibration=cal)
    out = Path(args.out or cfg.output)
    harness.write_records(records, out)
    harness.write_calibration(cal, harness.calibration_path(out))
    print(f"wrote {len(records)} records to {out}")
    return 0


def _calibrate(args) -> int:
    cfg = harness.ExperimentConfig.from_json(args.config)
    cal = harness.calibrate(cfg)
    print(json.dumps(cal.to_dict(), sort_keys=True))
    if args.out:
        harness.write_calibration(cal, args.out)
    return 0


def _aggregate(args) -> int:
    records = harness.read_records(args.records)
    rows = harness.aggregate(records, n_grid=args.grid, budget=args.budget)
    out = Path(args.out) if args.out else Path(args.records).with_suffix(".agg.csv")
    harness.write_aggregate(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _plot(args) -> int:
    from .plotting import emit_plot

    rows = harness.read_aggregate(args.aggregate)
    emit_plot(rows, args.metric, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayespsr", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run all trials of a config and write the records CSV")
    p.add_argument("config")
    p.add_argument("--out", help="override the config's output path")
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${harness.WORKERS_ENV} or CPU count)")
    p.set_defaults(func=_run)

    p = sub.add_parser("calibrate", help="print the single-shot variance for a config")
    p.add_argument("config")
    p.add_argument("--out", help="also write the summary JSON here")
    p.set_defaults(func=_calibrate)

    p = sub.add_parser("aggregate", help="percentiles across trials on a log-spaced shot grid")
    p.add_argument("records")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--budget", type=int, help="last checkpoint (default: largest recorded count)")
    p.add_argument("--out")
    p.set_defaults(func=_aggregate)

    p = sub.add_parser("plot", help="SVG of an aggregate CSV")
    p.add_argument("aggregate")
    p.add_argument("--metric", choices=("energy", "fidelity"), default="energy")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
