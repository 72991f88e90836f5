"""Command line entry point: ``octune run | defaults | analyze | runtime-report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_grid_args(p):
    p.add_argument("--config", help="TOML or JSON file with experiment settings")
    p.add_argument("--data-dir")
    p.add_argument("--descriptors", type=_csv_list, help="comma separated, e.g. NND,ALP,SVM")
    p.add_argument("--budget", type=int, help="evaluations per search")
    p.add_argument("--proposal-cap", type=int, help="proposals per search")
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-class-size", type=int)
    p.add_argument("--label-column")
    p.add_argument("--missing", choices=["reject", "drop"])
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)


def _config(args, **extra) -> harness.ExperimentConfig:
    overrides = {
        "data_dir": args.data_dir, "descriptors": args.descriptors, "budget": args.budget,
        "proposal_cap": args.proposal_cap, "folds": args.folds, "seed": args.seed,
        "min_class_size": args.min_class_size, "label_column": args.label_column,
        "missing": args.missing, "out": args.out, "jobs": args.jobs,
    }
    overrides.update(extra)
    if args.config:
        return harness.ExperimentConfig.from_file(args.config, **overrides)
    return harness.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_run(args):
    config = _config(args, optimisers=args.optimisers,
                     search_logs=True if args.search_logs else None)
    summary = harness.run_experiment(config)
    print(json.dumps(summary))
    return 1 if summary["failed"] else 0


def cmd_defaults(args):
    config = _config(args, optimisers=["default"])
    summary = harness.run_experiment(config)
    print(json.dumps(summary))
    return 1 if summary["failed"] else 0


def _source(args, name, parser_error):
    """Positional path or --records; a run directory resolves to its ``name`` file."""
    path = args.path or args.records
    if path is None:
        parser_error(f"a {name} file or run directory is required")
    path = Path(path)
    return path / name if path.is_dir() else path


def cmd_analyze(args):
    records = harness.load_records(_source(args, "records.jsonl", args.error))
    baseline = harness.load_records(args.baseline) if args.baseline else None
    try:
        report = harness.analyze(records, baseline, args.optimiser, weighting=not args.unweighted)
    except harness.GridMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    harness.write_report(report, args.out)
    print((Path(args.out) / "report.md").read_text(), end="")
    return 0


def cmd_runtime(args):
    rows = harness.report_runtime(harness.load_records(_source(args, "timings.jsonl", args.error)))
    harness.write_runtime_csv(rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="octune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run hyperparameter searches over the problem grid")
    _add_grid_args(p)
    p.add_argument("--optimisers", type=_csv_list,
                   help="comma separated: random,hooke_jeeves,nelder_mead,tpe,malherbe_powell")
    p.add_argument("--search-logs", action="store_true", help="keep a log per search")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("defaults", help="score the default hyperparameters on the same grid")
    _add_grid_args(p)
    p.set_defaults(func=cmd_defaults)

    p = sub.add_parser("analyze", help="summarise a complete records file")
    p.add_argument("path", nargs="?", help="records.jsonl or a run directory")
    p.add_argument("--records", help="same as the positional path")
    p.add_argument("--baseline", help="records from the defaults command")
    p.add_argument("--optimiser", default="malherbe_powell")
    p.add_argument("--unweighted", action="store_true", help="weigh problems equally")
    p.add_argument("--out", default="analysis")
    p.set_defaults(func=cmd_analyze, error=p.error)

    p = sub.add_parser("runtime-report", help="mean cumulative time per evaluation count")
    p.add_argument("path", nargs="?", help="timings.jsonl or a run directory")
    p.add_argument("--records", help="same as the positional path")
    p.add_argument("--out", default="runtime.csv")
    p.set_defaults(func=cmd_runtime, error=p.error)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
