"""Command-line entry point.

    drst <experiment> --config cfg.json [--out report.csv]
                      [--format csv|json] [--seed-override N] [--threads K]

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    EXPERIMENTS,
    ConfigError,
    emit_report,
    load_config,
    render_report,
    run_experiment,
)
from .optim import NumericalError
from .oracle import TrialFailure


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drst",
        description="Doubly robust self-training experiment harness",
    )
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS),
                        help="experiment suite to run")
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None,
                        help="output path (default: config 'output' or stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--seed-override", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config["experiment"] = args.experiment
        if args.seed_override is not None:
            config["seed"] = args.seed_override
        rows = run_experiment(config, threads=max(1, args.threads))
        fmt = args.format or config.get("format", "csv")
        out = args.out or config.get("output")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrialFailure as exc:
        print(f"numerical failure in trial {exc.trial}: {exc.cause}",
              file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    try:
        if out is None:
            sys.stdout.write(render_report(rows, fmt))
        else:
            emit_report(rows, fmt, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
