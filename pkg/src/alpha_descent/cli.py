"""Command line front end: ``alpha-descent run`` and ``alpha-descent check``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace

from .harness import (
    ALGORITHMS,
    EXPLORATIONS,
    ExperimentConfig,
    parse_config,
    run_experiment,
    write_trace,
)


def _sample_counts(text):
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected an integer or comma-separated integers, got {text!r}"
        )


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _add_config_flags(parser):
    for name, kind in _FIELD_TYPES.items():
        flag = "--" + name.replace("_", "-")
        if name == "sample_count":
            parser.add_argument(flag, type=_sample_counts, default=None)
        elif name == "algorithm":
            parser.add_argument(flag, choices=ALGORITHMS, default=None)
        elif name == "exploration":
            parser.add_argument(flag, choices=EXPLORATIONS, default=None)
        elif kind == "bool":
            parser.add_argument(
                flag, action=argparse.BooleanOptionalAction, default=None
            )
        elif kind == "int":
            parser.add_argument(flag, type=int, default=None)
        else:
            parser.add_argument(flag, type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="alpha-descent",
        description="Mixture-weight optimisation by alpha-divergence descent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser(
        "run", help="run an experiment from a JSON config, with optional overrides"
    )
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument(
        "--max-workers",
        type=int,
        default=None,
        help="replicate thread count; 1 forces a serial run",
    )
    _add_config_flags(run)
    sub.add_parser("check", help="run the exact-oracle invariant battery")
    return parser


def _run(args):
    config = parse_config(args.config)
    overrides = {
        name: getattr(args, name)
        for name in _FIELD_TYPES
        if getattr(args, name) is not None
    }
    if overrides:
        config = replace(config, **overrides)
    exit_code = 0
    multi = len(config.sample_count) > 1
    for count in config.sample_count:
        sub_config = replace(config, sample_count=(count,))
        out_dir = (
            os.path.join(args.out, f"samples_{count}") if multi else args.out
        )
        traces = run_experiment(sub_config, max_workers=args.max_workers)
        summary = write_trace(traces, out_dir, sub_config)
        bad = sum(1 for t in traces if not t.status.startswith("completed"))
        print(f"wrote {summary} ({len(traces)} replicates, {bad} aborted)")
        if bad:
            exit_code = 1
    return exit_code


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        code = _run(args)
    else:
        from .check import run_checks

        code = 1 if run_checks() else 0
    sys.exit(code)


if __name__ == "__main__":
    main()
