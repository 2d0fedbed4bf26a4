"""Command-line entry point.

Usage::

    rispos run --config exp.yaml --seed 7 --trials 200 --output results.csv [--raw-slots T]
    rispos crb --config exp.yaml --output bounds.csv
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ExperimentConfig, load_config
from .exceptions import ConfigError
from .experiments import run_crb_table, run_experiment, write_csv

log = logging.getLogger("rispos")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rispos", description="RIS-aided positioning experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo sweep -> CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=_u64, default=None)
    run.add_argument("--trials", type=_positive, default=None)
    run.add_argument("--output", default=None)
    run.add_argument("--raw-slots", type=_positive, default=None, dest="raw_slots",
                     help="simulate T raw pilot slots instead of the decorrelated model")
    run.add_argument("--workers", type=_positive, default=None)

    crb = sub.add_parser("crb", help="bound table -> CSV")
    crb.add_argument("--config", required=True)
    crb.add_argument("--output", default=None)
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    kw = {}
    for name, attr in (("seed", "seed"), ("trials", "trials"), ("output", "output_path"),
                       ("raw_slots", "raw_slots"), ("workers", "workers")):
        val = getattr(args, name, None)
        if val is not None:
            kw[attr] = val
    return replace(cfg, **kw) if kw else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if not cfg.output_path:
            raise ConfigError("no output path given (use --output or 'output:' in the config)")
        if args.command == "run":
            log.info("running %d trials x %d sweep points", cfg.trials, len(cfg.sweep_values))
            result = run_experiment(cfg, write=False)
        else:
            result = run_crb_table(cfg, write=False)
        path = write_csv(result.to_csv(), cfg.output_path)
        log.info("wrote %s", path)
    except ConfigError as exc:
        print(f"rispos: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rispos: I/O error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"rispos: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
