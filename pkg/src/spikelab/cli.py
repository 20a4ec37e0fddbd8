"""Command-line entry point.

Usage::

    spikelab <experiment> --config PATH [--out PATH] [--seed U64] [--threads N]

with ``<experiment>`` one of mse-curve | generate | oracle-phase | reduction |
cheat-demo.  Exit codes: 0 success, 2 config error, 3 enumeration capacity
exceeded, 4 numerical failure.  The environment variable ``DBL_ENUM_CAP``
overrides the brute-force enumeration cap.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import CapacityError, ConfigError, NumericalError
from .experiments import EXPERIMENTS, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_NUMERICAL = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikelab", description=__doc__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--out", default=None, help="output path (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=1, help="worker threads for trials")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"spikelab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(config, dict):
        print("spikelab: config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    config.setdefault("experiment", args.experiment)
    if config["experiment"] != args.experiment:
        print(
            f"spikelab: config is for {config['experiment']!r}, not {args.experiment!r}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    try:
        out = run_experiment(config, out=args.out, seed=args.seed, threads=args.threads)
    except ConfigError as exc:
        print(f"spikelab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"spikelab: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (NumericalError, FloatingPointError) as exc:
        print(f"spikelab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
