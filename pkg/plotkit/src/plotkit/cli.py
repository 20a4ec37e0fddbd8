"""plotkit command line: ``plotkit curve|hist --in PATH --out PATH``."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import render_curve, render_histogram


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    sub = parser.add_subparsers(dest="panel", required=True)
    for name, helptext in (("curve", "MSE-vs-t/n curves"), ("hist", "sample-norm histogram")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--in", dest="input", required=True, help="spikelab CSV artifact")
        p.add_argument("--out", dest="output", required=True, help="image path (.png or .svg)")
        if name == "hist":
            p.add_argument("--bins", type=int, default=40)
    args = parser.parse_args(argv)
    try:
        if args.panel == "curve":
            info = render_curve(args.input, args.output)
        else:
            info = render_histogram(args.input, args.output, bins=args.bins)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 2
    for path in info["outputs"]:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
