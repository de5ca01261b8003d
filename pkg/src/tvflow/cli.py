"""Command-line entry point: thin dispatch around parse_config and run."""

from __future__ import annotations

import argparse
import sys

from .config import ParseError, ValidationError, parse_config
from .runner import EXIT_CONFIG, run

_COMMAND_HELP = {
    "elliptic": "minimize the regularized energy (mu > 0) and certify the dual field",
    "tv": "minimize TV + <f, u - u0> and certify the primal-dual equality",
    "flow": "implicit Euler stepping with per-slice certificates",
    "sweep": "solve the regularized family along a mu schedule",
    "verify": "recompute and recheck an emitted certificate file",
    "feasibility": "least sup-norm field with prescribed divergence",
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tvflow",
                                     description="total variation flow laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMAND_HELP.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--tolerance", type=float, default=None, help="override the solver tolerance")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if config.command != args.command:
        print(f"config error: config declares command '{config.command}' "
              f"but '{args.command}' was invoked", file=sys.stderr)
        return EXIT_CONFIG
    return run(config, out_dir=args.out, seed=args.seed, tolerance=args.tolerance)


if __name__ == "__main__":
    sys.exit(main())
