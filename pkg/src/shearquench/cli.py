"""Command-line entry point; subcommands mirror the experiment tags."""
from __future__ import annotations

import argparse
import json
import sys

from . import harness


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shearquench",
        description="Numerical experiments on flame quenching by periodic shear flows")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for tag in harness.EXPERIMENTS:
        p = sub.add_parser(tag, help=f"run the '{tag}' experiment")
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--threads", type=int,
                       help="compute threads (must not affect results)")
        p.add_argument("--horizon", type=float, help="horizon override")
        p.add_argument("--cap", type=float, help="amplitude cap override")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads:
        try:
            import numba

            numba.set_num_threads(args.threads)
        except ImportError:
            pass
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return harness.EXIT_CONFIG
    raw["experiment"] = args.experiment
    if args.out:
        raw["out"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.horizon is not None:
        raw["horizon"] = args.horizon
    if args.cap is not None:
        raw["cap"] = args.cap
    try:
        cfg = harness.load_config(raw)
    except harness.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return harness.EXIT_CONFIG
    code = harness.run(cfg)
    print(f"experiment '{cfg.experiment}' finished with exit code {code}; "
          f"outputs in {cfg.out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
