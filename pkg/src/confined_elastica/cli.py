"""Command line interface: ``confined-elastica run|sweep-radius|sweep-epsilon|classify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import diagnostics
from .config import ConfigError, load_config
from .io import SnapshotError, read_snapshot
from .runner import WORKERS_ENV, cmd_run, cmd_sweep_epsilon, cmd_sweep_radius


def _floats(values):
    out = []
    for v in values:
        out.extend(float(x) for x in v.replace(",", " ").split())
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confined-elastica",
        description="Gradient flow for inextensible elastic curves in convex confinements.",
        epilog=f"Sweeps run {WORKERS_ENV} runs concurrently (default 1).",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one flow to stationarity")
    p.add_argument("config")
    p.add_argument("-o", "--out", help="output directory (overrides output.dir)")

    p = sub.add_parser("sweep-radius", help="run for several ball radii")
    p.add_argument("config")
    p.add_argument("--radii", nargs="*", default=[], help="ball radii")
    p.add_argument("-o", "--out")

    p = sub.add_parser("sweep-epsilon", help="run for several penalty scales")
    p.add_argument("config")
    p.add_argument("--eps", nargs="*", default=[], help="penalty scales")
    p.add_argument("-o", "--out")

    p = sub.add_parser("classify", help="classify a curve snapshot")
    p.add_argument("snapshot")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "classify":
            curve, meta = read_snapshot(args.snapshot)
            result = diagnostics.classify(curve, length=meta["length"])
            print(json.dumps(result.to_dict(), indent=2))
            return 0
        config = load_config(args.config)
        if args.command == "run":
            return cmd_run(config, args.out)
        if args.command == "sweep-radius":
            rows = cmd_sweep_radius(config, _floats(args.radii), args.out)
            for row in rows:
                print(f"R={row['R']:g} rL/R={row['rL_over_R']:.4f} "
                      f"E={row['normalized_energy']:.4f} {row['shape']}")
            return 0
        if args.command == "sweep-epsilon":
            rows, slope = cmd_sweep_epsilon(config, _floats(args.eps), args.out)
            for row in rows:
                print(f"eps={row['eps']:g} penetration={row['max_penetration']:.3e} {row['shape']}")
            print(f"slope={slope}")
            return 0
    except (ConfigError, SnapshotError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
