"""Command line entry point: ``patspec {eigen,forward,invert,roundtrip}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import app
from .config import THEOREMS, load_config
from .errors import ConfigError, PatspecError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TOLERANCE = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="patspec",
        description="Eigenbasis inversion of boundary wave data (Robin / Dirichlet).",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="run configuration file")
        sp.add_argument("--out", help="output directory (overrides [output] dir)")

    common(sub.add_parser("eigen", help="compute and export both eigenbases"))
    common(sub.add_parser("forward", help="synthesize boundary data for the phantoms"))
    inv = sub.add_parser("invert", help="recover coefficients from boundary data CSVs")
    common(inv)
    inv.add_argument("--data", action="append", default=[], metavar="THEOREM=PATH",
                     help="explicit data file, e.g. 4=run/robin_trace.csv (repeatable)")
    rt = sub.add_parser("roundtrip", help="forward + invert + reconstruct, with an error gate")
    common(rt)
    rt.add_argument("--theorem", choices=THEOREMS, help="which inversion to run (default: config)")
    rt.add_argument("--max-error", type=float, help="relative L2 error threshold (default: config)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg = cfg.with_out(args.out)
        if args.command == "eigen":
            app.run_eigen(cfg)
        elif args.command == "forward":
            app.run_forward(cfg)
        elif args.command == "invert":
            paths = {}
            for item in args.data:
                key, sep, path = item.partition("=")
                if not sep or key not in ("4", "5"):
                    raise ConfigError(f"--data {item!r}: expected 4=PATH or 5=PATH")
                paths[key] = path
            app.run_invert(cfg, paths)
        else:
            app.run_roundtrip(cfg, args.theorem, args.max_error)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except app.ToleranceExceeded as exc:
        print(f"tolerance exceeded: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except app.StageError as exc:
        print(f"failed at {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PatspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
