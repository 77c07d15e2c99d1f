"""Command line: ``holojump run <config> [--out DIR] [--seed N] [--mode M]``.

Exit codes: 0 success, 2 validation error, 3 engine error.
"""
from __future__ import annotations

import argparse
import sys

from .config import MODES, load_config
from .errors import ConfigError, HolojumpError
from .runner import emit, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ENGINE = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="holojump", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute one run configuration")
    r.add_argument("config", help="JSON run configuration")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--seed", type=int, help="master seed (overrides seed)")
    r.add_argument("--mode", choices=MODES, help="run mode (overrides mode)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.mode is not None:
            changes["mode"] = args.mode
        if args.out is not None:
            changes["output"] = {"dir": args.out, "formats": list(config.output.formats)}
        if changes:
            config = config.replace(**changes)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run(config)
        paths = emit(report, config.output.dir, config.output.formats)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HolojumpError as exc:
        print(f"engine error [{exc.module}]: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except OSError as exc:
        print(f"engine error [io]: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
