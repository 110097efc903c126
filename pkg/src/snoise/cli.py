"""Command-line front end: ``snoise <scenario> --config FILE [options]``.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
3 numerical failure.  The default output directory is ``--out``, falling back
to the ``SNOISE_OUT`` environment variable, then ``./snoise_out``.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import SCENARIOS, parse_config
from .errors import ConfigError, SnoiseError
from .scenarios import run_scenario

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snoise",
        description="shot-noise process simulation and validation toolkit",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--paths", type=int, default=None,
                       help="override run.n_paths")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = args.out or os.environ.get("SNOISE_OUT") or "snoise_out"
    try:
        config = parse_config(
            args.config,
            overrides={"scenario": args.scenario, "n_paths": args.paths,
                       "seed": args.seed},
        )
        code = run_scenario(config, out_dir)
    except ConfigError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SnoiseError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return code


if __name__ == "__main__":
    raise SystemExit(main())
