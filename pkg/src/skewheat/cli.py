"""Command line entry point.

    skewheat run CONFIG.json
    skewheat kernel-eval --t 1 --x 0.5 --y -0.2 --a1 1 --a2 2 --rho1 1 --rho2 1 [--side left|right]

``run`` exits 0 when every criterion passes, 2 when any fails and 1 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, load_config
from .kernel import Coefficients, kernel_dGdx, kernel_G

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2


def _cmd_run(args: argparse.Namespace) -> int:
    from .suites import run_suites

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.output_dir) if args.output_dir else cfg.resolve_output_dir(Path.cwd())
    if args.workers is not None:
        cfg = cfg.model_copy(update={"workers": args.workers})
    criteria = run_suites(cfg, out)
    for c in criteria:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.suite:17s} {c.criterion:45s} measured={c.measured:.6g} threshold={c.threshold:.6g}")
    print(f"results written to {out}")
    return EXIT_OK if all(c.passed for c in criteria) else EXIT_FAILED


def _cmd_kernel_eval(args: argparse.Namespace) -> int:
    try:
        c = Coefficients(args.a1, args.a2, args.rho1, args.rho2)
        if not args.t > 0:
            raise ValueError("--t must be positive")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"G = {kernel_G(args.t, args.x, args.y, c):.17g}")
    if args.x == 0 and args.side is None:
        print(
            "error: dG/dx has a kink at x = 0; pass --side left (limit from x < 0) "
            "or --side right (limit from x > 0)",
            file=sys.stderr,
        )
        return EXIT_USAGE
    try:
        d = kernel_dGdx(args.t, args.x, args.y, c, side=args.side)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"dGdx = {d:.17g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewheat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the verification suites of a JSON config")
    run.add_argument("config")
    run.add_argument("--output-dir", default=None, help="overrides the config and $SKEWHEAT_OUTPUT_DIR")
    run.add_argument("--workers", type=int, default=None)
    run.set_defaults(func=_cmd_run)

    ke = sub.add_parser("kernel-eval", help="print G(t, x, y) and dG/dx")
    ke.add_argument("--t", type=float, required=True)
    ke.add_argument("--x", type=float, required=True)
    ke.add_argument("--y", type=float, required=True)
    ke.add_argument("--a1", type=float, default=1.0)
    ke.add_argument("--a2", type=float, default=1.0)
    ke.add_argument("--rho1", type=float, default=1.0)
    ke.add_argument("--rho2", type=float, default=1.0)
    ke.add_argument("--side", choices=("left", "right"), default=None)
    ke.set_defaults(func=_cmd_kernel_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
