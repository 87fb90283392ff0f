"""``mfiq {fisher|mfi|propagate|kg|verify-all} --config <path> [--out <dir>] [--seed <u64>]``.

Exit codes: 0 when every check passes, 1 when a check fails or the run hits
a library error, 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from .commands import COMMANDS, CONFIG_CODES
from .config import ExperimentConfig, load_config
from .errors import MfiqError
from .reports import RunReport

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "mfiq_out"

log = logging.getLogger("mfiq")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfiq", description="Fisher-information quantum mechanics experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS), help="experiment to run")
    parser.add_argument("--config", required=True, help="key = value config file")
    parser.add_argument("--out", help="output directory (default: output.dir, $MFIQ_OUT, ./mfiq_out)")
    parser.add_argument("--seed", type=_seed, help="RNG seed, overrides the config (default 42)")
    parser.add_argument("-q", "--quiet", action="store_true", help="print only the final verdict")
    return parser


def output_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out or cfg.get("output.dir") or os.environ.get("MFIQ_OUT") or DEFAULT_OUT)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        out = output_dir(args, cfg)
        out.mkdir(parents=True, exist_ok=True)
        report = COMMANDS[args.command](cfg, out)
    except MfiqError as exc:
        if exc.code in CONFIG_CODES:
            print(f"mfiq: config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"mfiq: {exc}", file=sys.stderr)
        report = RunReport(args.command, cfg.echo(), cfg.seed)
        report.fail_with(exc.code, exc.message)
    except OSError as exc:
        print(f"mfiq: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    path = report.write(out, time.perf_counter() - start)
    for w in report.warnings:
        log.warning(w)
    lines = report.summary_lines()
    print("\n".join(lines[-1:] if args.quiet else lines))
    print(f"report: {path}")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
