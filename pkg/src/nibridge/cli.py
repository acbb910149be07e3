"""Command line entry point: ``nibridge <experiment> [--config F] [--seed S] [--workers K] [--out D]``.

Any further ``--name value`` (or ``--name=value``) pair overrides the
experiment parameter ``name``; dashes map to underscores.  The exit status is
0 iff every criterion of the run passes.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import build_config, read_config_file
from .experiments import EXPERIMENTS, run_experiment, write_report


def _parse_overrides(extra: list[str]) -> dict[str, str]:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise SystemExit(f"unexpected argument {tok!r}; parameters use --name value")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise SystemExit(f"missing value for {tok}")
            i += 1
            value = extra[i]
        out[key.replace("-", "_")] = value
        i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nibridge",
                                     description="Non-intersecting bridge experiments.")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, (defaults, _) in EXPERIMENTS.items():
        p = sub.add_parser(name, help=f"run the {name} experiment",
                           epilog="parameters: " + ", ".join(
                               f"--{k.replace('_', '-')} (default {v})" for k, v in defaults.items()))
        p.add_argument("--config", help="key = value parameter file")
        p.add_argument("--seed", type=int, help="root 64-bit seed")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--out", help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    defaults, _ = EXPERIMENTS[args.experiment]
    try:
        overrides = _parse_overrides(extra)
        file_values = read_config_file(args.config) if args.config else None
        cfg = build_config(args.experiment, defaults, file_values, overrides,
                           seed=args.seed, workers=args.workers, out=args.out)
    except ValueError as exc:
        parser.error(str(exc))
    report = run_experiment(cfg)
    for c in report.criteria:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: value={c.value:.6g} threshold={c.threshold:.6g}"
              + (f" ({c.detail})" if c.detail else ""))
    if cfg.out:
        write_report(report, cfg.out)
        print(f"artifacts written to {cfg.out}")
    print(f"{args.experiment}: {'PASS' if report.passed else 'FAIL'} in {report.wall_clock:.1f} s")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
