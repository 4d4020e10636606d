"""Command-line interface.

Subcommands: ``run`` (one experiment), ``sweep`` (strategies x seeds),
``verify`` (the oracle suite), ``export`` (plot-ready CSV + PNG figures).
Exit codes: 0 success, 1 runtime failure or failed verification, 2
usage/config errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adsharp",
        description="Semi-supervised distillation experiments with sparse probability transforms.",
    )
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="train one experiment from a config file")
    run_p.add_argument("--config", required=True, help="path to a key = value config file")
    run_p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override a config key (repeatable)",
    )

    sweep_p = sub.add_parser("sweep", help="run a strategy x seed cross product")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--strategies", required=True, help="comma list, e.g. ads,me,none")
    sweep_p.add_argument("--seeds", required=True, help="comma list, e.g. 0,1,2")
    sweep_p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides"
    )

    sub.add_parser("verify", help="run the full verification suite")

    export_p = sub.add_parser("export", help="emit plot-ready CSV and figures for a run")
    export_p.add_argument("--run", required=True, help="run (or sweep) output directory")
    export_p.add_argument(
        "--what", required=True, choices=("curves", "histograms", "table")
    )
    return parser


def _cmd_run(args) -> int:
    from .runner import parse_config, run_experiment

    cfg = parse_config(args.config, tuple(args.overrides))
    history, _ = run_experiment(cfg)
    final = history[-1]
    print(f"run complete: {cfg.out_dir}")
    print(
        f"epoch {final.epoch}: test_error={final.test_error:.4f} "
        f"p_bar_1={final.p_bar_1:.4f} m_bar={final.m_bar:.4f}"
    )
    return 0


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"seeds must be a comma list of integers: {text!r}")


def _cmd_sweep(args) -> int:
    from .runner import format_sweep_table, parse_config, run_sweep

    cfg = parse_config(args.config, tuple(args.overrides))
    strategies = [part.strip() for part in args.strategies.split(",") if part.strip()]
    seeds = _parse_seeds(args.seeds)
    rows = run_sweep(cfg, strategies, seeds)
    print(format_sweep_table(rows))
    print(f"sweep artifacts in {cfg.out_dir}")
    return 0


def _cmd_verify() -> int:
    from .oracle import run_all_checks

    reports = run_all_checks()
    for report in reports:
        print(report.line())
    return 0 if all(r.passed for r in reports) else 1


def _cmd_export(args) -> int:
    from . import plots

    exporter = {
        "curves": plots.export_curves,
        "histograms": plots.export_histograms,
        "table": plots.export_table,
    }[args.what]
    for path in exporter(args.run):
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "verify":
            return _cmd_verify()
        return _cmd_export(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
