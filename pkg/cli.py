"""
mixdense: batch experiments on mixture approximation of densities.

Usage:
    uv run cli.py run configs/uniform_triangular.toml
    uv run cli.py suite configs/acceptance.toml
    uv run cli.py catalog
    uv run cli.py run config.toml -v      # debug logging
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from mixdense.classes import catalog
from mixdense.config import DEFAULT_CONFIG, LOG_LEVEL
from mixdense.errors import ConfigError, MixdenseError
from mixdense.harness import ApproxReport, load_config, run, run_suite
from mixdense.mixture import ClassFlag

console = Console()
log = logging.getLogger("mixdense.cli")

EXIT_USAGE = 2


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else LOG_LEVEL,
        format="%(name)s: %(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
    )


def print_report(report: ApproxReport) -> None:
    table = Table(title=f"{report.name} [{report.mode}]", show_lines=False)
    shown = [c for c in report.columns if c not in ("f", "g", "mode")]
    for col in shown:
        table.add_column(col, justify="right" if col != "status" else "left")
    for row in report.rows[:40]:
        cells = []
        for col in shown:
            value = row.get(col, "")
            if isinstance(value, float):
                value = f"{value:.4g}"
            elif col == "pass" and isinstance(value, bool):
                value = "[green]✓[/green]" if value else "[red]✗[/red]"
            cells.append(str(value))
        table.add_row(*cells)
    console.print(table)
    if len(report.rows) > 40:
        console.print(f"[dim]  … {len(report.rows) - 40} more rows in the CSV[/dim]")
    status = "[bold green]PASS[/bold green]" if report.passed else "[bold red]FAIL[/bold red]"
    console.print(f"  {status}  {len(report.rows)} rows")


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.out is not None:
        config.output_path = args.out
    report = run(config)
    print_report(report)
    return report.exit_code


def cmd_suite(args: argparse.Namespace) -> int:
    suite = run_suite(args.suite)
    table = Table(title=f"suite {args.suite}")
    for col in ("run", "mode", "rows", "pass"):
        table.add_column(col)
    for report in suite.reports:
        mark = "[green]✓[/green]" if report.passed else "[red]✗[/red]"
        table.add_row(report.name, str(report.mode), str(len(report.rows)), mark)
    console.print(table)
    console.print(f"  {suite.pass_count}/{len(suite.reports)} runs pass")
    return suite.exit_code


def cmd_catalog(args: argparse.Namespace) -> int:
    table = Table(title="density catalog")
    for col in ("name", "n", "pdf", "C0", "Cc", "Cb", "support", "sup", "V (β, θ)"):
        table.add_column(col)
    for d in catalog():
        def flag(f: ClassFlag) -> str:
            return "✓" if d.has(f) else ""

        table.add_row(
            d.name,
            str(d.dim),
            flag(ClassFlag.IS_PDF),
            flag(ClassFlag.IN_C0),
            flag(ClassFlag.IN_CC),
            flag(ClassFlag.IN_CB),
            "" if d.support_radius is None else f"{d.support_radius:g}",
            "" if d.sup_bound is None else f"{d.sup_bound:.4g}",
            "" if d.v_params is None else f"({d.v_params[0]:.4g}, {d.v_params[1]:g})",
        )
    console.print(table)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="mixdense experiment harness")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run one config file")
    p_run.add_argument("config", type=Path, nargs="?", default=DEFAULT_CONFIG, help="Run config (TOML)")
    p_run.add_argument("--out", type=Path, default=None, help="Override the CSV output path")
    p_run.set_defaults(handler=cmd_run)

    p_suite = sub.add_parser("suite", help="Run every config a suite file lists")
    p_suite.add_argument("suite", type=Path, help="Suite file (TOML)")
    p_suite.set_defaults(handler=cmd_suite)

    p_cat = sub.add_parser("catalog", help="List built-in densities and class flags")
    p_cat.set_defaults(handler=cmd_catalog)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    setup_logging(args.verbose)

    try:
        return args.handler(args)
    except ConfigError as exc:
        console.print(f"[red]  ✗ {exc}[/red]")
        return EXIT_USAGE
    except MixdenseError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
