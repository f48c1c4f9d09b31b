"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 oracle validation failure,
3 numerical failure (non-finite moment, non-positive TCM, tail underflow).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .allocation import COMBINED_PRESET_P, COMBINED_PRESET_Q, METHODS, CapitalAllocator
from .errors import (
    EmptyTail,
    FactorisationFailure,
    MomentNotFinite,
    NMVMError,
    NonPositiveTCM,
    TailUnderflow,
)
from .modelfile import load_model
from .oracle import DEFAULT_CHUNK
from .reports import (
    STATS_HEADER,
    SWEEP_HEADER,
    SweepConfig,
    alpha_grid,
    check_alphas,
    fmt,
    run_sweep,
    run_validation,
    stats_rows,
    sweep_rows,
    write_csv,
)
from .series import descriptive_stats, loss_table, read_prices
from .tail_moments import TMTable

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (MomentNotFinite, NonPositiveTCM, TailUnderflow, FactorisationFailure, EmptyTail)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from exc


def _alphas(args) -> list[float]:
    if args.alpha_grid and args.alpha:
        raise UsageError("give either --alpha or --alpha-grid, not both")
    if args.alpha_grid:
        parts = args.alpha_grid.split(":")
        if len(parts) != 3:
            raise UsageError(f"--alpha-grid: expected START:STOP:POINTS, got {args.alpha_grid!r}")
        try:
            start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise UsageError(f"--alpha-grid: cannot parse {args.alpha_grid!r}") from exc
        return alpha_grid(start, stop, points)
    if not args.alpha:
        raise UsageError("--alpha or --alpha-grid is required")
    alphas = _floats(args.alpha, "--alpha")
    check_alphas(alphas)
    return alphas


def _model(args):
    model = load_model(args.model)
    if args.weights:
        model = model.reweight(_floats(args.weights, "--weights"))
    return model


def _emit(args, header, rows) -> None:
    if args.out:
        write_csv(args.out, header, rows)
        return
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    sys.stdout.write(buf.getvalue())


# subcommands -----------------------------------------------------------------


def cmd_tm(args, central: bool) -> int:
    model = _model(args).aggregate()
    rows = []
    for alpha in _alphas(args):
        tab = TMTable(model, alpha, args.order)
        for k in range(1, args.order + 1):
            value = tab.tcm(k) if central else tab.tm(k)
            rows.append([fmt(alpha, args.full_precision), str(k), fmt(value, args.full_precision)])
    _emit(args, ("alpha", "k", "tcm" if central else "tm"), rows)
    return EXIT_OK


def _config(args, alphas) -> SweepConfig:
    methods = tuple(m.strip() for m in args.method.split(",") if m.strip())
    grid = ()
    if args.combined_preset:
        grid = tuple(
            (float(p), float(q))
            for p in np.linspace(*COMBINED_PRESET_P, args.preset_points[0])
            for q in np.linspace(*COMBINED_PRESET_Q, args.preset_points[1])
        )
    return SweepConfig(tuple(alphas), methods, args.order, args.m1, args.m2, args.m3, None, grid)


def cmd_allocate(args) -> int:
    model = _model(args)
    config = _config(args, _alphas(args))
    allocator = CapitalAllocator(model)
    reports = [
        allocator.allocate(m, a, k=config.k, m1=config.m1, m2=config.m2, m3=config.m3)
        for a in config.alphas
        for m in config.methods
    ]
    _emit(args, SWEEP_HEADER, sweep_rows(reports, args.full_precision))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.out:
        raise UsageError("sweep requires --out")
    model = _model(args)
    config = _config(args, _alphas(args))
    run_sweep(model, config, args.out, full_precision=args.full_precision, jobs=args.jobs)
    return EXIT_OK


def cmd_losses(args) -> int:
    table = loss_table(read_prices(args.prices))
    rows = [
        [date] + [fmt(v, args.full_precision) for v in row]
        for date, row in zip(table.dates, table.losses)
    ]
    _emit(args, ("date",) + table.labels, rows)
    return EXIT_OK


def cmd_stats(args) -> int:
    table = loss_table(read_prices(args.prices))
    stats = [descriptive_stats(table.losses[:, j]) for j in range(len(table.labels))]
    _emit(args, STATS_HEADER, stats_rows(table.labels, stats, args.full_precision))
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.out:
        raise UsageError("validate requires --out")
    model = _model(args)
    rows, ok = run_validation(
        model,
        _alphas(args),
        args.order,
        args.samples,
        args.seed,
        args.out,
        full_precision=args.full_precision,
        chunk_size=args.chunk_size,
        analytic_bias=args.corrupt_analytic,
    )
    bad = [r for r in rows if r.flagged]
    for r in bad:
        print(f"alpha={r.alpha:g} {r.quantity}: |z| = {abs(r.z):.2f} > 4", file=sys.stderr)
    print(f"{len(rows) - len(bad)}/{len(rows)} quantities within 4 standard errors", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VALIDATION


# parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmvmrisk", description="Tail moments and capital allocation for NMVM portfolios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, model=True, alpha=True):
        if model:
            p.add_argument("--model", required=True, help="JSON model file")
            p.add_argument("--weights", help="comma-separated position sizes w_i")
        if alpha:
            p.add_argument("--alpha", help="comma-separated confidence levels")
            p.add_argument("--alpha-grid", help="START:STOP:POINTS, evenly spaced and inclusive")
        p.add_argument("--out", help="output CSV (stdout when omitted, where allowed)")
        p.add_argument("--full-precision", action="store_true", help="write shortest round-trip floats")

    def allocation_args(p, method_default):
        p.add_argument("--method", default=method_default, help=f"comma-separated subset of {','.join(METHODS)}")
        p.add_argument("--order", type=int, default=3, help="k for tcm and euler_rooted (default 3)")
        p.add_argument("--m1", type=float, default=1.0)
        p.add_argument("--m2", type=float, default=0.0)
        p.add_argument("--m3", type=float, default=0.0)
        p.add_argument(
            "--combined-preset", action="store_true",
            help="for method combined, use m1=1 over the preset (m2, m3) grid instead of --m1/--m2/--m3",
        )
        p.add_argument("--preset-points", type=int, nargs=2, default=(7, 6), metavar=("NP", "NQ"))

    for name, help_text in (("tm", "tail moments E[S^k | S > s_alpha]"), ("tcm", "tail central moments")):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--order", type=int, default=4, help="highest order k (default 4)")

    p = sub.add_parser("allocate", help="capital allocation at one or more levels")
    common(p)
    allocation_args(p, "cte")

    p = sub.add_parser("sweep", help="allocation sweep over an alpha grid and several methods")
    common(p)
    allocation_args(p, "cte,tv,tcm")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    for name, help_text in (("losses", "daily log losses from prices"), ("stats", "descriptive loss statistics")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--prices", required=True, help="CSV with header date,<label>,...")
        common(p, model=False, alpha=False)

    p = sub.add_parser("validate", help="Monte Carlo check of every analytic tail quantity")
    common(p)
    p.add_argument("--order", type=int, default=4, help="highest TM/TCM order checked (default 4)")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK)
    p.add_argument("--corrupt-analytic", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "tm": lambda a: cmd_tm(a, central=False),
        "tcm": lambda a: cmd_tm(a, central=True),
        "allocate": cmd_allocate,
        "sweep": cmd_sweep,
        "losses": cmd_losses,
        "stats": cmd_stats,
        "validate": cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except NUMERIC_ERRORS as exc:
        print(f"nmvmrisk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, NMVMError, ValueError) as exc:
        print(f"nmvmrisk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
