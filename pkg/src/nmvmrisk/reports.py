"""CSV reports: allocation sweeps, oracle validation and loss statistics.

Every writer formats numbers deterministically (6 significant digits unless
full precision is requested), uses LF line endings, writes ``NA`` for undefined
values and replaces the target file atomically.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .allocation import METHODS, AllocationReport, CapitalAllocator
from .nmvm import MultivariateNMVM
from .oracle import DEFAULT_CHUNK, ValidationRow, validation_report
from .series import DescriptiveStats

SWEEP_HEADER = ("alpha", "method", "k", "component", "capital", "proportion", "total")
VALIDATION_HEADER = ("alpha", "quantity", "analytic", "empirical", "std_error", "z", "flag")
STATS_HEADER = ("component",) + DescriptiveStats.FIELDS
K_METHODS = ("tcm", "euler_rooted")


def fmt(value, full_precision: bool = False) -> str:
    if value is None:
        return "NA"
    value = float(value)
    if not math.isfinite(value):
        return "NA"
    if value == 0.0:
        value = 0.0  # drop the sign of negative zero
    return repr(value) if full_precision else f"{value:.6g}"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    """Write rows to ``path`` via a temporary file in the same directory, then rename."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def alpha_grid(start: float, stop: float, points: int) -> list[float]:
    """``points`` evenly spaced levels from ``start`` to ``stop`` inclusive."""
    if points < 1:
        raise ValueError("alpha grid needs at least one point")
    grid = [float(start)] if points == 1 else [float(a) for a in np.linspace(start, stop, points)]
    check_alphas(grid)
    return grid


def check_alphas(alphas: Sequence[float]) -> None:
    if not alphas:
        raise ValueError("alpha grid is empty")
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha {a!r} is outside (0, 1)")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha grid must be strictly increasing")


@dataclass(frozen=True)
class SweepConfig:
    alphas: tuple[float, ...]
    methods: tuple[str, ...] = ("cte", "tv", "tcm")
    k: int = 3
    m1: float = 1.0
    m2: float = 0.0
    m3: float = 0.0
    weights: tuple[float, ...] | None = None
    combined_grid: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        check_alphas(self.alphas)
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; expected one of {', '.join(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat")
        if self.k < 2 and any(m in K_METHODS for m in self.methods):
            raise ValueError("k must be at least 2 for tcm and euler_rooted")


def _cell(allocator: CapitalAllocator, config: SweepConfig, alpha: float, method: str) -> list[AllocationReport]:
    if method == "combined" and config.combined_grid:
        return [allocator.combined(alpha, 1.0, p, q) for p, q in config.combined_grid]
    return [allocator.allocate(method, alpha, k=config.k, m1=config.m1, m2=config.m2, m3=config.m3)]


def _alpha_job(args) -> list[list[AllocationReport]]:
    model, config, alpha = args
    allocator = CapitalAllocator(model)
    return [_cell(allocator, config, alpha, m) for m in config.methods]


def sweep(model: MultivariateNMVM, config: SweepConfig, *, jobs: int = 1) -> list[AllocationReport]:
    """Allocation reports in (alpha, method) order, computed serially or on ``jobs`` processes.

    Work is split by alpha so the methods at one level share a tail-moment table.
    """
    if config.weights is not None:
        model = model.reweight(config.weights)
    if jobs > 1 and len(config.alphas) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_alpha = list(pool.map(_alpha_job, [(model, config, a) for a in config.alphas]))
    else:
        allocator = CapitalAllocator(model)
        per_alpha = [[_cell(allocator, config, a, m) for m in config.methods] for a in config.alphas]
    return [r for cells in per_alpha for group in cells for r in group]


def sweep_rows(
    reports: Sequence[AllocationReport], full_precision: bool = False, annotate_mix: bool = False
) -> list[list[str]]:
    """CSV rows; with ``annotate_mix`` combined rows are labelled ``combined(m1;m2;m3)``."""
    rows = []
    for rep in reports:
        k = str(rep.order) if rep.method in K_METHODS else "NA"
        method = rep.method
        if annotate_mix and rep.method == "combined":
            method = "combined(" + ";".join(fmt(m, full_precision) for m in rep.mix) + ")"
        for label, cap, prop in zip(rep.labels, rep.capitals, rep.proportions):
            rows.append([
                fmt(rep.alpha, full_precision), method, k, label,
                fmt(cap, full_precision), fmt(prop, full_precision), fmt(rep.total, full_precision),
            ])
    return rows


def run_sweep(
    model: MultivariateNMVM, config: SweepConfig, out_path, *, full_precision: bool = False, jobs: int = 1
) -> list[AllocationReport]:
    reports = sweep(model, config, jobs=jobs)
    write_csv(out_path, SWEEP_HEADER, sweep_rows(reports, full_precision, bool(config.combined_grid)))
    return reports


def validation_rows(rows: Sequence[ValidationRow], full_precision: bool = False) -> list[list[str]]:
    return [
        [
            fmt(r.alpha, full_precision), r.quantity, fmt(r.analytic, full_precision),
            fmt(r.empirical, full_precision), fmt(r.std_error, full_precision),
            fmt(r.z, full_precision), "FAIL" if r.flagged else "ok",
        ]
        for r in rows
    ]


def run_validation(
    model: MultivariateNMVM,
    alphas: Sequence[float],
    k_max: int,
    count: int,
    seed: int,
    out_path,
    *,
    weights: Sequence[float] | None = None,
    full_precision: bool = False,
    chunk_size: int = DEFAULT_CHUNK,
    analytic_bias: float = 0.0,
) -> tuple[list[ValidationRow], bool]:
    """Write the oracle comparison CSV; the flag is True when every ``|z| <= 4``."""
    check_alphas(list(alphas))
    if weights is not None:
        model = model.reweight(weights)
    rows = validation_report(
        model, alphas, k_max, count, seed, chunk_size=chunk_size, analytic_bias=analytic_bias
    )
    write_csv(out_path, VALIDATION_HEADER, validation_rows(rows, full_precision))
    return rows, not any(r.flagged for r in rows)


def stats_rows(labels: Sequence[str], stats: Sequence[DescriptiveStats], full_precision: bool = False):
    return [[label] + [fmt(v, full_precision) for v in s.as_row()] for label, s in zip(labels, stats)]
