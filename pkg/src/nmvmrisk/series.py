"""Price series ingestion, daily log losses and descriptive statistics."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InsufficientData, NonPositivePrice


@dataclass(frozen=True)
class PriceTable:
    dates: tuple[str, ...]
    labels: tuple[str, ...]
    prices: np.ndarray  # shape (len(dates), len(labels))


@dataclass(frozen=True)
class LossTable:
    dates: tuple[str, ...]  # date of the closing price ending each period
    labels: tuple[str, ...]
    losses: np.ndarray


@dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    median: float
    min: float
    max: float
    std: float
    skewness: float
    kurtosis: float

    FIELDS = ("mean", "median", "min", "max", "std", "skewness", "kurtosis")

    def as_row(self) -> list[float]:
        return [getattr(self, f) for f in self.FIELDS]


def read_prices(path) -> PriceTable:
    """Read ``date,<label>,...`` with ISO dates in strictly ascending order."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read prices ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip().lower() != "date" or len(header) < 2:
            raise DataError(f"{path}: header must be 'date,<label>,...'")
        labels = tuple(h.strip() for h in header[1:])
        dates, rows = [], []
        previous = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: bad ISO date {row[0]!r}") from exc
            if previous is not None and day <= previous:
                raise DataError(f"{path}: row {lineno}: date {day} is not after {previous}")
            previous = day
            values = []
            for label, cell in zip(labels, row[1:]):
                try:
                    values.append(float(cell))
                except ValueError as exc:
                    raise DataError(f"{path}: row {lineno}, column {label}: bad number {cell!r}") from exc
            dates.append(day.isoformat())
            rows.append(values)
    prices = np.array(rows, dtype=float).reshape(len(rows), len(labels))
    bad = np.argwhere(~(prices > 0) | ~np.isfinite(prices))
    if bad.size:
        r, c = bad[0]
        raise NonPositivePrice(f"{path}: date {dates[r]}, column {labels[c]}: price {prices[r, c]!r} is not positive")
    return PriceTable(tuple(dates), labels, prices)


def log_losses(prices) -> np.ndarray:
    """``L_t = -ln(P_t / P_{t-1})`` along the first axis."""
    p = np.asarray(prices, dtype=float)
    if np.any(~(p > 0)):
        raise NonPositivePrice("prices must be strictly positive")
    return -np.diff(np.log(p), axis=0)


def loss_table(table: PriceTable) -> LossTable:
    return LossTable(table.dates[1:], table.labels, log_losses(table.prices))


def descriptive_stats(values) -> DescriptiveStats:
    """Summary statistics; skewness ``m3/m2^1.5`` and non-excess kurtosis ``m4/m2^2`` are NaN when ``m2 = 0``."""
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.size < 2:
        raise InsufficientData(f"need at least 2 observations, got {x.size}")
    if np.ptp(x) == 0:
        v = float(x[0])
        return DescriptiveStats(v, v, v, v, 0.0, math.nan, math.nan)
    mean = math.fsum(x) / x.size
    d = x - mean
    m2 = float(np.mean(d ** 2))
    m3 = float(np.mean(d ** 3))
    m4 = float(np.mean(d ** 4))
    skew, kurt = m3 / m2 ** 1.5, m4 / m2 ** 2
    return DescriptiveStats(
        mean=mean,
        median=float(np.median(x)),
        min=float(x.min()),
        max=float(x.max()),
        std=float(np.std(x, ddof=1)),
        skewness=skew,
        kurtosis=kurt,
    )
