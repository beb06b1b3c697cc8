"""OHLC data ingestion and seeded synthetic series generation.

CSV contract: header ``date,open,high,low,close`` (case-insensitive, any
column order, no extras), ISO-8601 dates, four finite decimals per row.
Rows are sorted by date and converted to an integer day index; duplicate
dates and high/low values inconsistent with open/close are rejected with
the offending row number.

The synthetic generator produces a seeded geometric random walk. Bars open
at the previous close; highs and lows are anchored at max/min(open, close)
plus/minus seeded positive spreads so the OHLC invariants hold by
construction. The ``trend_shift`` regime halves the price level two thirds
of the way in, giving a deliberate regime break for degradation tests.
"""
from __future__ import annotations

import csv
import datetime as dt
import math

import numpy as np

from .exceptions import DataError, FormatError, ParameterError
from .indicators import OhlcSeries

__all__ = ["ingest_csv", "write_csv", "synth_data", "REGIMES"]

REQUIRED_COLUMNS = ("date", "open", "high", "low", "close")
REGIMES = ("walk", "trend_shift")
MIN_SYNTH_BARS = 60


def ingest_csv(path) -> OhlcSeries:
    """Parse an OHLC CSV file into a validated series."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        names = [h.strip().lower() for h in header]
        for col in REQUIRED_COLUMNS:
            if col not in names:
                raise FormatError(f"{path}: missing column {col!r}")
        extra = [h for h in names if h not in REQUIRED_COLUMNS]
        if extra or len(names) != len(REQUIRED_COLUMNS):
            raise FormatError(f"{path}: unexpected columns {extra}")
        pos = {col: names.index(col) for col in REQUIRED_COLUMNS}
        records = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise DataError(f"{path}:{row_no}: expected {len(names)} "
                                f"fields, got {len(row)}")
            try:
                day = dt.date.fromisoformat(row[pos["date"]].strip())
            except ValueError:
                raise DataError(f"{path}:{row_no}: bad date "
                                f"{row[pos['date']]!r}") from None
            values = {}
            for col in ("open", "high", "low", "close"):
                try:
                    values[col] = float(row[pos[col]])
                except ValueError:
                    raise DataError(f"{path}:{row_no}: bad number in "
                                    f"{col!r}") from None
                if not math.isfinite(values[col]):
                    raise DataError(f"{path}:{row_no}: non-finite {col!r}")
            if values["high"] < max(values["open"], values["close"]):
                raise DataError(f"{path}:{row_no}: high below open/close")
            if values["low"] > min(values["open"], values["close"]):
                raise DataError(f"{path}:{row_no}: low above open/close")
            records.append((day, values, row_no))
    if not records:
        raise DataError(f"{path}: no data rows")
    records.sort(key=lambda r: r[0])
    for prev, cur in zip(records, records[1:]):
        if cur[0] == prev[0]:
            raise DataError(f"{path}:{cur[2]}: duplicate date {cur[0]}")
    first = records[0][0]
    timestamps = np.array([(day - first).days for day, _, _ in records])
    cols = {c: np.array([v[c] for _, v, _ in records]) for c in
            ("open", "high", "low", "close")}
    return OhlcSeries(timestamps, cols["open"], cols["high"], cols["low"],
                      cols["close"])


def write_csv(path, series: OhlcSeries, start: dt.date = dt.date(2020, 1, 2)):
    """Write a series back out in the ingest schema, one date per day index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REQUIRED_COLUMNS)
        for i, t in enumerate(series.timestamps):
            day = start + dt.timedelta(days=int(t))
            writer.writerow([day.isoformat(),
                             f"{series.open[i]:.6f}", f"{series.high[i]:.6f}",
                             f"{series.low[i]:.6f}", f"{series.close[i]:.6f}"])


def synth_data(n_bars: int, seed: int = 0, regime: str = "walk",
               start_price: float = 100.0) -> OhlcSeries:
    """Seeded geometric-random-walk bars; see the module docstring."""
    if n_bars < MIN_SYNTH_BARS:
        raise ParameterError(
            f"synthetic series needs at least {MIN_SYNTH_BARS} bars, "
            f"got {n_bars}")
    if regime not in REGIMES:
        raise ParameterError(f"unknown regime {regime!r}; "
                             f"expected one of {REGIMES}")
    rng = np.random.default_rng(seed)
    steps = rng.normal(loc=0.0, scale=0.01, size=n_bars)
    close = start_price * np.exp(np.cumsum(steps))
    if regime == "trend_shift":
        close[2 * n_bars // 3:] *= 0.5
    opens = np.empty(n_bars)
    opens[0] = start_price
    opens[1:] = close[:-1]
    hi_spread = rng.uniform(0.0, 0.01, size=n_bars) * close
    lo_spread = rng.uniform(0.0, 0.01, size=n_bars) * close
    high = np.maximum(opens, close) + hi_spread
    low = np.minimum(opens, close) - lo_spread
    return OhlcSeries(np.arange(n_bars), opens, high, low, close)
