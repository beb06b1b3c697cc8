"""Technical indicators over daily OHLC bars: RSI, MACD, ADX.

Smoothing conventions (the canonical ones implied by the stated periods):

* RSI and ADX use Wilder smoothing, ``avg_t = (avg_{t-1}*(p-1) + x_t) / p``,
  seeded with the simple mean of the first ``p`` inputs.
* MACD uses the standard EMA with ``alpha = 2/(p+1)``, seeded with the simple
  mean of the first ``p`` inputs.

Warmup bars, where a value is not yet defined, are carried as NaN rather than
zero so downstream windowing can drop them deterministically. Each indicator
value at bar t depends only on bars <= t; there is no lookahead.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InsufficientDataError, ParameterError

__all__ = ["OhlcSeries", "IndicatorColumn", "rsi", "macd", "adx"]


@dataclass(frozen=True)
class OhlcSeries:
    """Time-ordered daily bars. Arrays share one length; timestamps are
    strictly increasing integer day indices."""

    timestamps: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        o = np.asarray(self.open, dtype=np.float64)
        h = np.asarray(self.high, dtype=np.float64)
        l = np.asarray(self.low, dtype=np.float64)
        c = np.asarray(self.close, dtype=np.float64)
        for name, arr in (("timestamps", ts), ("open", o), ("high", h), ("low", l), ("close", c)):
            object.__setattr__(self, name, arr)
        n = len(ts)
        if n < 1:
            raise ParameterError("OhlcSeries requires at least one bar")
        if not all(len(a) == n for a in (o, h, l, c)):
            raise ParameterError("OhlcSeries arrays must share one length")
        if n > 1 and not np.all(np.diff(ts) > 0):
            raise ParameterError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(o)) and np.all(np.isfinite(h))
                and np.all(np.isfinite(l)) and np.all(np.isfinite(c))):
            raise ParameterError("prices must be finite")
        if np.any(h < np.maximum(o, c)) or np.any(l > np.minimum(o, c)):
            raise ParameterError("high/low inconsistent with open/close")

    def __len__(self) -> int:
        return len(self.timestamps)

    def slice(self, start: int, stop: int | None = None) -> "OhlcSeries":
        sl = slice(start, stop)
        return OhlcSeries(self.timestamps[sl], self.open[sl], self.high[sl],
                          self.low[sl], self.close[sl])


@dataclass(frozen=True)
class IndicatorColumn:
    """Per-bar indicator values; the first ``warmup`` entries are NaN."""

    name: str
    values: np.ndarray
    warmup: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if np.any(~np.isfinite(v[self.warmup:])):
            raise ParameterError(f"{self.name}: non-finite value after warmup")

    def defined(self) -> np.ndarray:
        return self.values[self.warmup:]


def _wilder_smooth(x: np.ndarray, period: int) -> np.ndarray:
    """Wilder recursion over x, seeded with the mean of x[:period].

    Output index i is defined for i >= period - 1, NaN before.
    """
    n = len(x)
    out = np.full(n, np.nan)
    if n < period:
        return out
    avg = float(np.mean(x[:period]))
    out[period - 1] = avg
    for i in range(period, n):
        avg = (avg * (period - 1) + x[i]) / period
        out[i] = avg
    return out


def _ema(x: np.ndarray, period: int) -> np.ndarray:
    """EMA with alpha = 2/(period+1), seeded with the mean of x[:period]."""
    n = len(x)
    out = np.full(n, np.nan)
    if n < period:
        return out
    alpha = 2.0 / (period + 1)
    ema = float(np.mean(x[:period]))
    out[period - 1] = ema
    for i in range(period, n):
        ema = alpha * x[i] + (1 - alpha) * ema
        out[i] = ema
    return out


def rsi(series: OhlcSeries, period: int = 14) -> IndicatorColumn:
    """Wilder-smoothed relative strength index in [0, 100].

    Division guards: zero average loss forces 100, zero average gain forces 0
    (checked in that order, so a flat window reads 100).
    """
    if period < 1:
        raise ParameterError("rsi period must be positive")
    n = len(series)
    if n <= period:
        raise InsufficientDataError(
            f"rsi needs more than {period} bars, got {n}")
    delta = np.diff(series.close)
    gains = np.maximum(delta, 0.0)
    losses = np.maximum(-delta, 0.0)
    # deltas are offset by one bar: delta[i] belongs to bar i+1
    avg_gain = _wilder_smooth(gains, period)
    avg_loss = _wilder_smooth(losses, period)
    values = np.full(n, np.nan)
    for i in range(period - 1, n - 1):
        g, l = avg_gain[i], avg_loss[i]
        if l == 0.0:
            values[i + 1] = 100.0
        elif g == 0.0:
            values[i + 1] = 0.0
        else:
            values[i + 1] = 100.0 - 100.0 / (1.0 + g / l)
    return IndicatorColumn(f"rsi{period}", values, warmup=period)


def macd(series: OhlcSeries, fast: int = 12, slow: int = 26,
         signal: int = 9) -> tuple[IndicatorColumn, IndicatorColumn, IndicatorColumn]:
    """MACD line (fast EMA minus slow EMA), signal EMA, and histogram."""
    if fast < 1 or slow < 1 or signal < 1:
        raise ParameterError("macd periods must be positive")
    if fast >= slow:
        raise ParameterError(f"macd fast period ({fast}) must be < slow ({slow})")
    n = len(series)
    if n <= slow + signal:
        raise InsufficientDataError(
            f"macd needs more than {slow + signal} bars, got {n}")
    ema_fast = _ema(series.close, fast)
    ema_slow = _ema(series.close, slow)
    line = ema_fast - ema_slow            # NaN until slow - 1
    line_warmup = slow - 1
    sig = np.full(n, np.nan)
    sig[line_warmup:] = _ema(line[line_warmup:], signal)
    sig_warmup = line_warmup + signal - 1
    hist = line - sig
    return (IndicatorColumn("macd_line", line, warmup=line_warmup),
            IndicatorColumn("macd_signal", sig, warmup=sig_warmup),
            IndicatorColumn("macd_hist", hist, warmup=sig_warmup))


def adx(series: OhlcSeries, period: int = 14) -> IndicatorColumn:
    """Wilder average directional index in [0, 100].

    +DM/-DM from high/low deltas, true range, Wilder-smoothed +DI/-DI,
    DX = 100*|+DI - -DI| / (+DI + -DI) with DX = 0 when both DI are zero,
    then Wilder-smoothed DX. First defined value sits at bar 2*period - 1.
    """
    if period < 1:
        raise ParameterError("adx period must be positive")
    n = len(series)
    if n <= 2 * period:
        raise InsufficientDataError(
            f"adx needs more than {2 * period} bars, got {n}")
    up_move = np.diff(series.high)
    down_move = -np.diff(series.low)
    plus_dm = np.where((up_move > down_move) & (up_move > 0), up_move, 0.0)
    minus_dm = np.where((down_move > up_move) & (down_move > 0), down_move, 0.0)
    prev_close = series.close[:-1]
    tr = np.maximum(series.high[1:] - series.low[1:],
                    np.maximum(np.abs(series.high[1:] - prev_close),
                               np.abs(series.low[1:] - prev_close)))
    sm_plus = _wilder_smooth(plus_dm, period)
    sm_minus = _wilder_smooth(minus_dm, period)
    sm_tr = _wilder_smooth(tr, period)
    with np.errstate(invalid="ignore", divide="ignore"):
        plus_di = np.where(sm_tr > 0, 100.0 * sm_plus / sm_tr, 0.0)
        minus_di = np.where(sm_tr > 0, 100.0 * sm_minus / sm_tr, 0.0)
        di_sum = plus_di + minus_di
        dx = np.where(di_sum > 0, 100.0 * np.abs(plus_di - minus_di) / di_sum, 0.0)
    dx[: period - 1] = np.nan            # undefined until DI is seeded
    # dx[i] belongs to bar i+1; smooth the defined stretch
    adx_vals = np.full(n, np.nan)
    defined_dx = dx[period - 1:]
    smoothed = _wilder_smooth(defined_dx, period)
    adx_vals[period + period - 1:] = smoothed[period - 1:]
    return IndicatorColumn(f"adx{period}", adx_vals, warmup=2 * period - 1)
