"""Feature assembly, univariate feature selection, [0,1] scaling, windowing.

The pipeline is: OHLC bars -> feature matrix (prices + indicators, warmup rows
dropped) -> k-best selection by univariate F score -> min/max scaling fitted
on training rows only -> sliding windows of ``lookback`` past rows predicting
the next bar's scaled close.

Scaling clamps test-region feature excursions into [0, 1] so the downstream
arcsin/arccos encoding stays well-defined; constant columns map to 0.5 to keep
clear of the encoding's derivative singularities at the interval ends. Targets
are scaled with the training close range but never clamped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError, ParameterError
from .indicators import OhlcSeries, adx, macd, rsi

__all__ = [
    "FeatureMatrix", "ScalerParams", "WindowedDataset",
    "build_features", "select_k_best", "f_scores", "fit_scaler",
    "window", "unscale_target",
]

FEATURE_COLUMNS = ("open", "high", "low", "close", "rsi14",
                   "macd_line", "macd_signal", "macd_hist", "adx14")


@dataclass(frozen=True)
class FeatureMatrix:
    """Rectangular per-bar feature rows plus the raw close as target."""

    column_names: tuple[str, ...]
    rows: np.ndarray          # (n_rows, n_columns) float64, all finite
    target: np.ndarray        # (n_rows,) raw close price

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        target = np.asarray(self.target, dtype=np.float64)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if rows.ndim != 2 or rows.shape[1] != len(self.column_names):
            raise ParameterError("rows shape inconsistent with column names")
        if len(target) != rows.shape[0]:
            raise ParameterError("target length inconsistent with rows")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(target))):
            raise ParameterError("feature matrix must be fully defined")

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.column_names.index(name)]


@dataclass(frozen=True)
class ScalerParams:
    """Per-column min/max fitted on training rows; constant columns flagged."""

    column_names: tuple[str, ...]
    col_min: np.ndarray
    col_max: np.ndarray
    target_min: float
    target_max: float

    @property
    def constant_columns(self) -> np.ndarray:
        return self.col_max == self.col_min

    @property
    def constant_target(self) -> bool:
        return self.target_max == self.target_min


@dataclass(frozen=True)
class WindowedDataset:
    """Supervised windows: sample i packs rows [i, i+lookback) as input and
    row i+lookback's scaled close as target, preserving chronological order."""

    inputs: np.ndarray            # (samples, lookback, k) in [0, 1]
    targets: np.ndarray           # (samples,) scaled close
    lookback: int
    selected_features: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "selected_features", tuple(self.selected_features))

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[2]

    def sample_rows(self, i: int) -> tuple[range, int]:
        """Source row indices of sample i: (input rows, target row)."""
        return range(i, i + self.lookback), i + self.lookback

    def subset(self, indices: np.ndarray) -> "WindowedDataset":
        idx = np.asarray(indices)
        return WindowedDataset(self.inputs[idx], self.targets[idx],
                               self.lookback, self.selected_features)


def build_features(series: OhlcSeries) -> FeatureMatrix:
    """Assemble prices plus rsi14, macd columns, and adx14; drop warmup rows."""
    r = rsi(series, 14)
    m_line, m_sig, m_hist = macd(series, 12, 26, 9)
    a = adx(series, 14)
    columns = [series.open, series.high, series.low, series.close,
               r.values, m_line.values, m_sig.values, m_hist.values, a.values]
    start = max(r.warmup, m_sig.warmup, a.warmup)
    n = len(series)
    if start >= n:
        raise InsufficientDataError(
            f"no rows survive indicator warmup ({start} bars) for {n}-bar series")
    rows = np.column_stack([c[start:] for c in columns])
    return FeatureMatrix(FEATURE_COLUMNS, rows, series.close[start:])


def f_scores(matrix: FeatureMatrix, rows: np.ndarray | None = None) -> np.ndarray:
    """Univariate regression F statistic of each feature against the target.

    F = r^2 (n-2) / (1 - r^2) with r the Pearson correlation; a constant
    feature (or a constant target) has undefined r and scores 0. A perfect
    correlation scores +inf.
    """
    x = matrix.rows if rows is None else matrix.rows[rows]
    y = matrix.target if rows is None else matrix.target[rows]
    n = len(y)
    if n < 3:
        raise InsufficientDataError("feature scoring needs at least 3 rows")
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((xc ** 2).sum(axis=0))
    sy = np.sqrt((yc ** 2).sum())
    scores = np.zeros(x.shape[1])
    if sy == 0:
        return scores
    ok = sx > 0
    r = np.zeros(x.shape[1])
    r[ok] = (xc[:, ok] * yc[:, None]).sum(axis=0) / (sx[ok] * sy)
    r = np.clip(r, -1.0, 1.0)
    r2 = r ** 2
    with np.errstate(divide="ignore"):
        scores[ok] = np.where(r2[ok] >= 1.0, np.inf,
                              r2[ok] * (n - 2) / (1.0 - r2[ok]))
    return scores


def select_k_best(matrix: FeatureMatrix, k: int,
                  rows: np.ndarray | None = None) -> list[str]:
    """Names of the k highest-scoring features, ties kept in column order."""
    if not 1 <= k <= len(matrix.column_names):
        raise ParameterError(
            f"k must be in [1, {len(matrix.column_names)}], got {k}")
    scores = f_scores(matrix, rows)
    order = np.argsort(-scores, kind="stable")
    return [matrix.column_names[i] for i in order[:k]]


def fit_scaler(matrix: FeatureMatrix, train_rows: np.ndarray) -> ScalerParams:
    """Min/max per column over training rows only; target gets its own range."""
    idx = np.asarray(train_rows)
    if idx.size == 0:
        raise InsufficientDataError("scaler needs a non-empty training range")
    x = matrix.rows[idx]
    y = matrix.target[idx]
    return ScalerParams(matrix.column_names,
                        x.min(axis=0), x.max(axis=0),
                        float(y.min()), float(y.max()))


def _scale_columns(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    out = np.full(values.shape, 0.5)
    ok = span > 0
    out[..., ok] = (values[..., ok] - lo[ok]) / span[ok]
    return np.clip(out, 0.0, 1.0)


def scale_target(scaler: ScalerParams, raw: np.ndarray) -> np.ndarray:
    """Scaled (not clamped) close; a constant training target maps to 0.5."""
    if scaler.constant_target:
        return np.full(np.shape(raw), 0.5)
    return (np.asarray(raw, dtype=np.float64) - scaler.target_min) / (
        scaler.target_max - scaler.target_min)


def unscale_target(scaler: ScalerParams, scaled: np.ndarray) -> np.ndarray:
    """Inverse of scale_target for non-constant targets."""
    if scaler.constant_target:
        return np.full(np.shape(scaled), scaler.target_min)
    return np.asarray(scaled, dtype=np.float64) * (
        scaler.target_max - scaler.target_min) + scaler.target_min


def window(matrix: FeatureMatrix, scaler: ScalerParams, selected: list[str],
           lookback: int) -> WindowedDataset:
    """Slice the scaled feature matrix into supervised lookback windows."""
    if lookback < 1:
        raise ParameterError("lookback must be positive")
    n = matrix.n_rows
    if n <= lookback:
        raise InsufficientDataError(
            f"windowing needs more than {lookback} rows, got {n}")
    col_idx = [matrix.column_names.index(name) for name in selected]
    lo = scaler.col_min[col_idx]
    hi = scaler.col_max[col_idx]
    scaled = _scale_columns(matrix.rows[:, col_idx], lo, hi)
    targets = scale_target(scaler, matrix.target)
    n_samples = n - lookback
    inputs = np.empty((n_samples, lookback, len(selected)))
    for t in range(lookback):
        inputs[:, t, :] = scaled[t:t + n_samples]
    return WindowedDataset(inputs, targets[lookback:], lookback, tuple(selected))
