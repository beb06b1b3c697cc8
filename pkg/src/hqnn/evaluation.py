"""RMSE, residual-distribution statistics, and model comparison tables.

The Gaussian fit is method-of-moments: the fitted mean is the sample mean
and the fitted sigma the population standard deviation, which is exactly
what a density overlay on a residual histogram needs. RMSE is reported in
scaled target units; use the stored scaler parameters to convert back to
price units when needed.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError, ShapeError
from .train import EvalReport

__all__ = ["ErrorStats", "rmse", "error_stats", "compare_models",
           "comparison_csv", "comparison_json"]


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ShapeError(f"rmse needs equal nonzero lengths, got "
                         f"{p.shape} vs {t.shape}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


@dataclass(frozen=True)
class ErrorStats:
    """Residual (prediction minus target) distribution summary."""

    residuals: np.ndarray
    mean: float
    std: float                    # population standard deviation
    gaussian_mu: float
    gaussian_sigma: float
    quartiles: tuple[float, float, float]
    outliers_beyond_3sigma: int
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std,
                "gaussian_mu": self.gaussian_mu,
                "gaussian_sigma": self.gaussian_sigma,
                "quartiles": list(self.quartiles),
                "outliers_beyond_3sigma": self.outliers_beyond_3sigma,
                "histogram_counts": self.histogram_counts.tolist(),
                "histogram_edges": self.histogram_edges.tolist(),
                "residuals": self.residuals.tolist()}


def error_stats(predictions, targets, bins: int = 30) -> ErrorStats:
    """Residual statistics with a fixed-width histogram over their range."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"shapes differ: {p.shape} vs {t.shape}")
    if p.size < 2:
        raise InsufficientDataError("error_stats needs at least 2 samples")
    r = p - t
    mu = float(np.mean(r))
    sigma = float(np.std(r))          # population (method of moments)
    q1, q2, q3 = (float(v) for v in np.percentile(r, [25, 50, 75]))
    if sigma > 0:
        outliers = int(np.sum(np.abs(r - mu) > 3 * sigma))
    else:
        outliers = 0
    counts, edges = np.histogram(r, bins=bins, range=(r.min(), r.max()))
    return ErrorStats(r, mu, sigma, mu, sigma, (q1, q2, q3), outliers,
                      counts, edges)


def compare_models(reports: list[EvalReport],
                   include_timing: bool = True) -> list[dict]:
    """Comparison rows sorted by average RMSE, ties by model name.

    With include_timing off the train_seconds column is zeroed so the table
    stays byte-for-byte reproducible across runs.
    """
    if not reports:
        raise ShapeError("compare_models needs at least one report")
    rows = []
    for rep in reports:
        rows.append({"model": rep.kind, "features": rep.k_features,
                     "avg_rmse": rep.avg_rmse,
                     "train_seconds": rep.total_seconds if include_timing
                     else 0.0})
    rows.sort(key=lambda r: (r["avg_rmse"], r["model"], r["features"]))
    return rows


def comparison_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "features", "avg_rmse", "train_seconds"])
    for r in rows:
        writer.writerow([r["model"], r["features"],
                         f"{r['avg_rmse']:.8f}", f"{r['train_seconds']:.6f}"])
    return buf.getvalue()


def comparison_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2)
