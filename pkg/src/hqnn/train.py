"""Joint optimization of all trainable parameters and the two
cross-validation protocols.

Training minimizes mean squared error with bias-corrected ADAM over
contiguous chronological mini-batches (never shuffled, so the walk-forward
semantics extend into the epoch loop). The learning rate decays by a fixed
factor per epoch. Early stopping watches the validation slice, the
chronological tail of the training samples, and the returned parameters are
always the best-validation snapshot.

Fold planning: the walk-forward protocol trains on an expanding chronological
prefix and tests on the next block, blocks of size floor(n / (n_splits + 1));
k-fold shuffles once with the run seed and partitions the indices.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (InsufficientDataError, NumericError, ParameterError,
                         ShapeError)
from .models import ParameterBundle, RegressorSpec, build_model
from .preprocess import (FeatureMatrix, WindowedDataset, fit_scaler,
                         select_k_best, window)

__all__ = [
    "TrainConfig", "AdamState", "FoldPlan", "TrainedModel", "EvalReport",
    "mse", "adam_step", "fit", "plan_folds", "cross_validate",
    "cross_validate_matrix",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_iterations: int = 500          # epochs
    learning_rate: float = 0.01
    decay: float = 0.99                # per-epoch learning-rate factor
    patience: int = 20                 # epochs without improvement
    min_delta: float = 1e-5
    val_fraction: float = 0.1          # chronological tail of training rows
    seed: int = 0

    def __post_init__(self):
        if min(self.batch_size, self.max_iterations, self.patience) < 1:
            raise ParameterError("batch size, iterations, patience must be "
                                 "positive")
        if self.learning_rate <= 0 or self.decay <= 0 or self.min_delta < 0:
            raise ParameterError("learning rate, decay must be positive")
        if not 0.0 < self.val_fraction < 0.5:
            raise ParameterError("val_fraction must be in (0, 0.5)")

    def to_dict(self) -> dict:
        return {"batch_size": self.batch_size,
                "max_iterations": self.max_iterations,
                "learning_rate": self.learning_rate, "decay": self.decay,
                "patience": self.patience, "min_delta": self.min_delta,
                "val_fraction": self.val_fraction, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def init(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ShapeError(f"mse needs equal nonzero lengths, got "
                         f"{p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray,
              lr: float, name: str = "parameters"
              ) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected ADAM update; returns new params and state."""
    g = np.asarray(grads, dtype=np.float64)
    p = np.asarray(params, dtype=np.float64)
    if g.shape != p.shape or g.shape != state.m.shape:
        raise ShapeError("adam_step shapes inconsistent")
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient in {name}")
    step = state.step + 1
    m = ADAM_BETA1 * state.m + (1 - ADAM_BETA1) * g
    v = ADAM_BETA2 * state.v + (1 - ADAM_BETA2) * g ** 2
    m_hat = m / (1 - ADAM_BETA1 ** step)
    v_hat = v / (1 - ADAM_BETA2 ** step)
    new_p = p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return new_p, AdamState(m, v, step)


@dataclass
class TrainedModel:
    spec: RegressorSpec
    params: ParameterBundle
    metadata: dict

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(),
                "params": self.params.to_dict(),
                "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        return cls(RegressorSpec.from_dict(d["spec"]),
                   ParameterBundle.from_dict(d["params"]), d["metadata"])


def fit(spec: RegressorSpec, dataset: WindowedDataset, config: TrainConfig
        ) -> tuple[TrainedModel, list[dict]]:
    """Train one model; returns the best-validation snapshot and the
    per-epoch loss history."""
    n = dataset.n_samples
    if n <= config.batch_size:
        raise InsufficientDataError(
            f"training needs more than {config.batch_size} samples, got {n}")
    val_n = max(1, int(round(n * config.val_fraction)))
    train_n = n - val_n
    if train_n < 1:
        raise InsufficientDataError("no training samples left after the "
                                    "validation split")
    model = build_model(spec)
    bundle = model.init_params()
    flat = bundle.flatten()
    adam = AdamState.init(flat.size)
    x, y = dataset.inputs, dataset.targets
    x_val, y_val = x[train_n:], y[train_n:]
    lr = config.learning_rate
    best_val = np.inf
    best_flat = flat.copy()
    best_epoch = 0
    stall = 0
    history: list[dict] = []
    for epoch in range(1, config.max_iterations + 1):
        sq_sum = 0.0
        for start in range(0, train_n, config.batch_size):
            stop = min(start + config.batch_size, train_n)
            preds, tape = model.forward(bundle, x[start:stop])
            resid = preds - y[start:stop]
            sq_sum += float(np.sum(resid ** 2))
            grads = model.backward(tape, 2.0 * resid / len(resid))
            flat, adam = adam_step(adam, flat, grads.flatten(), lr,
                                   name=spec.kind)
            bundle = bundle.with_flat(flat)
        train_mse = sq_sum / train_n
        val_preds, _ = model.forward(bundle, x_val)
        val_mse = mse(val_preds, y_val)
        if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
            raise NumericError(f"loss diverged at epoch {epoch} "
                               f"(train={train_mse}, val={val_mse})")
        history.append({"epoch": epoch, "train_mse": train_mse,
                        "val_mse": val_mse, "lr": lr})
        improved = best_val - val_mse > config.min_delta
        if val_mse < best_val:
            best_val = val_mse
            best_flat = flat.copy()
            best_epoch = epoch
        if improved:
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break
        lr *= config.decay
    trained = TrainedModel(
        spec, bundle.with_flat(best_flat),
        {"seed": spec.seed, "epochs_run": len(history),
         "best_epoch": best_epoch, "best_val_mse": best_val,
         "final_train_mse": history[-1]["train_mse"],
         "config": config.to_dict()})
    return trained, history


def predict(trained: TrainedModel, inputs: np.ndarray) -> np.ndarray:
    """Batched predictions from a trained snapshot."""
    model = build_model(trained.spec)
    preds, _ = model.forward(trained.params, np.asarray(inputs))
    return np.atleast_1d(preds)


@dataclass(frozen=True)
class FoldPlan:
    protocol: str                 # "TimeSeriesSplit" | "KFold"
    n_splits: int
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __iter__(self):
        return iter(self.folds)


def plan_folds(n_samples: int, protocol: str, n_splits: int = 5,
               seed: int = 0) -> FoldPlan:
    """Index ranges per fold for the chosen protocol."""
    if protocol not in ("TimeSeriesSplit", "KFold"):
        raise ParameterError(f"unknown protocol {protocol!r}")
    if n_splits < 1:
        raise ParameterError("n_splits must be positive")
    if n_samples < 2 * n_splits:
        raise InsufficientDataError(
            f"{protocol} with {n_splits} splits needs at least "
            f"{2 * n_splits} samples, got {n_samples}")
    folds = []
    if protocol == "TimeSeriesSplit":
        base = n_samples // (n_splits + 1)
        for j in range(n_splits):
            train = np.arange(0, base * (j + 1))
            test = np.arange(base * (j + 1), base * (j + 2))
            folds.append((train, test))
    else:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n_samples)
        chunks = np.array_split(perm, n_splits)
        for j in range(n_splits):
            test = np.sort(chunks[j])
            train = np.sort(np.concatenate(
                [chunks[i] for i in range(n_splits) if i != j]))
            folds.append((train, test))
    return FoldPlan(protocol, n_splits, tuple(folds))


@dataclass
class EvalReport:
    """Per-fold ledger for one (model, feature count, protocol) cell."""

    kind: str
    k_features: int
    protocol: str
    n_splits: int
    fold_rmse: list[float]
    fold_seconds: list[float]
    fold_histories: list[list[dict]]
    fold_residuals: list[np.ndarray]
    fold_sizes: list[tuple[int, int]]
    seed: int = 0

    @property
    def avg_rmse(self) -> float:
        return float(np.mean(self.fold_rmse))

    @property
    def total_seconds(self) -> float:
        return float(np.sum(self.fold_seconds))

    def residuals(self) -> np.ndarray:
        return np.concatenate(self.fold_residuals) if self.fold_residuals \
            else np.zeros(0)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {"model": self.kind, "k_features": self.k_features,
             "protocol": self.protocol, "n_splits": self.n_splits,
             "seed": self.seed,
             "fold_rmse": self.fold_rmse,
             "avg_rmse": self.avg_rmse,
             "fold_sizes": [list(s) for s in self.fold_sizes],
             "fold_residuals": [r.tolist() for r in self.fold_residuals],
             "fold_histories": self.fold_histories}
        if include_timing:
            d["fold_train_seconds"] = self.fold_seconds
            d["total_train_seconds"] = self.total_seconds
        return d


def _run_folds(spec: RegressorSpec, config: TrainConfig, plan: FoldPlan,
               fold_data) -> EvalReport:
    report = EvalReport(spec.kind, spec.k_features, plan.protocol,
                        plan.n_splits, [], [], [], [], [], seed=spec.seed)
    for train_idx, test_idx in plan:
        train_ds, test_ds = fold_data(train_idx, test_idx)
        started = time.perf_counter()
        trained, history = fit(spec, train_ds, config)
        elapsed = time.perf_counter() - started
        preds = predict(trained, test_ds.inputs)
        resid = preds - test_ds.targets
        report.fold_rmse.append(float(np.sqrt(np.mean(resid ** 2))))
        report.fold_seconds.append(elapsed)
        report.fold_histories.append(history)
        report.fold_residuals.append(resid)
        report.fold_sizes.append((len(train_idx), len(test_idx)))
    return report


def cross_validate(spec: RegressorSpec, dataset: WindowedDataset,
                   config: TrainConfig, plan: FoldPlan) -> EvalReport:
    """Cross-validation over an already-windowed dataset.

    The dataset's scaling/selection are taken as given; use
    cross_validate_matrix for the leakage-free per-fold refit pipeline.
    """
    if plan.folds and max(int(np.max(te)) for _, te in plan.folds) >= dataset.n_samples:
        raise ParameterError("fold plan exceeds dataset size")

    def fold_data(train_idx, test_idx):
        return dataset.subset(train_idx), dataset.subset(test_idx)

    return _run_folds(spec, config, plan, fold_data)


def cross_validate_matrix(spec: RegressorSpec, matrix: FeatureMatrix,
                          config: TrainConfig, plan: FoldPlan,
                          lookback: int | None = None,
                          k: int | None = None) -> EvalReport:
    """Cross-validation from the raw feature matrix, refitting feature
    selection and the scaler on each fold's training rows only."""
    lookback = spec.lookback if lookback is None else lookback
    k = spec.k_features if k is None else k
    n_samples = matrix.n_rows - lookback
    if n_samples < 1:
        raise InsufficientDataError("matrix too short for the lookback")
    if plan.folds and max(int(np.max(te)) for _, te in plan.folds) >= n_samples:
        raise ParameterError("fold plan exceeds the windowed sample count")

    def fold_data(train_idx, test_idx):
        # rows visible while training: every input and target row of the
        # training samples (sample i spans rows [i, i + lookback])
        row_set = np.unique(np.concatenate(
            [train_idx + off for off in range(lookback + 1)]))
        selected = select_k_best(matrix, k, rows=row_set)
        scaler = fit_scaler(matrix, row_set)
        ds = window(matrix, scaler, selected, lookback)
        return ds.subset(train_idx), ds.subset(test_idx)

    return _run_folds(spec, config, plan, fold_data)
