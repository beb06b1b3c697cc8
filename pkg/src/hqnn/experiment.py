"""Experiment configuration and grid orchestration.

A single JSON config document describes the whole evaluation grid
(model kinds x feature counts x protocols). One master seed fans out
deterministically to per-component seeds through SHA-256 of
"master/component/..." strings, so adding a model to the grid never
perturbs any other model's results.

Outputs per run directory:

* ``report_<model>_<k>.json``       per-cell fold ledger (protocol suffix
                                    added when the grid has several)
* ``loss_<model>_<k>_<fold>.csv``   per-epoch (fold, epoch, train_mse,
                                    val_mse) rows
* ``comparison.csv``                combined table sorted by average RMSE
* ``manifest.json``                 config hash, seeds, cell statuses

Wall-clock training durations are recorded in the reports only when
``record_wall_time`` is true; by default every output byte is a pure
function of the config content and master seed, so reruns are
byte-identical.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .data import REGIMES, ingest_csv, synth_data
from .evaluation import compare_models, comparison_csv
from .exceptions import (ConfigError, DataError, FormatError, HqnnError,
                         InsufficientDataError, NumericError, ParameterError)
from .models import MODEL_KINDS, RegressorSpec
from .preprocess import build_features
from .train import (EvalReport, FoldPlan, TrainConfig, cross_validate_matrix,
                    plan_folds)

__all__ = ["ExperimentConfig", "component_seed", "run_experiment",
            "EXIT_OK", "EXIT_CONFIG", "EXIT_DATA", "EXIT_NUMERIC"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

PROTOCOLS = ("TimeSeriesSplit", "KFold", "Holdout")
SEED_ENV_VAR = "HQNN_SEED"

_KNOWN_KEYS = {
    "input_csv", "synthetic", "models", "k_features", "protocols",
    "n_splits", "lookback", "hidden_size", "ansatz_layers", "fusion_dim",
    "train", "output_dir", "seed", "record_wall_time", "holdout_fraction",
}
_KNOWN_SYNTH_KEYS = {"n_bars", "regime", "start_price"}


def component_seed(master: int, *parts: str) -> int:
    """Stable per-component seed derived from the master seed."""
    text = "/".join([str(master), *parts])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 63)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment grid; see from_dict for file-level defaults."""

    models: tuple[str, ...] = ("CustomQNN", "HybridQNN1", "HybridQNN2")
    k_features: tuple[int, ...] = (3,)
    protocols: tuple[str, ...] = ("TimeSeriesSplit",)
    n_splits: int = 5
    lookback: int = 2
    hidden_size: int = 16
    ansatz_layers: int | None = None
    fusion_dim: int = 8
    input_csv: str | None = None
    synthetic: dict = field(default_factory=lambda: {"n_bars": 400,
                                                     "regime": "walk"})
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "hqnn_out"
    seed: int = 0
    record_wall_time: bool = False
    holdout_fraction: float = 0.8

    def __post_init__(self):
        for kind in self.models:
            if kind not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {kind!r}; expected "
                                  f"one of {MODEL_KINDS}")
        if not self.models:
            raise ConfigError("models list is empty")
        for proto in self.protocols:
            if proto not in PROTOCOLS:
                raise ConfigError(f"unknown protocol {proto!r}; expected "
                                  f"one of {PROTOCOLS}")
        for k in self.k_features:
            if k < 1:
                raise ConfigError("k_features entries must be positive")
        if self.input_csv is not None and self.synthetic is not None:
            raise ConfigError("config sets both input_csv and synthetic")
        if self.input_csv is None and self.synthetic is None:
            raise ConfigError("config needs input_csv or synthetic")
        if not 0.5 <= self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must be in [0.5, 1.0)")
        if self.synthetic is not None:
            unknown = set(self.synthetic) - _KNOWN_SYNTH_KEYS
            if unknown:
                raise ConfigError(f"unknown synthetic keys {sorted(unknown)}")
            if self.synthetic.get("regime", "walk") not in REGIMES:
                raise ConfigError(
                    f"unknown regime {self.synthetic.get('regime')!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        d = dict(raw)
        if "input_csv" in d and "synthetic" not in d:
            d["synthetic"] = None
        train_raw = d.pop("train", {})
        if not isinstance(train_raw, dict):
            raise ConfigError("train section must be an object")
        try:
            train = TrainConfig(**{**TrainConfig().to_dict(), **train_raw})
        except TypeError as exc:
            raise ConfigError(f"bad train section: {exc}") from None
        for key in ("models", "k_features", "protocols"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(train=train, **d)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                raw["seed"] = int(env_seed)
            except ValueError:
                raise ConfigError(
                    f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}"
                ) from None
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {"models": list(self.models),
                "k_features": list(self.k_features),
                "protocols": list(self.protocols),
                "n_splits": self.n_splits, "lookback": self.lookback,
                "hidden_size": self.hidden_size,
                "ansatz_layers": self.ansatz_layers,
                "fusion_dim": self.fusion_dim,
                "input_csv": self.input_csv, "synthetic": self.synthetic,
                "train": self.train.to_dict(),
                "output_dir": self.output_dir, "seed": self.seed,
                "record_wall_time": self.record_wall_time,
                "holdout_fraction": self.holdout_fraction}

    def content_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _load_series(config: ExperimentConfig):
    if config.input_csv is not None:
        return ingest_csv(config.input_csv)
    synth = dict(config.synthetic)
    return synth_data(n_bars=synth.get("n_bars", 400),
                      seed=component_seed(config.seed, "data"),
                      regime=synth.get("regime", "walk"),
                      start_price=synth.get("start_price", 100.0))


def _plan_for(config: ExperimentConfig, protocol: str,
              n_samples: int) -> FoldPlan:
    if protocol == "Holdout":
        split = int(n_samples * config.holdout_fraction)
        if split < 1 or split >= n_samples:
            raise InsufficientDataError(
                f"holdout split needs samples on both sides, got {n_samples}")
        return FoldPlan("Holdout", 1,
                        ((np.arange(0, split), np.arange(split, n_samples)),))
    return plan_folds(n_samples, protocol, config.n_splits,
                      seed=component_seed(config.seed, "folds", protocol))


def _cell_spec(config: ExperimentConfig, kind: str, k: int,
               protocol: str) -> RegressorSpec:
    return RegressorSpec(
        kind=kind, n_qubits=k, k_features=k, lookback=config.lookback,
        hidden_size=config.hidden_size, ansatz_layers=config.ansatz_layers,
        fusion_dim=config.fusion_dim,
        seed=component_seed(config.seed, "model", kind, str(k), protocol))


def _run_cell(args) -> EvalReport:
    spec, matrix, train_config, plan = args
    return cross_validate_matrix(spec, matrix, train_config, plan)


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _report_name(kind: str, k: int, protocol: str, multi: bool) -> str:
    suffix = f"_{protocol}" if multi else ""
    return f"report_{kind}_{k}{suffix}.json"


def _loss_csv(history: list[dict], fold: int) -> str:
    lines = ["fold,epoch,train_mse,val_mse"]
    for rec in history:
        lines.append(f"{fold},{rec['epoch']},{rec['train_mse']:.12g},"
                     f"{rec['val_mse']:.12g}")
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, out_dir: str | None = None,
                   jobs: int = 1) -> int:
    """Run the full grid; returns a process exit code."""
    out = out_dir or config.output_dir
    os.makedirs(out, exist_ok=True)
    manifest = {"config_hash": config.content_hash(),
                "config": config.to_dict(),
                "master_seed": config.seed,
                "data_seed": (component_seed(config.seed, "data")
                              if config.input_csv is None else None),
                "cells": [], "outputs": [], "status": "ok"}
    exit_code = EXIT_OK
    try:
        series = _load_series(config)
        matrix = build_features(series)
        n_samples = matrix.n_rows - config.lookback
        multi_proto = len(config.protocols) > 1
        cells = [(kind, k, proto) for proto in config.protocols
                 for kind in config.models for k in config.k_features]
        tasks = []
        for kind, k, proto in cells:
            spec = _cell_spec(config, kind, k, proto)
            plan = _plan_for(config, proto, n_samples)
            tasks.append((spec, matrix, config.train, plan))
        if jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(jobs) as pool:
                reports = list(pool.map(_run_cell, tasks))
        else:
            reports = [_run_cell(t) for t in tasks]
        for (kind, k, proto), report in zip(cells, reports):
            name = _report_name(kind, k, proto, multi_proto)
            payload = report.to_dict(include_timing=config.record_wall_time)
            payload["protocol"] = proto
            _atomic_write(os.path.join(out, name),
                          json.dumps(payload, indent=2) + "\n")
            manifest["outputs"].append(name)
            for fold, history in enumerate(report.fold_histories):
                suffix = f"_{proto}" if multi_proto else ""
                loss_name = f"loss_{kind}_{k}{suffix}_{fold}.csv"
                _atomic_write(os.path.join(out, loss_name),
                              _loss_csv(history, fold))
                manifest["outputs"].append(loss_name)
            manifest["cells"].append(
                {"model": kind, "k": k, "protocol": proto, "status": "ok",
                 "avg_rmse": report.avg_rmse, "seed": report.seed})
        rows = compare_models(reports,
                              include_timing=config.record_wall_time)
        _atomic_write(os.path.join(out, "comparison.csv"),
                      comparison_csv(rows))
        manifest["outputs"].append("comparison.csv")
    except HqnnError as exc:
        manifest["status"] = "failed"
        manifest["failure"] = {"stage": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, (ConfigError, ParameterError)):
            exit_code = EXIT_CONFIG
        elif isinstance(exc, NumericError):
            exit_code = EXIT_NUMERIC
        elif isinstance(exc, (DataError, FormatError, InsufficientDataError)):
            exit_code = EXIT_DATA
        else:
            exit_code = EXIT_DATA
    _atomic_write(os.path.join(out, "manifest.json"),
                  json.dumps(manifest, indent=2) + "\n")
    return exit_code
