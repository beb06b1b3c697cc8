"""Command-line entry point.

Subcommands:

* ``synth``      write a seeded synthetic OHLC CSV
* ``prepare``    build features, select, scale, and window a CSV into a
                 prepared-dataset JSON file
* ``train``      fit one model on a CSV's chronological training portion
* ``evaluate``   score a trained model file on its held-out test portion
* ``run``        execute a full experiment grid from a JSON config

Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.
The HQNN_SEED environment variable overrides the config seed for ``run``.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .data import REGIMES, ingest_csv, synth_data, write_csv
from .evaluation import error_stats, rmse
from .exceptions import (ConfigError, DataError, FormatError, HqnnError,
                         InsufficientDataError, NumericError, ParameterError)
from .experiment import (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK,
                         ExperimentConfig, run_experiment)
from .models import MODEL_KINDS, QUANTUM_KINDS, RegressorSpec
from .preprocess import build_features, fit_scaler, select_k_best, window
from .train import TrainConfig, TrainedModel, fit, predict

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """Argument errors are config errors (exit 1), not the default exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _prepare_pipeline(series, k: int, lookback: int, train_frac: float):
    matrix = build_features(series)
    n_rows = matrix.n_rows
    n_samples = n_rows - lookback
    if n_samples < 2:
        raise InsufficientDataError("too few rows after warmup for windowing")
    split_sample = max(1, int(n_samples * train_frac))
    train_rows = np.arange(0, split_sample + lookback)
    selected = select_k_best(matrix, k, rows=train_rows)
    scaler = fit_scaler(matrix, train_rows)
    dataset = window(matrix, scaler, selected, lookback)
    return matrix, dataset, selected, scaler, split_sample


def _scaler_dict(scaler) -> dict:
    return {"column_names": list(scaler.column_names),
            "col_min": scaler.col_min.tolist(),
            "col_max": scaler.col_max.tolist(),
            "target_min": scaler.target_min,
            "target_max": scaler.target_max}


def _cmd_synth(args) -> int:
    series = synth_data(args.bars, seed=args.seed, regime=args.regime,
                        start_price=args.start_price)
    write_csv(args.out, series)
    print(f"wrote {len(series)} bars to {args.out}")
    return EXIT_OK


def _cmd_prepare(args) -> int:
    series = ingest_csv(args.csv)
    matrix, dataset, selected, scaler, split = _prepare_pipeline(
        series, args.k, args.lookback, args.train_frac)
    payload = {
        "source_csv": args.csv, "lookback": args.lookback, "k": args.k,
        "train_samples": split, "n_samples": dataset.n_samples,
        "selected_features": list(selected), "scaler": _scaler_dict(scaler),
        "inputs": dataset.inputs.tolist(), "targets": dataset.targets.tolist(),
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
    print(f"prepared {dataset.n_samples} samples "
          f"({split} train) with features {', '.join(selected)}")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(batch_size=args.batch_size,
                       max_iterations=args.epochs,
                       learning_rate=args.lr, seed=args.seed)


def _cmd_train(args) -> int:
    series = ingest_csv(args.csv)
    _, dataset, selected, scaler, split = _prepare_pipeline(
        series, args.k, args.lookback, args.train_frac)
    spec = RegressorSpec(kind=args.model, n_qubits=args.k, k_features=args.k,
                         lookback=args.lookback, hidden_size=args.hidden_size,
                         seed=args.seed)
    trained, history = fit(spec, dataset.subset(np.arange(split)),
                           _train_config(args))
    payload = {"trained": trained.to_dict(), "selected": list(selected),
               "scaler": _scaler_dict(scaler), "lookback": args.lookback,
               "k": args.k, "train_samples": split, "source_csv": args.csv,
               "train_frac": args.train_frac}
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
    final = history[-1]
    print(f"trained {args.model} for {len(history)} epochs "
          f"(best val mse {trained.metadata['best_val_mse']:.6g}, "
          f"final train mse {final['train_mse']:.6g}); wrote {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    with open(args.model_file) as fh:
        payload = json.load(fh)
    trained = TrainedModel.from_dict(payload["trained"])
    series = ingest_csv(args.csv or payload["source_csv"])
    matrix = build_features(series)
    from .preprocess import ScalerParams
    sc = payload["scaler"]
    scaler = ScalerParams(tuple(sc["column_names"]),
                          np.asarray(sc["col_min"]),
                          np.asarray(sc["col_max"]),
                          sc["target_min"], sc["target_max"])
    dataset = window(matrix, scaler, payload["selected"], payload["lookback"])
    split = payload["train_samples"]
    test = dataset.subset(np.arange(split, dataset.n_samples))
    preds = predict(trained, test.inputs)
    stats = error_stats(preds, test.targets)
    report = {"model": trained.spec.kind, "k": payload["k"],
              "test_samples": test.n_samples,
              "test_rmse": rmse(preds, test.targets),
              "error_stats": stats.to_dict()}
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(f"test rmse {report['test_rmse']:.6g} over "
          f"{test.n_samples} samples")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    return run_experiment(config, out_dir=args.out_dir, jobs=args.jobs)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hqnn",
                     description="Hybrid quantum-classical stock "
                                 "forecasting experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic OHLC CSV")
    p.add_argument("--bars", type=int, default=400,
                   help="number of daily bars (default 400, minimum 60)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    p.add_argument("--regime", choices=REGIMES, default="walk",
                   help="price regime (default walk)")
    p.add_argument("--start-price", type=float, default=100.0,
                   help="initial price level (default 100.0)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("prepare", help="window a CSV into a dataset file")
    p.add_argument("--csv", required=True, help="input OHLC CSV")
    p.add_argument("--k", type=int, default=3,
                   help="features to select (default 3)")
    p.add_argument("--lookback", type=int, default=2,
                   help="window length in bars (default 2)")
    p.add_argument("--train-frac", type=float, default=0.8,
                   help="chronological training fraction (default 0.8)")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="fit one model on a CSV")
    p.add_argument("--csv", required=True, help="input OHLC CSV")
    p.add_argument("--model", required=True, choices=MODEL_KINDS,
                   help="model kind")
    p.add_argument("--k", type=int, default=3,
                   help="features to select; equals qubits for "
                        f"{', '.join(QUANTUM_KINDS)} (default 3)")
    p.add_argument("--lookback", type=int, default=2,
                   help="window length in bars (default 2)")
    p.add_argument("--hidden-size", type=int, default=16,
                   help="recurrent hidden size (default 16)")
    p.add_argument("--train-frac", type=float, default=0.8,
                   help="chronological training fraction (default 0.8)")
    p.add_argument("--epochs", type=int, default=500,
                   help="maximum training epochs (default 500)")
    p.add_argument("--batch-size", type=int, default=32,
                   help="mini-batch size (default 32)")
    p.add_argument("--lr", type=float, default=0.01,
                   help="initial learning rate (default 0.01)")
    p.add_argument("--seed", type=int, default=0,
                   help="initialization seed (default 0)")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model file")
    p.add_argument("--model-file", required=True, help="model JSON from train")
    p.add_argument("--csv", default=None,
                   help="OHLC CSV (default: the CSV recorded in the model)")
    p.add_argument("--out", default=None, help="optional report JSON path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="run a full experiment grid")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out-dir", default=None,
                   help="output directory (default: config output_dir)")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent grid cells (default 1)")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FormatError, InsufficientDataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HqnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
