"""Command-line entry point.

Subcommands: generate, train, predict, evaluate, compare, rate-check.
Settings come from a JSON config file (``--config``); ``--seed``, ``--out``
and ``--extrapolate`` override their config counterparts. Exit codes: 0
success, 2 config error, 3 data error, 4 numerical failure (diagnostics on
stderr).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .baseline import (
    PodGprModel,
    covariance_rate_experiment,
    generate_synthetic,
    pod_gpr_predict,
    pod_gpr_train,
)
from .exceptions import ConfigError, DataError, NumericalError
from .pipeline import (
    MetricRow,
    MetricsReport,
    PpmdConfig,
    PpmdModel,
    error_metrics,
    predict as ppmd_predict,
    train as ppmd_train,
)
from .snapshots import SnapshotMatrix
from .temporal import TemporalModel, TemporalPMD, temporal_predict

_METHOD_LABELS = {"ppmd": "PPMD", "pmd": "PMD", "pod-gpr": "POD-GPR"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmdrom",
                                     description="Parametric manifold ROM toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate": "write a synthetic snapshot file",
        "train": "fit a model on a snapshot file",
        "predict": "evaluate a trained model at one parameter",
        "evaluate": "score a trained model against a snapshot file",
        "compare": "train two methods on one file and score both on held-out columns",
        "rate-check": "run the covariance-convergence experiment",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--out", help="output path (overrides config)")
        p.add_argument("--extrapolate", action="store_true",
                       help="allow parameters outside the training domain")
        if name == "predict":
            p.add_argument("--param", type=float,
                           help="parameter (or time) to predict at")
    return parser


def _load_config(args) -> dict:
    return io.load_run_config(args.config) if args.config else {}


def _resolve(args, config: dict, key: str, default=None):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    return config.get(key, default)


def _require(value, what: str):
    if value is None:
        raise ConfigError(f"missing required setting: {what}")
    return value


def _read_snapshots(path: str, config: dict) -> SnapshotMatrix:
    if str(path).endswith(".csv"):
        return io.read_snapshot_csv(path, n_spatial=config.get("csv_n_spatial"),
                                    n_time=config.get("csv_n_time"))
    return io.read_snapshot_file(path)


def _model_predict(model, parameter: float, extrapolate: bool) -> np.ndarray:
    if isinstance(model, PpmdModel):
        return ppmd_predict(model, parameter, extrapolate=extrapolate)
    if isinstance(model, PodGprModel):
        return pod_gpr_predict(model, parameter)
    if isinstance(model, TemporalModel):
        return temporal_predict(model, parameter)
    raise ConfigError(f"cannot predict with {type(model).__name__}")


def _model_report(model, test: SnapshotMatrix, extrapolate: bool,
                  label: str) -> MetricsReport:
    if isinstance(model, PpmdModel):
        anchors, rank = model.train_params, model.rank
    elif isinstance(model, PodGprModel):
        anchors, rank = model.train_params, model.rank
    else:
        anchors, rank = model.times, model.basis.rank
    train_set = set(np.round(anchors, 12))
    rows = []
    for j, mu in enumerate(test.params):
        predicted = _model_predict(model, float(mu), extrapolate)
        mse, rel = error_metrics(predicted, test.data[:, j])
        kind = "reconstruction" if round(float(mu), 12) in train_set else "prediction"
        rows.append(MetricRow(kind=kind, parameter=float(mu), rank=rank,
                              method=label, mse=mse, rel=rel))
    return MetricsReport(rows=rows)


def _train_method(method: str, snapshots: SnapshotMatrix, config: dict, seed: int):
    if method == "ppmd":
        kwargs = dict(config.get("ppmd", {}))
        for key in ("degree_grid", "offset_grid", "ridge_grid", "alpha_grid"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        kwargs.setdefault("seed", seed)
        return ppmd_train(snapshots, PpmdConfig(**kwargs))
    if method == "pod-gpr":
        kwargs = dict(config.get("pod_gpr", {}))
        kwargs.setdefault("rank", 2)
        return pod_gpr_train(snapshots, **kwargs)
    if method == "pmd":
        return TemporalPMD(**config.get("pmd", {})).fit(snapshots).model_
    raise ConfigError(f"unknown method {method!r}")


def _emit_report(report: MetricsReport, out: str | None) -> None:
    text = report.to_csv()
    if out:
        io.write_text(out, text)
        print(f"wrote {out} ({len(report.rows)} rows)")
    else:
        sys.stdout.write(text)


def _cmd_generate(args, config: dict) -> None:
    spec = _require(config.get("generate"), "generate section")
    out = _require(_resolve(args, config, "out", config.get("output")), "--out")
    params = np.linspace(spec["mu_min"], spec["mu_max"], spec["n_params"])
    matrix = generate_synthetic(spec["family"], params, spec["n_spatial"], spec["n_time"])
    io.write_snapshot_file(matrix, out)
    print(f"wrote {out} ({matrix.n_samples} samples, {matrix.n_rows} rows)")


def _cmd_train(args, config: dict) -> None:
    path = _require(config.get("input"), "input")
    out = _require(_resolve(args, config, "out", config.get("output")), "--out")
    seed = _resolve(args, config, "seed", 0)
    method = config.get("method", "ppmd")
    snapshots = _read_snapshots(path, config)
    model = _train_method(method, snapshots, config, seed)
    io.save_model(model, out)
    rank = model.rank if hasattr(model, "rank") else model.basis.rank
    print(f"trained {method} on {snapshots.n_samples} samples (rank {rank}); wrote {out}")


def _cmd_predict(args, config: dict) -> None:
    model_path = _require(config.get("model"), "model")
    param = _resolve(args, config, "param")
    if param is None:
        param = config.get("predict", {}).get("param")
    param = float(_require(param, "--param"))
    out = _require(_resolve(args, config, "out", config.get("output")), "--out")
    extrapolate = bool(args.extrapolate or config.get("extrapolate", False))
    model = io.load_model(model_path)
    state = _model_predict(model, param, extrapolate)
    result = SnapshotMatrix(data=state[:, None], params=np.array([param]),
                            n_spatial=model.n_spatial, n_time=model.n_time)
    io.write_snapshot_file(result, out)
    print(f"wrote {out} (1 column, {result.n_rows} rows)")


def _cmd_evaluate(args, config: dict) -> None:
    model_path = _require(config.get("model"), "model")
    path = _require(config.get("input"), "input")
    out = _resolve(args, config, "out", config.get("output"))
    extrapolate = bool(args.extrapolate or config.get("extrapolate", False))
    model = io.load_model(model_path)
    test = _read_snapshots(path, config)
    label = {"PpmdModel": "PPMD", "PodGprModel": "POD-GPR",
             "TemporalModel": "PMD"}[type(model).__name__]
    _emit_report(_model_report(model, test, extrapolate, label), out)


def _holdout_split(matrix: SnapshotMatrix, count: int):
    n = matrix.n_samples
    if count < 1 or n - count < 4:
        raise ConfigError(f"test_count {count} leaves too few training samples")
    held = np.unique(np.linspace(1, n - 2, count).round().astype(int))
    mask = np.ones(n, dtype=bool)
    mask[held] = False
    train_part = SnapshotMatrix(data=matrix.data[:, mask], params=matrix.params[mask],
                                n_spatial=matrix.n_spatial, n_time=matrix.n_time)
    test_part = SnapshotMatrix(data=matrix.data[:, held], params=matrix.params[held],
                               n_spatial=matrix.n_spatial, n_time=matrix.n_time)
    return train_part, test_part


def _cmd_compare(args, config: dict) -> None:
    path = _require(config.get("input"), "input")
    methods = _require(config.get("compare", {}).get("methods"), "compare.methods")
    out = _resolve(args, config, "out", config.get("output"))
    seed = _resolve(args, config, "seed", 0)
    extrapolate = bool(args.extrapolate or config.get("extrapolate", False))
    matrix = _read_snapshots(path, config)
    train_part, test_part = _holdout_split(matrix, int(config.get("test_count", 5)))
    rows = []
    for method in methods:
        model = _train_method(method, train_part, config, seed)
        report = _model_report(model, test_part, extrapolate, _METHOD_LABELS[method])
        rows.extend(report.rows)
    _emit_report(MetricsReport(rows=rows), out)


def _cmd_rate_check(args, config: dict) -> None:
    spec = dict(config.get("rate_check", {}))
    seed = _resolve(args, config, "seed", 0)
    out = _resolve(args, config, "out", config.get("output"))
    report = covariance_rate_experiment(
        state_dim=spec.get("state_dim", 20),
        sample_sizes=spec.get("sample_sizes", [100 * 2**k for k in range(7)]),
        n_trials=spec.get("trials", 20),
        seed=seed,
        amplitude=spec.get("amplitude", 1.0),
    )
    lines = ["n_samples,mean_error"]
    for n, err in zip(report.sample_sizes, report.mean_errors):
        lines.append(f"{int(n)},{float(err)!r}")
    text = "\n".join(lines) + "\n"
    if out:
        io.write_text(out, text)
    else:
        sys.stdout.write(text)
    print(f"slope,{report.slope!r}")


_HANDLERS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
    "rate-check": _cmd_rate_check,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        _HANDLERS[args.command](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
