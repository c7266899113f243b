"""Command-line interface: ``lqe synth | train | evaluate | predict``.

``train``, ``evaluate`` and ``predict`` each create a fresh run directory
``<out>/<command>-<YYYYmmdd-HHMMSS>[-k]`` and print its path. Every run
directory holds ``effective-config.json``; passing that file back through
``--config`` reproduces the run. Files never embed wall-clock times, so
reruns are byte-identical.

Exit status: 0 on success, 1 on data/model/I-O errors, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import PRESETS, RunConfig, parse_split
from .errors import LqeError
from .model import load_model_file, save_model_file
from .pipeline import PREDICTION_COLUMNS, evaluate_traces, fit, load_traces, prediction_rows
from .reports import eval_report, history_report
from .trace_io import DEFAULT_MEANS, DEFAULT_SDS, SyntheticSpec, generate_synthetic_trace, write_trace_csv


# RunConfig field -> flag
_OVERRIDES = {
    "tau": "tau", "window": "window", "hidden": "hidden", "layers": "layers",
    "learning_rate": "lr", "batch_size": "batch", "max_epochs": "epochs",
    "dropout_rate": "dropout", "patience": "patience", "min_delta": "delta",
    "seed": "seed", "split": "split",
}


def _seed_default():
    env = os.environ.get("LQE_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"lqe: error: LQE_SEED must be an integer, got {env!r}")


def _run_dir(root: str, command: str) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    base = Path(root) / f"{command}-{stamp}"
    path, k = base, 0
    while path.exists():
        k += 1
        path = base.with_name(f"{base.name}-{k}")
    path.mkdir(parents=True)
    return path


def _add_model_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("hyperparameters (override preset and --config)")
    g.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="paper = full-scale defaults, desk = small and fast (default: paper)")
    g.add_argument("--config", help="effective-config.json from an earlier run")
    g.add_argument("--tau", type=float, help="EMA span (default 120)")
    g.add_argument("--window", type=int, help="window size N (default 370)")
    g.add_argument("--hidden", type=int, help="LSTM units per layer (default 128)")
    g.add_argument("--layers", type=int, help="LSTM layers (default 2)")
    g.add_argument("--lr", type=float, help="Adam learning rate (default 0.001)")
    g.add_argument("--batch", type=int, help="mini-batch size (default 128)")
    g.add_argument("--epochs", type=int, help="maximum epochs (default 1000)")
    g.add_argument("--dropout", type=float, help="dropout rate (default 0.266)")
    g.add_argument("--patience", type=int, help="early-stopping patience in epochs (default 50)")
    g.add_argument("--delta", type=float, help="early-stopping min_delta (default -0.0001)")
    g.add_argument("--split", type=str, help="train:validation:test ratio (default 7:2:1)")
    g.add_argument("--seed", type=int, default=None, help="random seed (fallback: $LQE_SEED, then 0)")


def _resolve_config(args) -> RunConfig:
    if args.config:
        if args.preset:
            args.parser.error("--preset cannot be combined with --config")
        base = RunConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    else:
        base = RunConfig.from_preset(args.preset or "paper")
    overrides = {}
    for name, flag in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = parse_split(value) if name == "split" else value
    if "seed" not in overrides and not args.config:
        env = _seed_default()
        if env is not None:
            overrides["seed"] = env
    if getattr(args, "traces", None):
        overrides["inputs"] = tuple(args.traces)
    return base.replace(**overrides)


def cmd_synth(args) -> int:
    if args.length < 1:
        args.parser.error(f"--length must be >= 1, got {args.length}")
    seed = args.seed if args.seed is not None else _seed_default()
    seed = 0 if seed is None else seed
    spec = SyntheticSpec(
        length=args.length,
        means=(args.rsrp_mean, args.sinr_mean),
        sds=(args.rsrp_sd, args.sinr_sd),
        autocorr=(args.autocorr, args.autocorr),
        seed=seed,
        seasonal_amplitude=(args.seasonal_amplitude, 0.0),
        seasonal_period=args.seasonal_period,
        session_id=args.session_id,
    )
    trace = generate_synthetic_trace(spec)
    if args.out in (None, "-"):
        write_trace_csv([trace], sys.stdout)
    else:
        write_trace_csv([trace], args.out)
        print(args.out)
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    if not config.inputs:
        args.parser.error("no input traces given")
    traces = load_traces(config.inputs)
    model, history, data = fit(traces, config)
    run = _run_dir(args.out, "train")
    save_model_file(model, run / "model.lqem")
    (run / "effective-config.json").write_text(config.to_json(), encoding="utf-8")
    extra = {
        "n_train_windows": len(data.raw.train),
        "n_train_windows_oversampled": len(data.train),
        "n_validation_windows": len(data.validation),
        "n_test_windows": len(data.test),
    }
    (run / "report.txt").write_text(history_report(history, config.to_dict(), extra).to_text(),
                                    encoding="utf-8")
    with open(run / "history.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for e, (t, v) in enumerate(zip(history.train_loss, history.val_loss), start=1):
            w.writerow([e, repr(t), repr(v)])
    print(run)
    return 0


def _model_and_traces(args):
    model = load_model_file(args.model)
    traces = load_traces(args.traces)
    return model, traces


def _model_config_record(args, model) -> dict:
    return {"model": str(args.model), "inputs": list(args.traces), **model.config.to_dict()}


def cmd_evaluate(args) -> int:
    model, traces = _model_and_traces(args)
    report, _, _ = evaluate_traces(model, traces)
    run = _run_dir(args.out, "evaluate")
    record = _model_config_record(args, model)
    (run / "effective-config.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")
    (run / "report.txt").write_text(eval_report(report, record).to_text(), encoding="utf-8")
    print(run)
    return 0


def cmd_predict(args) -> int:
    model, traces = _model_and_traces(args)
    rows = prediction_rows(model, traces, horizon=args.horizon)
    run = _run_dir(args.out, "predict")
    record = {**_model_config_record(args, model), "horizon": args.horizon}
    (run / "effective-config.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")
    with open(run / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        w.writerows(rows)
    print(run)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lqe", description="LSTM link-quality estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch losses")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic AR(1) RSRP/SINR trace as CSV")
    p.add_argument("--length", type=int, default=5000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rsrp-mean", type=float, default=DEFAULT_MEANS[0])
    p.add_argument("--rsrp-sd", type=float, default=DEFAULT_SDS[0])
    p.add_argument("--sinr-mean", type=float, default=DEFAULT_MEANS[1])
    p.add_argument("--sinr-sd", type=float, default=DEFAULT_SDS[1])
    p.add_argument("--autocorr", type=float, default=0.9, help="lag-1 autocorrelation of both features")
    p.add_argument("--seasonal-amplitude", type=float, default=0.0, help="RSRP sinusoid amplitude (dBm)")
    p.add_argument("--seasonal-period", type=float, default=60.0, help="sinusoid period (s)")
    p.add_argument("--session-id", default="synthetic")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_synth, parser=p)

    p = sub.add_parser("train", help="train a model on one or more trace CSVs")
    p.add_argument("traces", nargs="*", help="trace CSV files (optional with --config)")
    _add_model_flags(p)
    p.add_argument("--out", default="runs", help="root directory for run outputs")
    p.set_defaults(func=cmd_train, parser=p)

    for name, func, help_ in (("evaluate", cmd_evaluate, "score a model on trace CSVs"),
                              ("predict", cmd_predict, "write per-window forecasts")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("traces", nargs="+", help="trace CSV files")
        p.add_argument("--model", required=True, help="model file written by 'lqe train'")
        p.add_argument("--out", default="runs", help="root directory for run outputs")
        if name == "predict":
            p.add_argument("--horizon", type=int, default=1, help="steps ahead (only 1 is supported)")
        p.set_defaults(func=func, parser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LqeError, OSError) as exc:
        print(f"lqe: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
