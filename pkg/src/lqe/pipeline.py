"""End-to-end glue: traces -> windows -> split -> standardize -> ROS -> train.

Also hosts evaluation and per-window prediction on new traces, which reuse
the span, window and standardizer stored with a model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import RunConfig
from .errors import ValidationError
from .grading import QualityGrade
from .metrics import EvalReport, evaluate_forecast
from .model import Forecast, LqeModel, ModelConfig
from .preprocess import (DatasetSplit, Standardizer, WindowSet, apply_standardizer,
                         fit_standardizer, oversample, split_dataset, windows_from_traces)
from .trace_io import SessionTrace, impute_missing, parse_trace_csv
from .training import TrainHistory, train

MIN_WINDOWS = 10


def load_traces(paths: Sequence) -> list[SessionTrace]:
    """Parse every CSV in ``paths``; session ids must be unique across files."""
    traces: list[SessionTrace] = []
    seen: set[str] = set()
    for path in paths:
        for tr in parse_trace_csv(path):
            if tr.session_id in seen:
                raise ValidationError(f"session {tr.session_id!r} appears in more than one input")
            seen.add(tr.session_id)
            traces.append(tr)
    if not traces:
        raise ValidationError("no sessions found in the input traces")
    return traces


def make_windows(traces: Sequence[SessionTrace], tau: float, window: int) -> WindowSet:
    return windows_from_traces([impute_missing(t) for t in traces], tau, window)


@dataclass
class PreparedData:
    raw: DatasetSplit            # unstandardized, no oversampling
    standardizer: Standardizer
    train: WindowSet             # standardized and (optionally) oversampled
    validation: WindowSet        # standardized
    test: WindowSet              # standardized

    @property
    def split(self) -> DatasetSplit:
        return DatasetSplit(self.train, self.validation, self.test)


def prepare(traces: Sequence[SessionTrace], config: RunConfig) -> PreparedData:
    windows = make_windows(traces, config.tau, config.window)
    if len(windows) < MIN_WINDOWS:
        longest = max(len(t) for t in traces)
        raise ValidationError(
            f"dataset too small for window N={config.window}: {len(windows)} windows, need "
            f"{MIN_WINDOWS}; a single session needs at least {config.window + MIN_WINDOWS} "
            f"records (longest has {longest})")
    raw = split_dataset(windows, config.split)
    std = fit_standardizer(raw.train)
    train_set = oversample(raw.train, [config.seed, 1]) if config.oversample else raw.train
    return PreparedData(
        raw, std,
        apply_standardizer(std, train_set),
        apply_standardizer(std, raw.validation),
        apply_standardizer(std, raw.test),
    )


def fit(traces: Sequence[SessionTrace], config: RunConfig,
        on_epoch: Callable[[int, float, float], None] | None = None):
    """Run the full training pipeline. Returns ``(model, history, prepared)``."""
    data = prepare(traces, config)
    params, history = train(data.split, config.hyper(), hidden=config.hidden,
                            layers=config.layers, on_epoch=on_epoch)
    mcfg = ModelConfig(traces[0].n_features, config.hidden, config.layers, config.window, config.tau)
    return LqeModel(params, data.standardizer, mcfg), history, data


def evaluate_windows(model: LqeModel, windows: WindowSet) -> tuple[EvalReport, Forecast]:
    if len(windows) == 0:
        raise ValidationError("no windows to evaluate")
    fc = model.forecast(windows)
    labels = model.standardizer.transform_labels(windows.labels())
    return evaluate_forecast(windows, fc, labels), fc


def evaluate_traces(model: LqeModel, traces: Sequence[SessionTrace]) -> tuple[EvalReport, Forecast, WindowSet]:
    """Score ``model`` on every window of ``traces``."""
    n = traces[0].n_features
    if n != model.config.n_features:
        raise ValidationError(f"model expects {model.config.n_features} features, trace has {n}")
    windows = make_windows(traces, model.config.tau, model.config.window)
    if len(windows) == 0:
        raise ValidationError(
            f"trace too short for window N={model.config.window}: need at least "
            f"{model.config.window + 1} records")
    report, fc = evaluate_windows(model, windows)
    return report, fc, windows


PREDICTION_COLUMNS = (
    "session_id", "timestamp_s", "predicted_trend_dbm", "predicted_noise_dbm",
    "predicted_rsrp_dbm", "predicted_grade", "actual_rsrp_dbm", "actual_grade",
)


def prediction_rows(model: LqeModel, traces: Sequence[SessionTrace], horizon: int = 1) -> list[tuple]:
    """One row per window: the forecast for the step right after it.

    The actual RSRP and grade are left empty when the label step was
    missing in the input.
    """
    if horizon != 1:
        raise ValidationError("only one-step-ahead forecasts (horizon 1) are supported")
    if traces[0].n_features != model.config.n_features:
        raise ValidationError(
            f"model expects {model.config.n_features} features, trace has {traces[0].n_features}")
    windows = make_windows(traces, model.config.tau, model.config.window)
    if len(windows) == 0:
        raise ValidationError(
            f"trace too short for window N={model.config.window}: need at least "
            f"{model.config.window + 1} records")
    fc = model.forecast(windows)
    missing_rsrp = np.concatenate([t.missing[:, 0] for t in traces])[windows.label_index]
    actual = windows.label_rsrp
    actual_grades = windows.label_grades
    rows = []
    for k in range(len(windows)):
        sid = windows.session_ids[windows.session[k]]
        ts = int(windows.label_timestamps[k])
        pred = (repr(float(fc.trend[k])), repr(float(fc.noise[k])), repr(float(fc.rsrp[k])),
                QualityGrade(int(fc.grades[k])).label)
        if missing_rsrp[k]:
            act = ("", "")
        else:
            act = (repr(float(actual[k])), QualityGrade(int(actual_grades[k])).label)
        rows.append((sid, ts, *pred, *act))
    return rows
