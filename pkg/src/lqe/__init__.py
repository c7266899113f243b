"""LSTM-based wireless link quality estimation.

Forecast next-second RSRP from RSRP/SINR traces with an EMA trend/noise
decomposition feeding a stacked LSTM, then bin the forecast into five
link-quality grades.
"""
from .config import PRESETS, RunConfig
from .errors import (LqeError, ModelFormatError, ParseError, SchemaError, TrainingError,
                     ValidationError)
from .grading import BIN_THRESHOLDS, GRADE_LABELS, QualityGrade, grade_array, grade_of, recombine
from .lstm import (AdamState, LstmParams, TrainHyper, adam_step, backward, forward,
                   gradient_check, init_params, mse_loss)
from .metrics import EvalReport, accuracy, confusion_matrix, macro_f1, persistence_baseline
from .model import LqeModel, ModelConfig, load_model, save_model
from .preprocess import (DatasetSplit, DecomposedSeries, Standardizer, WindowSample, WindowSet,
                         apply_standardizer, build_windows, ema_decompose, fit_standardizer,
                         oversample, smoothing_factor, split_dataset)
from .trace_io import (MetricRecord, SessionTrace, SyntheticSpec, generate_synthetic_trace,
                       impute_missing, parse_trace_csv, write_trace_csv)
from .training import EarlyStopState, TrainHistory, early_stop_update, train

__version__ = "0.1.0"
