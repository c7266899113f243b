"""Classification and regression scores for grade forecasts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grading import QualityGrade, grade_array
from .preprocess import WindowSet

N_GRADES = len(QualityGrade)


def _codes(grades) -> np.ndarray:
    arr = np.asarray(grades, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= N_GRADES):
        raise ValidationError("grade codes must lie in 0..4")
    return arr


def confusion_matrix(truths, preds) -> np.ndarray:
    """5x5 counts; rows are true grades, columns predicted grades."""
    t, p = _codes(truths), _codes(preds)
    if len(t) != len(p):
        raise ValidationError(f"length mismatch: {len(t)} truths vs {len(p)} predictions")
    if len(t) == 0:
        raise ValidationError("confusion_matrix needs at least one sample")
    return np.bincount(t * N_GRADES + p, minlength=N_GRADES * N_GRADES).reshape(N_GRADES, N_GRADES)


def accuracy(cm) -> float:
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise ValidationError("accuracy of an empty confusion matrix")
    return float(np.trace(cm) / total)


def per_class_f1(cm) -> np.ndarray:
    """F1 per grade; zero where precision + recall is zero."""
    cm = np.asarray(cm, dtype=float)
    tp = np.diag(cm)
    predicted = cm.sum(axis=0)
    support = cm.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(cm) -> float:
    """Mean F1 over grades that occur in the ground truth."""
    cm = np.asarray(cm)
    supported = cm.sum(axis=1) > 0
    if not supported.any():
        raise ValidationError("macro_f1 needs at least one supported class")
    return float(per_class_f1(cm)[supported].mean())


def persistence_baseline(windows: WindowSet) -> np.ndarray:
    """Predict each label grade as the grade of the last observed RSRP."""
    if len(windows) == 0:
        raise ValidationError("persistence_baseline needs at least one window")
    return grade_array(windows.last_rsrp)


@dataclass
class EvalReport:
    confusion: np.ndarray
    accuracy: float
    macro_f1: float
    f1_per_class: np.ndarray
    mse_standardized: float
    mse_dbm: float
    baseline_accuracy: dict[str, float] = field(default_factory=dict)
    baseline_mse_dbm: dict[str, float] = field(default_factory=dict)
    n_samples: int = 0

    @classmethod
    def build(cls, truths, preds, mse_standardized: float, mse_dbm: float) -> "EvalReport":
        cm = confusion_matrix(truths, preds)
        return cls(cm, accuracy(cm), macro_f1(cm), per_class_f1(cm),
                   float(mse_standardized), float(mse_dbm), n_samples=int(cm.sum()))

    def summary(self) -> dict[str, float]:
        out = {"n_samples": self.n_samples, "accuracy": self.accuracy, "macro_f1": self.macro_f1,
               "mse_standardized": self.mse_standardized, "mse_dbm": self.mse_dbm}
        for name, acc in self.baseline_accuracy.items():
            out[f"{name}_accuracy"] = acc
        for name, mse in self.baseline_mse_dbm.items():
            out[f"{name}_mse_dbm"] = mse
        return out


def evaluate_forecast(windows: WindowSet, forecast, standardized_labels: np.ndarray) -> EvalReport:
    """Score a :class:`~lqe.model.Forecast` against the windows' labels.

    Includes the persistence baseline's grade accuracy and dBm MSE.
    """
    truths = windows.label_grades
    actual = windows.label_rsrp
    mse_std = float(np.mean((forecast.standardized - standardized_labels) ** 2))
    mse_dbm = float(np.mean((forecast.rsrp - actual) ** 2))
    rep = EvalReport.build(truths, forecast.grades, mse_std, mse_dbm)
    base = persistence_baseline(windows)
    rep.baseline_accuracy["persistence"] = accuracy(confusion_matrix(truths, base))
    rep.baseline_mse_dbm["persistence"] = float(np.mean((windows.last_rsrp - actual) ** 2))
    return rep

