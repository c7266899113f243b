"""Binning of RSRP values into five link-quality grades.

Cut points (dBm) are -115, -105, -95 and -84. The top boundary is inclusive
for the upper grade (``rsrp >= -84`` is very good); every other boundary
value falls into the lower grade (``-95`` is intermediate, ``-105`` is bad,
``-115`` is very bad).
"""
from __future__ import annotations

import enum
import math

import numpy as np

from .errors import ValidationError

BIN_THRESHOLDS = (-115.0, -105.0, -95.0, -84.0)


class QualityGrade(enum.IntEnum):
    VERY_BAD = 0
    BAD = 1
    INTERMEDIATE = 2
    GOOD = 3
    VERY_GOOD = 4

    @property
    def label(self) -> str:
        """Serialized name used in reports and CSV output."""
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "QualityGrade":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValidationError(f"unknown grade {label!r}") from None


GRADE_LABELS = tuple(g.label for g in QualityGrade)


def recombine(trend_pred, noise_pred):
    """Add predicted trend and noise back into an RSRP value (dBm).

    Works elementwise on arrays as well as on scalars.
    """
    trend = np.asarray(trend_pred, dtype=float)
    noise = np.asarray(noise_pred, dtype=float)
    if not (np.all(np.isfinite(trend)) and np.all(np.isfinite(noise))):
        raise ValidationError("recombine requires finite trend and noise")
    out = trend + noise
    return float(out) if out.ndim == 0 else out


def grade_array(rsrp) -> np.ndarray:
    """Vectorized :func:`grade_of`, returning an int array of grade codes."""
    x = np.asarray(rsrp, dtype=float)
    if np.any(np.isnan(x)):
        raise ValidationError("cannot grade NaN RSRP")
    lo, b, mid, hi = BIN_THRESHOLDS
    # interior edges go to the lower grade: count edges strictly below x
    codes = (x > lo).astype(np.int64) + (x > b) + (x > mid)
    # the -84 edge belongs to VERY_GOOD
    codes = codes + (x >= hi)
    return codes


def grade_of(rsrp: float) -> QualityGrade:
    """Map one RSRP value in dBm to its :class:`QualityGrade`."""
    if rsrp is None or math.isnan(rsrp):
        raise ValidationError("cannot grade NaN RSRP")
    return QualityGrade(int(grade_array(rsrp)))
