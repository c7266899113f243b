"""Trend/noise separation, sliding windows, standardization, split and ROS.

Every session is decomposed independently with an exponential moving
average; each feature contributes a trend channel and a noise channel, so a
trace with ``n`` features becomes a ``2n``-channel series ordered
``[trend_1 .. trend_n, noise_1 .. noise_n]``.

Windows are not materialized. A :class:`WindowSet` keeps the concatenated
channel series of all sessions plus one ``(session, start)`` pair per window
and gathers input tensors on demand, which keeps full-scale data (window
370, hundreds of thousands of windows) in memory.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ValidationError
from .grading import QualityGrade, grade_array
from .trace_io import SessionTrace


def smoothing_factor(tau: float) -> float:
    """EMA smoothing factor ``2 / (tau + 1)`` for span ``tau >= 1``."""
    if not tau >= 1:
        raise ValidationError(f"EMA span must be >= 1, got {tau}")
    return 2.0 / (tau + 1.0)


@dataclass(frozen=True)
class DecomposedSeries:
    """Trend and noise channels of one session, both shaped ``(L, n)``."""

    trend: np.ndarray
    noise: np.ndarray
    tau: float
    observed: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        """The decomposed series itself (exact, not re-summed when available)."""
        return self.observed if self.observed is not None else self.trend + self.noise

    @property
    def channels(self) -> np.ndarray:
        """``(L, 2n)`` array of trend channels followed by noise channels."""
        return np.hstack([self.trend, self.noise])

    @property
    def n_features(self) -> int:
        return self.trend.shape[1]

    def __len__(self) -> int:
        return self.trend.shape[0]


def ema_decompose(series, tau: float) -> DecomposedSeries:
    """Split ``series`` (``(L,)`` or ``(L, n)``) into EMA trend and residual noise.

    The trend starts at the first observation and follows
    ``trend[t] = a * x[t] + (1 - a) * trend[t-1]`` with ``a = smoothing_factor(tau)``;
    noise is ``x - trend``.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError("ema_decompose needs a non-empty (L, n) series")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite values; impute first")
    a = smoothing_factor(tau)
    # initial filter state chosen so that trend[0] == x[0]
    zi = ((1.0 - a) * x[0])[None, :]
    trend, _ = lfilter([a], [1.0, -(1.0 - a)], x, axis=0, zi=zi)
    trend[0] = x[0]
    return DecomposedSeries(trend, x - trend, float(tau), x)


@dataclass(frozen=True)
class WindowSample:
    """One training example: ``(N, 2n)`` inputs and the next-step (trend, noise) of RSRP."""

    inputs: np.ndarray
    label: np.ndarray
    label_grade: QualityGrade


class WindowSet:
    """Indexable collection of sliding windows over one or more sessions.

    Parameters
    ----------
    channels : ndarray, shape (T, 2n)
        Channel series of all sessions, concatenated in session order.
    raw_rsrp : ndarray, shape (T,)
        Unstandardized RSRP (trend + noise) aligned with ``channels``.
    offsets : ndarray, shape (S + 1,)
        Session boundaries in ``channels``.
    window : int
        Number of time steps per window.
    session, start : ndarray, shape (M,)
        Session index and session-local start step of every window.
    session_ids, timestamps
        Metadata used when writing per-window reports.
    """

    def __init__(self, channels, raw_rsrp, offsets, window, session, start,
                 session_ids=None, timestamps=None):
        self.channels = np.asarray(channels, dtype=float)
        self.raw_rsrp = np.asarray(raw_rsrp, dtype=float)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.window = int(window)
        self.session = np.asarray(session, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        n_sessions = len(self.offsets) - 1
        self.session_ids = list(session_ids) if session_ids is not None else [str(i) for i in range(n_sessions)]
        if timestamps is None:
            timestamps = np.concatenate([np.arange(b - a) for a, b in zip(self.offsets[:-1], self.offsets[1:])]) \
                if n_sessions else np.zeros(0, dtype=np.int64)
        self.timestamps = np.asarray(timestamps, dtype=np.int64)

    @classmethod
    def from_decomposed(cls, decomposed: Sequence[DecomposedSeries], window: int,
                        session_ids: Sequence[str] | None = None,
                        timestamps: Sequence[np.ndarray] | None = None) -> "WindowSet":
        return build_windows(decomposed, window, session_ids=session_ids, timestamps=timestamps)

    # -- basic container protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self.start)

    def __getitem__(self, k: int) -> WindowSample:
        k = range(len(self))[k]
        return WindowSample(self.inputs([k])[0], self.labels([k])[0],
                            QualityGrade(int(self.label_grades[k])))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def n_channels(self) -> int:
        return self.channels.shape[1]

    @property
    def n_features(self) -> int:
        return self.n_channels // 2

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx, dtype=np.int64)
        return self._replace(session=self.session[idx], start=self.start[idx])

    def _replace(self, **kw) -> "WindowSet":
        args = dict(channels=self.channels, raw_rsrp=self.raw_rsrp, offsets=self.offsets,
                    window=self.window, session=self.session, start=self.start,
                    session_ids=self.session_ids, timestamps=self.timestamps)
        args.update(kw)
        return WindowSet(**args)

    # -- gathered views -----------------------------------------------------------
    @property
    def first_index(self) -> np.ndarray:
        """Global row of each window's first step."""
        return self.offsets[self.session] + self.start

    @property
    def label_index(self) -> np.ndarray:
        """Global row of each window's label step."""
        return self.first_index + self.window

    @property
    def label_step(self) -> np.ndarray:
        """Session-local step of each window's label."""
        return self.start + self.window

    def inputs(self, idx=None) -> np.ndarray:
        """Gather an input tensor of shape ``(B, N, 2n)``."""
        first = self.first_index if idx is None else self.first_index[np.asarray(idx)]
        return self.channels[first[:, None] + np.arange(self.window)]

    def labels(self, idx=None) -> np.ndarray:
        """Gather ``(B, 2)`` labels: RSRP trend and RSRP noise at the label step."""
        rows = self.label_index if idx is None else self.label_index[np.asarray(idx)]
        return self.channels[rows][:, [0, self.n_features]]

    @property
    def label_rsrp(self) -> np.ndarray:
        return self.raw_rsrp[self.label_index]

    @property
    def last_rsrp(self) -> np.ndarray:
        """Raw RSRP at each window's final input step."""
        return self.raw_rsrp[self.label_index - 1]

    @property
    def label_grades(self) -> np.ndarray:
        return grade_array(self.label_rsrp)

    @property
    def label_timestamps(self) -> np.ndarray:
        return self.timestamps[self.label_index]


def decompose_traces(traces: Sequence[SessionTrace], tau: float) -> list[DecomposedSeries]:
    """Decompose every (already imputed) session independently."""
    return [ema_decompose(tr.values, tau) for tr in traces]


def build_windows(decomposed, window: int, session_ids=None, timestamps=None) -> WindowSet:
    """Slide a stride-1 window of ``window`` steps over each session.

    A session of length ``L`` yields ``max(L - window, 0)`` windows; window
    ``k`` covers steps ``k .. k + window - 1`` and is labelled with step
    ``k + window``.
    """
    if window < 1:
        raise ValidationError(f"window size must be >= 1, got {window}")
    if isinstance(decomposed, DecomposedSeries):
        decomposed = [decomposed]
    decomposed = list(decomposed)
    if not decomposed:
        raise ValidationError("no sessions to window")
    n = decomposed[0].n_features
    if any(d.n_features != n for d in decomposed):
        raise ValidationError("sessions disagree on feature count")
    lengths = np.array([len(d) for d in decomposed], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    channels = np.vstack([d.channels for d in decomposed])
    raw_rsrp = np.concatenate([d.values[:, 0] for d in decomposed])
    counts = np.maximum(lengths - window, 0)
    session = np.repeat(np.arange(len(decomposed)), counts)
    start = np.concatenate([np.arange(c) for c in counts]) if counts.sum() else np.zeros(0, dtype=np.int64)
    ts = None if timestamps is None else np.concatenate([np.asarray(t) for t in timestamps])
    return WindowSet(channels, raw_rsrp, offsets, window, session, start, session_ids, ts)


def windows_from_traces(traces: Sequence[SessionTrace], tau: float, window: int) -> WindowSet:
    """Decompose imputed traces and window them in one go."""
    dec = decompose_traces(traces, tau)
    return build_windows(dec, window, session_ids=[t.session_id for t in traces],
                         timestamps=[t.timestamps for t in traces])


@dataclass(frozen=True)
class Standardizer:
    """Per-channel mean and standard deviation fitted on training windows."""

    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        sd = np.asarray(self.sd, dtype=float).ravel()
        if mean.shape != sd.shape or mean.size % 2:
            raise ValidationError("standardizer needs matching, even-length mean and sd")
        if np.any(sd <= 0) or not np.all(np.isfinite(sd)):
            raise ValidationError("standard deviations must be finite and positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)

    @property
    def n_channels(self) -> int:
        return self.mean.size

    @property
    def label_channels(self) -> list[int]:
        return [0, self.n_channels // 2]

    def _check(self, n: int):
        if n != self.n_channels:
            raise ValidationError(f"expected {self.n_channels} channels, got {n}")

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._check(x.shape[-1])
        return (x - self.mean) / self.sd

    def inverse(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        self._check(z.shape[-1])
        return z * self.sd + self.mean

    def transform_labels(self, y) -> np.ndarray:
        c = self.label_channels
        return (np.asarray(y, dtype=float) - self.mean[c]) / self.sd[c]

    def inverse_labels(self, z) -> np.ndarray:
        c = self.label_channels
        return np.asarray(z, dtype=float) * self.sd[c] + self.mean[c]


def _coverage(windows: WindowSet) -> np.ndarray:
    """How many windows include each global row among their inputs."""
    diff = np.zeros(len(windows.channels) + 1, dtype=np.int64)
    np.add.at(diff, windows.first_index, 1)
    np.add.at(diff, windows.first_index + windows.window, -1)
    return np.cumsum(diff[:-1])


def fit_standardizer(train_windows: WindowSet) -> Standardizer:
    """Fit channel statistics over every time step of every training window.

    Overlapping windows count a step once per window that contains it.
    Population variance is used, and a constant channel gets ``sd = 1``.
    """
    if len(train_windows) < 2:
        raise ValidationError("fit_standardizer needs at least 2 training windows")
    w = _coverage(train_windows).astype(float)
    x = train_windows.channels
    mean = w @ x / w.sum()
    var = w @ (x - mean) ** 2 / w.sum()
    sd = np.sqrt(var)
    degenerate = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    sd[degenerate] = 1.0
    return Standardizer(mean, sd)


def apply_standardizer(std: Standardizer, windows: WindowSet) -> WindowSet:
    """Standardize inputs and labels channel-wise; grades stay in dBm."""
    std._check(windows.n_channels)
    return windows._replace(channels=std.transform(windows.channels))


def invert_standardizer(std: Standardizer, windows: WindowSet) -> WindowSet:
    std._check(windows.n_channels)
    return windows._replace(channels=std.inverse(windows.channels))


@dataclass(frozen=True)
class DatasetSplit:
    train: WindowSet
    validation: WindowSet
    test: WindowSet


def split_counts(total: int, ratio: Sequence[int] = (7, 2, 1)) -> tuple[int, int, int]:
    """Floor the train and validation shares; the remainder goes to test."""
    if len(ratio) != 3 or any(r < 0 for r in ratio) or sum(ratio) <= 0:
        raise ValidationError(f"invalid split ratio {ratio}")
    s = sum(ratio)
    n_train = total * ratio[0] // s
    n_val = total * ratio[1] // s
    return n_train, n_val, total - n_train - n_val


def split_dataset(windows: WindowSet, ratio: Sequence[int] = (7, 2, 1)) -> DatasetSplit:
    """Chronological split of the window sequence (sessions in order)."""
    if len(windows) < 10:
        raise ValidationError(f"need at least 10 windows to split, got {len(windows)}")
    n_train, n_val, _ = split_counts(len(windows), ratio)
    idx = np.arange(len(windows))
    return DatasetSplit(
        windows.subset(idx[:n_train]),
        windows.subset(idx[n_train:n_train + n_val]),
        windows.subset(idx[n_train + n_val:]),
    )


def oversample(train_windows: WindowSet, seed) -> WindowSet:
    """Random oversampling of minority grades up to the majority grade's count.

    The original windows come first, in their original order, followed by
    the duplicates drawn (with replacement) for each minority grade in grade
    order.
    """
    if len(train_windows) == 0:
        raise ValidationError("cannot oversample an empty training set")
    rng = np.random.default_rng(seed)
    grades = train_windows.label_grades
    present, counts = np.unique(grades, return_counts=True)
    target = counts.max()
    extra = [np.arange(len(train_windows))]
    for g, c in zip(present, counts):
        if c < target:
            members = np.flatnonzero(grades == g)
            extra.append(rng.choice(members, size=target - c, replace=True))
    return train_windows.subset(np.concatenate(extra))
