"""Session-grouped link-metric traces: CSV I/O, imputation and synthesis.

CSV format (UTF-8, comma separated, ``.`` decimal point)::

    session_id,timestamp_s,rsrp_dbm,sinr_db
    drive-01,0,-87.5,9.25
    drive-01,1,-88.0,
    ...

Extra columns are ignored. An empty cell marks a missing value. Timestamps
are integer seconds on a 1 Hz grid; holes in the grid are filled with
records whose every feature is flagged missing.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ParseError, SchemaError, ValidationError

FEATURE_COLUMNS = ("rsrp_dbm", "sinr_db")
KEY_COLUMNS = ("session_id", "timestamp_s")
CSV_HEADER = KEY_COLUMNS + FEATURE_COLUMNS

# Marginal statistics of the sample trace shown in the source measurements.
DEFAULT_MEANS = (-87.17, 8.62)
DEFAULT_SDS = (14.94, 9.67)


@dataclass(frozen=True)
class MetricRecord:
    timestamp: int
    values: tuple[float, ...]
    missing: tuple[bool, ...]


@dataclass(frozen=True, eq=False)
class SessionTrace:
    """One drive-test session sampled at 1 Hz.

    ``values`` has shape ``(L, n)``; column 0 is always RSRP. Missing cells
    hold NaN and are flagged in ``missing``.
    """

    session_id: str
    timestamps: np.ndarray
    values: np.ndarray
    missing: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_COLUMNS

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.array(self.values, dtype=float, ndmin=2)
        miss = np.asarray(self.missing, dtype=bool)
        if ts.ndim != 1 or len(ts) == 0:
            raise ValidationError("a session needs at least one record")
        if vals.shape != (len(ts), len(self.feature_names)) or miss.shape != vals.shape:
            raise ValidationError(
                f"session {self.session_id!r}: values/missing must have shape "
                f"({len(ts)}, {len(self.feature_names)})"
            )
        if np.any(np.diff(ts) <= 0):
            raise ValidationError(f"session {self.session_id!r}: timestamps not strictly increasing")
        vals = vals.copy()
        vals[miss] = np.nan
        for name, arr in (("timestamps", ts), ("values", vals), ("missing", miss)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SessionTrace):
            return NotImplemented
        return (
            self.session_id == other.session_id
            and self.feature_names == other.feature_names
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def records(self) -> list[MetricRecord]:
        return [
            MetricRecord(int(t), tuple(float(v) for v in row), tuple(bool(m) for m in mrow))
            for t, row, mrow in zip(self.timestamps, self.values, self.missing)
        ]

    @classmethod
    def from_records(cls, session_id: str, records: Sequence[MetricRecord],
                     feature_names: Sequence[str] = FEATURE_COLUMNS) -> "SessionTrace":
        return cls(
            session_id,
            np.array([r.timestamp for r in records], dtype=np.int64),
            np.array([r.values for r in records], dtype=float).reshape(len(records), -1),
            np.array([r.missing for r in records], dtype=bool).reshape(len(records), -1),
            tuple(feature_names),
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic AR(1) Gaussian trace.

    ``means``/``sds``/``autocorr`` are per feature. The optional seasonal
    term ``seasonal_amplitude * sin(2*pi*t/seasonal_period)`` is added on top
    of the AR(1) component, so ``sds`` describes the AR(1) part only.
    """

    length: int
    means: tuple[float, ...] = DEFAULT_MEANS
    sds: tuple[float, ...] = DEFAULT_SDS
    autocorr: tuple[float, ...] = (0.9, 0.9)
    seed: int = 0
    seasonal_amplitude: tuple[float, ...] = (0.0, 0.0)
    seasonal_period: float = 60.0
    session_id: str = "synthetic"

    def __post_init__(self):
        if self.length < 1:
            raise ValidationError(f"synthetic length must be >= 1, got {self.length}")
        k = len(self.means)
        if not (len(self.sds) == len(self.autocorr) == len(self.seasonal_amplitude) == k):
            raise ValidationError("per-feature parameter lists must have equal length")
        if any(s < 0 for s in self.sds):
            raise ValidationError("standard deviations must be >= 0")
        if any(not 0.0 <= r < 1.0 for r in self.autocorr):
            raise ValidationError("autocorrelation must lie in [0, 1)")
        if self.seasonal_period <= 0:
            raise ValidationError("seasonal_period must be positive")


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    data = source.read()
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8")
    return io.StringIO(data, newline=""), True


def _parse_cell(cell: str, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(line, f"cannot parse {column}={cell!r} as a number") from None


def parse_trace_csv(source) -> list[SessionTrace]:
    """Parse a trace CSV into one :class:`SessionTrace` per session id.

    ``source`` may be a path, raw bytes, or a text/binary file object.
    Sessions are returned in order of first appearance; records are sorted
    by timestamp and 1 Hz gaps are filled with fully-missing records.
    """
    stream, owned = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(CSV_HEADER[0]) from None
        for col in CSV_HEADER:
            if col not in header:
                raise SchemaError(col)
        idx = [header.index(c) for c in CSV_HEADER]

        rows: dict[str, dict[int, tuple[list[float], list[bool]]]] = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            sid = row[idx[0]].strip()
            if not sid:
                raise ParseError(line, "empty session_id")
            ts_cell = row[idx[1]].strip()
            ts_val = _parse_cell(ts_cell, line, "timestamp_s")
            if not ts_val.is_integer():
                raise ParseError(line, f"timestamp_s={ts_cell!r} is not an integer second")
            ts = int(ts_val)
            vals, miss = [], []
            for col, j in zip(FEATURE_COLUMNS, idx[2:]):
                cell = row[j].strip()
                if cell == "":
                    vals.append(np.nan)
                    miss.append(True)
                else:
                    vals.append(_parse_cell(cell, line, col))
                    miss.append(False)
            session = rows.setdefault(sid, {})
            if ts in session:
                raise ValidationError(f"line {line}: duplicate record for session {sid!r} at t={ts}")
            session[ts] = (vals, miss)
    finally:
        if owned:
            stream.close()

    traces = []
    n = len(FEATURE_COLUMNS)
    for sid, recs in rows.items():
        present = np.array(sorted(recs), dtype=np.int64)
        grid = np.arange(present[0], present[-1] + 1, dtype=np.int64)
        values = np.full((len(grid), n), np.nan)
        missing = np.ones((len(grid), n), dtype=bool)
        for t in present:
            v, m = recs[int(t)]
            values[t - grid[0]] = v
            missing[t - grid[0]] = m
        traces.append(SessionTrace(sid, grid, values, missing))
    return traces


def write_trace_csv(traces: Iterable[SessionTrace], dest) -> None:
    """Write traces in the CSV format read by :func:`parse_trace_csv`.

    Values are written with ``repr`` so a round trip is exact.
    """
    owned = isinstance(dest, (str, os.PathLike))
    stream = open(dest, "w", newline="", encoding="utf-8") if owned else dest
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for tr in traces:
            for t, row, mrow in zip(tr.timestamps, tr.values, tr.missing):
                cells = ["" if m else repr(float(v)) for v, m in zip(row, mrow)]
                writer.writerow([tr.session_id, int(t), *cells])
    finally:
        if owned:
            stream.close()


def impute_missing(trace: SessionTrace) -> SessionTrace:
    """Zero-fill every missing cell and clear its flag."""
    if not trace.missing.any():
        return trace
    values = np.where(trace.missing, 0.0, trace.values)
    return SessionTrace(trace.session_id, trace.timestamps, values,
                        np.zeros_like(trace.missing), trace.feature_names)


def generate_synthetic_trace(spec: SyntheticSpec) -> SessionTrace:
    """Draw a stationary AR(1) Gaussian trace, one independent chain per feature."""
    rng = np.random.default_rng(spec.seed)
    L, k = spec.length, len(spec.means)
    phi = np.asarray(spec.autocorr, dtype=float)
    sd = np.asarray(spec.sds, dtype=float)
    shocks = rng.standard_normal((L, k))
    drive = sd * np.sqrt(1.0 - phi**2) * shocks
    drive[0] = sd * shocks[0]  # start in the stationary distribution
    ar = np.column_stack([lfilter([1.0], [1.0, -phi[j]], drive[:, j]) for j in range(k)])
    t = np.arange(L)
    seasonal = np.outer(np.sin(2.0 * np.pi * t / spec.seasonal_period), spec.seasonal_amplitude)
    values = np.asarray(spec.means, dtype=float) + ar + seasonal
    names = FEATURE_COLUMNS if k == len(FEATURE_COLUMNS) else tuple(f"feature_{j}" for j in range(k))
    return SessionTrace(spec.session_id, t, values, np.zeros((L, k), dtype=bool), names)
