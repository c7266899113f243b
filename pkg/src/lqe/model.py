"""Trained-model bundle and its binary file format.

Layout (all little endian)::

    magic          4 bytes   b"LQEM"
    version        u32       FORMAT_VERSION
    n_features     u32       n (input channels are 2n)
    hidden         u32       H
    layers         u32
    window         u32       N
    tau            f64       EMA span
    mean[2n]       f64       standardizer means
    sd[2n]         f64       standardizer standard deviations
    parameters     f64       per layer: wx (4H x D, row major), wh (4H x H), b (4H);
                             then head weights (2 x H) and head bias (2)

No bytes may follow the last parameter.
"""
from __future__ import annotations

import io
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ModelFormatError, ValidationError
from .grading import grade_array, recombine
from .lstm import N_OUTPUTS, LayerParams, LstmParams, predict
from .preprocess import Standardizer, WindowSet, apply_standardizer

MAGIC = b"LQEM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIId")


@dataclass(frozen=True)
class ModelConfig:
    """Preprocessing and shape settings a model was trained with."""

    n_features: int
    hidden: int
    layers: int
    window: int
    tau: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Forecast:
    trend: np.ndarray    # dBm
    noise: np.ndarray    # dBm
    rsrp: np.ndarray     # dBm
    grades: np.ndarray   # int grade codes
    standardized: np.ndarray  # raw network outputs, (M, 2)


@dataclass
class LqeModel:
    params: LstmParams
    standardizer: Standardizer
    config: ModelConfig

    def forecast(self, windows: WindowSet, batch_size: int = 1024) -> Forecast:
        """Predict next-step RSRP and grade for unstandardized ``windows``."""
        if windows.n_features != self.config.n_features:
            raise ValidationError(
                f"model expects {self.config.n_features} features, data has {windows.n_features}")
        if windows.window != self.config.window:
            raise ValidationError(f"model expects window {self.config.window}, data has {windows.window}")
        std = apply_standardizer(self.standardizer, windows)
        z = predict(self.params, std.inputs(), batch_size=batch_size) if len(windows) else np.zeros((0, 2))
        dbm = self.standardizer.inverse_labels(z)
        rsrp = recombine(dbm[:, 0], dbm[:, 1])
        return Forecast(dbm[:, 0], dbm[:, 1], np.atleast_1d(rsrp), grade_array(rsrp), z)


def save_model(params: LstmParams, standardizer: Standardizer, config: ModelConfig) -> bytes:
    n, H = config.n_features, config.hidden
    if params.n_inputs != 2 * n or params.hidden != H or params.n_layers != config.layers:
        raise ValidationError("parameters do not match the model config")
    if standardizer.n_channels != 2 * n:
        raise ValidationError("standardizer does not match the model config")
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n, H, config.layers, config.window, float(config.tau)))
    for arr in (standardizer.mean, standardizer.sd, *params.arrays()):
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def _param_shapes(n: int, H: int, layers: int) -> list[tuple[int, ...]]:
    shapes = []
    d = 2 * n
    for _ in range(layers):
        shapes += [(4 * H, d), (4 * H, H), (4 * H,)]
        d = H
    return shapes + [(N_OUTPUTS, H), (N_OUTPUTS,)]


def load_model(data: bytes) -> tuple[LstmParams, Standardizer, ModelConfig]:
    """Inverse of :func:`save_model`; raises :class:`ModelFormatError` on bad input."""
    data = bytes(data)
    if len(data) >= len(MAGIC) and data[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"bad magic {data[:len(MAGIC)]!r}, not an lqe model file")
    if len(data) < _HEADER.size:
        raise ModelFormatError("truncated model header")
    magic, version, n, H, layers, window, tau = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, not an lqe model file")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version} (expected {FORMAT_VERSION})")
    if min(n, H, layers, window) < 1:
        raise ModelFormatError("model header has zero dimensions")
    shapes = [(2 * n,), (2 * n,)] + _param_shapes(n, H, layers)
    need = _HEADER.size + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(data) < need:
        raise ModelFormatError(f"truncated model stream: {len(data)} bytes, expected {need}")
    if len(data) > need:
        raise ModelFormatError(f"{len(data) - need} trailing bytes after model parameters")
    arrays = []
    pos = _HEADER.size
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(float).reshape(shape))
        pos += 8 * count
    try:
        std = Standardizer(arrays[0], arrays[1])
    except ValidationError as exc:
        raise ModelFormatError(f"invalid standardizer: {exc}") from None
    rest = arrays[2:]
    params = LstmParams([LayerParams(*rest[3 * k:3 * k + 3]) for k in range(layers)], rest[-2], rest[-1])
    return params, std, ModelConfig(n, H, layers, window, tau)


def save_model_file(model: LqeModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model.params, model.standardizer, model.config))


def load_model_file(path) -> LqeModel:
    with open(path, "rb") as fh:
        return LqeModel(*load_model(fh.read()))
