"""Stacked LSTM regressor with a linear two-output head, written in numpy.

Cell (gate rows ordered ``i, f, g, o`` in every ``4H`` block)::

    z_t = W_x x_t + W_h h_{t-1} + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)

Each layer's hidden output is passed through inverted dropout before it
feeds the next layer (or the head); recurrent connections see the raw
``h_t``. The head reads the top layer's output at the last time step and
predicts the standardized (trend, noise) pair of the next RSRP sample.
State is reset to zero at the start of every window.

Training runs in float64; ``forward`` also accepts ``np.longdouble``
inputs, which the gradient checker uses. Forward and backward are
vectorized over a batch of windows, shape ``(B, N, D)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
from scipy.special import expit

from .errors import TrainingError, ValidationError

N_OUTPUTS = 2


@dataclass
class LayerParams:
    wx: np.ndarray  # (4H, D)
    wh: np.ndarray  # (4H, H)
    b: np.ndarray   # (4H,)


@dataclass
class LstmParams:
    layers: list[LayerParams]
    head_w: np.ndarray  # (2, H)
    head_b: np.ndarray  # (2,)

    @property
    def hidden(self) -> int:
        return self.head_w.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.layers[0].wx.shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def names(self) -> list[str]:
        out = []
        for k in range(len(self.layers)):
            out += [f"layer{k + 1}.wx", f"layer{k + 1}.wh", f"layer{k + 1}.b"]
        return out + ["head.w", "head.b"]

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in serialization order."""
        out = []
        for lp in self.layers:
            out += [lp.wx, lp.wh, lp.b]
        return out + [self.head_w, self.head_b]

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        return zip(self.names(), self.arrays())

    def with_arrays(self, arrays) -> "LstmParams":
        """Same structure, new arrays (given in :meth:`arrays` order)."""
        arrays = list(arrays)
        layers = [LayerParams(*arrays[3 * k:3 * k + 3]) for k in range(len(self.layers))]
        return LstmParams(layers, arrays[-2], arrays[-1])

    def copy(self) -> "LstmParams":
        return self.with_arrays(a.copy() for a in self.arrays())

    def zeros_like(self) -> "LstmParams":
        return self.with_arrays(np.zeros_like(a) for a in self.arrays())

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def __eq__(self, other) -> bool:
        if not isinstance(other, LstmParams):
            return NotImplemented
        a, b = self.arrays(), other.arrays()
        return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def init_params(n_inputs: int, hidden: int, layers: int = 2, seed=0) -> LstmParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, forget-gate bias 1."""
    if n_inputs < 1 or hidden < 1 or layers < 1:
        raise ValidationError("n_inputs, hidden and layers must be positive")
    rng = np.random.default_rng(seed)

    def uni(shape):
        bound = 1.0 / np.sqrt(shape[-1])
        return rng.uniform(-bound, bound, size=shape)

    out = []
    d = n_inputs
    for _ in range(layers):
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        out.append(LayerParams(uni((4 * hidden, d)), uni((4 * hidden, hidden)), b))
        d = hidden
    return LstmParams(out, uni((N_OUTPUTS, hidden)), np.zeros(N_OUTPUTS))


@dataclass
class LayerCache:
    inputs: np.ndarray   # (B, N, D)
    act: np.ndarray      # (B, N, 4H) activated gates
    c: np.ndarray        # (B, N + 1, H), c[:, 0] = 0
    tanh_c: np.ndarray   # (B, N, H)
    h: np.ndarray        # (B, N + 1, H), h[:, 0] = 0
    mask: np.ndarray | None  # (B, N, H) scaled keep-mask, None without dropout


@dataclass
class ForwardCache:
    layers: list[LayerCache]
    top: np.ndarray       # (B, H) dropped top-layer output at the last step
    outputs: np.ndarray   # (B, 2)
    squeeze: bool = False


def _as_batch(params: LstmParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    x = x.astype(np.result_type(x.dtype, np.float64), copy=False)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != params.n_inputs or x.shape[1] < 1:
        raise ValidationError(
            f"expected windows of shape (B, N, {params.n_inputs}), got {np.shape(x)}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("window contains non-finite values")
    return x, squeeze


def _layer_forward(lp: LayerParams, x: np.ndarray, keep: np.ndarray | None) -> LayerCache:
    B, N, _ = x.shape
    H = lp.wh.shape[1]
    zx = x @ lp.wx.T + lp.b
    dt = zx.dtype
    act = np.empty((B, N, 4 * H), dtype=dt)
    c = np.zeros((B, N + 1, H), dtype=dt)
    h = np.zeros((B, N + 1, H), dtype=dt)
    tanh_c = np.empty((B, N, H), dtype=dt)
    wh_t = lp.wh.T
    for t in range(N):
        z = zx[:, t] + h[:, t] @ wh_t
        a = act[:, t]
        a[:, :2 * H] = expit(z[:, :2 * H])
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        a[:, 3 * H:] = expit(z[:, 3 * H:])
        c[:, t + 1] = a[:, H:2 * H] * c[:, t] + a[:, :H] * a[:, 2 * H:3 * H]
        tanh_c[:, t] = np.tanh(c[:, t + 1])
        h[:, t + 1] = a[:, 3 * H:] * tanh_c[:, t]
    return LayerCache(x, act, c, tanh_c, h, keep)


def forward(params: LstmParams, x, train: bool = False, dropout_rate: float = 0.0,
            rng: np.random.Generator | None = None):
    """Run the network on one window ``(N, D)`` or a batch ``(B, N, D)``.

    Returns ``(prediction, cache)``; prediction is ``(2,)`` or ``(B, 2)``.
    Dropout is active only when ``train`` is true and ``dropout_rate > 0``,
    in which case ``rng`` supplies the masks.
    """
    x, squeeze = _as_batch(params, x)
    if not 0.0 <= dropout_rate < 1.0:
        raise ValidationError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")
    use_dropout = train and dropout_rate > 0.0
    if use_dropout and rng is None:
        raise ValidationError("train-mode dropout needs a random generator")
    caches = []
    inp = x
    for lp in params.layers:
        keep = None
        if use_dropout:
            H = lp.wh.shape[1]
            keep = (rng.random((x.shape[0], x.shape[1], H)) >= dropout_rate) / (1.0 - dropout_rate)
        cache = _layer_forward(lp, inp, keep)
        caches.append(cache)
        inp = cache.h[:, 1:] if keep is None else cache.h[:, 1:] * keep
    top = inp[:, -1]
    y = top @ params.head_w.T + params.head_b
    fc = ForwardCache(caches, top, y, squeeze)
    return (y[0] if squeeze else y), fc


def predict(params: LstmParams, x, batch_size: int = 1024) -> np.ndarray:
    """Eval-mode predictions for a large batch, computed in chunks."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return forward(params, x)[0]
    if len(x) == 0:
        return np.zeros((0, N_OUTPUTS))
    return np.vstack([forward(params, x[k:k + batch_size])[0] for k in range(0, len(x), batch_size)])


def mse_loss(predictions, labels) -> float:
    """Mean over every sample and both outputs of the squared error."""
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise ValidationError(f"prediction/label shape mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise ValidationError("mse_loss needs at least one sample")
    return float(np.mean((p - y) ** 2))


def _layer_backward(lp: LayerParams, cache: LayerCache, d_out: np.ndarray):
    """Backpropagate ``d_out`` (grad w.r.t. the dropped layer output, (B, N, H))."""
    B, N, _ = d_out.shape
    H = lp.wh.shape[1]
    dh_seq = d_out if cache.mask is None else d_out * cache.mask
    dz = np.empty((B, N, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    wh = lp.wh
    for t in range(N - 1, -1, -1):
        a = cache.act[:, t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        tc = cache.tanh_c[:, t]
        dh = dh_seq[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        d = dz[:, t]
        d[:, :H] = dc * g * i * (1.0 - i)
        d[:, H:2 * H] = dc * cache.c[:, t] * f * (1.0 - f)
        d[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        d[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = d @ wh
    flat = dz.reshape(-1, 4 * H)
    grads = LayerParams(
        flat.T @ cache.inputs.reshape(B * N, -1),
        flat.T @ cache.h[:, :-1].reshape(B * N, H),
        flat.sum(axis=0),
    )
    return grads, dz @ lp.wx


def backward(params: LstmParams, cache: ForwardCache, labels) -> LstmParams:
    """Exact gradient of the batch-mean MSE (see :func:`mse_loss`) w.r.t. all parameters."""
    y = cache.outputs
    labels = np.asarray(labels, dtype=float)
    if cache.squeeze and labels.ndim == 1:
        labels = labels[None]
    if labels.shape != y.shape:
        raise ValidationError(f"labels shape {labels.shape} does not match outputs {y.shape}")
    if len(cache.layers) != params.n_layers or cache.top.shape[1] != params.hidden:
        raise ValidationError("cache was produced by a different network shape")
    B = y.shape[0]
    dy = (y - labels) / B  # d/dy of mean over B samples and 2 outputs
    head_w = dy.T @ cache.top
    head_b = dy.sum(axis=0)
    d_top = dy @ params.head_w
    last = cache.layers[-1]
    d_out = np.zeros((B, last.act.shape[1], params.hidden))
    d_out[:, -1] = d_top
    layer_grads = []
    for lp, lc in zip(reversed(params.layers), reversed(cache.layers)):
        g, d_in = _layer_backward(lp, lc, d_out)
        layer_grads.append(g)
        d_out = d_in
    return LstmParams(layer_grads[::-1], head_w, head_b)


def loss_and_grad(params: LstmParams, x, labels, train: bool = False, dropout_rate: float = 0.0,
                  rng: np.random.Generator | None = None) -> tuple[float, LstmParams]:
    y, cache = forward(params, x, train=train, dropout_rate=dropout_rate, rng=rng)
    labels = np.asarray(labels, dtype=float)
    return mse_loss(y, labels), backward(params, cache, labels)


def global_norm(grads: LstmParams) -> float:
    return float(np.sqrt(sum(np.sum(a * a) for a in grads.arrays())))


def clip_by_global_norm(grads: LstmParams, max_norm: float) -> LstmParams:
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm:
        return grads
    scale = max_norm / norm
    return grads.with_arrays(a * scale for a in grads.arrays())


@dataclass(frozen=True)
class TrainHyper:
    """Optimizer and training-loop settings; defaults are the full-scale values."""

    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 1000
    dropout_rate: float = 0.266
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clip_norm: float | None = 5.0
    patience: int = 50
    min_delta: float = -1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValidationError("batch_size, max_epochs and patience must be positive")

    def replace(self, **kw) -> "TrainHyper":
        return replace(self, **kw)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: LstmParams) -> "AdamState":
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()], 0)


def adam_step(params: LstmParams, grads: LstmParams, state: AdamState,
              hyper: TrainHyper = TrainHyper()) -> tuple[LstmParams, AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    g_arrays = grads.arrays()
    p_arrays = params.arrays()
    if len(g_arrays) != len(p_arrays) or any(g.shape != p.shape for g, p in zip(g_arrays, p_arrays)):
        raise ValidationError("gradient shapes do not match parameters")
    if not all(np.all(np.isfinite(g)) for g in g_arrays):
        raise TrainingError("non-finite gradient")
    t = state.t + 1
    b1, b2 = hyper.beta1, hyper.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        step = hyper.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + hyper.epsilon)
        new_p.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_p), AdamState(new_m, new_v, t)


def gradient_check(params: LstmParams, x, label, epsilon: float = 1e-5,
                   only: set[str] | None = None, extended: bool = True) -> float:
    """Max relative error between :func:`backward` and central differences.

    Relative error per parameter is ``|a - b| / max(|a|, |b|, 1e-8)``.
    ``only`` restricts the check to the named arrays (see
    :meth:`LstmParams.names`), e.g. ``{"head.w", "head.b"}``.

    With ``extended`` (default) the finite-difference losses are evaluated
    in ``np.longdouble``. In float64 the difference quotient carries about
    ``1e-16 / epsilon`` absolute noise, which swamps deep-layer gradients of
    order 1e-7 under the relative metric above.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    label = np.asarray(label, dtype=float)
    _, grads = loss_and_grad(params, x, label)

    dt = np.longdouble if extended else np.float64
    x_fd = np.asarray(x, dtype=dt)
    label_fd = label.astype(dt)

    def loss(p):
        y = forward(p, x_fd)[0]
        return np.mean((y - label_fd) ** 2)

    worst = 0.0
    arrays = [a.astype(dt) for a in params.arrays()]
    for k, (name, g) in enumerate(zip(params.names(), grads.arrays())):
        if only is not None and name not in only:
            continue
        for idx in np.ndindex(arrays[k].shape):
            pert = [a.copy() if j == k else a for j, a in enumerate(arrays)]
            pert[k][idx] = arrays[k][idx] + epsilon
            up = loss(params.with_arrays(pert))
            pert[k][idx] = arrays[k][idx] - epsilon
            down = loss(params.with_arrays(pert))
            num = float((up - down) / (2 * dt(epsilon)))
            ana = g[idx]
            rel = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
            worst = max(worst, rel)
    return worst
