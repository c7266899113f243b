"""Mini-batch training with validation-based early stopping.

An epoch counts as an improvement when ``best - val_loss > min_delta``.
With the default ``min_delta = -1e-4`` a validation loss that is worse than
the best so far by less than ``1e-4`` still resets the patience counter.
``best`` always tracks the minimum validation loss seen, and the returned
parameters are the snapshot taken at that minimum.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import TrainingError, ValidationError
from .lstm import (AdamState, LstmParams, TrainHyper, adam_step, backward,
                   clip_by_global_norm, forward, init_params, mse_loss, predict)
from .preprocess import DatasetSplit, WindowSet

log = logging.getLogger(__name__)


class Decision(str, enum.Enum):
    CONTINUE = "continue"
    STOP = "stop"


@dataclass
class EarlyStopState:
    patience: int = 50
    min_delta: float = -1e-4
    best: float = math.inf
    best_epoch: int = 0
    counter: int = 0
    epoch: int = 0


def early_stop_update(state: EarlyStopState, val_loss: float) -> tuple[EarlyStopState, Decision]:
    """Fold one epoch's validation loss into ``state``."""
    epoch = state.epoch + 1
    best, best_epoch, counter = state.best, state.best_epoch, state.counter
    if best - val_loss > state.min_delta:
        counter = 0
    else:
        counter += 1
    if val_loss < best:
        best, best_epoch = val_loss, epoch
    new = EarlyStopState(state.patience, state.min_delta, best, best_epoch, counter, epoch)
    return new, (Decision.STOP if counter >= state.patience else Decision.CONTINUE)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    early_stopped: bool = False

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1]


def run_epochs(step: Callable[[int], tuple[float, float]], max_epochs: int,
               patience: int = 50, min_delta: float = -1e-4,
               snapshot: Callable[[], object] | None = None):
    """Drive ``step(epoch) -> (train_loss, val_loss)`` until early stopping.

    Epochs are numbered from 1. ``snapshot`` is called right after every
    epoch that sets a new minimum validation loss; the last value it
    returned is handed back together with the history.
    """
    state = EarlyStopState(patience=patience, min_delta=min_delta)
    history = TrainHistory()
    best = None
    for epoch in range(1, max_epochs + 1):
        train_loss, val_loss = step(epoch)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingError(f"non-finite loss (train={train_loss}, validation={val_loss})", epoch)
        history.train_loss.append(float(train_loss))
        history.val_loss.append(float(val_loss))
        improved_min = val_loss < state.best
        state, decision = early_stop_update(state, val_loss)
        if improved_min and snapshot is not None:
            best = snapshot()
        history.stopped_epoch = epoch
        if decision is Decision.STOP:
            history.early_stopped = True
            break
    history.best_epoch = state.best_epoch
    return best, history


def evaluate_loss(params: LstmParams, windows: WindowSet, batch_size: int = 1024) -> float:
    """Eval-mode MSE over standardized ``windows``."""
    return mse_loss(predict(params, windows.inputs(), batch_size=batch_size), windows.labels())


def train_epoch(params: LstmParams, adam: AdamState, train: WindowSet, hyper: TrainHyper,
                epoch: int) -> tuple[LstmParams, AdamState, float]:
    """One pass over shuffled mini-batches; shuffle and dropout are seeded by (seed, epoch)."""
    rng = np.random.default_rng([hyper.seed, epoch])
    order = rng.permutation(len(train))
    total = 0.0
    for k in range(0, len(order), hyper.batch_size):
        idx = order[k:k + hyper.batch_size]
        x, y = train.inputs(idx), train.labels(idx)
        out, cache = forward(params, x, train=True, dropout_rate=hyper.dropout_rate, rng=rng)
        loss = mse_loss(out, y)
        if not math.isfinite(loss):
            raise TrainingError("non-finite training loss", epoch)
        grads = backward(params, cache, y)
        if hyper.clip_norm is not None:
            grads = clip_by_global_norm(grads, hyper.clip_norm)
        try:
            params, adam = adam_step(params, grads, adam, hyper)
        except TrainingError as exc:
            raise TrainingError(str(exc), epoch) from None
        total += loss * len(idx)
    return params, adam, total / len(order)


def train(split: DatasetSplit, hyper: TrainHyper = TrainHyper(), hidden: int = 128,
          layers: int = 2, params: LstmParams | None = None,
          on_epoch: Callable[[int, float, float], None] | None = None):
    """Fit a fresh (or given) network on standardized, oversampled training windows.

    Returns ``(best_params, history)`` where ``best_params`` has the minimum
    validation loss over all epochs run.
    """
    if len(split.train) == 0 or len(split.validation) == 0:
        raise ValidationError("training and validation sets must be non-empty")
    if params is None:
        params = init_params(split.train.n_channels, hidden, layers, seed=hyper.seed)
    current = {"params": params, "adam": AdamState.zeros(params)}

    def step(epoch):
        p, a, tl = train_epoch(current["params"], current["adam"], split.train, hyper, epoch)
        current["params"], current["adam"] = p, a
        if not p.all_finite():
            raise TrainingError("parameters became non-finite", epoch)
        vl = evaluate_loss(p, split.validation)
        log.info("epoch %d train_loss=%.6g val_loss=%.6g", epoch, tl, vl)
        if on_epoch is not None:
            on_epoch(epoch, tl, vl)
        return tl, vl

    best, history = run_epochs(step, hyper.max_epochs, hyper.patience, hyper.min_delta,
                               snapshot=lambda: current["params"].copy())
    return best, history
