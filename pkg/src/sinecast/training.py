"""Adam training with exponential learning-rate decay and best-epoch restore.

The training loss matches the evaluation metric (mean absolute error);
the MLP additionally carries an elastic-net penalty on its weight matrices.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, Tensor, backward
from .data import WindowDataset, batches
from .errors import ConfigError, NumericError
from .evaluation import evaluate
from .models import Forecaster

__all__ = [
    "LrSchedule",
    "AdamState",
    "TrainConfig",
    "TrainReport",
    "lr_at_epoch",
    "adam_step",
    "elastic_net_penalty",
    "train_model",
    "MLP_L1",
    "MLP_L2",
]

MLP_L1 = 1e-5
MLP_L2 = 1e-4


@dataclass(frozen=True)
class LrSchedule:
    lr_start: float = 1e-3
    lr_end: float = 1e-6
    n_epochs: int = 50

    def __post_init__(self):
        if not self.lr_start > self.lr_end > 0:
            raise ConfigError(f"need lr_start > lr_end > 0, got {self.lr_start}, {self.lr_end}")
        if self.n_epochs < 2:
            raise ConfigError(f"n_epochs must be >= 2, got {self.n_epochs}")


def lr_at_epoch(sched: LrSchedule, epoch: int) -> float:
    """Geometric interpolation from lr_start to lr_end, endpoints exact."""
    if not 0 <= epoch < sched.n_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {sched.n_epochs})")
    if epoch == 0:
        return sched.lr_start
    last = sched.n_epochs - 1
    if epoch == last:
        return sched.lr_end
    return sched.lr_start * (sched.lr_end / sched.lr_start) ** (epoch / last)


class AdamState:
    """First and second moment buffers for one parameter list."""

    def __init__(self, params: list[Parameter], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(state: AdamState, params: list[Parameter], grads=None, lr: float = 1e-3) -> None:
    """One Adam update in place; reads p.grad when grads is None."""
    if params is not state.params and list(params) != state.params:
        raise ConfigError("adam_step: parameter list does not match optimizer state")
    if grads is None:
        grads = [p.grad for p in params]
    if len(grads) != len(state.params):
        raise ConfigError(f"adam_step: {len(grads)} grads for {len(state.params)} params")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for i, p in enumerate(state.params):
        g = grads[i]
        if g is None:
            g = np.zeros_like(p.data)
        else:
            g = np.asarray(g, dtype=np.float64)
            if g.shape != p.data.shape:
                raise ConfigError(f"adam_step: grad shape {g.shape} vs param {p.data.shape}")
            if not np.isfinite(g).all():
                raise NumericError(f"adam_step: non-finite gradient for {getattr(p, 'name', i)}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)


def elastic_net_penalty(params: list[Parameter], l1: float, l2: float) -> Tensor:
    """l1*sum|w| + l2*sum(w^2) over weight matrices; biases and norm gains excluded."""
    if l1 < 0 or l2 < 0:
        raise ConfigError(f"penalty strengths must be non-negative, got l1={l1}, l2={l2}")
    total = None
    for p in params:
        if getattr(p, "is_bias", False) or p.ndim < 2:
            continue
        term = p.abs().sum() * l1 + (p * p).sum() * l2
        total = term if total is None else total + term
    return total if total is not None else Tensor(0.0)


@dataclass(frozen=True)
class TrainConfig:
    schedule: LrSchedule = field(default_factory=LrSchedule)
    batch_size: int = 32
    seed: int = 0
    loss: str = "mae"
    l1: float | None = None  # None: variant default (elastic net for MLP, none otherwise)
    l2: float | None = None
    eval_batch_size: int = 256

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.loss not in ("mae", "mse"):
            raise ConfigError(f"loss must be 'mae' or 'mse', got {self.loss!r}")


@dataclass
class TrainReport:
    train_losses: list[float]
    val_maes: list[float]
    lrs: list[float]
    best_epoch: int
    best_val_mae: float
    seconds: float


def _state_digest(state: AdamState) -> tuple:
    return (
        state.t,
        sum(float(m.sum()) for m in state.m),
        sum(float(v.sum()) for v in state.v),
    )


def train_model(
    model: Forecaster,
    train: WindowDataset,
    val: WindowDataset,
    cfg: TrainConfig,
    log_path=None,
) -> TrainReport:
    """Full training run: per-epoch LR decay, Adam, best-epoch restore.

    Deterministic given cfg.seed; validation never touches parameters or
    optimizer state.
    """
    if model.config.variant == "Persistence":
        raise ConfigError("non-trainable model: Persistence has no parameters")
    if len(train) == 0:
        raise ConfigError("train dataset is empty")
    if len(val) == 0:
        raise ConfigError("validation dataset is empty")

    l1 = cfg.l1 if cfg.l1 is not None else (MLP_L1 if model.config.variant == "MLP" else 0.0)
    l2 = cfg.l2 if cfg.l2 is not None else (MLP_L2 if model.config.variant == "MLP" else 0.0)

    params = model.parameters()
    state = AdamState(params)
    sched = cfg.schedule
    epoch_seeds = np.random.default_rng(cfg.seed).integers(0, 2**31 - 1, size=sched.n_epochs)

    train_losses: list[float] = []
    val_maes: list[float] = []
    lrs: list[float] = []
    best_epoch = -1
    best_val = float("inf")
    best_params: dict[str, np.ndarray] = {}
    started = time.perf_counter()

    log_rows = []
    for epoch in range(sched.n_epochs):
        lr = lr_at_epoch(sched, epoch)
        loss_sum = 0.0
        window_count = 0
        for batch_idx, (xb, yb) in enumerate(batches(train, cfg.batch_size, int(epoch_seeds[epoch]))):
            pred = model(Tensor(xb))
            err = pred - Tensor(yb)
            base = err.abs().mean() if cfg.loss == "mae" else (err * err).mean()
            loss = base + elastic_net_penalty(params, l1, l2) if (l1 > 0 or l2 > 0) else base
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise NumericError(
                    f"{model.config.variant}: non-finite loss at epoch {epoch}, batch {batch_idx}"
                )
            backward(loss)
            adam_step(state, params, None, lr)
            loss_sum += base.item() * len(xb)
            window_count += len(xb)

        train_loss = loss_sum / window_count
        digest_before = _state_digest(state)
        val_mae = evaluate(model, val, dataset_name="val", batch_size=cfg.eval_batch_size).mae
        assert _state_digest(state) == digest_before, "validation must not touch optimizer state"

        train_losses.append(train_loss)
        val_maes.append(val_mae)
        lrs.append(lr)
        log_rows.append((epoch, lr, train_loss, val_mae))
        if val_mae < best_val:
            best_val = val_mae
            best_epoch = epoch
            best_params = {name: p.data.copy() for name, p in model.params.items()}

    for name, data in best_params.items():
        model.params[name].data = data

    if log_path is not None:
        with open(log_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "lr", "train_loss", "val_mae"])
            writer.writerows(log_rows)

    return TrainReport(
        train_losses=train_losses,
        val_maes=val_maes,
        lrs=lrs,
        best_epoch=best_epoch,
        best_val_mae=best_val,
        seconds=time.perf_counter() - started,
    )
