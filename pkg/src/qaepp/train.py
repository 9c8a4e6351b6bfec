"""Adam and the seeded mini-batch loop shared by the classifier and the autoencoder."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 0.005
    epochs: int = 20
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise LengthMismatch(f"params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.step + 1
    m = b1 * state.m + (1 - b1) * grads
    v = b2 * state.v + (1 - b2) * grads**2
    m_hat = m / (1 - b1**t)
    v_hat = v / (1 - b2**t)
    new = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new, AdamState(m, v, t)


def epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


@dataclass
class TraceRow:
    epoch: int
    mean_loss: float
    mean_fidelity: Optional[float] = None


@dataclass
class TrainResult:
    params: np.ndarray
    trace: list[TraceRow] = field(default_factory=list)


# (params, X_batch, y_batch) -> (mean loss, mean gradient)
LossGrad = Callable[[np.ndarray, np.ndarray, Optional[np.ndarray]], tuple[float, np.ndarray]]


def minimize(
    loss_grad: LossGrad,
    params: np.ndarray,
    X: np.ndarray,
    y: Optional[np.ndarray],
    config: TrainConfig,
    *,
    initial_loss: Optional[Callable[[np.ndarray], float]] = None,
    fidelity_trace: bool = False,
) -> TrainResult:
    """Mini-batch Adam over freshly permuted batches each epoch.

    The trace holds one row per epoch with the sample-weighted mean batch loss
    seen while training; row 0 is ``initial_loss(params)`` when given.
    """
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    shape = np.shape(params)
    flat = np.asarray(params, dtype=float).ravel().copy()
    state = AdamState.zeros(flat.size)
    trace: list[TraceRow] = []

    def row(epoch, loss):
        return TraceRow(epoch, loss, 1.0 - loss if fidelity_trace else None)

    if initial_loss is not None:
        trace.append(row(0, float(initial_loss(flat.reshape(shape)))))
    for epoch in range(1, config.epochs + 1):
        order = epoch_permutation(n, config.seed, epoch)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grad = loss_grad(flat.reshape(shape), X[idx], None if y is None else y[idx])
            flat, state = adam_step(flat, np.ravel(grad), state, config)
            total += loss * len(idx)
        trace.append(row(epoch, total / n))
        logger.info("epoch %d/%d mean loss %.6f", epoch, config.epochs, total / n)
    return TrainResult(flat.reshape(shape), trace)


def write_trace_csv(path, trace: list[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss", "mean_fidelity"])
        for r in trace:
            w.writerow([r.epoch, repr(r.mean_loss), "" if r.mean_fidelity is None else repr(r.mean_fidelity)])


def read_trace_csv(path) -> list[TraceRow]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        TraceRow(int(r["epoch"]), float(r["mean_loss"]), float(r["mean_fidelity"]) if r["mean_fidelity"] else None)
        for r in rows
    ]


def train_vqc(model, X: np.ndarray, y: np.ndarray, config: TrainConfig) -> TrainResult:
    """Fit the angles of an initialised :class:`~qaepp.vqc.VQCClassifier`."""
    from .vqc import cross_entropy, logits_batch, loss_and_grads

    def loss_grad(angles, xb, yb):
        loss, pg, _ = loss_and_grads(angles, xb, yb, model.n_classes, n_jobs=model.n_jobs)
        return float(loss.mean()), pg.mean(axis=0)

    def initial(angles):
        return float(cross_entropy(logits_batch(angles, X, model.n_classes), y)[0].mean())

    return minimize(loss_grad, model.angles_, X, y, config, initial_loss=initial)


def train_qae(model, X: np.ndarray, config: TrainConfig) -> TrainResult:
    """Fit the encoder of an initialised :class:`~qaepp.qae.QuantumAutoencoder`."""
    from .qae import qae_train_grads, trash_fidelity_batch

    def loss_grad(angles, xb, _):
        return qae_train_grads(angles, xb, model.n_trash, n_jobs=model.n_jobs)

    def initial(angles):
        return 1.0 - float(trash_fidelity_batch(angles, X, model.n_trash).mean())

    return minimize(loss_grad, model.angles_, X, None, config, initial_loss=initial, fidelity_trace=True)
