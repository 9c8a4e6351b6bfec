"""Variational quantum classifier: amplitude embedding, strongly entangling
layers, and one Pauli-Z expectation per class as the logit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import train as _train
from ._batching import concat, map_chunks
from .ansatz import build_sel_circuit, check_angles, init_angles
from .sim import adjoint_gradients, embed_batch, expval_z_batch, run_batch, z_signs

# Added to every pixel before embedding so all-black images stay embeddable.
PIXEL_FLOOR = 1e-8


def embed_pixels(X: np.ndarray) -> np.ndarray:
    return embed_batch(np.asarray(X, dtype=float) + PIXEL_FLOOR)


def pixel_chain(X: np.ndarray, amp_grads: np.ndarray) -> np.ndarray:
    """Pull amplitude gradients back through ``a = (x + floor) / ||x + floor||``."""
    shifted = np.asarray(X, dtype=float) + PIXEL_FLOOR
    norms = np.linalg.norm(shifted, axis=1, keepdims=True)
    a = shifted / norms
    radial = np.sum(amp_grads * a, axis=1, keepdims=True)
    return (amp_grads - radial * a) / norms


def logits_batch(angles: np.ndarray, X: np.ndarray, n_classes: int) -> np.ndarray:
    psi = run_batch(build_sel_circuit(angles), embed_pixels(X))
    return expval_z_batch(psi, range(n_classes))


def predict_from_logits(logits: np.ndarray) -> np.ndarray:
    # np.argmax keeps the first maximum, so ties go to the lowest class index
    return np.argmax(np.atleast_2d(logits), axis=1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(logits)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample softmax cross-entropy and its gradient with respect to the logits."""
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    loss = log_norm - shifted[rows, labels]
    grad = softmax(z)
    grad[rows, labels] -= 1.0
    return loss, grad


def vqc_loss(logits, label) -> float:
    return float(cross_entropy(logits, [label])[0][0])


def _class_signs(n_qubits: int, n_classes: int) -> np.ndarray:
    return np.stack([z_signs(n_qubits, c) for c in range(n_classes)], axis=0)


def loss_and_grads(angles, X, y, n_classes, *, wrt_input=False, n_jobs=1):
    """Per-sample losses, parameter gradients and (optionally) pixel gradients.

    Returns ``(loss, param_grads, pixel_grads)`` with shapes ``(B,)``,
    ``(B, n_params)`` and ``(B, 2**n)`` (``pixel_grads`` is None unless
    ``wrt_input``).
    """
    angles = check_angles(angles)
    circuit = build_sel_circuit(angles)
    signs = _class_signs(angles.shape[1], n_classes)

    def chunk(sl):
        states = embed_pixels(X[sl])
        psi = run_batch(circuit, states)
        logits = expval_z_batch(psi, range(n_classes))
        loss, dlogits = cross_entropy(logits, y[sl])
        # d loss / d theta == d <sum_c w_c Z_c> / d theta with w = d loss / d logits
        _, pg, ig = adjoint_gradients(circuit, states, dlogits @ signs)
        return loss, pg, (pixel_chain(X[sl], ig) if wrt_input else None)

    parts = map_chunks(chunk, X.shape[0], n_jobs)
    loss = concat([p[0] for p in parts])
    pg = concat([p[1] for p in parts])
    ig = concat([p[2] for p in parts]) if wrt_input else None
    return loss, pg, ig


class VQCClassifier(ClassifierMixin, BaseEstimator):
    """Amplitude-embedded strongly-entangling-layer classifier.

    Logits are ``<Z_c>`` on qubits ``0 .. n_classes-1``; the prediction is
    their argmax. Trained with softmax cross-entropy and Adam.

    Parameters
    ----------
    n_qubits, n_layers, n_classes : int
        Circuit width, depth and number of read-out classes
        (``n_classes <= n_qubits``).
    batch_size, learning_rate, epochs, seed :
        Training loop settings; ``seed`` also drives parameter initialisation.
    n_jobs : int
        Worker threads for per-sample work. Results do not depend on it.
    """

    def __init__(
        self,
        n_qubits=10,
        n_layers=20,
        n_classes=10,
        batch_size=256,
        learning_rate=0.005,
        epochs=20,
        seed=0,
        n_jobs=1,
    ):
        self.n_qubits = n_qubits
        self.n_layers = n_layers
        self.n_classes = n_classes
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed
        self.n_jobs = n_jobs

    def _check_config(self):
        if self.n_classes > self.n_qubits:
            raise ValueError(f"n_classes={self.n_classes} exceeds n_qubits={self.n_qubits}")

    def _check_X(self, X):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2**self.n_qubits:
            raise ValueError(f"expected {2**self.n_qubits} features, got {X.shape[1]}")
        if np.any(X < 0):
            raise ValueError("pixel values must be non-negative")
        return X

    def init_params(self) -> "VQCClassifier":
        """Draw seeded initial angles without training."""
        self._check_config()
        self.angles_ = init_angles(self.n_layers, self.n_qubits, self.seed)
        self.classes_ = np.arange(self.n_classes)
        return self

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        X = self._check_X(X)
        self.init_params()
        config = _train.TrainConfig(self.batch_size, self.learning_rate, self.epochs, self.seed)
        result = _train.train_vqc(self, X, y.astype(int), config)
        self.angles_ = result.params
        self.trace_ = result.trace
        return self

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits * 3

    def decision_function(self, X) -> np.ndarray:
        """Per-class Z expectations, shape ``(n_samples, n_classes)``."""
        check_is_fitted(self, "angles_")
        X = self._check_X(X)
        parts = map_chunks(lambda sl: logits_batch(self.angles_, X[sl], self.n_classes), X.shape[0], self.n_jobs)
        return concat(parts)

    def predict(self, X) -> np.ndarray:
        return predict_from_logits(self.decision_function(X))

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def loss(self, X, y) -> np.ndarray:
        return cross_entropy(self.decision_function(X), y)[0]

    def input_gradient(self, X, y) -> np.ndarray:
        """Gradient of the per-sample loss with respect to the raw pixels."""
        check_is_fitted(self, "angles_")
        X = self._check_X(X)
        y = np.asarray(y, dtype=int)
        return loss_and_grads(self.angles_, X, y, self.n_classes, wrt_input=True, n_jobs=self.n_jobs)[2]


def vqc_forward(model: VQCClassifier, x) -> np.ndarray:
    """Logits for a single pixel vector."""
    return model.decision_function(np.asarray(x, dtype=float)[None, :])[0]
