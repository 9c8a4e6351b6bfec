"""Quantum autoencoder with trash-qubit fidelity and inverse-encoder decoding.

The encoder is a strongly-entangling-layer circuit ``U``. The trash subsystem
is the ``n_trash`` highest-index qubits (the least significant index bits);
the reference state is ``|0...0>``. Decoding traces out the trash, swaps in
the reference and applies ``U^dagger``; reconstructed pixels are the square
roots of the resulting density-matrix diagonal.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import train as _train
from ._batching import concat, map_chunks
from .ansatz import build_sel_circuit, check_angles, init_angles, inverse_circuit
from .sim import (
    MAX_QUBITS,
    CapacityExceeded,
    Circuit,
    CSwap,
    Hadamard,
    StateVector,
    adjoint_gradients,
    expval_z_batch,
    run_batch,
)
from .vqc import embed_pixels

BRANCH_CUTOFF = 1e-14


def _trash_view(states: np.ndarray, n_trash: int) -> np.ndarray:
    # (batch, latent index, trash index)
    return states.reshape(states.shape[0], -1, 2**n_trash)


def trash_zero_diag(n_qubits: int, n_trash: int) -> np.ndarray:
    """Diagonal projector onto ``|0...0>`` of the trash qubits."""
    if not 1 <= n_trash < n_qubits:
        raise ValueError(f"need 1 <= n_trash < n_qubits, got n_trash={n_trash}, n_qubits={n_qubits}")
    return (np.arange(2**n_qubits) % 2**n_trash == 0).astype(float)


def trash_fidelity_states(states: np.ndarray, n_trash: int) -> np.ndarray:
    """Probability that every trash qubit reads 0, per state."""
    if not 1 <= n_trash < int(np.log2(states.shape[1])):
        raise ValueError(f"n_trash={n_trash} out of range for {states.shape[1]} amplitudes")
    return np.sum(np.abs(_trash_view(states, n_trash)[:, :, 0]) ** 2, axis=1)


def trash_fidelity(encoded: StateVector, n_trash: int) -> float:
    return float(trash_fidelity_states(encoded.amplitudes[None, :], n_trash)[0])


def swap_test_circuit(n_qubits: int, n_trash: int) -> Circuit:
    """SWAP test between the trash qubits and a fresh reference register.

    Wires ``0..n-1`` hold the encoded state, ``n..n+n_trash-1`` the reference
    and the last wire the ancilla.
    """
    total = n_qubits + n_trash + 1
    if total > MAX_QUBITS:
        raise CapacityExceeded(f"SWAP test needs {total} qubits, limit is {MAX_QUBITS}")
    ancilla = total - 1
    gates = [Hadamard(ancilla)]
    for j in range(n_trash):
        gates.append(CSwap(ancilla, n_qubits - n_trash + j, n_qubits + j))
    gates.append(Hadamard(ancilla))
    return Circuit(total, gates)


def swap_test_fidelity_states(states: np.ndarray, n_trash: int) -> np.ndarray:
    n = int(np.log2(states.shape[1]))
    circuit = swap_test_circuit(n, n_trash)
    # append reference |0..0> and ancilla |0>: the original amplitudes land on
    # indices that are multiples of 2**(n_trash + 1)
    composite = np.zeros((states.shape[0], 2**circuit.n_qubits), dtype=complex)
    composite[:, :: 2 ** (n_trash + 1)] = states
    out = run_batch(circuit, composite)
    return expval_z_batch(out, [circuit.n_qubits - 1])[:, 0]


def swap_test_fidelity(encoded: StateVector, n_trash: int) -> float:
    return float(swap_test_fidelity_states(encoded.amplitudes[None, :], n_trash)[0])


def qae_loss(encoding_fidelity):
    return 1.0 - encoding_fidelity


def encode_batch(angles: np.ndarray, X: np.ndarray) -> np.ndarray:
    return run_batch(build_sel_circuit(angles), embed_pixels(X))


def trash_fidelity_batch(angles: np.ndarray, X: np.ndarray, n_trash: int) -> np.ndarray:
    return trash_fidelity_states(encode_batch(angles, X), n_trash)


def branch_decomposition(encoded: np.ndarray, n_trash: int):
    """Split encoded states over trash basis states.

    Returns ``(weights, latents)``: ``weights[b, t]`` is the probability of
    trash outcome ``t`` and ``latents[b, :, t]`` the normalised latent state
    of that branch (zero where the weight vanishes).
    """
    view = _trash_view(encoded, n_trash)
    weights = np.sum(np.abs(view) ** 2, axis=1)
    norms = np.sqrt(weights)
    safe = np.where(norms > 0, norms, 1.0)
    return weights, np.where(norms[:, None, :] > 0, view / safe[:, None, :], 0)


def decode_branches(angles: np.ndarray, encoded: np.ndarray, n_trash: int) -> np.ndarray:
    """Diagonal of ``U^dag (Tr_B[|psi><psi|] (x) |0><0|) U`` for each encoded state."""
    b, dim = encoded.shape
    weights, latents = branch_decomposition(encoded, n_trash)
    keep = weights > BRANCH_CUTOFF
    bi, ti = np.nonzero(keep)
    inputs = np.zeros((bi.size, dim), dtype=complex)
    # latent (x) |0>_trash puts the latent amplitudes on trash index 0
    _trash_view(inputs, n_trash)[:, :, 0] = latents[bi, :, ti]
    decoded = run_batch(inverse_circuit(build_sel_circuit(angles)), inputs)
    diag = np.zeros((b, dim))
    np.add.at(diag, bi, weights[bi, ti][:, None] * np.abs(decoded) ** 2)
    return diag


def reconstruct_batch(angles: np.ndarray, X: np.ndarray, n_trash: int):
    """Reconstructed pixel amplitudes and encoding fidelities for a batch."""
    encoded = encode_batch(angles, X)
    diag = decode_branches(angles, encoded, n_trash)
    return np.sqrt(np.clip(diag, 0.0, None)), trash_fidelity_states(encoded, n_trash)


def qae_train_grads(angles: np.ndarray, X: np.ndarray, n_trash: int, n_jobs=1):
    """Mean loss ``1 - fidelity`` over the batch and its mean parameter gradient."""
    angles = check_angles(angles)
    circuit = build_sel_circuit(angles)
    # minimizing 1 - <P_0> is maximizing the trash-zero projector expectation
    obs = -trash_zero_diag(angles.shape[1], n_trash)

    def chunk(sl):
        vals, pg, _ = adjoint_gradients(circuit, embed_pixels(X[sl]), obs)
        return 1.0 + vals, pg

    parts = map_chunks(chunk, X.shape[0], n_jobs)
    loss = concat([p[0] for p in parts])
    grads = concat([p[1] for p in parts])
    return float(loss.mean()), grads.mean(axis=0)


class QuantumAutoencoder(TransformerMixin, BaseEstimator):
    """Trash-fidelity-trained quantum autoencoder.

    ``transform`` returns reconstructions; ``score_samples`` returns the
    per-sample encoding fidelity. With the defaults (10 qubits, 4 layers) the
    encoder has 120 parameters.
    """

    def __init__(self, n_qubits=10, n_layers=4, n_trash=2, batch_size=64, learning_rate=0.1, epochs=10, seed=0,
                 n_jobs=1):
        self.n_qubits = n_qubits
        self.n_layers = n_layers
        self.n_trash = n_trash
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed
        self.n_jobs = n_jobs

    @property
    def n_latent(self) -> int:
        return self.n_qubits - self.n_trash

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits * 3

    def _check_X(self, X):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2**self.n_qubits:
            raise ValueError(f"expected {2**self.n_qubits} features, got {X.shape[1]}")
        return X

    def init_params(self) -> "QuantumAutoencoder":
        trash_zero_diag(self.n_qubits, self.n_trash)
        self.angles_ = init_angles(self.n_layers, self.n_qubits, self.seed)
        return self

    def fit(self, X, y=None):
        X = self._check_X(X)
        self.init_params()
        config = _train.TrainConfig(self.batch_size, self.learning_rate, self.epochs, self.seed)
        result = _train.train_qae(self, X, config)
        self.angles_ = result.params
        self.trace_ = result.trace
        return self

    def encode(self, X) -> np.ndarray:
        check_is_fitted(self, "angles_")
        return encode_batch(self.angles_, self._check_X(X))

    def reconstruct(self, X):
        """``(reconstructions, encoding_fidelities)`` for a batch of pixel vectors."""
        check_is_fitted(self, "angles_")
        X = self._check_X(X)
        parts = map_chunks(lambda sl: reconstruct_batch(self.angles_, X[sl], self.n_trash), X.shape[0], self.n_jobs)
        return concat([p[0] for p in parts]), concat([p[1] for p in parts])

    def transform(self, X):
        return self.reconstruct(X)[0]

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "angles_")
        X = self._check_X(X)
        parts = map_chunks(lambda sl: trash_fidelity_batch(self.angles_, X[sl], self.n_trash), X.shape[0], self.n_jobs)
        return concat(parts)


def encode(model: QuantumAutoencoder, x) -> StateVector:
    return StateVector(model.encode(np.asarray(x, dtype=float)[None, :])[0])


def reconstruct(model: QuantumAutoencoder, x):
    rec, fid = model.reconstruct(np.asarray(x, dtype=float)[None, :])
    return rec[0], float(fid[0])
