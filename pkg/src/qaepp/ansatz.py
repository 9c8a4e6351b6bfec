"""Strongly entangling layers and circuit inversion."""

from __future__ import annotations

import numpy as np

from .sim import CNOT, Circuit, Gate, Rot


class TooFewQubits(ValueError):
    pass


def entangling_range(layer: int, n_qubits: int) -> int:
    """CNOT range of ``layer`` (0-based): 1, 2, ..., n-1, 1, 2, ..."""
    return layer % (n_qubits - 1) + 1


def init_angles(n_layers: int, n_qubits: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 2 * np.pi, size=(n_layers, n_qubits, 3))


def check_angles(angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 3 or angles.shape[2] != 3:
        raise ValueError(f"angles must have shape (n_layers, n_qubits, 3), got {angles.shape}")
    if angles.shape[1] < 2:
        raise TooFewQubits(f"strongly entangling layers need >= 2 qubits, got {angles.shape[1]}")
    return angles


def build_sel_circuit(angles) -> Circuit:
    """Strongly entangling layers for an ``(n_layers, n_qubits, 3)`` angle block.

    Each layer applies ``Rot`` to every qubit and then the ring
    ``CNOT(q, (q + r) % n)`` with the layer's range ``r``. Parameters appear in
    the circuit in layer-major, qubit-minor, angle-last order.
    """
    angles = check_angles(angles)
    n_layers, n_qubits, _ = angles.shape
    gates: list[Gate] = []
    for layer in range(n_layers):
        for q in range(n_qubits):
            gates.append(Rot(*angles[layer, q], wire=q))
        r = entangling_range(layer, n_qubits)
        for q in range(n_qubits):
            gates.append(CNOT(q, (q + r) % n_qubits))
    return Circuit(n_qubits, gates)


def inverse_gate(gate: Gate) -> Gate:
    if gate.kind == "rot":
        phi, theta, omega = gate.params
        return Gate("rot", gate.wires, (-omega, -theta, -phi))
    return gate


def inverse_circuit(circuit: Circuit) -> Circuit:
    return Circuit(circuit.n_qubits, [inverse_gate(g) for g in reversed(circuit.gates)])
