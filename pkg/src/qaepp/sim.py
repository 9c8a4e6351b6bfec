"""Dense statevector simulation with exact reverse-pass gradients.

Conventions used throughout the package:

* qubit 0 is the most significant bit of a basis-state index, so the
  amplitude of ``|q0 q1 ... q_{n-1}>`` lives at ``int("q0q1...", 2)``;
* ``Rot(phi, theta, omega) = RZ(omega) @ RY(theta) @ RZ(phi)``.

Most functions come in two flavours: a single-state one operating on
:class:`StateVector` and a batched one operating on a complex array of shape
``(batch, 2**n)``. The batched kernels do the real work.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 16
NORM_ATOL = 1e-10
UNITARY_ATOL = 1e-12


class SimulationError(ValueError):
    """Base class for simulator errors."""


class ZeroVector(SimulationError):
    pass


class BadLength(SimulationError):
    pass


class IndexOutOfRange(SimulationError):
    pass


class NonUnitaryGate(SimulationError):
    pass


class CapacityExceeded(SimulationError):
    pass


# ---------------------------------------------------------------------------
# gates


_I2 = np.eye(2, dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]])
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def rz(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]])


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rot_matrix(phi: float, theta: float, omega: float) -> np.ndarray:
    """General single-qubit rotation in ZYZ form."""
    return rz(omega) @ ry(theta) @ rz(phi)


@dataclass(frozen=True)
class Gate:
    """One gate of a circuit.

    ``kind`` is one of ``"rot"``, ``"cnot"``, ``"h"`` or ``"cswap"``. ``wires``
    lists the addressed qubits (control first for controlled gates) and
    ``params`` holds the three rotation angles of a ``"rot"`` gate.
    """

    kind: str
    wires: tuple[int, ...]
    params: tuple[float, ...] = ()

    _ARITY = {"rot": 1, "h": 1, "cnot": 2, "cswap": 3}

    def __post_init__(self):
        if self.kind not in self._ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.wires) != self._ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {self._ARITY[self.kind]} wires, got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"repeated wire in {self.kind}{self.wires}")
        if any(w < 0 for w in self.wires):
            raise IndexOutOfRange(f"negative wire in {self.wires}")
        if (self.kind == "rot") != (len(self.params) == 3):
            raise ValueError("rot takes exactly 3 angles, other gates none")

    @property
    def n_params(self) -> int:
        return len(self.params)

    def matrix(self) -> np.ndarray:
        """Unitary on the gate's own wires (first wire most significant)."""
        if self.kind == "rot":
            return rot_matrix(*self.params)
        if self.kind == "h":
            return HADAMARD.copy()
        if self.kind == "cnot":
            return _perm_matrix(2, _cnot_perm(2, 0, 1))
        return _perm_matrix(3, _cswap_perm(3, 0, 1, 2))


def Rot(phi: float, theta: float, omega: float, wire: int) -> Gate:
    return Gate("rot", (wire,), (float(phi), float(theta), float(omega)))


def CNOT(control: int, target: int) -> Gate:
    return Gate("cnot", (control, target))


def Hadamard(wire: int) -> Gate:
    return Gate("h", (wire,))


def CSwap(control: int, a: int, b: int) -> Gate:
    return Gate("cswap", (control, a, b))


def check_unitary(matrix: np.ndarray, atol: float = UNITARY_ATOL) -> None:
    err = np.max(np.abs(matrix @ matrix.conj().T - np.eye(matrix.shape[0])))
    if err >= atol:
        raise NonUnitaryGate(f"gate deviates from unitarity by {err:.3e}")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityExceeded(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        for g in self.gates:
            if max(g.wires) >= self.n_qubits:
                raise IndexOutOfRange(f"{g.kind}{g.wires} on a {self.n_qubits}-qubit circuit")

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def n_params(self) -> int:
        return sum(g.n_params for g in self.gates)

    def parameters(self) -> np.ndarray:
        """Flat parameter vector in gate order (angles last)."""
        return np.array([p for g in self.gates for p in g.params], dtype=float)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        _n_qubits_for(amps.shape[-1])
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for(self.amplitudes.shape[0])

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _n_qubits_for(length: int) -> int:
    n = int(length).bit_length() - 1
    if length < 2 or 2**n != length:
        raise BadLength(f"length {length} is not a power of two >= 2")
    if n > MAX_QUBITS:
        raise CapacityExceeded(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")
    return n


def amplitude_embed(x: Sequence[float]) -> StateVector:
    """Normalize a real vector of length ``2**n`` into an n-qubit state."""
    return StateVector(embed_batch(np.asarray(x, dtype=float)[None, :])[0])


def embed_batch(X: np.ndarray) -> np.ndarray:
    """Row-wise amplitude embedding of a ``(batch, 2**n)`` real array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise BadLength(f"expected a 2-D batch, got shape {X.shape}")
    _n_qubits_for(X.shape[1])
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ZeroVector(f"{int(np.sum(norms == 0))} input vector(s) have zero norm")
    return (X / norms[:, None]).astype(complex)


# ---------------------------------------------------------------------------
# batched kernels


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    perm = np.where(idx & cbit, idx ^ tbit, idx)
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=None)
def _cswap_perm(n: int, control: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(2**n)
    cbit = 1 << (n - 1 - control)
    abit = 1 << (n - 1 - a)
    bbit = 1 << (n - 1 - b)
    differ = ((idx & abit) > 0) != ((idx & bbit) > 0)
    perm = np.where((idx & cbit > 0) & differ, idx ^ abit ^ bbit, idx)
    perm.setflags(write=False)
    return perm


def _perm_matrix(n: int, perm: np.ndarray) -> np.ndarray:
    m = np.zeros((2**n, 2**n), dtype=complex)
    # new[i] = old[perm[i]]
    m[np.arange(2**n), perm] = 1.0
    return m


def apply_1q_batch(states: np.ndarray, mat: np.ndarray, qubit: int) -> np.ndarray:
    b, dim = states.shape
    n = _n_qubits_for(dim)
    stride = 2 ** (n - qubit - 1)
    if stride >= 16:
        return np.matmul(mat, states.reshape(-1, 2, stride)).reshape(b, dim)
    # short strides: fold the gate into a block-diagonal matrix so BLAS sees wide rows
    width = min(dim, 32)
    block = np.kron(np.eye(width // (2 * stride)), np.kron(mat, np.eye(stride)))
    return (states.reshape(-1, width) @ block.T).reshape(b, dim)


def _gate_perm(gate: Gate, n: int) -> np.ndarray:
    if gate.kind == "cnot":
        return _cnot_perm(n, *gate.wires)
    return _cswap_perm(n, *gate.wires)


def apply_gate_batch(states: np.ndarray, gate: Gate, *, adjoint: bool = False) -> np.ndarray:
    n = _n_qubits_for(states.shape[1])
    if max(gate.wires) >= n:
        raise IndexOutOfRange(f"{gate.kind}{gate.wires} on a {n}-qubit state")
    if gate.kind in ("cnot", "cswap"):
        # both permutations are involutions
        return states[:, _gate_perm(gate, n)]
    mat = gate.matrix()
    if adjoint:
        mat = mat.conj().T
    return apply_1q_batch(states, mat, gate.wires[0])


def run_batch(circuit: Circuit, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=complex)
    if states.shape[1] != 2**circuit.n_qubits:
        raise BadLength(f"state length {states.shape[1]} does not match {circuit.n_qubits} qubits")
    for g in circuit.gates:
        states = apply_gate_batch(states, g)
    return states


def z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    """Diagonal of Pauli-Z acting on ``qubit``: +1 where the bit is 0."""
    idx = np.arange(2**n_qubits)
    return 1.0 - 2.0 * ((idx >> (n_qubits - 1 - qubit)) & 1)


def expval_z_batch(states: np.ndarray, qubits: Iterable[int]) -> np.ndarray:
    """``<Z_q>`` for each state and each requested qubit, shape ``(batch, len(qubits))``."""
    probs = np.abs(states) ** 2
    n = _n_qubits_for(states.shape[1])
    qubits = list(qubits)
    for q in qubits:
        if not 0 <= q < n:
            raise IndexOutOfRange(f"qubit {q} on a {n}-qubit state")
    signs = np.stack([z_signs(n, q) for q in qubits], axis=1)
    return probs @ signs


# ---------------------------------------------------------------------------
# single-state API


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    return StateVector(apply_gate_batch(state.amplitudes[None, :], gate)[0])


def run(circuit: Circuit, state: StateVector) -> StateVector:
    return StateVector(run_batch(circuit, state.amplitudes[None, :])[0])


def probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def expval_z(state: StateVector, qubit: int) -> float:
    return float(expval_z_batch(state.amplitudes[None, :], [qubit])[0, 0])


# ---------------------------------------------------------------------------
# reverse pass


def _rot_generators(params: tuple[float, float, float]) -> tuple[np.ndarray, ...]:
    # dR/dangle = (-i/2) G R for each angle
    phi, theta, omega = params
    r = rot_matrix(phi, theta, omega)
    rzw = rz(omega)
    g_phi = r @ PAULI_Z @ r.conj().T
    g_theta = rzw @ PAULI_Y @ rzw.conj().T
    return g_phi, g_theta, PAULI_Z


def _local_overlap(bra: np.ndarray, ket: np.ndarray, qubit: int) -> np.ndarray:
    """``M[b, i, j] = sum conj(bra[b, ..i..]) * ket[b, ..j..]`` over the other qubits."""
    b, dim = ket.shape
    n = _n_qubits_for(dim)
    shape = (b, 2**qubit, 2, 2 ** (n - qubit - 1))
    return np.einsum("blir,bljr->bij", bra.conj().reshape(shape), ket.reshape(shape))


def adjoint_gradients(
    circuit: Circuit, states: np.ndarray, observable_diag: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of ``<psi| U^dag O U |psi>`` for a diagonal observable.

    ``states`` has shape ``(batch, 2**n)``; ``observable_diag`` is the real
    diagonal of ``O``, either shared ``(2**n,)`` or per-sample ``(batch, 2**n)``.

    Returns ``(values, param_grads, input_grads)`` with shapes ``(batch,)``,
    ``(batch, n_params)`` and ``(batch, 2**n)``. ``input_grads`` is the
    derivative with respect to the real parts of the input amplitudes, taken
    without renormalization; callers that normalize must chain through it.
    """
    psi = run_batch(circuit, states)
    obs = np.broadcast_to(np.asarray(observable_diag, dtype=float), psi.shape)
    lam = obs * psi
    values = np.einsum("bi,bi->b", psi.conj(), lam).real

    grads = np.zeros((psi.shape[0], circuit.n_params))
    col = circuit.n_params
    for gate in reversed(circuit.gates):
        check_unitary(gate.matrix())
        if gate.kind == "rot":
            col -= 3
            m = _local_overlap(lam, psi, gate.wires[0])
            for k, gen in enumerate(_rot_generators(gate.params)):
                grads[:, col + k] = np.einsum("ij,bij->b", gen, m).imag
        psi = apply_gate_batch(psi, gate, adjoint=True)
        lam = apply_gate_batch(lam, gate, adjoint=True)
    return values, grads, 2.0 * lam.real


def observable_from_terms(n_qubits: int, terms: Sequence[tuple[int, float]]) -> np.ndarray:
    """Diagonal of ``sum_k w_k Z_{q_k}``."""
    diag = np.zeros(2**n_qubits)
    for qubit, weight in terms:
        if not 0 <= qubit < n_qubits:
            raise IndexOutOfRange(f"qubit {qubit} on a {n_qubits}-qubit circuit")
        diag += weight * z_signs(n_qubits, qubit)
    return diag


def backward_grads(
    circuit: Circuit, state: StateVector, observable: Sequence[tuple[int, float]]
) -> tuple[np.ndarray, np.ndarray]:
    """Parameter and input-amplitude gradients of ``sum w <Z_q>`` for one state."""
    diag = observable_from_terms(circuit.n_qubits, observable)
    _, pg, ig = adjoint_gradients(circuit, state.amplitudes[None, :], diag)
    return pg[0], ig[0]
