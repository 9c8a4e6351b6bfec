import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_diff, dense_expval, dense_gate, dense_unitary
from qaepp.ansatz import build_sel_circuit
from qaepp.sim import (
    CNOT,
    BadLength,
    CapacityExceeded,
    Circuit,
    CSwap,
    Gate,
    Hadamard,
    IndexOutOfRange,
    NonUnitaryGate,
    Rot,
    StateVector,
    ZeroVector,
    adjoint_gradients,
    amplitude_embed,
    apply_gate,
    backward_grads,
    check_unitary,
    expval_z,
    probabilities,
    run,
)


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(v / np.linalg.norm(v))


def random_circuit(rng, n, layers):
    return build_sel_circuit(rng.uniform(0, 2 * np.pi, size=(layers, n, 3)))


class TestEmbedding:
    def test_basis_vector(self):
        np.testing.assert_array_equal(amplitude_embed([1, 0, 0, 0]).amplitudes, [1, 0, 0, 0])

    def test_uniform(self):
        np.testing.assert_allclose(amplitude_embed([1, 1, 1, 1]).amplitudes, [0.5] * 4, atol=1e-15)

    def test_pythagorean(self):
        np.testing.assert_allclose(amplitude_embed([3, 4, 0, 0]).amplitudes, [0.6, 0.8, 0, 0], atol=1e-15)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            amplitude_embed([0, 0, 0, 0])

    @pytest.mark.parametrize("length", [1, 3, 6, 12])
    def test_bad_length(self, length):
        with pytest.raises(BadLength):
            amplitude_embed(np.ones(length))

    def test_capacity(self):
        with pytest.raises(CapacityExceeded):
            StateVector.zero(17)


class TestGates:
    def test_identity_rotation(self):
        rng = np.random.default_rng(1)
        s = random_state(rng, 2)
        np.testing.assert_allclose(apply_gate(s, Rot(0, 0, 0, 0)).amplitudes, s.amplitudes, atol=1e-15)

    def test_ry_pi_flips(self):
        out = apply_gate(StateVector.zero(1), Rot(0, np.pi, 0, 0))
        np.testing.assert_allclose(out.amplitudes, [0, 1], atol=1e-15)

    def test_cnot_truth_table(self):
        s = StateVector(np.array([0, 0, 1, 0]))
        np.testing.assert_array_equal(apply_gate(s, CNOT(0, 1)).amplitudes, [0, 0, 0, 1])
        for idx, expected in [(0, 0), (1, 1), (2, 3), (3, 2)]:
            out = apply_gate(StateVector.basis(2, idx), CNOT(0, 1))
            assert np.argmax(np.abs(out.amplitudes)) == expected

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            apply_gate(StateVector.zero(2), CNOT(0, 2))
        with pytest.raises(IndexOutOfRange):
            Circuit(2, [Hadamard(3)])

    def test_repeated_wire(self):
        with pytest.raises(ValueError):
            CNOT(1, 1)

    @pytest.mark.parametrize(
        "gate",
        [Rot(0.3, -1.2, 2.2, 1), Hadamard(2), CNOT(2, 0), CNOT(0, 3), CSwap(3, 0, 2), CSwap(1, 2, 0)],
    )
    def test_matches_dense_oracle(self, gate):
        rng = np.random.default_rng(7)
        s = random_state(rng, 4)
        expected = dense_gate(gate, 4) @ s.amplitudes
        np.testing.assert_allclose(apply_gate(s, gate).amplitudes, expected, atol=1e-12)

    @pytest.mark.parametrize("gate", [Rot(1.0, 2.0, 3.0, 0), Hadamard(0), CNOT(0, 1), CSwap(0, 1, 2)])
    def test_unitarity(self, gate):
        m = gate.matrix()
        assert np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) < 1e-12

    def test_non_unitary_rejected(self):
        with pytest.raises(NonUnitaryGate):
            check_unitary(np.array([[1, 1], [0, 1]]))


class TestMeasurement:
    def test_z_eigenstates(self):
        assert expval_z(StateVector.zero(1), 0) == 1.0
        assert expval_z(StateVector.basis(1, 1), 0) == -1.0
        assert abs(expval_z(amplitude_embed([1, 1]), 0)) < 1e-15

    def test_probabilities(self):
        np.testing.assert_allclose(probabilities(amplitude_embed([3, 4, 0, 0])), [0.36, 0.64, 0, 0], atol=1e-15)
        np.testing.assert_allclose(probabilities(amplitude_embed([1, 1, 1, 1])), [0.25] * 4)
        np.testing.assert_array_equal(probabilities(StateVector.zero(2)), [1, 0, 0, 0])

    def test_expval_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            expval_z(StateVector.zero(2), 2)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_completeness_and_consistency(self, n, seed):
        rng = np.random.default_rng(seed)
        out = run(random_circuit(rng, max(n, 2), 2), random_state(rng, max(n, 2)))
        p = probabilities(out)
        assert abs(p.sum() - 1) < 1e-10
        for q in range(out.n_qubits):
            bits = (np.arange(p.size) >> (out.n_qubits - 1 - q)) & 1
            assert abs(expval_z(out, q) - (p[bits == 0].sum() - p[bits == 1].sum())) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_norm_preserved(n, layers, seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, layers)
    gates = list(c.gates) + [Hadamard(0), CSwap(0, 1, n - 1)] if n > 2 else list(c.gates)
    out = run(Circuit(n, gates), random_state(rng, n))
    assert abs(out.norm() - 1) < 1e-10


def test_circuit_matches_dense_unitary():
    rng = np.random.default_rng(3)
    c = random_circuit(rng, 3, 3)
    s = random_state(rng, 3)
    np.testing.assert_allclose(run(c, s).amplitudes, dense_unitary(c) @ s.amplitudes, atol=1e-12)


class TestBackward:
    def test_no_gates(self):
        c = Circuit(1, [])
        pg, ig = backward_grads(c, StateVector.zero(1), [(0, 1.0)])
        assert pg.size == 0
        # raw amplitude gradient of a0^2 - a1^2 is (2, 0); its component
        # tangent to the unit sphere is 0, the derivative of the normalized form
        np.testing.assert_allclose(ig, [2.0, 0.0])
        a = np.array([1.0, 0.0])
        np.testing.assert_allclose(ig - (ig @ a) * a, [0.0, 0.0])

    def test_single_ry(self):
        theta = np.pi / 2
        c = Circuit(1, [Rot(0, theta, 0, 0)])
        pg, _ = backward_grads(c, StateVector.zero(1), [(0, 1.0)])
        np.testing.assert_allclose(pg, [0.0, -np.sin(theta), 0.0], atol=1e-12)
        assert pg[1] == pytest.approx(-1.0, abs=1e-12)

    def test_param_order(self):
        rng = np.random.default_rng(0)
        angles = rng.uniform(size=(2, 3, 3))
        np.testing.assert_array_equal(build_sel_circuit(angles).parameters(), angles.ravel())

    def test_random_circuit_fd(self):
        rng = np.random.default_rng(11)
        angles = rng.uniform(0, 2 * np.pi, size=(2, 3, 3))
        s = random_state(rng, 3)
        terms = [(0, 0.7), (2, -1.3)]
        pg, _ = backward_grads(build_sel_circuit(angles), s, terms)
        fd = central_diff(lambda a: dense_expval(build_sel_circuit(a.reshape(angles.shape)), s.amplitudes, terms),
                          angles.ravel())
        np.testing.assert_allclose(pg, fd, rtol=1e-5, atol=1e-8)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(5)
        c = random_circuit(rng, 3, 2)
        states = np.stack([random_state(rng, 3).amplitudes for _ in range(4)])
        diag = np.linspace(-1, 1, 8)
        vals, pg, ig = adjoint_gradients(c, states, diag)
        for b in range(4):
            v1, pg1, ig1 = adjoint_gradients(c, states[b : b + 1], diag)
            np.testing.assert_allclose(pg[b], pg1[0], atol=1e-14)
            np.testing.assert_allclose(ig[b], ig1[0], atol=1e-14)
            assert vals[b] == pytest.approx(v1[0], abs=1e-14)

    def test_supports_fixed_gates(self):
        rng = np.random.default_rng(9)
        c = Circuit(3, [Hadamard(1), Rot(0.2, 0.4, 0.6, 1), CSwap(1, 0, 2), Rot(1.1, -0.3, 0.2, 2)])
        s = random_state(rng, 3)
        pg, _ = backward_grads(c, s, [(2, 1.0)])

        def f(p):
            gates = [Hadamard(1), Rot(*p[:3], wire=1), CSwap(1, 0, 2), Rot(*p[3:], wire=2)]
            return dense_expval(Circuit(3, gates), s.amplitudes, [(2, 1.0)])

        np.testing.assert_allclose(pg, central_diff(f, c.parameters()), rtol=1e-5, atol=1e-8)


def test_gate_kind_validation():
    with pytest.raises(ValueError):
        Gate("toffoli", (0, 1, 2))
    with pytest.raises(ValueError):
        Gate("rot", (0,), (1.0,))
