import numpy as np
import pytest
from hypothesis import given, strategies as st

from flagbench.device import depolarizing_channel
from flagbench.quantum import (
    PAULI_MATRICES,
    DensityMatrix,
    KrausChannel,
    PauliString,
    ResourceLimitError,
    StateVector,
    apply_kraus,
    apply_unitary,
    fidelity,
    measure_projective,
    partial_trace,
    permute_qubits,
    spectral_norm,
    symplectic_product,
    tensor_product,
    trace_distance,
)

from helpers import random_density, random_state_vector, random_unitary_circuit

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
X, Y, Z = PAULI_MATRICES["X"], PAULI_MATRICES["Y"], PAULI_MATRICES["Z"]


def ket(label):
    return StateVector.from_label(label)


class TestTypes:
    def test_state_vector_rejects_bad_norm(self):
        with pytest.raises(ValueError):
            StateVector(1, np.array([1, 1]))

    def test_state_vector_rejects_bad_length(self):
        with pytest.raises(ValueError):
            StateVector(2, np.array([1, 0]))

    def test_density_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.array([[0.5, 0.5], [0, 0.5]]))

    def test_density_rejects_negative(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.diag([1.5, -0.5]))

    def test_density_accepts_tiny_negative_eigenvalue(self):
        DensityMatrix(1, np.diag([1 + 5e-9, -5e-9]))

    def test_pauli_weight_and_validation(self):
        assert PauliString("XZZXI").weight == 4
        assert PauliString("IIIII").weight == 0
        with pytest.raises(ValueError):
            PauliString("XQ")

    def test_kraus_completeness_enforced(self):
        with pytest.raises(ValueError):
            KrausChannel((0.5 * np.eye(2),))

    def test_symplectic_product(self):
        assert symplectic_product(PauliString("X"), PauliString("Z")) == 1
        assert symplectic_product(PauliString("XX"), PauliString("ZZ")) == 0

    def test_pauli_product_sign(self):
        a, b = PauliString("XZ"), PauliString("ZX")
        prod = a * b
        assert np.allclose(prod.matrix(), a.matrix() @ b.matrix())

    def test_qubit_cap(self):
        big = StateVector.zero(7)
        with pytest.raises(ResourceLimitError):
            tensor_product(big, StateVector.zero(6))


class TestTensorProduct:
    def test_identity(self):
        assert np.allclose(tensor_product(np.eye(2), np.eye(2)), np.eye(4))

    def test_kets_big_endian(self):
        v = tensor_product(ket("0"), ket("1"))
        assert v.amplitudes[1] == pytest.approx(1)

    def test_x_tensor_z_on_00(self):
        out = tensor_product(X, Z) @ ket("00").amplitudes
        assert np.allclose(out, ket("10").amplitudes)


class TestApplyUnitary:
    def test_h_on_zero(self):
        assert apply_unitary(ket("0"), H, [0]) == ket("+")

    def test_cnot(self):
        assert apply_unitary(ket("10"), CX, [0, 1]) == ket("11")

    def test_cz_on_plus_plus(self):
        out = apply_unitary(ket("++"), CZ, [0, 1])
        assert np.allclose(out.amplitudes, np.array([1, 1, 1, -1]) / 2)

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            apply_unitary(ket("0"), np.array([[1, 1], [0, 1]]), [0])

    def test_rejects_bad_targets(self):
        with pytest.raises(ValueError):
            apply_unitary(ket("00"), CX, [0, 0])
        with pytest.raises(ValueError):
            apply_unitary(ket("00"), H, [2])

    def test_density_matches_state(self):
        rng = np.random.default_rng(1)
        v = StateVector(3, random_state_vector(rng, 3))
        u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
        a = apply_unitary(v, u, [2, 0]).to_density().matrix
        b = apply_unitary(v.to_density(), u, [2, 0]).matrix
        assert np.allclose(a, b, atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 7))
    def test_norm_and_trace_preserved(self, seed, n):
        rng = np.random.default_rng(seed)
        from flagbench.simulator import circuit_unitary

        c = random_unitary_circuit(rng, n, 10)
        u = circuit_unitary(c)
        v = StateVector(n, random_state_vector(rng, n))
        out = apply_unitary(v, u, list(range(n)))
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10
        rho = DensityMatrix(n, random_density(rng, n, rank=2))
        assert abs(np.trace(apply_unitary(rho, u, list(range(n))).matrix) - 1) < 1e-10


class TestApplyKraus:
    def test_identity_channel(self):
        rng = np.random.default_rng(0)
        rho = DensityMatrix(2, random_density(rng, 2))
        out = apply_kraus(rho, KrausChannel.identity(), [1])
        assert np.allclose(out.matrix, rho.matrix)

    def test_full_depolarizing_limit(self):
        out = apply_kraus(ket("0").to_density(), depolarizing_channel(0.0), [0])
        assert np.allclose(out.matrix, np.diag([1 / 3, 2 / 3]))

    def test_depolarizing_on_plus(self):
        p = 0.64258
        out = apply_kraus(ket("+").to_density(), depolarizing_channel(p), [0])
        pt = p - (1 - p) / 3
        plus, minus = ket("+").to_density().matrix, ket("-").to_density().matrix
        assert np.allclose(out.matrix, (1 + pt) / 2 * plus + (1 - pt) / 2 * minus, atol=1e-12)

    @pytest.mark.parametrize("pauli", ["X", "Y", "Z"])
    @given(seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1))
    def test_depolarizing_commutes_with_pauli(self, pauli, seed, p):
        rho = random_density(np.random.default_rng(seed), 1)
        u = PAULI_MATRICES[pauli]
        ch = depolarizing_channel(p)
        lhs = apply_kraus(DensityMatrix(1, u @ rho @ u.conj().T), ch, [0]).matrix
        rhs = u @ apply_kraus(DensityMatrix(1, rho), ch, [0]).matrix @ u.conj().T
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestMeasure:
    def test_plus_in_x(self):
        zero, one = measure_projective(ket("+"), 0, "X")
        assert zero.probability == pytest.approx(1) and one.probability == pytest.approx(0, abs=1e-12)

    def test_plus_in_z(self):
        zero, one = measure_projective(ket("+"), 0, "Z")
        assert zero.probability == pytest.approx(0.5) and one.probability == pytest.approx(0.5)
        assert zero.state == ket("0")

    def test_sampling_with_rng(self):
        rng = np.random.default_rng(3)
        bits = [measure_projective(ket("1"), 0, "Z", rng).outcome for _ in range(20)]
        assert bits == [1] * 20

    def test_y_basis_density(self):
        zero, one = measure_projective(ket("r").to_density(), 0, "Y")
        assert zero.probability == pytest.approx(1)

    def test_range_check(self):
        with pytest.raises(ValueError):
            measure_projective(ket("0"), 1)

    @given(st.integers(0, 2**32 - 1), st.sampled_from("XYZ"))
    def test_probabilities_sum_to_one(self, seed, basis):
        rng = np.random.default_rng(seed)
        rho = DensityMatrix(3, random_density(rng, 3))
        a, b = measure_projective(rho, int(rng.integers(3)), basis)
        assert abs(a.probability + b.probability - 1) < 1e-10
        for o in (a, b):
            if o.state is not None:
                assert abs(np.trace(o.state.matrix) - 1) < 1e-10


class TestPartialTrace:
    def test_product(self):
        rho = partial_trace(ket("01").to_density(), [0])
        assert np.allclose(rho.matrix, np.diag([1, 0]))

    def test_bell(self):
        bell = StateVector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
        for q in (0, 1):
            assert np.allclose(partial_trace(bell.to_density(), [q]).matrix, np.eye(2) / 2)

    def test_empty_keep(self):
        with pytest.raises(ValueError):
            partial_trace(ket("0").to_density(), [])

    @given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
    def test_product_recovers_factor(self, seed, na, nb):
        rng = np.random.default_rng(seed)
        a = DensityMatrix(na, random_density(rng, na))
        b = DensityMatrix(nb, random_density(rng, nb))
        ab = tensor_product(a, b)
        assert np.allclose(partial_trace(ab, list(range(na))).matrix, a.matrix, atol=1e-10)
        assert np.allclose(partial_trace(ab, list(range(na, na + nb))).matrix, b.matrix, atol=1e-10)


class TestMetrics:
    def test_fidelity_self(self):
        rho = DensityMatrix(2, random_density(np.random.default_rng(5), 2))
        assert fidelity(rho, rho) == pytest.approx(1, abs=1e-8)

    def test_fidelity_zero_plus(self):
        assert fidelity(ket("0").to_density(), ket("+").to_density()) == pytest.approx(0.5)

    def test_fidelity_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(ket("0"), ket("00"))

    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_fidelity_pure_states(self, seed, n):
        rng = np.random.default_rng(seed)
        a = StateVector(n, random_state_vector(rng, n))
        b = StateVector(n, random_state_vector(rng, n))
        expected = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
        assert fidelity(a, b) == pytest.approx(expected, abs=1e-10)
        assert fidelity(a.to_density(), b.to_density()) == pytest.approx(expected, abs=1e-7)

    @given(st.integers(0, 2**32 - 1))
    def test_fidelity_symmetric_and_bounded(self, seed):
        rng = np.random.default_rng(seed)
        a = DensityMatrix(2, random_density(rng, 2))
        b = DensityMatrix(2, random_density(rng, 2))
        f = fidelity(a, b)
        assert 0 <= f <= 1
        assert f == pytest.approx(fidelity(b, a), abs=1e-8)
        v = StateVector(2, random_state_vector(rng, 2))
        assert fidelity(v, a) == pytest.approx(np.real(np.vdot(v.amplitudes, a.matrix @ v.amplitudes)), abs=1e-10)

    def test_fidelity_against_kraus_expansion(self):
        from flagbench.code513 import minus_logical_state

        psi = minus_logical_state()
        p = 0.9
        w = [p] + [(1 - p) / 3] * 3
        letters = "IXYZ"
        # brute force: sum over all 16 Pauli pairs on qubits 1 and 4
        rho = np.zeros((32, 32), dtype=complex)
        for i, a in enumerate(letters):
            for j, b in enumerate(letters):
                op = PauliString("I" + a + "II" + b).matrix()
                v = op @ psi.amplitudes
                rho += w[i] * w[j] * np.outer(v, v.conj())
        ch = depolarizing_channel(p)
        out = apply_kraus(apply_kraus(psi.to_density(), ch, [1]), ch, [4])
        expected = float(np.real(np.vdot(psi.amplitudes, rho @ psi.amplitudes)))
        assert fidelity(psi, out) == pytest.approx(expected, abs=1e-12)

    def test_spectral_norm_examples(self):
        assert spectral_norm(X) == pytest.approx(1)
        assert spectral_norm(np.diag([0.7, 0.3]) - np.eye(2) / 2) == pytest.approx(0.2)
        assert spectral_norm(np.zeros((4, 4))) == 0

    @given(st.integers(0, 2**32 - 1))
    def test_spectral_norm_submultiplicative(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4))
        assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) + 1e-9

    def test_trace_distance_orthogonal(self):
        assert trace_distance(ket("0").to_density(), ket("1").to_density()) == pytest.approx(1)


def test_permute_qubits():
    v = permute_qubits(ket("01").to_density(), [1, 0])
    assert np.allclose(v.matrix, ket("10").to_density().matrix)
    with pytest.raises(ValueError):
        permute_qubits(ket("01"), [0, 0])
