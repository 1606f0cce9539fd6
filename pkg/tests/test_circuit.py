import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flagbench.circuit import Circuit, Instruction, cnot_depth, estimate_runtime, gate_counts
from flagbench.code513 import ideal_prep_circuit, minus_logical_state
from flagbench.device import NoiseModel, device_from_dict, load_device, noise_from_device, thermal_relaxation_channel
from flagbench.flags import flagged_syndrome_circuit
from flagbench.quantum import StateVector, apply_unitary, fidelity
from flagbench.simulator import circuit_unitary, simulate_density, simulate_trajectory
from flagbench.transpile import fixtures

from helpers import random_gate, random_unitary_circuit, unitary_circuits


def toy_device(**gates):
    data = {
        "name": "toy",
        "num_qubits": 3,
        "edges": [[0, 1], [1, 2]],
        "gates": {name: {"duration_us": d, "error": 0.0} for name, d in gates.items()},
        "qubits": [{"t1_us": 50.0, "t2_us": 50.0, "readout_p1_given_0": 0.0, "readout_p0_given_1": 0.0}] * 3,
    }
    return device_from_dict(data)


class TestConstruction:
    def test_unknown_gate(self):
        with pytest.raises(ValueError):
            Circuit(1).append(Instruction.gate("foo", [0]))

    def test_qubit_range(self):
        with pytest.raises(ValueError):
            Circuit(2).cx(0, 2)

    def test_condition_on_unwritten_bit(self):
        c = Circuit(1, 1)
        with pytest.raises(ValueError):
            c.x(0, condition=0)
        c.measure(0, 0)
        c.x(0, condition=0)

    def test_compose_maps_wires(self):
        inner = Circuit(2, 1).cx(0, 1).measure(1, 0)
        out = Circuit(3, 2).compose(inner, qubits=[2, 0], clbits=[1])
        assert out.instructions[0].qubits == (2, 0)
        assert out.instructions[1].clbit == 1


class TestSimulateDensity:
    def test_h_then_measure(self):
        c = Circuit(1, 1).h(0).measure(0, 0)
        dist = simulate_density(c).outcome_distribution
        assert dist == pytest.approx({"0": 0.5, "1": 0.5})

    def test_prep_gives_minus_logical(self):
        rho = simulate_density(ideal_prep_circuit()).final_density
        assert fidelity(rho, minus_logical_state()) == pytest.approx(1, abs=1e-12)

    def test_idle_decay(self):
        device = load_device("melbourne")
        c = Circuit(1).x(0).id(0)
        noise = NoiseModel(relaxation={0: (24.785, 24.785)}, durations=lambda ins: 0.0533 if ins.name == "id" else 0.0)
        rho = simulate_density(c, noise).final_density
        assert rho.matrix[1, 1].real == pytest.approx(math.exp(-0.0533 / 24.785), abs=1e-12)
        assert device.mean_gate_duration("id") == pytest.approx(0.0533)

    def test_mid_circuit_branches_and_condition(self):
        # measure |+>, flip back on outcome 1: always ends in |0>
        c = Circuit(1, 1).h(0).measure(0, 0).x(0, condition=0)
        res = simulate_density(c)
        assert np.allclose(res.final_density.matrix, np.diag([1, 0]))
        p, rho = res.conditional_density({0: 1})
        assert p == pytest.approx(0.5)

    def test_zero_error_device_is_identity(self):
        device = toy_device(u2=0.05, cx=0.3, id=0.05)
        c = Circuit(3).u2(0, math.pi, 0).cx(0, 1).cx(1, 2)
        noisy = simulate_density(c, noise_from_device(device, options=None)).final_density
        # T1 = T2 idles only act on id gates, of which there are none
        clean = simulate_density(c).final_density
        assert np.allclose(noisy.matrix, clean.matrix, atol=1e-10)

    @given(unitary_circuits(max_qubits=5))
    def test_matches_unitary_composition(self, c):
        n = c.num_qubits
        state = StateVector.zero(n)
        for ins in c.instructions:
            state = apply_unitary(state, ins.matrix(), ins.qubits)
        rho = simulate_density(c).final_density
        assert np.allclose(rho.matrix, state.to_density().matrix, atol=1e-10)
        assert np.allclose(circuit_unitary(c)[:, 0], state.amplitudes, atol=1e-10)


class TestSimulateTrajectory:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_deterministic(self, seed):
        res = simulate_trajectory(Circuit(1, 1).x(0).measure(0, 0), shots=50, seed=seed)
        assert res.counts == {"1": 50}

    def test_h_measure_fraction(self):
        c = Circuit(1, 1).h(0).measure(0, 0)
        inside = 0
        for seed in range(20):
            frac = simulate_trajectory(c, shots=8192, seed=seed).counts.get("0", 0) / 8192
            inside += abs(frac - 0.5) <= 0.02
        assert inside >= 19

    def test_flagged_circuit_noiseless(self):
        c = ideal_prep_circuit().widen(7, 2).compose(flagged_syndrome_circuit(generator_index=3).circuit)
        assert simulate_trajectory(c, shots=1000, seed=4).counts == {"00": 1000}

    def test_same_seed_same_result(self):
        c = Circuit(2, 2).h(0).cx(0, 1).measure(0, 0).measure(1, 1)
        noise = NoiseModel.depolarizing(p1=0.1, p2=0.1)
        a = simulate_trajectory(c, noise, shots=300, seed=9).memory
        b = simulate_trajectory(c, noise, shots=300, seed=9).memory
        assert a == b

    def test_converges_to_exact(self):
        rng = np.random.default_rng(11)
        c = random_unitary_circuit(rng, 3, 12)
        c = c.widen(num_clbits=3)
        for q in range(3):
            c.measure(q, q)
        noise = NoiseModel.depolarizing(p1=0.02, p2=0.05)
        noise.readout = {0: (0.05, 0.1)}
        exact = simulate_density(c, noise).probabilities
        shots = 4000
        good = 0
        for seed in range(20):
            counts = simulate_trajectory(c, noise, shots=shots, seed=seed).counts
            keys = set(exact) | set(counts)
            tv = 0.5 * sum(abs(exact.get(k, 0) - counts.get(k, 0) / shots) for k in keys)
            good += tv <= 3 / math.sqrt(shots)
        assert good >= 19


class TestMetrics:
    def test_no_entangling(self):
        assert cnot_depth(Circuit(2).h(0).x(1)) == 0

    def test_fixture_depths(self):
        fx = fixtures()
        assert cnot_depth(fx["melbourne-prep-depth4"].circuit) == 4
        assert cnot_depth(fx["melbourne-stab-ZXIXZ"].circuit) == 10

    def test_gate_counts(self):
        assert gate_counts(Circuit(1)) == {}
        assert gate_counts(fixtures()["melbourne-stab-ZXIXZ"].circuit)["cx"] == 18
        counts = gate_counts(ideal_prep_circuit())
        assert counts["cz"] == 5 and counts["h"] == 5

    def test_barrier_orders_layers(self):
        c = Circuit(4).cx(0, 1).barrier(1, 2).cx(2, 3)
        assert cnot_depth(c) == 2
        assert cnot_depth(Circuit(4).cx(0, 1).cx(2, 3)) == 1

    @given(unitary_circuits(max_qubits=5, max_len=20), st.integers(0, 2**32 - 1))
    def test_depth_bounds_and_single_qubit_invariance(self, c, seed):
        assert cnot_depth(c) <= sum(1 for i in c.instructions if i.is_entangling)
        rng = np.random.default_rng(seed)
        out = Circuit(c.num_qubits)
        for ins in c.instructions:
            out.append(ins)
            if rng.random() < 0.5:
                g = random_gate(rng, c.num_qubits, two_qubit_prob=0.0)
                out.append(g)
        assert cnot_depth(out) == cnot_depth(c)


class TestRuntime:
    def test_empty(self):
        assert estimate_runtime(Circuit(2), load_device("melbourne")) == 0

    def test_single_u2(self):
        assert estimate_runtime(Circuit(1).u2(0, math.pi, 0), load_device("melbourne")) == pytest.approx(0.0978)

    def test_cx_chain(self):
        device = toy_device(cx=0.3, u2=0.1, id=0.05)
        c = Circuit(3).cx(0, 1).cx(1, 2)
        assert estimate_runtime(c, device) == pytest.approx(2 * device.mean_gate_duration("cx"))

    def test_measurement_excluded(self):
        device = toy_device(cx=0.3, u2=0.1, id=0.05)
        c = Circuit(2, 1).cx(0, 1).measure(0, 0)
        assert estimate_runtime(c, device) == pytest.approx(0.3)

    def test_missing_duration(self):
        device = toy_device(cx=0.3)
        with pytest.raises(ValueError):
            estimate_runtime(Circuit(1).u3(0.1, 0.2, 0.3, 0), device)

    @given(unitary_circuits(max_qubits=3, max_len=10), st.integers(0, 2**32 - 1))
    def test_monotone(self, c, seed):
        device = toy_device(cx=0.3, u1=0.0, u2=0.1, u3=0.2, id=0.05)
        before = estimate_runtime(c, device)
        c2 = c.copy().append(random_gate(np.random.default_rng(seed), c.num_qubits))
        assert estimate_runtime(c2, device) >= before - 1e-12


def test_thermal_relaxation_limit():
    ch = thermal_relaxation_channel(1e-9, 24.785, 20.0)
    assert np.abs(ch.operators[0] - np.eye(2)).max() <= 1e-8
