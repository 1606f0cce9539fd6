import numpy as np
import pytest

from flagbench.code513 import decode, five_qubit_code, ideal_prep_circuit, minus_logical_state, syndrome_of
from flagbench.flags import (
    FaultLocation,
    SyndromeRecord,
    apply_virtual_correction,
    correction_for,
    enumerate_single_faults,
    fault_locations,
    flag_table,
    flagged_syndrome_circuit,
    inject_fault,
    nonft_syndrome_circuit,
)
from flagbench.quantum import DensityMatrix, PauliString, fidelity
from flagbench.simulator import simulate_density


def run_on_code_state(ec, error: PauliString | None = None):
    prep = ideal_prep_circuit().widen(ec.circuit.num_qubits, ec.circuit.num_clbits)
    if error is not None:
        for q, letter in enumerate(error.letters):
            if letter != "I":
                prep._gate(letter.lower(), [q])
    return simulate_density(prep.compose(ec.circuit))


@pytest.mark.parametrize("g", range(4))
def test_noiseless_outcomes(g):
    assert run_on_code_state(nonft_syndrome_circuit(generator_index=g)).probabilities == pytest.approx({"0": 1.0})
    ec = flagged_syndrome_circuit(generator_index=g)
    res = run_on_code_state(ec)
    assert res.probabilities == pytest.approx({"00": 1.0})
    data = res.final_density
    from flagbench.quantum import partial_trace

    assert fidelity(partial_trace(data, range(5)), minus_logical_state()) == pytest.approx(1, abs=1e-9)


def test_x1_syndrome_on_zxixz():
    res = run_on_code_state(nonft_syndrome_circuit(generator_index=3), PauliString("XIIII"))
    assert res.probabilities == pytest.approx({"1": 1.0})
    assert syndrome_of(PauliString("XIIII")).bits[3] == 1


def test_syndrome_is_target_of_every_coupling():
    ec = flagged_syndrome_circuit(generator_index=3)
    for ins in ec.circuit.instructions:
        if ins.is_entangling:
            assert ins.qubits[1] == ec.syndrome_qubit


def test_flag_couplings_placement():
    ec = flagged_syndrome_circuit(generator_index=0)
    two = [i for i in ec.circuit.instructions if i.is_entangling]
    flag_idx = [k for k, i in enumerate(two) if ec.flag_qubit in i.qubits]
    assert flag_idx == [1, len(two) - 2]


def test_z_between_flag_couplings_raises_flag():
    ec = flagged_syndrome_circuit(generator_index=3)
    ins = ec.circuit.instructions
    flags = [k for k, i in enumerate(ins) if i.is_entangling and ec.flag_qubit in i.qubits]
    for idx in range(flags[0], flags[1]):
        for pauli in "ZY":
            rec = enumerate_single_faults(ec, [FaultLocation(idx, ec.syndrome_qubit, pauli)]).records[0]
            assert rec.flag_raised, (idx, pauli)


def test_enumeration_counts():
    report = enumerate_single_faults(flagged_syndrome_circuit(generator_index=3))
    assert len(report.records) == len(fault_locations(flagged_syndrome_circuit(generator_index=3).circuit))
    assert report.dangerous == []
    assert sum(r.flag_raised for r in report.records) == 14


@pytest.mark.parametrize("g", range(4))
def test_ft_property_every_generator(g):
    report = enumerate_single_faults(flagged_syndrome_circuit(generator_index=g))
    for rec in report.records:
        ok = rec.flag_raised or rec.residual.weight <= 1
        assert ok, rec.location
    nonft = enumerate_single_faults(nonft_syndrome_circuit(generator_index=g))
    assert len(nonft.dangerous) == 2


def test_syndrome_x_faults_harmless():
    for ec in (flagged_syndrome_circuit(generator_index=3), nonft_syndrome_circuit(generator_index=3)):
        for rec in enumerate_single_faults(ec).records:
            if rec.location.qubit == ec.syndrome_qubit and rec.location.pauli == "X":
                assert all(b.residual.weight == 0 for b in rec.branches)


def test_measurement_fault_only_flips_syndrome():
    ec = flagged_syndrome_circuit(generator_index=3)
    idx = next(k for k, i in enumerate(ec.circuit.instructions) if i.kind == "measure" and i.qubits[0] == ec.syndrome_qubit)
    rec = enumerate_single_faults(ec, [FaultLocation(idx, ec.syndrome_qubit, "X")]).records[0]
    assert rec.syndrome_flipped and rec.residual.weight == 0


def test_inject_fault_places_gate():
    ec = nonft_syndrome_circuit(generator_index=0)
    out = inject_fault(ec.circuit, FaultLocation(0, 5, "Z"))
    assert out.instructions[1].name == "z" and len(out) == len(ec.circuit) + 1


def test_flag_tables():
    expected = {0: ((0, 1, 0, 0), "IIZXI"), 1: ((1, 0, 1, 0), "IIIZX"), 2: ((1, 1, 0, 1), "IIIZZ"), 3: ((0, 0, 1, 0), "IIIXZ")}
    for g, (bits, pauli) in expected.items():
        table = flag_table(g)
        assert len(table) == 16
        assert table[bits].letters == pauli


def test_virtual_correction():
    psi = minus_logical_state().to_density()
    assert np.allclose(apply_virtual_correction(psi, (0, 0, 0, 0)).matrix, psi.matrix)
    err = PauliString("IIXII")
    m = err.matrix() @ psi.matrix @ err.matrix()
    fixed = apply_virtual_correction(DensityMatrix(5, m), syndrome_of(err).bits)
    assert fidelity(fixed, psi) == pytest.approx(1)


def test_flagged_fault_path_is_corrected():
    # a weight-2 error from a flagged fault maps back into the codespace
    code = five_qubit_code()
    psi = minus_logical_state().to_density()
    err = PauliString("IIZXI")
    m = DensityMatrix(5, err.matrix() @ psi.matrix @ err.matrix())
    fixed = apply_virtual_correction(m, SyndromeRecord(syndrome_of(err).bits, flagged_generator=0))
    for g in code.generators:
        assert fixed.expectation(g) == pytest.approx(1, abs=1e-9)


def test_correction_record_checks():
    with pytest.raises(ValueError):
        correction_for((0, 1))
    with pytest.raises(ValueError):
        correction_for(SyndromeRecord((0, 0, 0, 0), flagged_generator=7))
    assert correction_for((0, 0, 0, 1)) == decode((0, 0, 0, 1))


def test_report_serializes():
    import json

    d = enumerate_single_faults(nonft_syndrome_circuit(generator_index=3)).to_dict()
    json.dumps(d)
    assert len(d["dangerous"]) == 2
