import numpy as np
import pytest

from flagbench.circuit import Circuit, cnot_depth, gate_counts
from flagbench.code513 import ideal_prep_circuit
from flagbench.device import device_from_dict, load_device
from flagbench.flags import flagged_syndrome_circuit
from flagbench.qasm import serialize
from flagbench.transpile import (
    FIXTURE_NAMES,
    CouplingGraph,
    RoutedCircuit,
    RoutingError,
    fixtures,
    layout_score,
    respects_coupling,
    route,
    verify_equivalence,
)

from helpers import MELBOURNE_PATH, random_unitary_circuit

MELBOURNE = CouplingGraph.from_device(load_device("melbourne"))


def ideal_stab():
    return ideal_prep_circuit().widen(7, 2).compose(flagged_syndrome_circuit(generator_index=3).circuit)


def test_compatible_circuit_unchanged():
    c = Circuit(3).h(0).cx(0, 1).cx(2, 1)
    rc = route(c, MELBOURNE, [0, 1, 2])
    assert rc.swap_count == 0
    assert [i.name for i in rc.circuit.instructions] == ["h", "cx", "cx"]


def test_distance_two_cx():
    rc = route(Circuit(2).cx(0, 1), MELBOURNE, [0, 2])
    assert rc.swap_count == 1
    assert gate_counts(rc.circuit)["cx"] == 4
    assert verify_equivalence(Circuit(2).cx(0, 1), rc)


def test_prep_on_layout_b():
    rc = route(ideal_prep_circuit(), MELBOURNE, [11, 12, 2, 3, 4])
    assert respects_coupling(rc, MELBOURNE)
    assert verify_equivalence(ideal_prep_circuit(), rc)


def test_prep_on_layout_b_depth():
    # the greedy router is benchmarked against the hand-routed depth-6 result
    rc = route(ideal_prep_circuit(), MELBOURNE, [11, 12, 2, 3, 4])
    assert cnot_depth(rc.circuit) <= 6


def test_layout_errors():
    with pytest.raises(RoutingError):
        route(Circuit(2).cx(0, 1), MELBOURNE, [0, 0])
    with pytest.raises(RoutingError):
        route(Circuit(2).cx(0, 1), MELBOURNE, [0])
    split = CouplingGraph.from_edges([(0, 1), (2, 3)])
    with pytest.raises(RoutingError):
        route(Circuit(2).cx(0, 1), split, [0, 2])


def test_deterministic():
    texts = {serialize(route(ideal_stab(), MELBOURNE, [0, 1, 2, 3, 4, 13, 14]).circuit) for _ in range(3)}
    assert len(texts) == 1


def test_shortest_path_tie_break():
    g = CouplingGraph.from_edges([(0, 1), (1, 3), (0, 2), (2, 3)])
    assert g.shortest_path(0, 3) == [0, 1, 3]


def test_random_circuits_routed():
    rng = np.random.default_rng(99)
    for _ in range(25):
        c = random_unitary_circuit(rng, 5, 15)
        start = int(rng.integers(len(MELBOURNE_PATH) - 4))
        layout = [int(q) for q in rng.permutation(MELBOURNE_PATH[start : start + 5])]
        rc = route(c, MELBOURNE, layout)
        assert respects_coupling(rc, MELBOURNE)
        assert verify_equivalence(c, rc)
        if all(MELBOURNE.is_edge(layout[i.qubits[0]], layout[i.qubits[1]]) for i in c.instructions if len(i.qubits) == 2):
            assert rc.swap_count == 0


def test_mutation_detected():
    rc = fixtures()["melbourne-prep-depth4"]
    ins = list(rc.circuit.instructions)
    k = next(i for i, x in enumerate(ins) if x.name == "cx")
    del ins[k]
    broken = RoutedCircuit(Circuit(rc.circuit.num_qubits, rc.circuit.num_clbits, ins), rc.wires, rc.initial_layout, rc.final_permutation)
    assert not verify_equivalence(ideal_prep_circuit(), broken)


def test_equivalence_size_limit():
    c = Circuit(9)
    rc = RoutedCircuit(c, tuple(range(9)), tuple(range(9)), tuple(range(9)))
    with pytest.raises(ValueError):
        verify_equivalence(c, rc)


class TestFixtures:
    def test_names(self):
        assert set(fixtures()) == set(FIXTURE_NAMES)

    def test_stab(self):
        rc = fixtures()["melbourne-stab-ZXIXZ"]
        assert cnot_depth(rc.circuit) == 10 and gate_counts(rc.circuit)["cx"] == 18
        assert verify_equivalence(ideal_stab(), rc)
        assert len(rc.output_order()) == 7

    def test_depth4(self):
        assert cnot_depth(fixtures()["melbourne-prep-depth4"].circuit) == 4

    def test_vigo(self):
        rc = fixtures()["vigo-prep"]
        assert rc.initial_layout == (1, 2, 0, 3, 4) and rc.final_permutation == (2, 0, 1, 4, 3)
        assert respects_coupling(rc, CouplingGraph.from_device(load_device("vigo")))

    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    def test_equivalent_and_on_edges(self, name):
        rc = fixtures()[name]
        ideal = ideal_stab() if name == "melbourne-stab-ZXIXZ" else ideal_prep_circuit()
        graph = CouplingGraph.from_device(load_device("vigo" if name.startswith("vigo") else "melbourne"))
        assert respects_coupling(rc, graph)
        assert verify_equivalence(ideal, rc)

    def test_fresh_copies(self):
        fixtures()["vigo-prep"].circuit.instructions.clear()
        assert len(fixtures()["vigo-prep"].circuit) > 0


class TestLayoutScore:
    def test_zero_error_device(self):
        d = load_device("melbourne")
        data = {
            "name": "perfect",
            "num_qubits": d.num_qubits,
            "edges": [sorted(e) for e in d.undirected_edges],
            "gates": {k: {"duration_us": v.duration_us, "error": 0.0} for k, v in d.gates.items()},
            "qubits": [{"t1_us": 50.0, "t2_us": 50.0, "readout_p1_given_0": 0.0, "readout_p0_given_1": 0.0}] * d.num_qubits,
        }
        assert layout_score(ideal_prep_circuit(), device_from_dict(data), [0, 1, 2, 3, 4]) == 0

    def test_avoids_high_error_edge(self):
        d = load_device("melbourne")
        c = Circuit(2).cx(0, 1)
        assert layout_score(c, d, [1, 2]) < layout_score(c, d, [1, 13])

    def test_additive(self):
        d = load_device("melbourne")
        a = Circuit(3).cx(0, 1).h(2)
        b = Circuit(3).cx(1, 2).u3(0.1, 0.2, 0.3, 0)
        layout = [0, 1, 2]
        assert layout_score(a.compose(b), d, layout) == pytest.approx(layout_score(a, d, layout) + layout_score(b, d, layout))
