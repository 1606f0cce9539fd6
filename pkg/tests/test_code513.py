import itertools

import numpy as np
import pytest

from flagbench.circuit import cnot_depth
from flagbench.code513 import (
    GENERATOR_LABELS,
    PREP_VARIANTS,
    data_state,
    decode,
    five_qubit_code,
    minus_logical_state,
    plus_logical_state,
    prep_minus_logical,
    syndrome_of,
    verify_codestate,
    weight_one_errors,
)
from flagbench.quantum import PauliString, fidelity, symplectic_product
from flagbench.simulator import simulate_density


def test_generators_and_logicals():
    code = five_qubit_code()
    assert [g.letters for g in code.generators] == list(GENERATOR_LABELS)
    assert code.generators[0].letters == "XZZXI" and code.generators[3].letters == "ZXIXZ"
    assert code.logical_x.letters == "XXXXX" and code.logical_z.letters == "ZZZZZ"


def test_stabilizer_group_properties():
    code = five_qubit_code()
    for a, b in itertools.combinations(code.generators, 2):
        assert symplectic_product(a, b) == 0
    assert symplectic_product(code.logical_x, code.logical_z) == 1
    for g in code.generators:
        assert g.commutes(code.logical_x) and g.commutes(code.logical_z)


def test_syndrome_examples():
    assert syndrome_of(PauliString("IIIII")).bits == (0, 0, 0, 0)
    assert syndrome_of(PauliString("XIIII")).bits == (0, 0, 0, 1)
    with pytest.raises(ValueError):
        syndrome_of(PauliString("XII"))


def test_perfect_code():
    singles = [e for e in weight_one_errors() if e.weight]
    syndromes = {syndrome_of(e).bits for e in singles}
    assert len(singles) == 15 and len(syndromes) == 15
    assert (0, 0, 0, 0) not in syndromes
    for bits in itertools.product((0, 1), repeat=4):
        assert syndrome_of(decode(bits)).bits == bits


def test_decode_rejects_bad_length():
    with pytest.raises(ValueError):
        decode((0, 1))


def test_logical_states():
    code = five_qubit_code()
    rep = verify_codestate(minus_logical_state())
    assert np.allclose(rep.generators, 1) and rep.logical_x == pytest.approx(-1)
    rep = verify_codestate(plus_logical_state())
    assert rep.logical_x == pytest.approx(1)
    assert code.n == 5


@pytest.mark.parametrize("variant", PREP_VARIANTS)
def test_prep_variants(variant):
    c = prep_minus_logical(variant)
    rho = data_state(simulate_density(c).final_density, c.metadata["output_order"])
    assert fidelity(rho, minus_logical_state()) >= 1 - 1e-9


def test_depth4_variant():
    assert cnot_depth(prep_minus_logical("melbourne-depth4")) == 4


def test_vigo_permutation():
    c = prep_minus_logical("vigo")
    assert c.metadata["initial_layout"] == (1, 2, 0, 3, 4)
    assert c.metadata["final_permutation"] == (2, 0, 1, 4, 3)


def test_unknown_variant():
    with pytest.raises(ValueError):
        prep_minus_logical("nope")
