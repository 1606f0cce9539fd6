import math

import numpy as np
import pytest
from hypothesis import given

from flagbench.circuit import Circuit
from flagbench.code513 import ideal_prep_circuit
from flagbench.qasm import SourceError, format_param, parse, serialize
from flagbench.transpile import fixtures

from helpers import full_circuits


def test_minimal_program():
    c = parse("qreg q[2]; creg c[2]; cx q[0],q[1];")
    assert c.num_qubits == 2 and c.num_clbits == 2
    assert [i.name for i in c.instructions] == ["cx"]


def test_header_comments_and_whitespace():
    text = """OPENQASM 2.0;
include "qelib1.inc";  // standard header
qreg q[1];
creg c[1];
u2(0, pi/2)   q[0] ;
measure q[0] -> c[0];
"""
    c = parse(text)
    assert c.instructions[0].params == pytest.approx((0.0, math.pi / 2))
    assert c.instructions[1].kind == "measure"


def test_conditional_gate():
    c = parse("qreg q[1]; creg c[1]; measure q[0] -> c[0]; if(c[0]==1) x q[0];")
    assert c.instructions[1].condition == 0


def test_unknown_gate_position():
    with pytest.raises(SourceError) as err:
        parse("qreg q[1];\n  foo q[0];")
    assert "foo" in str(err.value)
    assert (err.value.line, err.value.column) == (2, 3)


@pytest.mark.parametrize(
    "text",
    [
        "qreg q[1]; x r[0];",  # undeclared register
        "qreg q[2]; cx q[0];",  # wrong arity
        "qreg q[1]; u3(0.1, 0.2) q[0];",  # wrong parameter count
        "qreg q[1]; x q[0]",  # missing semicolon
        "qreg q[1]; creg c[1]; if(c[0]==1) x q[0];",  # condition on unwritten bit
        "qreg q[1]; qreg r[1];",  # second register
    ],
)
def test_errors_are_source_errors(text):
    with pytest.raises(SourceError):
        parse(text)


def test_empty_circuit():
    assert serialize(Circuit(1)) == 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[1];\n'


def test_prep_round_trip():
    c = ideal_prep_circuit()
    assert parse(serialize(c)) == c


def test_u3_precision():
    theta, phi, lam = 0.123456789012345, -2.718281828459045, 1e-7 * math.pi + 0.3
    c = Circuit(1).u3(theta, phi, lam, 0)
    back = parse(serialize(c)).instructions[0].params
    assert np.max(np.abs(np.array(back) - [theta, phi, lam])) < 1e-11


def test_pi_multiples():
    assert format_param(math.pi / 2) == "pi/2"
    assert format_param(-3 * math.pi / 4) == "-3*pi/4"
    assert format_param(0.5) == "0.5"


@pytest.mark.parametrize("name", sorted(fixtures()))
def test_fixture_round_trip(name):
    c = fixtures()[name].circuit
    text = serialize(c)
    assert parse(text) == c
    assert serialize(parse(text)) == text


@given(full_circuits())
def test_round_trip_property(c):
    text = serialize(c)
    back = parse(text)
    assert back == c
    assert serialize(back) == text
    assert serialize(c.copy()) == text
