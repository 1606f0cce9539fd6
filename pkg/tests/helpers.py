"""Shared generators for the test suite."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from flagbench.circuit import GATE_SPECS, Circuit, Instruction

ONE_QUBIT = sorted(n for n, (nq, _) in GATE_SPECS.items() if nq == 1)
TWO_QUBIT = sorted(n for n, (nq, _) in GATE_SPECS.items() if nq == 2)

# path through the Melbourne ladder; 5-wide windows stay compact when routed
MELBOURNE_PATH = (0, 1, 2, 3, 4, 5, 6, 8, 9, 10, 11, 12, 13, 14)


def random_gate(rng: np.random.Generator, n: int, two_qubit_prob: float = 0.4) -> Instruction:
    if n > 1 and rng.random() < two_qubit_prob:
        a, b = rng.choice(n, size=2, replace=False)
        return Instruction.gate(TWO_QUBIT[rng.integers(len(TWO_QUBIT))], [int(a), int(b)])
    name = ONE_QUBIT[rng.integers(len(ONE_QUBIT))]
    params = rng.uniform(-np.pi, np.pi, GATE_SPECS[name][1])
    return Instruction.gate(name, [int(rng.integers(n))], params)


def random_unitary_circuit(rng: np.random.Generator, n: int, length: int) -> Circuit:
    c = Circuit(n, 0)
    for _ in range(length):
        c.append(random_gate(rng, n))
    return c


def random_full_circuit(rng: np.random.Generator, n: int, length: int) -> Circuit:
    """Gates plus barriers, resets, basis measurements and conditioned gates."""
    c = Circuit(n, n)
    written: list[int] = []
    for _ in range(length):
        r = rng.random()
        if r < 0.08:
            qs = sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
            c.barrier(*qs)
        elif r < 0.14:
            c.reset(int(rng.integers(n)))
        elif r < 0.24:
            cb = int(rng.integers(n))
            c.measure(int(rng.integers(n)), cb, "XYZ"[rng.integers(3)])
            written.append(cb)
        elif r < 0.30 and written:
            g = random_gate(rng, n, 0.3)
            c.append(Instruction.gate(g.name, g.qubits, g.params, condition=written[rng.integers(len(written))]))
        else:
            c.append(random_gate(rng, n))
    return c


@st.composite
def unitary_circuits(draw, max_qubits: int = 4, max_len: int = 12):
    n = draw(st.integers(1, max_qubits))
    seed = draw(st.integers(0, 2**32 - 1))
    length = draw(st.integers(0, max_len))
    return random_unitary_circuit(np.random.default_rng(seed), n, length)


@st.composite
def full_circuits(draw, max_qubits: int = 5, max_len: int = 25):
    n = draw(st.integers(1, max_qubits))
    seed = draw(st.integers(0, 2**32 - 1))
    length = draw(st.integers(0, max_len))
    return random_full_circuit(np.random.default_rng(seed), n, length)


def random_state_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    d = 2**n
    k = rank or d
    a = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = a @ a.conj().T
    return m / np.trace(m).real
