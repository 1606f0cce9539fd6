"""The [[5,1,3]] perfect code: generators, logicals, syndromes and decoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .circuit import Circuit
from .quantum import DensityMatrix, PauliString, StateVector, as_density, permute_qubits, symplectic_product

GENERATOR_LABELS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")
PREP_VARIANTS = ("ideal-depth3", "melbourne-depth4", "melbourne-depth6", "vigo")
CYCLE_EDGES = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 0))


@dataclass(frozen=True)
class StabilizerCode:
    n: int
    k: int
    d: int
    generators: tuple[PauliString, ...]
    logical_x: PauliString
    logical_z: PauliString

    def __post_init__(self):
        gens = self.generators
        if any(g.num_qubits != self.n for g in gens):
            raise ValueError("generator length mismatch")
        for a, b in itertools.combinations(gens, 2):
            if not a.commutes(b):
                raise ValueError(f"generators {a} and {b} anticommute")
        for g in gens:
            if not (g.commutes(self.logical_x) and g.commutes(self.logical_z)):
                raise ValueError(f"logical operator anticommutes with {g}")
        if self.logical_x.commutes(self.logical_z):
            raise ValueError("logical X and Z must anticommute")
        mat = np.array([np.concatenate(g.symplectic()) for g in gens], dtype=np.uint8)
        if _gf2_rank(mat) != len(gens):
            raise ValueError("generators are not independent")

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    def stabilizer_group(self) -> list[PauliString]:
        """All 2^(n-k) signed elements of the stabilizer group."""
        out = []
        for bits in itertools.product((0, 1), repeat=len(self.generators)):
            p = PauliString.identity(self.n)
            for b, g in zip(bits, self.generators):
                if b:
                    p = p * g
            out.append(p)
        return out


def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy() % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, c]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


@lru_cache(maxsize=None)
def five_qubit_code() -> StabilizerCode:
    """Cyclic generators XZZXI, IXZZX, XIXZZ, ZXIXZ with X_L = XXXXX, Z_L = ZZZZZ."""
    return StabilizerCode(
        5,
        1,
        3,
        tuple(PauliString.parse(g) for g in GENERATOR_LABELS),
        PauliString.parse("XXXXX"),
        PauliString.parse("ZZZZZ"),
    )


class Syndrome(NamedTuple):
    bits: tuple[int, ...]

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str) -> "Syndrome":
        return cls(tuple(int(b) for b in bits))

    @property
    def trivial(self) -> bool:
        return not any(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def syndrome_of(err: PauliString, code: StabilizerCode | None = None) -> Syndrome:
    code = code or five_qubit_code()
    if err.num_qubits != code.n:
        raise ValueError(f"error acts on {err.num_qubits} qubits, code has {code.n}")
    return Syndrome(tuple(symplectic_product(err, g) for g in code.generators))


def weight_one_errors(n: int = 5) -> list[PauliString]:
    return [PauliString.single(n, q, p) for q in range(n) for p in "XYZ"]


@lru_cache(maxsize=None)
def _decoder_table() -> dict[tuple[int, ...], PauliString]:
    table = {(0, 0, 0, 0): PauliString.identity(5)}
    for e in weight_one_errors():
        s = syndrome_of(e).bits
        if s in table:
            raise AssertionError("weight-1 syndromes collide")
        table[s] = e
    return table


def decode(s: Syndrome | Sequence[int]) -> PauliString:
    """Unique weight-<=1 Pauli with syndrome ``s``."""
    bits = tuple(int(b) for b in (s.bits if isinstance(s, Syndrome) else s))
    if len(bits) != 4:
        raise ValueError("a syndrome has 4 bits")
    return _decoder_table()[bits]


class CodestateReport(NamedTuple):
    generators: tuple[float, ...]
    logical_x: float
    logical_z: float


def verify_codestate(state, code: StabilizerCode | None = None) -> CodestateReport:
    code = code or five_qubit_code()
    rho = as_density(state)
    if rho.num_qubits != code.n:
        raise ValueError(f"expected a {code.n}-qubit state, got {rho.num_qubits}")
    gens = tuple(rho.expectation(g.matrix()) for g in code.generators)
    return CodestateReport(gens, rho.expectation(code.logical_x.matrix()), rho.expectation(code.logical_z.matrix()))


@lru_cache(maxsize=None)
def _minus_logical_amplitudes() -> np.ndarray:
    amps = np.empty(32, dtype=complex)
    for idx in range(32):
        bits = [(idx >> (4 - q)) & 1 for q in range(5)]
        ones = sum(bits[a] & bits[b] for a, b in CYCLE_EDGES)
        amps[idx] = (-1) ** ones
    amps /= np.sqrt(32)
    amps.setflags(write=False)
    return amps


def minus_logical_state() -> StateVector:
    """|-_L>: the 5-cycle graph state."""
    return StateVector(5, _minus_logical_amplitudes().copy())


def plus_logical_state() -> StateVector:
    return StateVector(5, five_qubit_code().logical_z.matrix() @ _minus_logical_amplitudes())


def ideal_prep_circuit() -> Circuit:
    """Graph-state preparation: H on all qubits, then CZs in three layers."""
    c = Circuit(5, 0, metadata={"name": "ideal-depth3", "output_order": (0, 1, 2, 3, 4)})
    for q in range(5):
        c.h(q)
    for a, b in ((0, 1), (2, 3), (1, 2), (3, 4), (4, 0)):
        c.cz(a, b)
    return c


def prep_minus_logical(variant: str = "ideal-depth3") -> Circuit:
    """Circuit preparing |-_L>.

    ``metadata["output_order"][i]`` is the circuit wire that carries logical
    data qubit ``i`` at the end of the circuit; ``metadata["wires"]`` gives
    the device qubit of each wire for routed variants.
    """
    if variant == "ideal-depth3":
        return ideal_prep_circuit()
    names = {
        "melbourne-depth4": "melbourne-prep-depth4",
        "melbourne-depth6": "melbourne-prep-depth6",
        "vigo": "vigo-prep",
    }
    if variant not in names:
        raise ValueError(f"unknown prep variant {variant!r}; choose from {PREP_VARIANTS}")
    from .transpile import fixtures

    routed = fixtures()[names[variant]]
    c = routed.circuit.copy()
    c.metadata.update(
        name=variant,
        output_order=routed.output_order(),
        wires=tuple(routed.wires),
        initial_layout=tuple(routed.initial_layout),
        final_permutation=tuple(routed.final_permutation),
    )
    return c


def data_state(rho, output_order: Sequence[int]) -> DensityMatrix:
    """Reorder (and trace down to) the wires listed in ``output_order``."""
    from .quantum import partial_trace

    rho = as_density(rho)
    order = list(output_order)
    reduced = partial_trace(rho, sorted(order))
    rank = {w: i for i, w in enumerate(sorted(order))}
    return permute_qubits(reduced, [rank[w] for w in order])
