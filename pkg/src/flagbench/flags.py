"""Flagged and unflagged syndrome extraction, single-fault enumeration and
flag-aware correction tables."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import Circuit, Instruction
from .code513 import StabilizerCode, decode, five_qubit_code, minus_logical_state, plus_logical_state, syndrome_of
from .quantum import DensityMatrix, PauliString, apply_matrix_rho, apply_matrix_vec, as_density, basis_change

DEFAULT_DATA = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class ExtractionCircuit:
    circuit: Circuit
    data_qubits: tuple[int, ...]
    syndrome_qubit: int
    flag_qubit: int | None
    generator: PauliString
    generator_index: int
    syndrome_clbit: int = 0
    flag_clbit: int | None = None

    @property
    def flagged(self) -> bool:
        return self.flag_qubit is not None


def _coupling(c: Circuit, letter: str, d: int, s: int) -> None:
    """Copy the ``letter`` eigenvalue of data qubit ``d`` onto target ``s``."""
    if letter == "Z":
        c.cx(d, s)
    elif letter == "X":
        c.h(d)
        c.cx(d, s)
        c.h(d)
    elif letter == "Y":
        c.sdg(d)
        c.h(d)
        c.cx(d, s)
        c.h(d)
        c.s(d)
    else:
        raise ValueError(f"no coupling for letter {letter!r}")


def _setup(code, generator_index, data_qubits, qubits, num_qubits, num_clbits, clbits):
    code = code or five_qubit_code()
    if not 0 <= generator_index < code.num_generators:
        raise ValueError(f"generator index {generator_index} out of range")
    data_qubits = tuple(int(q) for q in data_qubits)
    every = list(data_qubits) + [q for q in qubits if q is not None]
    if len(set(every)) != len(every):
        raise ValueError("data, syndrome and flag qubits must be distinct")
    width = max(every) + 1 if num_qubits is None else num_qubits
    ncl = max(clbits) + 1 if num_clbits is None else num_clbits
    return code, data_qubits, Circuit(width, ncl)


def nonft_syndrome_circuit(
    code: StabilizerCode | None = None,
    generator_index: int = 0,
    data_qubits: Sequence[int] = DEFAULT_DATA,
    syndrome_qubit: int = 5,
    *,
    num_qubits: int | None = None,
    syndrome_clbit: int = 0,
    num_clbits: int | None = None,
    reset: bool = False,
) -> ExtractionCircuit:
    """Unflagged extraction: one coupling per non-identity letter, in data order."""
    code, data_qubits, c = _setup(code, generator_index, data_qubits, [syndrome_qubit], num_qubits, num_clbits, [syndrome_clbit])
    g = code.generators[generator_index]
    if reset:
        c.reset(syndrome_qubit)
    for pos, letter in enumerate(g.letters):
        if letter != "I":
            _coupling(c, letter, data_qubits[pos], syndrome_qubit)
    c.measure(syndrome_qubit, syndrome_clbit)
    c.metadata["name"] = f"nonft-{g}"
    return ExtractionCircuit(c, data_qubits, syndrome_qubit, None, g, generator_index, syndrome_clbit)


def flagged_syndrome_circuit(
    code: StabilizerCode | None = None,
    generator_index: int = 0,
    data_qubits: Sequence[int] = DEFAULT_DATA,
    syndrome_qubit: int = 5,
    flag_qubit: int = 6,
    *,
    num_qubits: int | None = None,
    syndrome_clbit: int = 0,
    flag_clbit: int = 1,
    num_clbits: int | None = None,
    reset: bool = False,
) -> ExtractionCircuit:
    """Flagged extraction: the flag (prepared in |+>) couples to the syndrome
    qubit after the first and before the last data coupling and is read in X."""
    code, data_qubits, c = _setup(
        code, generator_index, data_qubits, [syndrome_qubit, flag_qubit], num_qubits, num_clbits, [syndrome_clbit, flag_clbit]
    )
    g = code.generators[generator_index]
    support = [pos for pos, letter in enumerate(g.letters) if letter != "I"]
    if reset:
        c.reset(syndrome_qubit)
        c.reset(flag_qubit)
    c.h(flag_qubit)
    for k, pos in enumerate(support):
        if k == len(support) - 1 and len(support) > 1:
            c.cx(flag_qubit, syndrome_qubit)
        _coupling(c, g.letters[pos], data_qubits[pos], syndrome_qubit)
        if k == 0 and len(support) > 1:
            c.cx(flag_qubit, syndrome_qubit)
    c.measure(syndrome_qubit, syndrome_clbit)
    c.measure(flag_qubit, flag_clbit, basis="X")
    c.metadata["name"] = f"flagged-{g}"
    return ExtractionCircuit(c, data_qubits, syndrome_qubit, flag_qubit, g, generator_index, syndrome_clbit, flag_clbit)


# ---------------------------------------------------------------------------
# Fault enumeration


@dataclass(frozen=True)
class FaultLocation:
    """A single Pauli fault on ``qubit`` right after instruction
    ``instruction_index`` (for a measurement: right before the readout)."""

    instruction_index: int
    qubit: int
    pauli: str

    def to_dict(self) -> dict:
        return {"instruction_index": self.instruction_index, "qubit": self.qubit, "pauli": self.pauli}


@dataclass(frozen=True)
class FaultBranch:
    syndrome: int
    flag: int
    probability: float
    residual: PauliString


@dataclass(frozen=True)
class FaultRecord:
    location: FaultLocation
    branches: tuple[FaultBranch, ...]

    @property
    def _main(self) -> FaultBranch:
        return max(self.branches, key=lambda b: b.probability)

    @property
    def flag_raised(self) -> bool:
        return all(b.flag == 1 for b in self.branches if b.probability > 1e-9)

    @property
    def syndrome_flipped(self) -> bool:
        return self._main.syndrome == 1

    @property
    def residual(self) -> PauliString:
        return self._main.residual

    @property
    def dangerous(self) -> bool:
        return any(b.flag == 0 and b.residual.weight >= 2 for b in self.branches if b.probability > 1e-9)

    def to_dict(self) -> dict:
        return {
            "location": self.location.to_dict(),
            "flag_raised": self.flag_raised,
            "syndrome_flipped": self.syndrome_flipped,
            "residual": str(self.residual),
            "branches": [
                {"syndrome": b.syndrome, "flag": b.flag, "probability": round(b.probability, 12), "residual": str(b.residual)}
                for b in self.branches
            ],
        }


@dataclass(frozen=True)
class FaultReport:
    circuit_name: str
    records: tuple[FaultRecord, ...]

    @property
    def dangerous(self) -> list[FaultRecord]:
        return [r for r in self.records if r.dangerous]

    def by_location(self) -> dict[FaultLocation, FaultRecord]:
        return {r.location: r for r in self.records}

    def to_dict(self) -> dict:
        return {
            "circuit": self.circuit_name,
            "records": [r.to_dict() for r in self.records],
            "dangerous": [r.location.to_dict() for r in self.dangerous],
        }


def fault_locations(c: Circuit) -> list[FaultLocation]:
    out = []
    for idx, ins in enumerate(c.instructions):
        if ins.kind in ("gate", "measure", "reset"):
            for q in ins.qubits:
                for p in "XYZ":
                    out.append(FaultLocation(idx, q, p))
    return out


def inject_fault(c: Circuit, loc: FaultLocation) -> Circuit:
    """Copy of ``c`` with the fault inserted as an explicit Pauli gate."""
    ins = list(c.instructions)
    fault = Instruction.gate(loc.pauli.lower(), [loc.qubit])
    pos = loc.instruction_index if ins[loc.instruction_index].kind == "measure" else loc.instruction_index + 1
    ins.insert(pos, fault)
    return Circuit(c.num_qubits, c.num_clbits, ins, dict(c.metadata))


def _run_pure_branches(c: Circuit, vec: np.ndarray, n: int) -> dict[tuple, np.ndarray]:
    """Noiseless pure-state evolution with exact branching on measurements."""
    branches = {(0,) * c.num_clbits: vec}
    for ins in c.instructions:
        if ins.kind == "barrier":
            continue
        new = {}
        for key, v in branches.items():
            if ins.kind == "gate":
                if ins.condition is not None and key[ins.condition] != 1:
                    new[key] = v
                    continue
                new[key] = apply_matrix_vec(v, ins.matrix(), ins.qubits, n)
            elif ins.kind in ("measure", "reset"):
                q = ins.qubits[0]
                rot = basis_change(ins.basis) if ins.kind == "measure" else None
                w = apply_matrix_vec(v, rot, [q], n) if rot is not None else v
                t = w.reshape((2,) * n)
                for b in (0, 1):
                    part = np.zeros_like(t)
                    sl = [slice(None)] * n
                    sl[q] = b
                    part[tuple(sl)] = t[tuple(sl)]
                    part = part.reshape(-1)
                    if np.vdot(part, part).real < 1e-14:
                        continue
                    if ins.kind == "reset":
                        if b == 1:
                            part = apply_matrix_vec(part, np.array([[0, 1], [1, 0]], dtype=complex), [q], n)
                        new[key] = new[key] + part if key in new else part
                        continue
                    if rot is not None:
                        part = apply_matrix_vec(part, rot.conj().T, [q], n)
                    nk = list(key)
                    nk[ins.clbit] = b
                    new[tuple(nk)] = part
        branches = new
    return branches


@lru_cache(maxsize=None)
def _references() -> tuple[np.ndarray, list[PauliString]]:
    """The 64 states E|Phi> (data + reference qubit), one per coset of the
    stabilizer group in the Pauli group, and their coset representatives."""
    code = five_qubit_code()
    phi = _references_phi()
    logicals = [
        PauliString.identity(5),
        code.logical_x,
        code.logical_z,
        code.logical_x.mul_unsigned(code.logical_z),
    ]
    reps, vecs = [], []
    for bits in itertools.product((0, 1), repeat=4):
        e = decode(bits)
        for lg in logicals:
            rep = e.mul_unsigned(lg)
            reps.append(rep)
            vecs.append(apply_matrix_vec(phi, rep.matrix(), list(range(5)), 6))
    return np.array(vecs), reps


@lru_cache(maxsize=None)
def min_weight_representative(p: PauliString) -> PauliString:
    """Lowest-weight element of ``p`` times the stabilizer group (unsigned)."""
    best = None
    for s in five_qubit_code().stabilizer_group():
        q = p.unsigned().mul_unsigned(s.unsigned())
        key = (q.weight, str(q))
        if best is None or key < best[0]:
            best = (key, q)
    return best[1]


def identify_residual(data_ref_state: np.ndarray) -> PauliString:
    """Residual data Pauli (mod stabilizers) of a data+reference pure state."""
    refs, reps = _references()
    ov = np.abs(refs.conj() @ data_ref_state) ** 2
    k = int(np.argmax(ov))
    if ov[k] < 1 - 1e-6:
        raise ValueError(f"post-fault state is not a Pauli image of the code state (overlap {ov[k]:.3g})")
    return min_weight_representative(reps[k])


def enumerate_single_faults(ec: ExtractionCircuit, locations: Sequence[FaultLocation] | None = None) -> FaultReport:
    """Inject each single Pauli fault and classify its effect.

    The data register starts maximally entangled with a reference qubit on
    the logical subspace, so the residual error is identified for every code
    state at once, logical errors included.
    """
    c = ec.circuit
    width = c.num_qubits + 1
    ref = c.num_qubits
    if len(ec.data_qubits) != 5:
        raise ValueError("extraction circuit must act on 5 data qubits")
    others = [q for q in range(c.num_qubits) if q not in ec.data_qubits]
    src = list(ec.data_qubits) + [ref] + others
    zeros = np.zeros(2 ** len(others), dtype=complex)
    zeros[0] = 1
    full = np.kron(_references_phi(), zeros).reshape((2,) * width)
    init = np.transpose(full, [src.index(w) for w in range(width)]).reshape(-1)

    locs = fault_locations(c) if locations is None else list(locations)
    records = []
    keep = list(ec.data_qubits) + [ref]
    anc = [q for q in range(width) if q not in keep]
    for loc in locs:
        branches = _run_pure_branches(inject_fault(c, loc), init, width)
        out = []
        for key, v in sorted(branches.items()):
            prob = float(np.vdot(v, v).real)
            t = np.transpose(v.reshape((2,) * width), keep + anc).reshape(64, -1)
            col = int(np.argmax(np.linalg.norm(t, axis=0)))
            state = t[:, col] / np.linalg.norm(t[:, col])
            resid = identify_residual(state)
            s = key[ec.syndrome_clbit]
            f = key[ec.flag_clbit] if ec.flag_clbit is not None and ec.flagged else 0
            out.append(FaultBranch(s, f, prob, resid))
        records.append(FaultRecord(loc, tuple(out)))
    return FaultReport(c.metadata.get("name", ""), tuple(records))


@lru_cache(maxsize=None)
def _references_phi() -> np.ndarray:
    return (np.kron(plus_logical_state().amplitudes, [1, 0]) + np.kron(minus_logical_state().amplitudes, [0, 1])) / np.sqrt(2)


# ---------------------------------------------------------------------------
# Correction tables


class FlagTableConflict(ValueError):
    pass


@lru_cache(maxsize=None)
def flag_table(generator_index: int) -> dict[tuple[int, ...], PauliString]:
    """Syndrome -> correction after the flag fired while extracting ``generator_index``.

    Built from the flag-raising single faults of the flagged circuit;
    syndromes no such fault produces fall back to the weight-<=1 decoder.
    """
    ec = flagged_syndrome_circuit(generator_index=generator_index)
    table: dict[tuple[int, ...], PauliString] = {}
    for rec in enumerate_single_faults(ec).records:
        for b in rec.branches:
            if b.flag != 1 or b.probability < 1e-9:
                continue
            s = syndrome_of(b.residual).bits
            if s in table:
                prev = table[s]
                if min_weight_representative(prev.mul_unsigned(b.residual)).weight != 0:
                    raise FlagTableConflict(f"syndrome {s}: {prev} vs {b.residual}")
                continue
            table[s] = b.residual
    for bits in itertools.product((0, 1), repeat=4):
        table.setdefault(bits, decode(bits))
    return table


@dataclass(frozen=True)
class SyndromeRecord:
    """A full 4-bit syndrome plus the generator whose flag fired (if any)."""

    bits: tuple[int, ...]
    flagged_generator: int | None = None


def correction_for(record: SyndromeRecord | Sequence[int]) -> PauliString:
    if not isinstance(record, SyndromeRecord):
        record = SyndromeRecord(tuple(int(b) for b in record))
    bits = tuple(int(b) for b in record.bits)
    if len(bits) != 4 or any(b not in (0, 1) for b in bits):
        raise ValueError(f"syndrome record {record.bits} is not 4 bits")
    if record.flagged_generator is not None:
        if not 0 <= record.flagged_generator < 4:
            raise ValueError(f"flagged generator {record.flagged_generator} out of range")
        return flag_table(record.flagged_generator)[bits]
    return decode(bits)


def apply_virtual_correction(rho, record: SyndromeRecord | Sequence[int]) -> DensityMatrix:
    """Conjugate a 5-qubit data state by the correction for ``record``."""
    rho = as_density(rho)
    if rho.num_qubits != 5:
        raise ValueError("virtual correction acts on the 5 data qubits")
    p = correction_for(record)
    if p.weight == 0:
        return rho
    m = apply_matrix_rho(rho.matrix, p.matrix(), list(range(5)), 5)
    return DensityMatrix(5, m)
