"""Flag-based correction protocols on |-_L>.

Two runners share the bookkeeping in :class:`ProtocolResult`:

* :func:`run_ideal_protocol` assumes a simulator with mid-circuit reset and
  classical feed-forward. Preparation is verified by flagged extraction of
  three generators (any nonzero outcome rejects the shot). The four
  generators are then extracted with flags; the first raised flag escalates
  to unflagged extraction of all four.
* :func:`run_hardware_protocol` assumes no reset and no feed-forward. Two
  circuits are executed separately and every qubit is read at the end:
  C0 extracts all four generators with flags, and C1 extracts the first with
  a flag followed by all four without. A shot whose first flag is 0 is taken
  from C0. A shot whose first flag is 1 is taken from a C1 execution that
  also raised that flag. Corrections are applied in the Pauli frame.

Both simulate shot-vectorised trajectories. The hardware circuits are wide
(13 and 11 qubits) but each ancilla only idles once its last gate is done,
so its final idle and readout are moved forward and its slot is reused
after a reset. Those ops act on that ancilla alone, so the move is exact.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit
from .code513 import decode, ideal_prep_circuit, minus_logical_state
from .flags import (
    FaultLocation,
    flag_table,
    flagged_syndrome_circuit,
    inject_fault,
    nonft_syndrome_circuit,
)
from .quantum import DensityMatrix, PauliString, apply_matrix_vec
from .simulator import Op, compile_ops, run_trajectory_ops
from .tomography import density_to_json

NUM_DATA = 5
MAX_C1_BATCHES = 200


@dataclass
class ProtocolResult:
    protocol: str
    shots: int
    branch_counts: dict  # "f0" / "f1" (and "rejected") -> number of shots
    accepted_fraction: float
    logical_fidelity: float
    conditioned_fidelity: float
    uncorrected_fidelity: float
    record_counts: dict = field(default_factory=dict)
    corrected_state: DensityMatrix | None = None
    record_states: dict = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.branch_counts.values()) != self.shots:
            raise ValueError("branch counts must sum to the shot count")
        if not 0.0 <= self.accepted_fraction <= 1.0:
            raise ValueError("accepted_fraction outside [0, 1]")

    def to_dict(self, include_state: bool = True) -> dict:
        d = {
            "protocol": self.protocol,
            "shots": self.shots,
            "branch_counts": dict(sorted(self.branch_counts.items())),
            "accepted_fraction": self.accepted_fraction,
            "logical_fidelity": self.logical_fidelity,
            "conditioned_fidelity": self.conditioned_fidelity,
            "uncorrected_fidelity": self.uncorrected_fidelity,
            "record_counts": dict(sorted(self.record_counts.items())),
        }
        if include_state and self.corrected_state is not None:
            d["corrected_state"] = density_to_json(self.corrected_state)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Shared helpers


def _minus_bra() -> np.ndarray:
    return minus_logical_state().amplitudes.conj()


def _apply_data_pauli(states: np.ndarray, p: PauliString, width: int) -> np.ndarray:
    if p.weight == 0:
        return states
    return apply_matrix_vec(states, p.matrix(), list(range(NUM_DATA)), width)


def _data_fidelity(states: np.ndarray, width: int) -> np.ndarray:
    """Per-shot fidelity of the data register (wires 0..4) to |-_L>.

    Valid whenever every other wire has been measured, so the shot is a
    product of data and ancilla basis states.
    """
    t = states.reshape(states.shape[0], 2**NUM_DATA, 2 ** (width - NUM_DATA))
    amp = np.einsum("i,sij->sj", _minus_bra(), t)
    return np.sum(np.abs(amp) ** 2, axis=1)


def _data_density(states: np.ndarray, width: int) -> np.ndarray:
    t = states.reshape(states.shape[0], 2**NUM_DATA, 2 ** (width - NUM_DATA))
    return np.einsum("sij,skj->ik", t, t.conj())


class _Accumulator:
    """Collects per-shot corrected states grouped by syndrome record."""

    def __init__(self):
        self.fid: list[np.ndarray] = []
        self.raw: list[np.ndarray] = []
        self.accepted: list[np.ndarray] = []
        self.records: Counter = Counter()
        self.rho_sum = np.zeros((2**NUM_DATA, 2**NUM_DATA), dtype=complex)
        self.record_rho: dict[str, np.ndarray] = {}

    def add(self, states, width, key: str, correction: PauliString, accepted: bool):
        if states.shape[0] == 0:
            return
        self.raw.append(_data_fidelity(states, width))
        fixed = _apply_data_pauli(states, correction, width)
        f = _data_fidelity(fixed, width)
        self.fid.append(f)
        self.accepted.append(np.full(len(f), accepted))
        self.records[key] += len(f)
        rho = _data_density(fixed, width)
        self.rho_sum += rho
        self.record_rho[key] = self.record_rho.get(key, 0) + rho

    def finish(self, name: str, shots: int, branch_counts: dict, accepted_fraction: float) -> ProtocolResult:
        fid = np.concatenate(self.fid) if self.fid else np.zeros(0)
        raw = np.concatenate(self.raw) if self.raw else np.zeros(0)
        acc = np.concatenate(self.accepted) if self.accepted else np.zeros(0, dtype=bool)
        total = len(fid)

        def mean(x):
            return float(np.mean(x)) if len(x) else float("nan")

        def density(m, k):
            m = m / k
            return DensityMatrix(NUM_DATA, (m + m.conj().T) / 2)

        return ProtocolResult(
            name,
            shots,
            branch_counts,
            accepted_fraction,
            mean(fid),
            mean(fid[acc]),
            mean(raw),
            dict(self.records),
            density(self.rho_sum, total) if total else None,
            {k: density(v, self.records[k]) for k, v in self.record_rho.items()},
        )


def _bits(clbits: np.ndarray, cols: Sequence[int]) -> list[str]:
    return ["".join(str(int(b)) for b in row) for row in clbits[:, list(cols)]]


# ---------------------------------------------------------------------------
# Hardware-faithful protocol


def _extraction(kind: str, gi: int, qubits, clbits, width: int, ncl: int) -> Circuit:
    if kind == "flagged":
        return flagged_syndrome_circuit(
            generator_index=gi,
            syndrome_qubit=qubits[0],
            flag_qubit=qubits[1],
            num_qubits=width,
            syndrome_clbit=clbits[0],
            flag_clbit=clbits[1],
            num_clbits=ncl,
        ).circuit
    return nonft_syndrome_circuit(
        generator_index=gi, syndrome_qubit=qubits[0], num_qubits=width, syndrome_clbit=clbits[0], num_clbits=ncl
    ).circuit


def hardware_circuits() -> dict[str, Circuit]:
    """The two circuits executed by :func:`run_hardware_protocol`.

    Qubits 0-4 hold data. Ancillas are fresh for each extraction. Clbit
    layout in C0 is (s0 f0 s1 f1 s2 f2 s3 f3, d0..d4); in C1 it is
    (s0 f0, t0 t1 t2 t3, d0..d4) with ``t`` the unflagged syndrome bits.
    """
    prep = ideal_prep_circuit()
    out = {}
    # C0: flagged extraction of every generator
    width, ncl = NUM_DATA + 8, 8 + NUM_DATA
    c = Circuit(width, ncl).compose(prep)
    for g in range(4):
        syn, flag = NUM_DATA + 2 * g, NUM_DATA + 2 * g + 1
        c.barrier(*range(NUM_DATA), syn, flag)
        c = c.compose(_extraction("flagged", g, (syn, flag), (2 * g, 2 * g + 1), width, ncl))
    for d in range(NUM_DATA):
        c.measure(d, 8 + d)
    c.metadata.update(name="hardware-C0", data_clbits=tuple(range(8, 8 + NUM_DATA)))
    out["C0"] = c
    # C1: flagged first generator, then all four unflagged
    width, ncl = NUM_DATA + 6, 6 + NUM_DATA
    c = Circuit(width, ncl).compose(prep)
    c.barrier(*range(NUM_DATA), 5, 6)
    c = c.compose(_extraction("flagged", 0, (5, 6), (0, 1), width, ncl))
    for g in range(4):
        c.barrier(*range(NUM_DATA), 7 + g)
        c = c.compose(_extraction("nonft", g, (7 + g,), (2 + g,), width, ncl))
    for d in range(NUM_DATA):
        c.measure(d, 6 + d)
    c.metadata.update(name="hardware-C1", data_clbits=tuple(range(6, 6 + NUM_DATA)))
    out["C1"] = c
    return out


def compact_ops(ops: list[Op], n: int, keep: Sequence[int]) -> tuple[list[Op], int]:
    """Reorder and relabel compiled ops onto a small register.

    Wires in ``keep`` (the data) occupy slots 0.. in order and their
    readouts are dropped, so the final state still holds them. Any other
    wire's trailing single-wire ops (idle channels and its readout) are
    moved to just after its last multi-op interaction, then its slot is
    released and reused behind a reset.
    """
    keep = list(keep)
    last_active: dict[int, int] = {}
    for i, op in enumerate(ops):
        solo = op.kind in ("k", "m") and len(op.targets) == 1
        for q in op.targets:
            if q not in keep and not solo:
                last_active[q] = i
    moved: dict[int, list[Op]] = {}
    body: list[tuple[int, Op]] = []
    for i, op in enumerate(ops):
        if op.kind == "m" and op.targets[0] in keep:
            continue
        q = op.targets[0]
        if len(op.targets) == 1 and q not in keep and op.kind in ("k", "m") and i > last_active.get(q, -1):
            moved.setdefault(last_active.get(q, -1), []).append(op)
            continue
        body.append((i, op))
    ordered: list[Op] = list(moved.get(-1, []))
    for i, op in body:
        ordered.append(op)
        ordered.extend(moved.get(i, []))

    last_use: dict[int, int] = {}
    for k, op in enumerate(ordered):
        for q in op.targets:
            last_use[q] = k
    slot = {q: s for s, q in enumerate(keep)}
    free: list[int] = []
    dirty: set[int] = set()
    width = len(keep)
    out: list[Op] = []
    for k, op in enumerate(ordered):
        for q in op.targets:
            if q not in slot:
                if free:
                    s = free.pop(0)
                else:
                    s, width = width, width + 1
                if s in dirty:
                    out.append(Op("r", op.index, (s,)))
                slot[q] = s
        out.append(op._replace(targets=tuple(slot[q] for q in op.targets)))
        for q in op.targets:
            if q not in keep and last_use[q] == k:
                s = slot.pop(q)
                dirty.add(s)
                free.append(s)
                free.sort()
    return out, width


def _run_compact(c: Circuit, noise, shots: int, rng: np.random.Generator):
    ops, width = compact_ops(compile_ops(c, noise), c.num_qubits, range(NUM_DATA))
    states = np.zeros((shots, 2**width), dtype=complex)
    states[:, 0] = 1
    clbits = np.zeros((shots, c.num_clbits), dtype=np.uint8)
    states, clbits = run_trajectory_ops(ops, width, states, clbits, rng)
    return states, clbits, width


def run_hardware_protocol(noise=None, shots: int = 1024, seed=None, noise_c1=None) -> ProtocolResult:
    """Branching done in post-processing over separately executed circuits.

    ``noise`` is indexed by the qubits of C0 (13 wires); ``noise_c1``
    defaults to ``noise`` and is indexed by the 11 wires of C1.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    circuits = hardware_circuits()
    noise_c1 = noise if noise_c1 is None else noise_c1
    ss = np.random.SeedSequence(seed)
    rng0, rng1 = (np.random.default_rng(s) for s in ss.spawn(2))
    acc = _Accumulator()

    states, clbits, width = _run_compact(circuits["C0"], noise, shots, rng0)
    first = clbits[:, 0:2]
    accepted = (first == 0).all(axis=1)
    f0 = first[:, 1] == 0
    keys = _bits(clbits, range(8))
    groups: dict[str, list[int]] = {}
    for i in np.flatnonzero(f0):
        groups.setdefault(keys[i], []).append(i)
    for key, rows in sorted(groups.items()):
        syndrome = tuple(int(key[2 * g]) for g in range(4))
        acc.add(states[rows], width, f"f0:{key}", decode(syndrome), bool(accepted[rows[0]]))
    n1 = int(shots - f0.sum())

    taken = 0
    batches = 0
    while taken < n1:
        batches += 1
        if batches > MAX_C1_BATCHES:
            raise RuntimeError("C1 never raised its first flag; cannot fill the f=1 branch")
        st1, cl1, w1 = _run_compact(circuits["C1"], noise_c1, max(shots, 64), rng1)
        hits = np.flatnonzero(cl1[:, 1] == 1)[: n1 - taken]
        taken += len(hits)
        keys1 = _bits(cl1, range(6))
        groups = {}
        for i in hits:
            groups.setdefault(keys1[i], []).append(i)
        for key, rows in sorted(groups.items()):
            syndrome = tuple(int(b) for b in key[2:6])
            acc.add(st1[rows], w1, f"f1:{key}", flag_table(0)[syndrome], False)

    return acc.finish("hardware", shots, {"f0": int(f0.sum()), "f1": n1}, float(accepted.mean()))


# ---------------------------------------------------------------------------
# Ideal protocol with reset and feed-forward

IDEAL_WIDTH = NUM_DATA + 2
VERIFY_GENERATORS = (0, 1, 2)


def _segment(kind: str, gi: int) -> Circuit:
    if kind == "flagged":
        ec = flagged_syndrome_circuit(generator_index=gi, num_qubits=IDEAL_WIDTH, num_clbits=2, reset=True)
    else:
        ec = nonft_syndrome_circuit(generator_index=gi, num_qubits=IDEAL_WIDTH, num_clbits=2, reset=True)
    return ec.circuit


@dataclass(frozen=True)
class InjectedFault:
    """A single Pauli placed in one protocol segment.

    Segment names: ``prep``, ``verify-<g>``, ``main-<g>`` and ``nonft-<g>``.
    ``location`` indexes the instructions of that segment's circuit.
    """

    segment: str
    location: FaultLocation


def ideal_segments() -> dict[str, Circuit]:
    segs = {"prep": ideal_prep_circuit().widen(IDEAL_WIDTH, 2)}
    for g in VERIFY_GENERATORS:
        segs[f"verify-{g}"] = _segment("flagged", g)
    for g in range(4):
        segs[f"main-{g}"] = _segment("flagged", g)
        segs[f"nonft-{g}"] = _segment("nonft", g)
    return segs


def run_ideal_protocol(noise=None, shots: int = 1024, seed=None, fault: InjectedFault | None = None) -> ProtocolResult:
    """Verified preparation, then flagged extraction with escalation.

    ``noise`` is indexed by the 7-wire register: data 0-4, syndrome 5,
    flag 6. ``accepted_fraction`` is the fraction passing verification;
    fidelities are over accepted shots only.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    segs = ideal_segments()
    if fault is not None:
        if fault.segment not in segs:
            raise ValueError(f"unknown segment {fault.segment!r}")
        segs[fault.segment] = inject_fault(segs[fault.segment], fault.location)
    compiled = {k: compile_ops(v, noise) for k, v in segs.items()}
    rng = np.random.default_rng(seed)
    n = IDEAL_WIDTH

    states = np.zeros((shots, 2**n), dtype=complex)
    states[:, 0] = 1
    clbits = np.zeros((shots, 2), dtype=np.uint8)

    def run(name, idx):
        sub, cl = run_trajectory_ops(compiled[name], n, states[idx].copy(), clbits[idx].copy(), rng)
        states[idx] = sub
        return cl

    alive = np.arange(shots)
    run("prep", alive)
    for g in VERIFY_GENERATORS:
        cl = run(f"verify-{g}", alive)
        alive = alive[(cl == 0).all(axis=1)]
        if len(alive) == 0:
            break
    n_acc = len(alive)

    syndrome = np.zeros((shots, 4), dtype=np.uint8)
    flagged_at = np.full(shots, -1)
    pending = alive
    for g in range(4):
        if len(pending) == 0:
            break
        cl = run(f"main-{g}", pending)
        syndrome[pending, g] = cl[:, 0]
        raised = pending[cl[:, 1] == 1]
        flagged_at[raised] = g
        for h in range(4):
            if len(raised) == 0:
                break
            cl2 = run(f"nonft-{h}", raised)
            syndrome[raised, h] = cl2[:, 0]
        pending = pending[cl[:, 1] == 0]

    acc = _Accumulator()
    groups: dict[tuple[int, str], list[int]] = {}
    for i in alive:
        groups.setdefault((int(flagged_at[i]), "".join(map(str, syndrome[i]))), []).append(i)
    for (fg, bits), rows in sorted(groups.items()):
        s = tuple(int(b) for b in bits)
        corr = decode(s) if fg < 0 else flag_table(fg)[s]
        key = f"{'flag' + str(fg) if fg >= 0 else 'noflag'}:{bits}"
        acc.add(states[rows], n, key, corr, True)
    f1 = int((flagged_at[alive] >= 0).sum())
    branches = {"f0": n_acc - f1, "f1": f1, "rejected": shots - n_acc}
    return acc.finish("ideal", shots, branches, n_acc / shots)
