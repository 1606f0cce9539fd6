"""Circuit representation, gate/depth accounting and ASAP scheduling."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

# name -> (number of qubits, number of parameters)
GATE_SPECS: dict[str, tuple[int, int]] = {
    "id": (1, 0),
    "u1": (1, 1),
    "u2": (1, 2),
    "u3": (1, 3),
    "h": (1, 0),
    "x": (1, 0),
    "y": (1, 0),
    "z": (1, 0),
    "s": (1, 0),
    "sdg": (1, 0),
    "cx": (2, 0),
    "cz": (2, 0),
    "swap": (2, 0),
}

ENTANGLING = frozenset({"cx", "cz", "swap"})
INSTRUCTION_KINDS = ("gate", "barrier", "measure", "reset")


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


_FIXED = {
    "id": np.eye(2, dtype=complex),
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "cx": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
    "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def gate_matrix(name: str, params: Sequence[float] = ()) -> np.ndarray:
    """Unitary of a supported gate; for two-qubit gates qubit order is (control, target)."""
    if name in _FIXED:
        return _FIXED[name]
    if name == "u1":
        (lam,) = params
        return np.diag([1, np.exp(1j * lam)]).astype(complex)
    if name == "u2":
        phi, lam = params
        return u3_matrix(np.pi / 2, phi, lam)
    if name == "u3":
        return u3_matrix(*params)
    raise ValueError(f"unsupported gate {name!r}")


PARAM_ATOL = 1e-11


@dataclass(frozen=True, eq=False)
class Instruction:
    """One circuit element.

    ``condition`` (gates only) names a classical bit; the gate runs only
    when that bit reads 1. ``basis`` is the measurement basis. Equality
    compares gate parameters to within ``PARAM_ATOL`` so that text round
    trips at 12 significant digits compare equal.
    """

    kind: str
    qubits: tuple[int, ...]
    name: str = ""
    params: tuple[float, ...] = ()
    clbit: int | None = None
    basis: str = "Z"
    condition: int | None = None

    @classmethod
    def gate(cls, name: str, qubits: Sequence[int], params: Sequence[float] = (), condition: int | None = None):
        return cls("gate", tuple(int(q) for q in qubits), name, tuple(float(p) for p in params), condition=condition)

    @classmethod
    def measure(cls, qubit: int, clbit: int, basis: str = "Z"):
        return cls("measure", (int(qubit),), "measure", clbit=int(clbit), basis=basis.upper())

    @classmethod
    def reset(cls, qubit: int):
        return cls("reset", (int(qubit),), "reset")

    @classmethod
    def barrier(cls, qubits: Sequence[int]):
        return cls("barrier", tuple(int(q) for q in qubits), "barrier")

    @property
    def is_entangling(self) -> bool:
        return self.kind == "gate" and self.name in ENTANGLING

    def matrix(self) -> np.ndarray:
        return gate_matrix(self.name, self.params)

    def _key(self):
        return (self.kind, self.qubits, self.name, self.clbit, self.basis, self.condition)

    def __eq__(self, other):
        if not isinstance(other, Instruction):
            return NotImplemented
        return (
            self._key() == other._key()
            and len(self.params) == len(other.params)
            and all(abs(a - b) <= PARAM_ATOL for a, b in zip(self.params, other.params))
        )

    def __hash__(self):
        return hash(self._key())


@dataclass
class Circuit:
    num_qubits: int
    num_clbits: int = 0
    instructions: list[Instruction] = field(default_factory=list)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        items = list(self.instructions)
        self.instructions = []
        for ins in items:
            self.append(ins)

    # -- construction -----------------------------------------------------
    def append(self, ins: Instruction) -> "Circuit":
        self._check(ins, self._written_clbits())
        self.instructions.append(ins)
        return self

    def extend(self, items: Iterable[Instruction]) -> "Circuit":
        for ins in items:
            self.append(ins)
        return self

    def _written_clbits(self) -> set[int]:
        return {i.clbit for i in self.instructions if i.kind == "measure"}

    def _check(self, ins: Instruction, written: set[int]) -> None:
        if ins.kind not in INSTRUCTION_KINDS:
            raise ValueError(f"unknown instruction kind {ins.kind!r}")
        if any(q < 0 or q >= self.num_qubits for q in ins.qubits):
            raise ValueError(f"qubit out of range in {ins}")
        if len(set(ins.qubits)) != len(ins.qubits):
            raise ValueError(f"repeated qubit in {ins}")
        if ins.kind == "gate":
            if ins.name not in GATE_SPECS:
                raise ValueError(f"unsupported gate {ins.name!r}")
            nq, npar = GATE_SPECS[ins.name]
            if len(ins.qubits) != nq or len(ins.params) != npar:
                raise ValueError(f"gate {ins.name} expects {nq} qubits and {npar} params")
            if ins.condition is not None:
                if not 0 <= ins.condition < self.num_clbits:
                    raise ValueError(f"condition bit {ins.condition} out of range")
                if ins.condition not in written:
                    raise ValueError(f"condition on unwritten classical bit {ins.condition}")
        elif ins.kind == "measure":
            if ins.clbit is None or not 0 <= ins.clbit < self.num_clbits:
                raise ValueError(f"classical bit out of range in {ins}")
            if ins.basis not in ("X", "Y", "Z"):
                raise ValueError(f"unknown measurement basis {ins.basis!r}")
        elif len(ins.qubits) != 1 and ins.kind == "reset":
            raise ValueError("reset acts on one qubit")

    def validate(self) -> None:
        written: set[int] = set()
        for ins in self.instructions:
            self._check(ins, written)
            if ins.kind == "measure":
                written.add(ins.clbit)

    def _gate(self, name, qubits, params=(), condition=None):
        return self.append(Instruction.gate(name, qubits, params, condition))

    def id(self, q):
        return self._gate("id", [q])

    def h(self, q, condition=None):
        return self._gate("h", [q], condition=condition)

    def x(self, q, condition=None):
        return self._gate("x", [q], condition=condition)

    def y(self, q, condition=None):
        return self._gate("y", [q], condition=condition)

    def z(self, q, condition=None):
        return self._gate("z", [q], condition=condition)

    def s(self, q):
        return self._gate("s", [q])

    def sdg(self, q):
        return self._gate("sdg", [q])

    def u1(self, lam, q):
        return self._gate("u1", [q], [lam])

    def u2(self, phi, lam, q):
        return self._gate("u2", [q], [phi, lam])

    def u3(self, theta, phi, lam, q):
        return self._gate("u3", [q], [theta, phi, lam])

    def cx(self, c, t, condition=None):
        return self._gate("cx", [c, t], condition=condition)

    def cz(self, a, b):
        return self._gate("cz", [a, b])

    def swap(self, a, b):
        return self._gate("swap", [a, b])

    def measure(self, q, c, basis="Z"):
        return self.append(Instruction.measure(q, c, basis))

    def reset(self, q):
        return self.append(Instruction.reset(q))

    def barrier(self, *qubits):
        qs = qubits if qubits else tuple(range(self.num_qubits))
        return self.append(Instruction.barrier(qs))

    # -- derived circuits ---------------------------------------------------
    def copy(self) -> "Circuit":
        return Circuit(self.num_qubits, self.num_clbits, list(self.instructions), dict(self.metadata))

    def compose(self, other: "Circuit", qubits: Sequence[int] | None = None, clbits: Sequence[int] | None = None) -> "Circuit":
        """New circuit with ``other`` appended, its wires mapped by ``qubits``/``clbits``."""
        qmap = list(qubits) if qubits is not None else list(range(other.num_qubits))
        cmap = list(clbits) if clbits is not None else list(range(other.num_clbits))
        out = self.copy()
        for ins in other.instructions:
            out.append(
                replace(
                    ins,
                    qubits=tuple(qmap[q] for q in ins.qubits),
                    clbit=None if ins.clbit is None else cmap[ins.clbit],
                    condition=None if ins.condition is None else cmap[ins.condition],
                )
            )
        return out

    def widen(self, num_qubits: int | None = None, num_clbits: int | None = None) -> "Circuit":
        return Circuit(
            self.num_qubits if num_qubits is None else num_qubits,
            self.num_clbits if num_clbits is None else num_clbits,
            list(self.instructions),
            dict(self.metadata),
        )

    def without_measurements(self) -> "Circuit":
        return Circuit(
            self.num_qubits,
            self.num_clbits,
            [i for i in self.instructions if i.kind != "measure"],
            dict(self.metadata),
        )

    def __len__(self) -> int:
        return len(self.instructions)


# ---------------------------------------------------------------------------
# Metrics


def cnot_depth(c: Circuit) -> int:
    """Longest chain of entangling gates; barriers synchronise the listed qubits."""
    depth = [0] * c.num_qubits
    for ins in c.instructions:
        if ins.is_entangling:
            d = max(depth[q] for q in ins.qubits) + 1
            for q in ins.qubits:
                depth[q] = d
        elif ins.kind == "barrier":
            d = max(depth[q] for q in ins.qubits)
            for q in ins.qubits:
                depth[q] = d
    return max(depth, default=0)


def gate_counts(c: Circuit) -> dict[str, int]:
    return dict(Counter(ins.name for ins in c.instructions if ins.kind == "gate"))


DurationFn = Callable[[Instruction], float]


@dataclass(frozen=True)
class Schedule:
    start: tuple[float, ...]  # per instruction
    end: tuple[float, ...]
    idle_before: tuple[dict, ...]  # per instruction: {qubit: idle gap preceding it}
    makespan: float
    measure_time: dict  # qubit -> time of its last measurement


def schedule(c: Circuit, duration: DurationFn, align_measurements: bool = False) -> Schedule:
    """ASAP schedule respecting qubit dependencies and barrier fences.

    Measurements take zero time. With ``align_measurements`` every terminal
    measurement (no later instruction on that qubit) is pushed to the end
    of the schedule, as on devices that read all qubits out together.
    """
    n = c.num_qubits
    avail = [0.0] * n
    busy_end = [0.0] * n  # end of the last real operation (barriers excluded)
    starts, ends, idles = [], [], []
    measure_time: dict[int, float] = {}
    last_use = {}
    for idx, ins in enumerate(c.instructions):
        for q in ins.qubits:
            last_use[q] = idx
    for ins in c.instructions:
        if ins.kind == "barrier":
            t = max(avail[q] for q in ins.qubits)
            for q in ins.qubits:
                avail[q] = t
            starts.append(t)
            ends.append(t)
            idles.append({})
            continue
        dur = 0.0 if ins.kind == "measure" else float(duration(ins))
        t0 = max(avail[q] for q in ins.qubits)
        gaps = {q: t0 - busy_end[q] for q in ins.qubits if t0 - busy_end[q] > 0}
        starts.append(t0)
        ends.append(t0 + dur)
        idles.append(gaps)
        for q in ins.qubits:
            avail[q] = t0 + dur
            busy_end[q] = t0 + dur
        if ins.kind == "measure":
            measure_time[ins.qubits[0]] = t0
    makespan = max(ends, default=0.0)
    if align_measurements:
        starts, ends, idles = list(starts), list(ends), list(idles)
        for idx, ins in enumerate(c.instructions):
            q = ins.qubits[0] if ins.qubits else None
            if ins.kind == "measure" and last_use.get(q) == idx:
                prev_end = starts[idx] - idles[idx].get(q, 0.0)
                starts[idx] = ends[idx] = makespan
                if makespan - prev_end > 0:
                    idles[idx] = {q: makespan - prev_end}
                measure_time[q] = makespan
    return Schedule(tuple(starts), tuple(ends), tuple(idles), makespan, measure_time)


def estimate_runtime(c: Circuit, device, layout: Sequence[int] | None = None) -> float:
    """Runtime in microseconds: the longest any qubit is busy or waiting before readout.

    ``layout[i]`` is the device qubit carrying circuit qubit ``i``;
    measurement duration itself is excluded.
    """
    layout = list(range(c.num_qubits)) if layout is None else list(layout)

    def duration(ins: Instruction) -> float:
        if ins.kind == "reset":
            return 0.0
        phys = tuple(layout[q] for q in ins.qubits)
        try:
            return device.gate_duration(ins.name, phys)
        except KeyError as exc:
            raise ValueError(f"gate {ins.name!r} missing from device duration table") from exc

    sched = schedule(c, duration)
    per_qubit = [0.0] * c.num_qubits
    for idx, ins in enumerate(c.instructions):
        if ins.kind in ("gate", "reset"):
            for q in ins.qubits:
                if q not in sched.measure_time or sched.end[idx] <= sched.measure_time[q]:
                    per_qubit[q] = max(per_qubit[q], sched.end[idx])
    return max(per_qubit, default=0.0)


def relabel(c: Circuit, mapping: Sequence[int], num_qubits: int | None = None) -> Circuit:
    """Copy of ``c`` with qubit ``q`` renamed to ``mapping[q]``."""
    width = num_qubits if num_qubits is not None else max(mapping, default=-1) + 1
    out = Circuit(width, c.num_clbits, metadata=dict(c.metadata))
    for ins in c.instructions:
        out.append(replace(ins, qubits=tuple(mapping[q] for q in ins.qubits)))
    return out
