"""Deterministic SWAP routing, equivalence checking, layout scoring and the
shipped hand-optimized fixture circuits."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, Instruction
from .qasm import parse, serialize
from .quantum import apply_matrix_vec

MAX_EQUIV_WIRES = 8
FIXTURE_NAMES = ("melbourne-prep-depth6", "melbourne-prep-depth4", "melbourne-stab-ZXIXZ", "vigo-prep")


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class CouplingGraph:
    vertices: tuple[int, ...]
    edges: frozenset  # of frozenset pairs

    @classmethod
    def from_edges(cls, edges, num_qubits: int | None = None) -> "CouplingGraph":
        es = frozenset(frozenset((int(a), int(b))) for a, b in edges)
        verts = set(range(num_qubits)) if num_qubits is not None else {q for e in es for q in e}
        return cls(tuple(sorted(verts)), es)

    @classmethod
    def from_device(cls, device) -> "CouplingGraph":
        return cls.from_edges([tuple(e) for e in device.coupling_edges], device.num_qubits)

    def is_edge(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.edges

    @property
    def adjacency(self) -> dict[int, list[int]]:
        return _adjacency(self)

    def distances_from(self, src: int) -> dict[int, int]:
        dist = {src: 0}
        queue = deque([src])
        adj = self.adjacency
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def shortest_path(self, a: int, b: int) -> list[int]:
        """Lexicographically smallest shortest path from ``a`` to ``b``."""
        dist = self.distances_from(b)
        if a not in dist:
            raise RoutingError(f"qubits {a} and {b} are disconnected")
        path = [a]
        adj = self.adjacency
        while path[-1] != b:
            u = path[-1]
            path.append(min(v for v in adj[u] if dist.get(v, math.inf) == dist[u] - 1))
        return path

    def is_connected(self, qubits: Sequence[int]) -> bool:
        qubits = list(qubits)
        if not qubits:
            return True
        dist = self.distances_from(qubits[0])
        return all(q in dist for q in qubits)


@lru_cache(maxsize=None)
def _adjacency(g: CouplingGraph) -> dict[int, list[int]]:
    adj = {v: [] for v in g.vertices}
    for e in g.edges:
        a, b = sorted(e)
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    return {k: sorted(v) for k, v in adj.items()}


@dataclass
class RoutedCircuit:
    """A routed circuit stored on compact wires.

    Wire ``w`` of ``circuit`` is device qubit ``wires[w]``. ``initial_layout``
    and ``final_permutation`` map logical qubits to device qubits before and
    after the circuit.
    """

    circuit: Circuit
    wires: tuple[int, ...]
    initial_layout: tuple[int, ...]
    final_permutation: tuple[int, ...]
    swap_count: int = 0
    name: str = ""

    def wire_of(self, physical: int) -> int:
        return self.wires.index(physical)

    def input_order(self) -> tuple[int, ...]:
        return tuple(self.wire_of(p) for p in self.initial_layout)

    def output_order(self) -> tuple[int, ...]:
        """Wire carrying each logical qubit at the end of the circuit."""
        return tuple(self.wire_of(p) for p in self.final_permutation)

    def physical_circuit(self, num_qubits: int) -> Circuit:
        out = Circuit(num_qubits, self.circuit.num_clbits, metadata=dict(self.circuit.metadata))
        for ins in self.circuit.instructions:
            out.append(replace(ins, qubits=tuple(self.wires[q] for q in ins.qubits)))
        return out

    def sidecar(self) -> dict:
        return {
            "name": self.name,
            "wires": list(self.wires),
            "initial_layout": list(self.initial_layout),
            "final_permutation": list(self.final_permutation),
            "swap_count": self.swap_count,
            "notes": self.circuit.metadata.get("notes", ""),
        }

    @classmethod
    def from_sidecar(cls, circuit: Circuit, meta: Mapping) -> "RoutedCircuit":
        circuit.metadata["notes"] = meta.get("notes", "")
        return cls(
            circuit,
            tuple(meta["wires"]),
            tuple(meta["initial_layout"]),
            tuple(meta["final_permutation"]),
            int(meta.get("swap_count", 0)),
            meta.get("name", ""),
        )


def _swap_as_cx(a: int, b: int) -> list[Instruction]:
    return [Instruction.gate("cx", [a, b]), Instruction.gate("cx", [b, a]), Instruction.gate("cx", [a, b])]


def route(c: Circuit, g: CouplingGraph, layout: Sequence[int]) -> RoutedCircuit:
    """Greedy shortest-path SWAP insertion in instruction order.

    For a two-qubit gate on non-adjacent qubits the first operand walks along
    the lexicographically smallest shortest path until it neighbours the
    second. Each SWAP is emitted as three cx gates.
    """
    layout = [int(p) for p in layout]
    if len(layout) != c.num_qubits:
        raise RoutingError(f"layout has {len(layout)} entries for {c.num_qubits} qubits")
    if len(set(layout)) != len(layout):
        raise RoutingError("layout is not injective")
    if any(p not in g.vertices for p in layout):
        raise RoutingError("layout uses qubits outside the coupling graph")
    if not g.is_connected(layout):
        raise RoutingError("layout spans a disconnected region of the coupling graph")
    pos = list(layout)
    occupant = {p: i for i, p in enumerate(layout)}
    phys_ins: list[Instruction] = []
    swaps = 0
    for ins in c.instructions:
        if ins.kind == "gate" and len(ins.qubits) == 2:
            a, b = ins.qubits
            if not g.is_edge(pos[a], pos[b]):
                path = g.shortest_path(pos[a], pos[b])
                for u, v in zip(path[:-2], path[1:-1]):
                    phys_ins.extend(_swap_as_cx(u, v))
                    swaps += 1
                    la, lb = occupant.get(u), occupant.get(v)
                    occupant.pop(u, None)
                    occupant.pop(v, None)
                    if la is not None:
                        occupant[v] = la
                        pos[la] = v
                    if lb is not None:
                        occupant[u] = lb
                        pos[lb] = u
        phys_ins.append(replace(ins, qubits=tuple(pos[q] for q in ins.qubits)))
    wires = list(layout)
    for ins in phys_ins:
        for q in ins.qubits:
            if q not in wires:
                wires.append(q)
    index = {p: w for w, p in enumerate(wires)}
    out = Circuit(len(wires), c.num_clbits, metadata={"name": c.metadata.get("name", "")})
    for ins in phys_ins:
        out.append(replace(ins, qubits=tuple(index[q] for q in ins.qubits)))
    return RoutedCircuit(out, tuple(wires), tuple(layout), tuple(pos), swaps, c.metadata.get("name", ""))


def respects_coupling(rc: RoutedCircuit, g: CouplingGraph) -> bool:
    return all(
        g.is_edge(rc.wires[ins.qubits[0]], rc.wires[ins.qubits[1]])
        for ins in rc.circuit.instructions
        if ins.kind == "gate" and len(ins.qubits) == 2
    )


# ---------------------------------------------------------------------------
# Equivalence


def _unitary_part(c: Circuit) -> Circuit:
    """Drop terminal measurements, turning basis measurements into rotations."""
    out = Circuit(c.num_qubits, 0)
    seen_measure: set[int] = set()
    for ins in c.instructions:
        if ins.kind == "measure":
            q = ins.qubits[0]
            if ins.basis == "X":
                out.append(Instruction.gate("h", [q]))
            elif ins.basis == "Y":
                out.append(Instruction.gate("sdg", [q]))
                out.append(Instruction.gate("h", [q]))
            seen_measure.add(q)
            continue
        if ins.kind == "reset" or ins.condition is not None:
            raise ValueError("equivalence checking needs a circuit without resets or classical conditions")
        if any(q in seen_measure for q in ins.qubits) and ins.kind == "gate":
            raise ValueError("equivalence checking needs measurements to be terminal")
        if ins.kind == "gate":
            out.append(replace(ins, condition=None))
    return out


def _unitary(c: Circuit) -> np.ndarray:
    n = c.num_qubits
    u = np.eye(2**n, dtype=complex)
    for ins in c.instructions:
        u = apply_matrix_vec(u.T, ins.matrix(), ins.qubits, n).T
    return u


def _isometry(order: Sequence[int], width: int) -> np.ndarray:
    """Embed logical qubits onto wires ``order``; other wires in |0>."""
    k = len(order)
    v = np.zeros((2**width, 2**k), dtype=complex)
    for col in range(2**k):
        bits = [(col >> (k - 1 - i)) & 1 for i in range(k)]
        row = 0
        for i, w in enumerate(order):
            row |= bits[i] << (width - 1 - w)
        v[row, col] = 1
    return v


def verify_equivalence(original: Circuit, routed: RoutedCircuit, atol: float = 1e-9) -> bool:
    """True iff the routed circuit implements ``original`` followed by the
    final permutation, up to global phase."""
    width = routed.circuit.num_qubits
    if width > MAX_EQUIV_WIRES or original.num_qubits > MAX_EQUIV_WIRES:
        raise ValueError(f"dense equivalence check limited to {MAX_EQUIV_WIRES} qubits")
    if original.num_qubits != len(routed.initial_layout):
        return False
    uo = _unitary(_unitary_part(original))
    ur = _unitary(_unitary_part(routed.circuit))
    lhs = ur @ _isometry(routed.input_order(), width)
    rhs = _isometry(routed.output_order(), width) @ uo
    k = np.unravel_index(np.argmax(np.abs(rhs)), rhs.shape)
    if abs(lhs[k]) < 1e-12:
        return False
    phase = lhs[k] / rhs[k]
    if abs(abs(phase) - 1) > 1e-9:
        return False
    return bool(np.allclose(lhs, phase * rhs, atol=atol))


# ---------------------------------------------------------------------------
# Scoring


def layout_score(c: Circuit, device, layout: Sequence[int]) -> float:
    """Sum of -log(1 - error) over the gates of ``c`` routed with ``layout``."""
    rc = route(c, CouplingGraph.from_device(device), layout)
    total = 0.0
    for ins in rc.circuit.instructions:
        if ins.kind != "gate":
            continue
        phys = tuple(rc.wires[q] for q in ins.qubits)
        try:
            err = device.gate_error(ins.name, phys)
        except KeyError:
            err = 0.0
        if err >= 1:
            return math.inf
        total += -math.log1p(-err)
    return total


# ---------------------------------------------------------------------------
# Fixtures


def _fixture_dir():
    return resources.files("flagbench") / "data" / "fixtures"


def load_fixture(name: str) -> RoutedCircuit:
    base = _fixture_dir()
    circuit = parse((base / f"{name}.qasm").read_text(encoding="utf-8"))
    meta = json.loads((base / f"{name}.json").read_text(encoding="utf-8"))
    circuit.metadata["name"] = name
    return RoutedCircuit.from_sidecar(circuit, meta)


@lru_cache(maxsize=None)
def _fixtures_cached() -> dict[str, RoutedCircuit]:
    return {name: load_fixture(name) for name in FIXTURE_NAMES}


def fixtures() -> dict[str, RoutedCircuit]:
    """The shipped hand-routed circuits, keyed by name (fresh copies)."""
    return {
        k: RoutedCircuit(v.circuit.copy(), v.wires, v.initial_layout, v.final_permutation, v.swap_count, v.name)
        for k, v in _fixtures_cached().items()
    }


def fixture_text(rc: RoutedCircuit) -> tuple[str, str]:
    """(qasm text, sidecar JSON text) for writing a fixture to disk."""
    return serialize(rc.circuit), json.dumps(rc.sidecar(), indent=2, sort_keys=True) + "\n"
