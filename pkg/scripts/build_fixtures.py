"""Generate the hand-routed fixture circuits under src/flagbench/data/fixtures.

Each recipe is a list of steps on device qubits. Steps are lowered to the
native u2/cx set (h -> u2(0,pi), cz -> u2.cx.u2 on the target) and adjacent
u2(0,pi) pairs on a wire are cancelled. The script checks every fixture's
CNOT depth, cx count, permutation and unitary equivalence before writing.
"""

from pathlib import Path

import numpy as np

from flagbench.circuit import Circuit, Instruction, cnot_depth, gate_counts
from flagbench.code513 import ideal_prep_circuit
from flagbench.flags import flagged_syndrome_circuit
from flagbench.qasm import serialize
from flagbench.transpile import CouplingGraph, RoutedCircuit, fixture_text, respects_coupling, verify_equivalence
from flagbench.device import load_device

OUT = Path(__file__).resolve().parents[1] / "src" / "flagbench" / "data" / "fixtures"
H = ("u2", (0.0, np.pi))

LAYOUT_A = (1, 2, 3, 11, 12)
LAYOUT_B = (11, 12, 13, 1, 2)
LAYOUT_C = (11, 12, 13, 1, 2, 3, 4)

PREP_DEPTH4 = [("h", q) for q in LAYOUT_B] + [
    ("cz", 12, 13),
    ("cz", 1, 2),
    ("cz", 13, 1),
    ("czswap", 11, 12),
    ("cz", 12, 2),
]
PREP_DEPTH6 = [("h", q) for q in LAYOUT_A] + [
    ("cz", 1, 2),
    ("cz", 3, 11),
    ("cz", 2, 3),
    ("cz", 11, 12),
    ("swap", 1, 2),
    ("cz", 2, 12),
]
# syndrome on device qubit 3, flag on 4; data positions after PREP_DEPTH4:
# L0@12 L1@11 L2@13 L3@1 L4@2
STAB_ZXIXZ = PREP_DEPTH4 + [
    ("h", 4),
    ("xcheck", 11, 3),
    ("cx", 4, 3),
    ("cx", 2, 3),
    ("swap", 11, 12),
    ("swap", 1, 2),
    ("cx", 11, 3),
    ("cx", 4, 3),
    ("xcheck", 2, 3),
    ("measure", 3, 0),
    ("h", 4),
    ("measure", 4, 1),
]
VIGO_LAYOUT = (1, 2, 0, 3, 4)
VIGO_PREP = [("h", q) for q in VIGO_LAYOUT] + [
    ("czswap", 3, 4),
    ("cz", 1, 3),
    ("czswap", 1, 2),
    ("swap", 3, 4),
    ("czswap", 0, 1),
    ("cz", 1, 3),
    ("swap", 3, 4),
]


def lower(steps, layout, num_clbits=0):
    """Return (instructions on device qubits, final logical->device map)."""
    pos = list(layout)
    ins = []

    def u2(q):
        ins.append(Instruction.gate("u2", [q], H[1]))

    def cx(a, b):
        ins.append(Instruction.gate("cx", [a, b]))

    def move(a, b):
        for i, p in enumerate(pos):
            if p == a:
                pos[i] = b
            elif p == b:
                pos[i] = a

    for step in steps:
        kind = step[0]
        if kind == "h":
            u2(step[1])
        elif kind == "cz":
            _, a, b = step
            u2(b)
            cx(a, b)
            u2(b)
        elif kind == "czswap":
            _, a, b = step
            u2(b)
            cx(b, a)
            cx(a, b)
            u2(a)
            move(a, b)
        elif kind == "swap":
            _, a, b = step
            cx(a, b)
            cx(b, a)
            cx(a, b)
            move(a, b)
        elif kind == "xcheck":
            _, d, s = step
            u2(d)
            cx(d, s)
            u2(d)
        elif kind == "cx":
            cx(step[1], step[2])
        elif kind == "measure":
            ins.append(Instruction.measure(step[1], step[2]))
        else:
            raise ValueError(kind)
    return cancel_hadamard_pairs(ins), pos


def cancel_hadamard_pairs(ins):
    out = []
    last = {}
    for item in ins:
        if item.kind == "gate" and item.name == "u2" and item.params == H[1]:
            q = item.qubits[0]
            j = last.get(q)
            if j is not None and out[j] is not None and out[j].name == "u2" and out[j].params == H[1]:
                out[j] = None
                last.pop(q)
                continue
        out.append(item)
        for q in item.qubits:
            last[q] = len(out) - 1
    return [i for i in out if i is not None]


def build(name, steps, layout, num_clbits=0, notes=""):
    ins, final = lower(steps, layout)
    index = {p: w for w, p in enumerate(layout)}
    c = Circuit(len(layout), num_clbits, metadata={"name": name, "notes": notes})
    for item in ins:
        c.append(Instruction(item.kind, tuple(index[q] for q in item.qubits), item.name, item.params, item.clbit, item.basis))
    swaps = sum(1 for step in steps if step[0] in ("swap", "czswap"))
    return RoutedCircuit(c, tuple(layout), tuple(layout), tuple(final), swaps, name)


def check_czswap():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    i2 = np.eye(2)
    cx12 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    cx21 = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]])
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
    cz = np.diag([1, 1, 1, -1])
    lhs = swap @ cz
    rhs = np.kron(h, i2) @ cx12 @ cx21 @ np.kron(i2, h)
    assert np.allclose(lhs, rhs), "CZ+SWAP identity failed"


def ideal_stab():
    prep = ideal_prep_circuit().widen(7, 2)
    return prep.compose(flagged_syndrome_circuit(generator_index=3).circuit)


def main():
    check_czswap()
    OUT.mkdir(parents=True, exist_ok=True)
    mel = CouplingGraph.from_device(load_device("melbourne"))
    vigo = CouplingGraph.from_device(load_device("vigo"))
    items = [
        (build("melbourne-prep-depth4", PREP_DEPTH4, LAYOUT_B, notes="layout B; CZ+SWAP merge on 11-12"), ideal_prep_circuit(), mel, 4, 6),
        (build("melbourne-prep-depth6", PREP_DEPTH6, LAYOUT_A, notes="layout A; one SWAP on 1-2"), ideal_prep_circuit(), mel, 6, 8),
        (
            build("melbourne-stab-ZXIXZ", STAB_ZXIXZ, LAYOUT_C, 2, notes="layout C; syndrome q[5] on device 3, flag q[6] on device 4"),
            ideal_stab(),
            mel,
            10,
            18,
        ),
        (build("vigo-prep", VIGO_PREP, VIGO_LAYOUT, notes="initial (1,2,0,3,4), final (2,0,1,4,3)"), ideal_prep_circuit(), vigo, None, 14),
    ]
    for rc, ideal, graph, depth, ncx in items:
        d, n = cnot_depth(rc.circuit), gate_counts(rc.circuit).get("cx", 0)
        assert respects_coupling(rc, graph), rc.name
        assert verify_equivalence(ideal, rc), rc.name
        assert depth is None or d == depth, (rc.name, d)
        assert n == ncx, (rc.name, n)
        qasm_text, side = fixture_text(rc)
        (OUT / f"{rc.name}.qasm").write_text(qasm_text, encoding="utf-8")
        (OUT / f"{rc.name}.json").write_text(side, encoding="utf-8")
        print(f"{rc.name}: cnot_depth={d} cx={n} final={rc.final_permutation}")
    (OUT / "ideal-depth3.qasm").write_text(serialize(ideal_prep_circuit()), encoding="utf-8")
    print("ideal-depth3 written")


if __name__ == "__main__":
    main()
