"""Write the bundled device descriptions (melbourne.json, vigo.json).

Device-wide values are the published means; per-qubit detail that is only
available graphically is filled with those means. The Melbourne readout flip
rates come from scripts/calibrate_readout.py and are frozen here.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "flagbench" / "data"

# frozen output of scripts/calibrate_readout.py (p(1|0), p(0|1))
MELBOURNE_READOUT = (0.02944, 0.05888)

CX_MEAN, CX_STD = 0.04069, 0.02739


def melbourne() -> dict:
    n = 15
    edges = [[i, i + 1] for i in range(6)] + [[14 - i, 13 - i] for i in range(6)]
    edges += [[0, 14], [1, 13], [2, 12], [3, 11], [4, 10], [5, 9], [6, 8]]
    bad = CX_MEAN + 2 * CX_STD
    qubits = []
    for q in range(n):
        t1, t2 = 50.0, 50.0
        if q == 13:
            t1, t2 = 24.785, 49.57
        if q == 4:
            t2 = 30.781
        qubits.append(
            {"t1_us": t1, "t2_us": t2, "readout_p1_given_0": MELBOURNE_READOUT[0], "readout_p0_given_1": MELBOURNE_READOUT[1]}
        )
    return {
        "schema_version": 1,
        "name": "melbourne",
        "num_qubits": n,
        "edges": edges,
        "gates": {
            "id": {"duration_us": 0.0533, "error": 0.0},
            "u1": {"duration_us": 0.0, "error": 0.0},
            "u2": {
                "duration_us": 0.0978,
                "error": 0.0027,
                "per_qubit": {"5": {"error": 0.00724}, "13": {"error": 0.00724}},
            },
            "u3": {"duration_us": 0.1955, "error": 0.0054},
            "cx": {
                "duration_us": 0.90456,
                "error": CX_MEAN,
                "per_edge": {k: {"error": round(bad, 5)} for k in ("1-13", "5-6", "13-14")},
            },
        },
        "qubits": qubits,
        "notes": (
            "15-qubit ladder. Means for durations and errors; edges 1-13, 5-6, 13-14 carry the mean+2sd cx error; "
            "qubits 5 and 13 carry elevated u2 error. T1=T2=50us except q13 (T1 24.785us) and q4 (T2 30.781us). "
            "Readout rates calibrated so readout-only prep tomography gives fidelity near 0.71."
        ),
    }


def vigo() -> dict:
    n = 5
    qubits = [
        {"t1_us": 23.09, "t2_us": 15.4, "readout_p1_given_0": 0.02, "readout_p0_given_1": 0.04} for _ in range(n)
    ]
    return {
        "schema_version": 1,
        "name": "vigo",
        "num_qubits": n,
        "edges": [[0, 1], [1, 2], [1, 3], [3, 4]],
        "gates": {
            "id": {"duration_us": 0.0355, "error": 0.0},
            "u1": {"duration_us": 0.0, "error": 0.0},
            "u2": {"duration_us": 0.0355, "error": 0.0027},
            "u3": {"duration_us": 0.071, "error": 0.0054},
            "cx": {"duration_us": 0.3447, "error": CX_MEAN},
        },
        "qubits": qubits,
        "notes": "5-qubit T topology. Durations from published means; error rates borrow the Melbourne means.",
    }


def main() -> None:
    for name, data in (("melbourne", melbourne()), ("vigo", vigo())):
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
