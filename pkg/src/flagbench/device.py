"""Device descriptions, simulation noise models and readout calibration matrices."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from .circuit import Instruction
from .quantum import KrausChannel, PauliString

# Gates without their own device entry borrow the timing/error of a native one.
GATE_ALIASES = {
    "h": "u2",
    "x": "u3",
    "y": "u3",
    "z": "u1",
    "s": "u1",
    "sdg": "u1",
    "cz": "cx",
}

_RATE = {"type": "number", "minimum": 0, "maximum": 1}
_DUR = {"type": "number", "minimum": 0}
_GATE_SCHEMA = {
    "type": "object",
    "required": ["duration_us"],
    "properties": {
        "duration_us": _DUR,
        "error": _RATE,
        "per_qubit": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {"duration_us": _DUR, "error": _RATE},
                "additionalProperties": False,
            },
        },
        "per_edge": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {"duration_us": _DUR, "error": _RATE},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

DEVICE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "flagbench device description",
    "type": "object",
    "required": ["name", "num_qubits", "edges", "gates", "qubits"],
    "properties": {
        "schema_version": {"const": 1},
        "name": {"type": "string"},
        "num_qubits": {"type": "integer", "minimum": 1},
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "gates": {
            "type": "object",
            "required": ["cx"],
            "additionalProperties": _GATE_SCHEMA,
        },
        "qubits": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t1_us", "t2_us", "readout_p1_given_0", "readout_p0_given_1"],
                "properties": {
                    "t1_us": {"type": "number", "exclusiveMinimum": 0},
                    "t2_us": {"type": "number", "exclusiveMinimum": 0},
                    "readout_p1_given_0": _RATE,
                    "readout_p0_given_1": _RATE,
                },
                "additionalProperties": False,
            },
        },
        "notes": {"type": "string"},
    },
    "additionalProperties": False,
}


class DeviceSchemaError(ValueError):
    """Device file failed validation; ``errors`` lists ``(field path, message)``."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        lines = [f"{path}: {msg}" for path, msg in errors]
        super().__init__("invalid device description:\n  " + "\n  ".join(lines))


@dataclass(frozen=True)
class GateProps:
    duration_us: float
    error: float = 0.0
    per_qubit: dict = field(default_factory=dict)  # qubit -> {"duration_us", "error"}
    per_edge: dict = field(default_factory=dict)  # frozenset({a, b}) -> {...}


@dataclass(frozen=True)
class QubitProps:
    t1_us: float
    t2_us: float
    readout_p1_given_0: float
    readout_p0_given_1: float


@dataclass(frozen=True)
class DeviceModel:
    name: str
    num_qubits: int
    coupling_edges: tuple[tuple[int, int], ...]
    gates: dict
    qubits: tuple[QubitProps, ...]
    source_sha256: str = ""
    notes: str = ""

    @property
    def undirected_edges(self) -> set[frozenset]:
        return {frozenset(e) for e in self.coupling_edges}

    def _props(self, name: str) -> GateProps:
        if name in self.gates:
            return self.gates[name]
        if name in GATE_ALIASES and GATE_ALIASES[name] in self.gates:
            return self.gates[GATE_ALIASES[name]]
        raise KeyError(name)

    def _lookup(self, name: str, qubits: Sequence[int], key: str) -> float:
        if name == "swap":
            base = self._lookup("cx", qubits, key)
            return 3 * base if key == "duration_us" else 1 - (1 - base) ** 3
        props = self._props(name)
        entry = None
        if len(qubits) == 1:
            entry = props.per_qubit.get(qubits[0])
        elif len(qubits) == 2:
            entry = props.per_edge.get(frozenset(qubits))
        if entry and key in entry:
            return float(entry[key])
        return float(props.duration_us if key == "duration_us" else props.error)

    def gate_duration(self, name: str, qubits: Sequence[int] = ()) -> float:
        """Duration in microseconds; raises KeyError for unknown gates."""
        return self._lookup(name, tuple(qubits), "duration_us")

    def gate_error(self, name: str, qubits: Sequence[int] = ()) -> float:
        return self._lookup(name, tuple(qubits), "error")

    def mean_gate_duration(self, name: str) -> float:
        return self._props(name).duration_us


def _parse_edge_key(key: str) -> frozenset:
    a, b = (int(x) for x in key.replace(",", "-").split("-"))
    return frozenset((a, b))


def device_from_dict(data: dict, source_sha256: str = "") -> DeviceModel:
    validator = jsonschema.Draft202012Validator(DEVICE_SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path)):
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        errors.append((path, err.message))
    if errors:
        raise DeviceSchemaError(errors)

    n = data["num_qubits"]
    for i, (a, b) in enumerate(data["edges"]):
        if a >= n or b >= n or a == b:
            errors.append((f"edges/{i}", f"invalid edge ({a}, {b}) for {n} qubits"))
    if len(data["qubits"]) != n:
        errors.append(("qubits", f"expected {n} entries, got {len(data['qubits'])}"))
    for i, q in enumerate(data["qubits"]):
        if q["t2_us"] > 2 * q["t1_us"] + 1e-12:
            errors.append((f"qubits/{i}/t2_us", "T2 exceeds 2*T1"))
    gates = {}
    for gname, g in data["gates"].items():
        per_q = {}
        for k, v in g.get("per_qubit", {}).items():
            if not k.isdigit() or int(k) >= n:
                errors.append((f"gates/{gname}/per_qubit/{k}", "not a valid qubit index"))
                continue
            per_q[int(k)] = v
        per_e = {}
        for k, v in g.get("per_edge", {}).items():
            try:
                per_e[_parse_edge_key(k)] = v
            except ValueError:
                errors.append((f"gates/{gname}/per_edge/{k}", "edge keys look like 'a-b'"))
        gates[gname] = GateProps(g["duration_us"], g.get("error", 0.0), per_q, per_e)
    if errors:
        raise DeviceSchemaError(errors)
    qubits = tuple(QubitProps(**q) for q in data["qubits"])
    return DeviceModel(
        data["name"],
        n,
        tuple((int(a), int(b)) for a, b in data["edges"]),
        gates,
        qubits,
        source_sha256,
        data.get("notes", ""),
    )


def load_device(file) -> DeviceModel:
    """Load and validate a device JSON file.

    ``file`` is a path or the name of a bundled device (``"melbourne"``,
    ``"vigo"``).
    """
    path = Path(file)
    if not path.exists() and not str(file).endswith(".json"):
        path = Path(str(resources.files("flagbench") / "data" / f"{file}.json"))
    raw = path.read_bytes()
    return device_from_dict(json.loads(raw), hashlib.sha256(raw).hexdigest())


# ---------------------------------------------------------------------------
# Channels


def depolarizing_channel(p: float, arity: int = 1) -> KrausChannel:
    """Depolarizing channel where ``p`` is the probability of *no* error.

    The identity Kraus operator carries weight ``sqrt(p)``; each of the
    ``4**arity - 1`` non-identity Paulis carries ``sqrt((1-p)/(4**arity-1))``.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"no-error probability {p} outside [0, 1]")
    if arity not in (1, 2):
        raise ValueError("arity must be 1 or 2")
    others = 4**arity - 1
    ops = [np.sqrt(p) * np.eye(2**arity, dtype=complex)] if p > 0 else []
    if p < 1:
        w = np.sqrt((1 - p) / others)
        for letters in _pauli_labels(arity):
            if letters != "I" * arity:
                ops.append(w * PauliString(letters).matrix())
    return KrausChannel(tuple(ops))


def _pauli_labels(n: int) -> list[str]:
    labels = [""]
    for _ in range(n):
        labels = [lbl + c for lbl in labels for c in "IXYZ"]
    return labels


def thermal_relaxation_channel(duration_us: float, t1_us: float, t2_us: float) -> KrausChannel:
    """Amplitude damping (T1) followed by the pure dephasing that brings the
    total coherence decay to ``exp(-t/T2)``."""
    if t1_us <= 0 or t2_us <= 0:
        raise ValueError("T1 and T2 must be positive")
    if t2_us > 2 * t1_us + 1e-12:
        raise ValueError("T2 cannot exceed 2*T1")
    t = max(float(duration_us), 0.0)
    gamma = 1 - np.exp(-t / t1_us)
    # coherence left after amplitude damping is exp(-t/2T1); dephasing covers the rest
    rate_phi = max(1 / t2_us - 1 / (2 * t1_us), 0.0)
    lam = 1 - np.exp(-2 * t * rate_phi)
    a0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    a1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    p0 = np.array([[1, 0], [0, np.sqrt(1 - lam)]], dtype=complex)
    p1 = np.array([[0, 0], [0, np.sqrt(lam)]], dtype=complex)
    ops = [pk @ ak for ak in (a0, a1) for pk in (p0, p1)]
    ops = [k for k in ops if np.abs(k).max() > 0]
    return KrausChannel(tuple(ops))


# ---------------------------------------------------------------------------
# Noise model


@dataclass(frozen=True)
class NoiseOptions:
    gates: bool = True
    idle: bool = True
    readout: bool = True

    @classmethod
    def readout_only(cls) -> "NoiseOptions":
        return cls(gates=False, idle=False, readout=True)


@dataclass
class NoiseModel:
    """Channels applied after gates, idle decoherence and readout flips.

    ``gate_channels`` is keyed by ``(gate name, qubit tuple)``; a key with
    ``None`` for the qubits applies to every placement of that gate. Qubit
    indices are circuit qubits. ``relaxation`` maps a qubit to ``(T1, T2)``
    and enables idle decoherence; ``durations`` supplies the schedule.
    """

    gate_channels: dict = field(default_factory=dict)
    readout: dict = field(default_factory=dict)  # qubit -> (p1|0, p0|1)
    relaxation: dict = field(default_factory=dict)
    durations: object = None  # callable(Instruction) -> float
    align_measurements: bool = True

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def depolarizing(cls, p1: float = 0.0, p2: float = 0.0, gates: Sequence[str] | None = None) -> "NoiseModel":
        """Uniform depolarizing noise with error rates ``p1`` (1q) and ``p2`` (2q gates)."""
        from .circuit import GATE_SPECS

        chans = {}
        for name, (nq, _) in GATE_SPECS.items():
            if gates is not None and name not in gates:
                continue
            rate = p1 if nq == 1 else p2
            if rate > 0 and name != "id":
                chans[(name, None)] = [depolarizing_channel(1 - rate, nq)]
        return cls(gate_channels=chans)

    @classmethod
    def readout_flips(cls, rates: dict) -> "NoiseModel":
        return cls(readout={int(q): tuple(r) for q, r in rates.items()})

    @property
    def has_idle(self) -> bool:
        return bool(self.relaxation) and self.durations is not None

    def channels_for(self, ins: Instruction) -> list[tuple[KrausChannel, tuple[int, ...]]]:
        if ins.kind != "gate":
            return []
        out = []
        chans = self.gate_channels.get((ins.name, ins.qubits))
        if chans is None:
            chans = self.gate_channels.get((ins.name, None), [])
        for ch in chans:
            out.append((ch, ins.qubits))
        if ins.name == "id" and self.has_idle:
            ch = self.idle_channel(ins.qubits[0], self.duration(ins))
            if ch is not None:
                out.append((ch, ins.qubits))
        return out

    def readout_for(self, qubit: int) -> tuple[float, float]:
        return self.readout.get(qubit, (0.0, 0.0))

    def duration(self, ins: Instruction) -> float:
        if self.durations is None or ins.kind in ("barrier", "measure"):
            return 0.0
        return float(self.durations(ins))

    def idle_channel(self, qubit: int, duration_us: float) -> KrausChannel | None:
        if qubit not in self.relaxation or duration_us <= 0:
            return None
        t1, t2 = self.relaxation[qubit]
        return thermal_relaxation_channel(duration_us, t1, t2)

    def all_channels(self):
        for chans in self.gate_channels.values():
            yield from chans


@dataclass(frozen=True)
class _DeviceDurations:
    """Picklable gate-duration lookup through a layout."""

    device: DeviceModel
    layout: tuple[int, ...]

    def __call__(self, ins: Instruction) -> float:
        if ins.kind == "reset":
            return 0.0
        return self.device.gate_duration(ins.name, tuple(self.layout[q] for q in ins.qubits))


def noise_from_device(device: DeviceModel, layout: Sequence[int] | None = None, options: NoiseOptions | None = None) -> NoiseModel:
    """Noise model for a circuit whose qubit ``i`` sits on device qubit ``layout[i]``."""
    options = options or NoiseOptions()
    layout = list(range(device.num_qubits)) if layout is None else [int(q) for q in layout]
    chans: dict = {}
    if options.gates:
        from .circuit import GATE_SPECS

        for name, (nq, _) in GATE_SPECS.items():
            if name == "id":
                continue
            if name != "swap":
                try:
                    device._props(name)
                except KeyError:
                    continue
            if nq == 1:
                for i, phys in enumerate(layout):
                    err = device.gate_error(name, (phys,))
                    if err > 0:
                        chans[(name, (i,))] = [depolarizing_channel(1 - err, 1)]
            else:
                for i, pa in enumerate(layout):
                    for j, pb in enumerate(layout):
                        if i != j:
                            err = device.gate_error(name, (pa, pb))
                            if err > 0:
                                chans[(name, (i, j))] = [depolarizing_channel(1 - err, 2)]
    readout = {}
    if options.readout:
        for i, phys in enumerate(layout):
            q = device.qubits[phys]
            if q.readout_p1_given_0 > 0 or q.readout_p0_given_1 > 0:
                readout[i] = (q.readout_p1_given_0, q.readout_p0_given_1)
    relaxation = {}
    durations = None
    if options.idle:
        relaxation = {i: (device.qubits[p].t1_us, device.qubits[p].t2_us) for i, p in enumerate(layout)}

        durations = _DeviceDurations(device, tuple(layout))
    return NoiseModel(chans, readout, relaxation, durations)


# ---------------------------------------------------------------------------
# Readout calibration


@dataclass(frozen=True, eq=False)
class CalibrationMatrix:
    """Column-stochastic confusion matrix: ``matrix[observed, prepared]``.

    Bitstrings index with the first listed qubit as the most significant bit.
    """

    matrix: np.ndarray
    qubits: tuple[int, ...] = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("calibration matrix must be square")
        if np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
            raise ValueError("calibration entries must lie in [0, 1]")
        if not np.allclose(m.sum(axis=0), 1, atol=1e-9):
            raise ValueError("calibration columns must sum to 1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if not self.qubits:
            object.__setattr__(self, "qubits", tuple(range(int(np.log2(m.shape[0])))))

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)


def confusion_1q(p1_given_0: float, p0_given_1: float) -> np.ndarray:
    return np.array([[1 - p1_given_0, p0_given_1], [p1_given_0, 1 - p0_given_1]])


def readout_confusion(device: DeviceModel, qubits: Sequence[int]) -> CalibrationMatrix:
    qubits = [int(q) for q in qubits]
    if len(set(qubits)) != len(qubits):
        raise ValueError("qubits must be distinct")
    m = np.array([[1.0]])
    for q in qubits:
        props = device.qubits[q]
        m = np.kron(m, confusion_1q(props.readout_p1_given_0, props.readout_p0_given_1))
    return CalibrationMatrix(m, tuple(qubits))


def confusion_from_rates(rates: Sequence[tuple[float, float]]) -> CalibrationMatrix:
    m = np.array([[1.0]])
    for p10, p01 in rates:
        m = np.kron(m, confusion_1q(p10, p01))
    return CalibrationMatrix(m)
