"""Exact (density-matrix ensemble) and Monte-Carlo (trajectory) circuit simulation.

Both engines consume the same compiled op stream, so noise placement is
identical between them: idle decoherence before an instruction (when the
noise model carries timing), the instruction itself, then its gate channels.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .circuit import Circuit, schedule
from .quantum import (
    DensityMatrix,
    KrausChannel,
    StateVector,
    apply_matrix_rho,
    apply_matrix_vec,
    basis_change,
)

PRUNE = 1e-14


class Op(NamedTuple):
    kind: str  # "u", "k", "m", "r"
    index: int  # originating instruction
    targets: tuple
    payload: object = None
    condition: int | None = None


@dataclass(frozen=True)
class MeasurePayload:
    clbit: int
    rotation: np.ndarray | None
    p1_given_0: float
    p0_given_1: float


def _mixed_unitary(ch: KrausChannel):
    """(weights, unitaries) when every Kraus operator is a scaled unitary."""
    weights, unis = [], []
    for k in ch.operators:
        w = np.real(np.trace(k.conj().T @ k)) / k.shape[0]
        if w <= 0:
            continue
        u = k / np.sqrt(w)
        if np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() > 1e-9:
            return None
        weights.append(w)
        unis.append(u)
    return np.array(weights), unis


@dataclass(frozen=True)
class _Kraus:
    operators: tuple
    mixed: object  # None or (weights, unitaries)


def _kraus_payload(ch: KrausChannel) -> _Kraus:
    cached = ch.__dict__.get("_payload")
    if cached is None:
        cached = _Kraus(ch.operators, _mixed_unitary(ch))
        object.__setattr__(ch, "_payload", cached)
    return cached


def compile_ops(c: Circuit, noise=None) -> list[Op]:
    c.validate()
    ops: list[Op] = []
    sched = None
    if noise is not None and noise.has_idle:
        sched = schedule(c, noise.duration, align_measurements=noise.align_measurements)
    for idx, ins in enumerate(c.instructions):
        if sched is not None:
            for q, gap in sorted(sched.idle_before[idx].items()):
                ch = noise.idle_channel(q, gap)
                if ch is not None:
                    ops.append(Op("k", idx, (q,), _kraus_payload(ch)))
        if ins.kind == "barrier":
            continue
        if ins.kind == "gate":
            ops.append(Op("u", idx, ins.qubits, ins.matrix(), ins.condition))
        elif ins.kind == "measure":
            p10, p01 = noise.readout_for(ins.qubits[0]) if noise is not None else (0.0, 0.0)
            ops.append(Op("m", idx, ins.qubits, MeasurePayload(ins.clbit, basis_change(ins.basis), p10, p01)))
        elif ins.kind == "reset":
            ops.append(Op("r", idx, ins.qubits))
        if noise is not None:
            for ch, targets in noise.channels_for(ins):
                ops.append(Op("k", idx, tuple(targets), _kraus_payload(ch), ins.condition))
    return ops


# ---------------------------------------------------------------------------
# Results


def _bits_to_str(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


@dataclass
class SimulationResult:
    """Outcome of a simulation.

    Exact mode fills ``probabilities`` and ``branches`` (unnormalised density
    matrices keyed by classical bitstring, clbit 0 leftmost). Trajectory mode
    fills ``counts``, ``memory`` and optionally ``states``.
    """

    num_qubits: int
    num_clbits: int
    probabilities: dict | None = None
    branches: dict | None = None
    counts: dict | None = None
    memory: list | None = None
    states: np.ndarray | None = None
    shots: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def outcome_distribution(self) -> dict:
        return self.probabilities if self.probabilities is not None else self.counts

    @property
    def final_density(self) -> DensityMatrix:
        if self.branches is not None:
            total = sum(self.branches.values())
        elif self.states is not None:
            total = np.einsum("si,sj->ij", self.states, self.states.conj()) / len(self.states)
        else:
            raise ValueError("this result carries no quantum state")
        total = (total + total.conj().T) / 2
        return DensityMatrix(self.num_qubits, total / np.trace(total).real)

    def conditional_density(self, condition: dict[int, int]) -> tuple[float, DensityMatrix | None]:
        """Probability of ``{clbit: value}`` and the state conditioned on it."""
        if self.branches is None:
            raise ValueError("conditional states need an exact simulation")
        acc = None
        for key, rho in self.branches.items():
            if all(int(key[c]) == v for c, v in condition.items()):
                acc = rho.copy() if acc is None else acc + rho
        if acc is None:
            return 0.0, None
        p = float(np.trace(acc).real)
        if p <= PRUNE:
            return p, None
        acc = (acc + acc.conj().T) / (2 * p)
        return p, DensityMatrix(self.num_qubits, acc)

    def marginal(self, clbits: Sequence[int]) -> dict[str, float]:
        dist = self.outcome_distribution
        out: Counter = Counter()
        for key, v in dist.items():
            out["".join(key[c] for c in clbits)] += v
        return dict(out)


# ---------------------------------------------------------------------------
# Exact engine


def _project_rho(rho: np.ndarray, n: int, qubit: int, bit: int) -> np.ndarray:
    t = rho.reshape((2,) * (2 * n))
    out = np.zeros_like(t)
    idx = [slice(None)] * (2 * n)
    idx[qubit] = bit
    idx[qubit + n] = bit
    idx = tuple(idx)
    out[idx] = t[idx]
    return out.reshape(rho.shape)


def _apply_kraus_dense(rho: np.ndarray, payload: _Kraus, targets, n: int) -> np.ndarray:
    if payload.mixed is not None:
        weights, unis = payload.mixed
        out = np.zeros_like(rho)
        for w, u in zip(weights, unis):
            out += w * apply_matrix_rho(rho, u, targets, n)
        return out
    out = np.zeros_like(rho)
    for k in payload.operators:
        out += apply_matrix_rho(rho, k, targets, n)
    return out


_RESET = (
    np.array([[1, 0], [0, 0]], dtype=complex),
    np.array([[0, 1], [0, 0]], dtype=complex),
)


def _terminal_start(ops: list[Op]) -> int:
    """Start of the trailing block that can be read out from a diagonal.

    The block holds measurements on distinct qubits plus unconditioned
    single-qubit ops on qubits that are measured later in the block.
    """
    measured: set = set()
    i = len(ops)
    while i > 0:
        op = ops[i - 1]
        if op.kind == "m":
            if op.targets[0] in measured:
                break
            measured.add(op.targets[0])
        elif op.kind in ("u", "k") and op.condition is None and len(op.targets) == 1 and op.targets[0] in measured:
            pass
        else:
            break
        i -= 1
    return i


def run_density_ops(ops: list[Op], n: int, num_clbits: int, branches: dict, keep_branches: bool = True) -> tuple[dict, dict]:
    """Evolve a classical-record ensemble through ``ops``.

    Returns ``(probabilities, branches)``; with ``keep_branches=False`` a
    trailing block of measurements is evaluated from diagonals only and the
    returned branches are those before that block.
    """
    stop = len(ops) if keep_branches else _terminal_start(ops)
    branches = {k: v for k, v in branches.items()}
    for op in ops[:stop]:
        if op.kind in ("u", "k"):
            for key, rho in branches.items():
                if op.condition is not None and key[op.condition] != "1":
                    continue
                if op.kind == "u":
                    branches[key] = apply_matrix_rho(rho, op.payload, op.targets, n)
                else:
                    branches[key] = _apply_kraus_dense(rho, op.payload, op.targets, n)
        elif op.kind == "r":
            q = op.targets[0]
            for key, rho in branches.items():
                branches[key] = apply_matrix_rho(rho, _RESET[0], [q], n) + apply_matrix_rho(rho, _RESET[1], [q], n)
        elif op.kind == "m":
            q = op.targets[0]
            mp: MeasurePayload = op.payload
            new: dict = {}
            for key, rho in branches.items():
                if mp.rotation is not None:
                    rho = apply_matrix_rho(rho, mp.rotation, [q], n)
                parts = [_project_rho(rho, n, q, b) for b in (0, 1)]
                if mp.rotation is not None:
                    back = mp.rotation.conj().T
                    parts = [apply_matrix_rho(p, back, [q], n) for p in parts]
                read = {
                    "0": (1 - mp.p1_given_0) * parts[0] + mp.p0_given_1 * parts[1],
                    "1": mp.p1_given_0 * parts[0] + (1 - mp.p0_given_1) * parts[1],
                }
                for r, st in read.items():
                    if np.trace(st).real <= PRUNE:
                        continue
                    nk = key[: mp.clbit] + r + key[mp.clbit + 1 :]
                    new[nk] = new[nk] + st if nk in new else st
            branches = new
    probs: Counter = Counter()
    if stop == len(ops):
        for key, rho in branches.items():
            probs[key] += float(np.trace(rho).real)
        return dict(probs), branches

    tail = ops[stop:]
    meas = [op for op in tail if op.kind == "m"]
    for key, rho in branches.items():
        work = rho
        for op in tail:
            if op.kind == "u":
                work = apply_matrix_rho(work, op.payload, op.targets, n)
            elif op.kind == "k":
                work = _apply_kraus_dense(work, op.payload, op.targets, n)
            elif op.payload.rotation is not None:
                work = apply_matrix_rho(work, op.payload.rotation, op.targets, n)
        diag = np.clip(np.real(np.diag(work)), 0, None).reshape((2,) * n)
        qubits = [op.targets[0] for op in meas]
        others = tuple(q for q in range(n) if q not in qubits)
        marg = diag.sum(axis=others) if others else diag
        # marg axes are in ascending qubit order; reorder to tail order
        order = sorted(qubits)
        marg = np.transpose(marg, [order.index(q) for q in qubits])
        for ax, op in enumerate(meas):
            conf = np.array(
                [[1 - op.payload.p1_given_0, op.payload.p0_given_1], [op.payload.p1_given_0, 1 - op.payload.p0_given_1]]
            )
            marg = np.moveaxis(np.tensordot(conf, marg, axes=([1], [ax])), 0, ax)
        for bits in np.ndindex(*marg.shape):
            p = float(marg[bits])
            if p <= PRUNE:
                continue
            nk = list(key)
            for b, op in zip(bits, meas):
                nk[op.payload.clbit] = str(b)
            probs["".join(nk)] += p
    return dict(probs), branches


def _initial_branches(n: int, num_clbits: int, initial) -> dict:
    zero_key = "0" * num_clbits
    if initial is None:
        rho = np.zeros((2**n, 2**n), dtype=complex)
        rho[0, 0] = 1
        return {zero_key: rho}
    if isinstance(initial, dict):
        return {k: np.asarray(v, dtype=complex) for k, v in initial.items()}
    if isinstance(initial, StateVector):
        v = initial.amplitudes
        return {zero_key: np.outer(v, v.conj())}
    if isinstance(initial, DensityMatrix):
        return {zero_key: initial.matrix.copy()}
    arr = np.asarray(initial, dtype=complex)
    if arr.ndim == 1:
        return {zero_key: np.outer(arr, arr.conj())}
    return {zero_key: arr.copy()}


def simulate_density(c: Circuit, noise=None, initial=None, keep_branches: bool = True) -> SimulationResult:
    """Exact simulation over all classical-outcome branches.

    ``initial`` optionally replaces ``|0...0>``; it may be a state, a density
    matrix or a branch dictionary from an earlier result.
    """
    if c.num_qubits > 10:
        raise ValueError(f"{c.num_qubits} qubits is too many for dense density simulation")
    ops = compile_ops(c, noise)
    branches = _initial_branches(c.num_qubits, c.num_clbits, initial)
    probs, branches = run_density_ops(ops, c.num_qubits, c.num_clbits, branches, keep_branches)
    return SimulationResult(
        c.num_qubits,
        c.num_clbits,
        probabilities=probs,
        branches=branches if keep_branches else None,
    )


# ---------------------------------------------------------------------------
# Trajectory engine


def _sample_choice(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Per-row categorical sample from a (shots, k) probability array."""
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = np.maximum(cum[:, -1], 1.0)
    u = rng.random(probs.shape[0])[:, None] * cum[:, -1:]
    return np.minimum((u >= cum).sum(axis=1), probs.shape[1] - 1)


def _qubit_one_prob(states: np.ndarray, q: int, n: int) -> np.ndarray:
    t = states.reshape((states.shape[0],) + (2,) * n)
    sl = [slice(None)] * (n + 1)
    sl[q + 1] = 1
    part = t[tuple(sl)]
    return np.sum(np.abs(part.reshape(states.shape[0], -1)) ** 2, axis=1)


def _collapse(states: np.ndarray, q: int, n: int, bits: np.ndarray) -> np.ndarray:
    t = states.reshape((states.shape[0],) + (2,) * n).copy()
    for b in (0, 1):
        sl = [slice(None)] * (n + 1)
        sl[q + 1] = 1 - b
        mask = bits == b
        view = t[tuple(sl)]
        view[mask] = 0
        t[tuple(sl)] = view
    out = t.reshape(states.shape)
    norms = np.linalg.norm(out, axis=1)
    return out / np.where(norms > 0, norms, 1)[:, None]


def run_trajectory_ops(ops: list[Op], n: int, states: np.ndarray, clbits: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    shots = states.shape[0]
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    for op in ops:
        mask = None
        if op.condition is not None:
            mask = clbits[:, op.condition] == 1
            if not mask.any():
                continue
        if op.kind == "u":
            if mask is None:
                states = apply_matrix_vec(states, op.payload, op.targets, n)
            else:
                states[mask] = apply_matrix_vec(states[mask], op.payload, op.targets, n)
        elif op.kind == "k":
            rows = np.arange(shots) if mask is None else np.flatnonzero(mask)
            payload: _Kraus = op.payload
            if payload.mixed is not None:
                weights, unis = payload.mixed
                choice = _sample_choice(rng, np.broadcast_to(weights / weights.sum(), (len(rows), len(weights))))
                for k, u in enumerate(unis):
                    sel = rows[choice == k]
                    if len(sel) and not np.allclose(u, np.eye(u.shape[0])):
                        states[sel] = apply_matrix_vec(states[sel], u, op.targets, n)
            else:
                sub = states[rows]
                cands = [apply_matrix_vec(sub, k, op.targets, n) for k in payload.operators]
                probs = np.stack([np.sum(np.abs(v) ** 2, axis=1) for v in cands], axis=1)
                choice = _sample_choice(rng, probs / probs.sum(axis=1, keepdims=True))
                new = np.empty_like(sub)
                for k, v in enumerate(cands):
                    sel = choice == k
                    if sel.any():
                        new[sel] = v[sel] / np.sqrt(probs[sel, k])[:, None]
                states[rows] = new
        elif op.kind in ("m", "r"):
            q = op.targets[0]
            mp = op.payload
            if op.kind == "m" and mp.rotation is not None:
                states = apply_matrix_vec(states, mp.rotation, [q], n)
            p1 = np.clip(_qubit_one_prob(states, q, n), 0, 1)
            bits = (rng.random(shots) < p1).astype(np.uint8)
            states = _collapse(states, q, n, bits)
            if op.kind == "r":
                flip = np.flatnonzero(bits == 1)
                if len(flip):
                    states[flip] = apply_matrix_vec(states[flip], x, [q], n)
                continue
            if mp.rotation is not None:
                states = apply_matrix_vec(states, mp.rotation.conj().T, [q], n)
            u = rng.random(shots)
            flip = np.where(bits == 0, u < mp.p1_given_0, u < mp.p0_given_1)
            clbits[:, mp.clbit] = bits ^ flip.astype(np.uint8)
    return states, clbits


def simulate_trajectory(
    c: Circuit,
    noise=None,
    shots: int = 1024,
    seed=None,
    initial=None,
    keep_states: bool = False,
) -> SimulationResult:
    """Shot-by-shot Monte-Carlo simulation (vectorised over shots)."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    if c.num_qubits > 16:
        raise ValueError(f"{c.num_qubits} qubits is too many for state-vector trajectories")
    rng = np.random.default_rng(seed)
    ops = compile_ops(c, noise)
    dim = 2**c.num_qubits
    if initial is None:
        states = np.zeros((shots, dim), dtype=complex)
        states[:, 0] = 1
    else:
        vec = initial.amplitudes if isinstance(initial, StateVector) else np.asarray(initial, dtype=complex)
        states = np.tile(vec.reshape(1, -1), (shots, 1)) if vec.ndim == 1 else vec.copy()
    clbits = np.zeros((shots, c.num_clbits), dtype=np.uint8)
    states, clbits = run_trajectory_ops(ops, c.num_qubits, states, clbits, rng)
    memory = ["".join(map(str, row)) for row in clbits]
    return SimulationResult(
        c.num_qubits,
        c.num_clbits,
        counts=dict(Counter(memory)),
        memory=memory,
        states=states if keep_states else None,
        shots=shots,
    )


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of a measurement-free, reset-free, unconditioned circuit."""
    n = c.num_qubits
    u = np.eye(2**n, dtype=complex)
    for ins in c.instructions:
        if ins.kind == "barrier":
            continue
        if ins.kind != "gate" or ins.condition is not None:
            raise ValueError("circuit is not purely unitary")
        u = apply_matrix_vec(u.T, ins.matrix(), ins.qubits, n).T
    return u
