"""Conditional state tomography, reconstruction and readout-error mitigation."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import nnls

from .circuit import Circuit, Instruction
from .device import CalibrationMatrix, DeviceModel, NoiseModel, readout_confusion
from .quantum import PAULI_MATRICES, DensityMatrix
from .simulator import _initial_branches, compile_ops, run_density_ops

DEFAULT_SHOTS = 8192
MAX_CONDITION_NUMBER = 1e8


def tomo_settings(n: int) -> list[str]:
    """All 3^n measurement settings, lexicographic with X < Y < Z."""
    if n < 1:
        raise ValueError("need at least one qubit")
    return ["".join(s) for s in itertools.product("XYZ", repeat=n)]


@dataclass(frozen=True)
class Condition:
    """Post-selection on ancilla readouts: ``qubits[i]`` must read ``outcome[i]``."""

    qubits: tuple[int, ...] = ()
    outcome: str = ""

    def __post_init__(self):
        if len(self.qubits) != len(self.outcome):
            raise ValueError("condition qubits and outcome differ in length")
        if any(ch not in "01" for ch in self.outcome):
            raise ValueError("condition outcome must be a bitstring")

    def to_dict(self) -> dict:
        return {"qubits": list(self.qubits), "outcome": self.outcome}


@dataclass
class TomographyDataset:
    """Counts per setting.

    ``joint_counts[k]`` maps data bits followed by condition bits to a count
    (floats in exact mode). ``counts``/``accepted``/``total`` are derived by
    applying the condition.
    """

    data_qubits: tuple[int, ...]
    settings: list[str]
    joint_counts: list[dict]
    condition: Condition = field(default_factory=Condition)
    exact: bool = False
    counts: list[dict] = field(init=False)
    accepted: list[float] = field(init=False)
    total: list[float] = field(init=False)

    def __post_init__(self):
        self.data_qubits = tuple(self.data_qubits)
        if len(self.settings) != len(self.joint_counts):
            raise ValueError("one count table per setting is required")
        n = len(self.data_qubits)
        self.counts, self.accepted, self.total = [], [], []
        for jc in self.joint_counts:
            kept: dict = {}
            for key, v in jc.items():
                if key[n:] == self.condition.outcome:
                    kept[key[:n]] = kept.get(key[:n], 0) + v
            self.counts.append(kept)
            self.accepted.append(sum(kept.values()))
            self.total.append(sum(jc.values()))

    @property
    def num_qubits(self) -> int:
        return len(self.data_qubits)

    @property
    def accepted_fraction(self) -> list[float]:
        return [a / t if t else 0.0 for a, t in zip(self.accepted, self.total)]

    def to_dict(self) -> dict:
        return {
            "data_qubits": list(self.data_qubits),
            "settings": list(self.settings),
            "condition": self.condition.to_dict(),
            "exact": self.exact,
            "joint_counts": [dict(sorted(jc.items())) for jc in self.joint_counts],
            "accepted": self.accepted,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TomographyDataset":
        return cls(
            tuple(d["data_qubits"]),
            list(d["settings"]),
            [dict(jc) for jc in d["joint_counts"]],
            Condition(tuple(d["condition"]["qubits"]), d["condition"]["outcome"]),
            bool(d.get("exact", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _condition_clbits(c: Circuit, cond: Condition) -> tuple[Circuit, list[int]]:
    """Clbits carrying each condition qubit, measuring it in Z if the circuit does not."""
    last: dict[int, Instruction] = {}
    for ins in c.instructions:
        for q in ins.qubits:
            last[q] = ins
    out = c.copy()
    clbits = []
    for q in cond.qubits:
        ins = last.get(q)
        if ins is not None and ins.kind == "measure":
            clbits.append(ins.clbit)
        else:
            out = out.widen(num_clbits=out.num_clbits + 1)
            out.measure(q, out.num_clbits - 1)
            clbits.append(out.num_clbits - 1)
    return out, clbits


def _with_setting(base: Circuit, data_qubits: Sequence[int], setting: str) -> tuple[Circuit, list[int]]:
    c = base.widen(num_clbits=base.num_clbits + len(data_qubits))
    clbits = []
    for i, (q, letter) in enumerate(zip(data_qubits, setting)):
        if letter == "X":
            c.h(q)
        elif letter == "Y":
            c.sdg(q)
            c.h(q)
        clbits.append(base.num_clbits + i)
    for q, cb in zip(data_qubits, clbits):
        c.measure(q, cb)
    return c, clbits


def _joint_distribution(probs: Mapping[str, float], bits: Sequence[int]) -> dict[str, float]:
    out: dict[str, float] = {}
    for key, p in probs.items():
        k = "".join(key[b] for b in bits)
        out[k] = out.get(k, 0.0) + p
    return out


def _sample(dist: Mapping[str, float], shots: int, rng: np.random.Generator) -> dict[str, int]:
    keys = sorted(dist)
    p = np.clip(np.array([dist[k] for k in keys]), 0, None)
    draws = rng.multinomial(shots, p / p.sum())
    return {k: int(n) for k, n in zip(keys, draws) if n}


def collect(
    c: Circuit,
    data_qubits: Sequence[int],
    condition: Condition | tuple | None = None,
    settings: Sequence[str] | None = None,
    shots_per_setting: int = DEFAULT_SHOTS,
    noise: NoiseModel | None = None,
    seed=None,
    exact: bool = False,
) -> TomographyDataset:
    """Measure ``data_qubits`` in every setting after running ``c``.

    Each setting appends basis-change gates and Z measurements and is
    simulated exactly; finite-shot data are multinomial draws from the exact
    outcome distribution with an independent child seed per setting.
    ``exact`` records probabilities times ``shots_per_setting`` instead.
    """
    if condition is None:
        condition = Condition()
    elif not isinstance(condition, Condition):
        condition = Condition(tuple(condition[0]), str(condition[1]))
    data_qubits = tuple(int(q) for q in data_qubits)
    if set(condition.qubits) & set(data_qubits):
        raise ValueError("condition qubits overlap the data qubits")
    if len(set(data_qubits)) != len(data_qubits):
        raise ValueError("data qubits must be distinct")
    settings = list(settings) if settings is not None else tomo_settings(len(data_qubits))
    base, cond_bits = _condition_clbits(c, condition)

    prefix_len = len(base.instructions)
    cache = None
    n = base.num_qubits
    children = np.random.SeedSequence(seed).spawn(len(settings))
    joint = []
    for k, setting in enumerate(settings):
        if len(setting) != len(data_qubits) or any(ch not in "XYZ" for ch in setting):
            raise ValueError(f"bad setting {setting!r}")
        full, data_bits = _with_setting(base, data_qubits, setting)
        ops = compile_ops(full, noise)
        # ops before the first measurement do not depend on the setting; aligned
        # readout timing can change measurement ops, so those always rerun
        split = next(
            (i for i, op in enumerate(ops) if op.index >= prefix_len or full.instructions[op.index].kind == "measure"),
            len(ops),
        )
        if cache is None:
            _, branches = run_density_ops(ops[:split], n, full.num_clbits, _initial_branches(n, full.num_clbits, None))
            cache = branches
        probs, _ = run_density_ops(ops[split:], n, full.num_clbits, cache, keep_branches=False)
        dist = _joint_distribution(probs, list(data_bits) + list(cond_bits))
        if exact:
            joint.append({key: p * shots_per_setting for key, p in dist.items() if p > 0})
        else:
            joint.append(_sample(dist, shots_per_setting, np.random.default_rng(children[k])))
    return TomographyDataset(data_qubits, settings, joint, condition, exact)


# ---------------------------------------------------------------------------
# Reconstruction


def _walsh(f: np.ndarray, n: int) -> np.ndarray:
    """out[m] = sum_b f[b] (-1)^{popcount(b & m)} via the fast transform."""
    t = f.reshape((2,) * n).astype(float)
    for ax in range(n):
        a = np.take(t, 0, axis=ax)
        b = np.take(t, 1, axis=ax)
        t = np.stack([a + b, a - b], axis=ax)
    return t.reshape(-1)


@lru_cache(maxsize=8)
def _pauli_basis(n: int) -> tuple[list[str], np.ndarray]:
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=n)]
    mats = np.empty((len(labels), 2**n, 2**n), dtype=complex)
    for i, lbl in enumerate(labels):
        m = np.array([[1.0 + 0j]])
        for ch in lbl:
            m = np.kron(m, PAULI_MATRICES[ch])
        mats[i] = m
    return labels, mats


def pauli_expectations(ds: TomographyDataset) -> dict[str, float]:
    """Estimate every Pauli expectation, averaging over compatible settings."""
    n = ds.num_qubits
    missing = set(tomo_settings(n)) - set(ds.settings)
    if missing:
        raise ValueError(f"{len(missing)} measurement settings missing, e.g. {sorted(missing)[0]}")
    sums: dict[str, float] = {}
    hits: dict[str, int] = {}
    for setting, counts, acc in zip(ds.settings, ds.counts, ds.accepted):
        if acc <= 0:
            raise ValueError(f"setting {setting} has no accepted shots")
        f = np.zeros(2**n)
        for key, v in counts.items():
            f[int(key, 2)] += v
        w = _walsh(f / acc, n)
        for m in range(2**n):
            label = "".join(setting[i] if (m >> (n - 1 - i)) & 1 else "I" for i in range(n))
            sums[label] = sums.get(label, 0.0) + w[m]
            hits[label] = hits.get(label, 0) + 1
    return {k: sums[k] / hits[k] for k in sums}


def project_to_density(m: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) unit-trace PSD matrix via simplex projection of eigenvalues."""
    m = (m + m.conj().T) / 2
    vals, vecs = np.linalg.eigh(m)
    mu = np.sort(vals)[::-1]
    css = np.cumsum(mu)
    ks = np.arange(1, len(mu) + 1)
    rho_idx = np.nonzero(mu - (css - 1) / ks > 0)[0][-1]
    theta = (css[rho_idx] - 1) / (rho_idx + 1)
    lam = np.clip(vals - theta, 0, None)
    out = (vecs * lam) @ vecs.conj().T
    return (out + out.conj().T) / 2


def reconstruct(ds: TomographyDataset) -> DensityMatrix:
    """Linear inversion followed by PSD projection."""
    n = ds.num_qubits
    exps = pauli_expectations(ds)
    labels, mats = _pauli_basis(n)
    coeffs = np.array([exps.get(lbl, 0.0) for lbl in labels])
    coeffs[0] = 1.0
    raw = np.tensordot(coeffs, mats, axes=1) / 2**n
    return DensityMatrix(n, project_to_density(raw))


# ---------------------------------------------------------------------------
# Calibration and mitigation


def build_calibration(
    source,
    qubits: Sequence[int],
    shots: int = DEFAULT_SHOTS,
    seed=None,
    exact: bool = False,
) -> CalibrationMatrix:
    """Measure the readout confusion matrix on ``qubits``.

    ``source`` is a DeviceModel (``qubits`` are device qubits) or a
    NoiseModel (``qubits`` are circuit qubits). Each basis state is prepared
    with X gates and read out under readout noise only.
    """
    qubits = [int(q) for q in qubits]
    if isinstance(source, DeviceModel):
        if exact:
            return readout_confusion(source, qubits)
        rates = {i: (source.qubits[q].readout_p1_given_0, source.qubits[q].readout_p0_given_1) for i, q in enumerate(qubits)}
    else:
        rates = {i: source.readout_for(q) for i, q in enumerate(qubits)}
    noise = NoiseModel.readout_flips(rates)
    m = len(qubits)
    rng_children = np.random.SeedSequence(seed).spawn(2**m)
    cols = []
    for idx in range(2**m):
        c = Circuit(m, m)
        bits = format(idx, f"0{m}b")
        for q, b in enumerate(bits):
            if b == "1":
                c.x(q)
        for q in range(m):
            c.measure(q, q)
        ops = compile_ops(c, noise)
        probs, _ = run_density_ops(ops, m, m, _initial_branches(m, m, None), keep_branches=False)
        col = np.zeros(2**m)
        if exact:
            for key, p in probs.items():
                col[int(key, 2)] += p
        else:
            for key, k in _sample(probs, shots, np.random.default_rng(rng_children[idx])).items():
                col[int(key, 2)] += k / shots
        cols.append(col)
    return CalibrationMatrix(np.array(cols).T, tuple(qubits))


def _solve_counts(cal: np.ndarray, observed: np.ndarray) -> np.ndarray:
    total = observed.sum()
    if total <= 0:
        return observed.copy()
    # sum constraint enforced softly through a heavily weighted extra row
    weight = 10.0 * np.sqrt(len(observed))
    a = np.vstack([cal, weight * np.ones((1, cal.shape[1]))])
    b = np.concatenate([observed / total, [weight]])
    x, _ = nnls(a, b, maxiter=50 * cal.shape[1])
    s = x.sum()
    return x * (total / s) if s > 0 else x


def mitigate(ds: TomographyDataset, cal: CalibrationMatrix) -> TomographyDataset:
    """Replace each setting's joint counts by the nonnegative least-squares
    preimage under ``cal`` (data and condition bits together), then re-condition."""
    m = ds.num_qubits + len(ds.condition.qubits)
    mat = np.asarray(cal.matrix)
    if mat.shape != (2**m, 2**m):
        raise ValueError(f"calibration is {mat.shape[0]}x{mat.shape[1]}, data need {2**m}x{2**m}")
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > MAX_CONDITION_NUMBER:
        raise np.linalg.LinAlgError(f"calibration matrix is singular (condition number {cond:.3g})")
    identity = np.allclose(mat, np.eye(2**m), atol=1e-15)
    new_joint = []
    for jc in ds.joint_counts:
        if identity:
            new_joint.append(dict(jc))
            continue
        y = np.zeros(2**m)
        for key, v in jc.items():
            y[int(key, 2)] += v
        x = _solve_counts(mat, y)
        new_joint.append({format(i, f"0{m}b"): float(v) for i, v in enumerate(x) if v > 1e-12})
    return TomographyDataset(ds.data_qubits, list(ds.settings), new_joint, ds.condition, ds.exact)


def density_to_json(rho: DensityMatrix) -> list:
    """Nested rows of ``[real, imag]`` pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho.matrix]


def density_from_json(data) -> DensityMatrix:
    arr = np.array(data, dtype=float)
    return DensityMatrix.from_array(arr[..., 0] + 1j * arr[..., 1])
