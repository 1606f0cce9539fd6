"""Post-selected depolarizing model on two data qubits and a one-parameter fit
of its no-error probability.

Fault qubits are given as 1-based data-qubit labels, so ``(1, 5)`` means the
first and the last data qubit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quantum import DensityMatrix, as_density, spectral_norm, trace_distance

DEFAULT_FAULT_QUBITS = (1, 5)
ALT_FAULT_QUBITS = (2, 4)
GRID_STEP = 1e-3
REFINE_TOL = 1e-5
_GOLDEN = (math.sqrt(5) - 1) / 2


def per_pauli_error_rate(p: float) -> float:
    """Probability of each of X, Y, Z under a depolarizing channel with no-error probability ``p``."""
    _check_p(p)
    return (1.0 - p) / 3.0


def _check_p(p: float) -> None:
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ValueError(f"p must lie in [0, 1], got {p}")


def _zero_based(fault_qubits: Sequence[int], n: int) -> tuple[int, int]:
    if len(fault_qubits) != 2:
        raise ValueError("fault_qubits must be a pair")
    a, b = (int(q) - 1 for q in fault_qubits)
    if a == b:
        raise ValueError("fault qubits must be distinct")
    if not (0 <= a < n and 0 <= b < n):
        raise ValueError(f"fault qubits {tuple(fault_qubits)} out of range 1..{n}")
    return a, b


def _depolarize_fully(m: np.ndarray, q: int, n: int) -> np.ndarray:
    """Replace qubit ``q`` by I/2: Tr_q(m) tensored back in place."""
    t = m.reshape((2,) * (2 * n))
    reduced = np.trace(t, axis1=q, axis2=n + q)  # drops axes q and n+q
    reduced = np.expand_dims(np.expand_dims(reduced, q), n + q)
    eye = np.eye(2).reshape([2 if k in (q, n + q) else 1 for k in range(2 * n)])
    return (reduced * eye / 2).reshape(m.shape)


def _eq1_terms(rho: np.ndarray, a: int, b: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    da = _depolarize_fully(rho, a, n)
    db = _depolarize_fully(rho, b, n)
    dab = _depolarize_fully(da, b, n)
    return da + db, dab, rho


def _mix(terms, p: float) -> np.ndarray:
    # Depolarizing with no-error probability p keeps rho with weight (4p-1)/3
    # and replaces it by its fully depolarized version otherwise.
    single, both, rho = terms
    s = (4.0 * p - 1.0) / 3.0
    return s * s * rho + s * (1 - s) * single + (1 - s) ** 2 * both


def eq1_channel(rho_ideal, p: float, fault_qubits: Sequence[int] = DEFAULT_FAULT_QUBITS) -> DensityMatrix:
    """Independent single-qubit depolarizing(p) on both fault qubits."""
    _check_p(p)
    rho = as_density(rho_ideal)
    a, b = _zero_based(fault_qubits, rho.num_qubits)
    out = _mix(_eq1_terms(rho.matrix, a, b, rho.num_qubits), p)
    return DensityMatrix(rho.num_qubits, (out + out.conj().T) / 2)


@dataclass
class FitResult:
    p_opt: float
    residual: float
    fault_qubits: tuple[int, int]
    objective: str = "spectral"
    scan: list[tuple[float, float]] = field(default_factory=list)

    @property
    def per_pauli_error_rate(self) -> float:
        return per_pauli_error_rate(self.p_opt)

    def to_dict(self) -> dict:
        return {
            "p_opt": self.p_opt,
            "residual": self.residual,
            "per_pauli_error_rate": self.per_pauli_error_rate,
            "fault_qubits": list(self.fault_qubits),
            "objective": self.objective,
            "scan": [[p, r] for p, r in self.scan],
        }

    @classmethod
    def from_dict(cls, d) -> "FitResult":
        return cls(
            float(d["p_opt"]),
            float(d["residual"]),
            tuple(d["fault_qubits"]),
            d.get("objective", "spectral"),
            [tuple(x) for x in d.get("scan", [])],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


_OBJECTIVES: dict[str, Callable[[np.ndarray, np.ndarray], float]] = {
    "spectral": lambda x, y: spectral_norm(x - y),
    "trace": lambda x, y: trace_distance(x, y),
}


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    return (lo + hi) / 2


def fit_p(
    rho_recon,
    rho_ideal,
    fault_qubits: Sequence[int] = DEFAULT_FAULT_QUBITS,
    objective: str = "spectral",
) -> FitResult:
    """Grid scan of p at step 1e-3, then golden-section refinement to 1e-5.

    ``objective="trace"`` swaps the spectral norm for trace distance.
    """
    if objective not in _OBJECTIVES:
        raise ValueError(f"objective must be one of {sorted(_OBJECTIVES)}")
    target = as_density(rho_recon)
    ideal = as_density(rho_ideal)
    if target.num_qubits != ideal.num_qubits:
        raise ValueError("reconstructed and ideal states differ in size")
    a, b = _zero_based(fault_qubits, ideal.num_qubits)
    terms = _eq1_terms(ideal.matrix, a, b, ideal.num_qubits)
    obj = _OBJECTIVES[objective]

    def residual(p: float) -> float:
        return float(obj(_mix(terms, p), target.matrix))

    steps = int(round(1.0 / GRID_STEP))
    grid = [k / steps for k in range(steps + 1)]
    scan = [(p, residual(p)) for p in grid]
    k = min(range(len(scan)), key=lambda i: (scan[i][1], -i))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, steps)]
    p_ref = _golden_section(residual, lo, hi, REFINE_TOL)
    best_p, best_r = scan[k]
    r_ref = residual(p_ref)
    if r_ref < best_r:
        best_p, best_r = p_ref, r_ref
    return FitResult(float(best_p), float(best_r), (int(fault_qubits[0]), int(fault_qubits[1])), objective, scan)
