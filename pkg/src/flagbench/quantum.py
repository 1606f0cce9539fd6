"""Dense numerical quantum mechanics shared by every other module.

Qubit ordering: qubit 0 is the leftmost tensor factor, i.e. the most
significant bit of a basis-state index. ``tensor_product(a, b)`` therefore puts
``a`` on the low-numbered qubits, and a Pauli label such as ``"XZZXI"`` reads
qubit 0 first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

MAX_QUBITS = 12
TOL = 1e-10
PSD_TOL = 1e-8

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ResourceLimitError(ValueError):
    """Raised when an operation would exceed the dense-simulation qubit cap."""


def _num_qubits_for_dim(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _check_cap(n: int, cap: int = MAX_QUBITS) -> None:
    if n > cap:
        raise ResourceLimitError(f"{n} qubits exceeds the dense cap of {cap}")


# ---------------------------------------------------------------------------
# States and operators


@dataclass(frozen=True, eq=False)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2**self.num_qubits:
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes, got {amps.shape[0]}"
            )
        norm = np.vdot(amps, amps).real
        if abs(norm - 1) > TOL:
            raise ValueError(f"state vector norm {norm} != 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_array(cls, amps, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(_num_qubits_for_dim(amps.shape[0]), amps)

    @classmethod
    def from_label(cls, label: str) -> "StateVector":
        """Product state from a string over ``0 1 + - r l`` (r/l = +i/-i)."""
        single = {
            "0": np.array([1, 0], dtype=complex),
            "1": np.array([0, 1], dtype=complex),
            "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
            "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
            "r": np.array([1, 1j], dtype=complex) / np.sqrt(2),
            "l": np.array([1, -1j], dtype=complex) / np.sqrt(2),
        }
        vec = np.array([1], dtype=complex)
        for ch in label:
            vec = np.kron(vec, single[ch])
        return cls(len(label), vec)

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        vec = np.zeros(2**n, dtype=complex)
        vec[0] = 1
        return cls(n, vec)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.num_qubits == other.num_qubits and np.allclose(
            self.amplitudes, other.amplitudes, atol=TOL
        )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = 2**self.num_qubits
        if m.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {m.shape}")
        if not np.allclose(m, m.conj().T, atol=TOL):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1) > TOL:
            raise ValueError(f"density matrix trace {tr} != 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_array(cls, m) -> "DensityMatrix":
        m = np.asarray(m, dtype=complex)
        return cls(_num_qubits_for_dim(m.shape[0]), m)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(n, np.eye(2**n, dtype=complex) / 2**n)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expectation(self, op) -> float:
        if isinstance(op, PauliString):
            op = op.matrix()
        return float(np.real(np.trace(self.matrix @ op)))


def as_density(state) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, StateVector):
        return state.to_density()
    raise TypeError(f"not a quantum state: {type(state).__name__}")


_LETTER_TO_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_XZ_TO_LETTER = {v: k for k, v in _LETTER_TO_XZ.items()}


@dataclass(frozen=True)
class PauliString:
    """Signed n-qubit Pauli operator, e.g. ``PauliString("XZZXI")``."""

    letters: str
    sign: int = 1

    def __post_init__(self):
        letters = self.letters.upper()
        if any(c not in "IXYZ" for c in letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        text = text.strip()
        sign = 1
        if text[:1] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        return cls(text, sign)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        letters = ["I"] * n
        letters[qubit] = letter
        return cls("".join(letters))

    @classmethod
    def from_symplectic(cls, x, z, sign: int = 1) -> "PauliString":
        return cls("".join(_XZ_TO_LETTER[(int(a), int(b))] for a, b in zip(x, z)), sign)

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    def support(self) -> list[int]:
        return [i for i, c in enumerate(self.letters) if c != "I"]

    def symplectic(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([_LETTER_TO_XZ[c][0] for c in self.letters], dtype=np.uint8)
        z = np.array([_LETTER_TO_XZ[c][1] for c in self.letters], dtype=np.uint8)
        return x, z

    def commutes(self, other: "PauliString") -> bool:
        return symplectic_product(self, other) == 0

    def matrix(self) -> np.ndarray:
        m = np.array([[self.sign]], dtype=complex)
        for c in self.letters:
            m = np.kron(m, PAULI_MATRICES[c])
        return m

    def unsigned(self) -> "PauliString":
        return PauliString(self.letters)

    def mul_unsigned(self, other: "PauliString") -> "PauliString":
        """Product with the overall phase discarded."""
        x1, z1 = self.symplectic()
        x2, z2 = other.symplectic()
        return PauliString.from_symplectic(x1 ^ x2, z1 ^ z2)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.num_qubits != other.num_qubits:
            raise ValueError("Pauli strings act on different qubit counts")
        phase = 1 + 0j
        out = []
        for a, b in zip(self.letters, other.letters):
            prod = PAULI_MATRICES[a] @ PAULI_MATRICES[b]
            for letter, mat in PAULI_MATRICES.items():
                overlap = np.trace(mat @ prod) / 2
                if abs(overlap) > 0.5:
                    phase *= overlap
                    out.append(letter)
                    break
        phase *= self.sign * other.sign
        if abs(phase.imag) > 0.5:
            raise ValueError("product of anticommuting Pauli strings is not Hermitian")
        return PauliString("".join(out), 1 if phase.real > 0 else -1)

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "+") + self.letters


def symplectic_product(a: PauliString, b: PauliString) -> int:
    """0 if the Paulis commute, 1 if they anticommute."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("Pauli strings act on different qubit counts")
    x1, z1 = a.symplectic()
    x2, z2 = b.symplectic()
    return int((np.dot(x1, z2) + np.dot(z1, x2)) % 2)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    operators: tuple
    arity: int = field(default=-1)

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValueError("a Kraus channel needs at least one operator")
        dim = ops[0].shape[0]
        if any(k.shape != (dim, dim) for k in ops):
            raise ValueError("Kraus operators must be square with equal dimensions")
        n = _num_qubits_for_dim(dim)
        if self.arity not in (-1, n):
            raise ValueError(f"arity {self.arity} does not match operator dimension {dim}")
        total = sum(k.conj().T @ k for k in ops)
        if not np.allclose(total, np.eye(dim), atol=TOL):
            raise ValueError("Kraus operators are not complete (sum K^dag K != I)")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "arity", n)

    @classmethod
    def identity(cls, arity: int = 1) -> "KrausChannel":
        return cls((np.eye(2**arity),))

    @classmethod
    def from_pauli_probabilities(cls, probs: dict[str, float]) -> "KrausChannel":
        """Pauli channel from {label: probability}; zero-weight terms dropped."""
        ops = [np.sqrt(p) * PauliString(lbl).matrix() for lbl, p in probs.items() if p > 0]
        return cls(tuple(ops))

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """Channel applying ``self`` first, then ``other``."""
        ops = [b @ a for a in self.operators for b in other.operators]
        ops = [k for k in ops if np.abs(k).max() > 0]
        return KrausChannel(tuple(ops))

    def is_identity(self, atol: float = 1e-12) -> bool:
        if len(self.operators) != 1:
            nonzero = [k for k in self.operators if np.abs(k).max() > atol]
            if len(nonzero) != 1:
                return False
            k = nonzero[0]
        else:
            k = self.operators[0]
        phase = k[0, 0]
        return abs(abs(phase) - 1) < atol and np.allclose(k, phase * np.eye(k.shape[0]), atol=atol)


# ---------------------------------------------------------------------------
# Low-level tensor kernels. ``vec`` may carry a leading batch axis.


def _apply_to_axes(tensor: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    u_t = u.reshape((2,) * (2 * k))
    out = np.tensordot(u_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_matrix_vec(vec: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply ``u`` to ``targets`` of a (batch of) state vector(s) of ``n`` qubits."""
    batch = vec.shape[:-1]
    t = vec.reshape(batch + (2,) * n)
    off = len(batch)
    out = _apply_to_axes(t, u, [q + off for q in targets])
    return out.reshape(batch + (2**n,))


def apply_matrix_rho(rho: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``u rho u^dag`` acting on ``targets`` of an n-qubit operator."""
    t = rho.reshape((2,) * (2 * n))
    t = _apply_to_axes(t, u, list(targets))
    t = _apply_to_axes(t, u.conj(), [q + n for q in targets])
    return t.reshape(2**n, 2**n)


def apply_kraus_rho(rho: np.ndarray, ops: Sequence[np.ndarray], targets: Sequence[int], n: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in ops:
        out += apply_matrix_rho(rho, k, targets, n)
    return out


def projector_slices(n: int, qubit: int, bit: int) -> tuple:
    """Index tuple selecting basis states with ``qubit`` equal to ``bit``."""
    idx = [slice(None)] * n
    idx[qubit] = bit
    return tuple(idx)


def basis_change(basis: str) -> np.ndarray | None:
    """Unitary rotating the ``basis`` eigenbasis onto the computational basis."""
    basis = basis.upper()
    if basis == "Z":
        return None
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if basis == "X":
        return h
    if basis == "Y":
        sdg = np.diag([1, -1j])
        return h @ sdg
    raise ValueError(f"unknown measurement basis {basis!r}")


# ---------------------------------------------------------------------------
# Public operations


def tensor_product(a, b, cap: int = MAX_QUBITS):
    """Kronecker product of two states or operators; ``a`` takes the low qubits."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        _check_cap(a.num_qubits + b.num_qubits, cap)
        return StateVector(a.num_qubits + b.num_qubits, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, (StateVector, DensityMatrix)) and isinstance(b, (StateVector, DensityMatrix)):
        a, b = as_density(a), as_density(b)
        _check_cap(a.num_qubits + b.num_qubits, cap)
        return DensityMatrix(a.num_qubits + b.num_qubits, np.kron(a.matrix, b.matrix))
    a_arr, b_arr = np.asarray(a), np.asarray(b)
    n = _num_qubits_for_dim(a_arr.shape[0]) + _num_qubits_for_dim(b_arr.shape[0])
    _check_cap(n, cap)
    return np.kron(a_arr, b_arr)


def _validate_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target qubit in {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise ValueError(f"target out of range for {n} qubits: {targets}")
    return targets


def is_unitary(u: np.ndarray, atol: float = TOL) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol)


def apply_unitary(state, u, targets: Sequence[int]):
    u = np.asarray(u, dtype=complex)
    n = state.num_qubits
    targets = _validate_targets(targets, n)
    if u.shape != (2 ** len(targets),) * 2:
        raise ValueError(f"unitary shape {u.shape} does not match {len(targets)} targets")
    if not is_unitary(u):
        raise ValueError("matrix is not unitary")
    if isinstance(state, StateVector):
        return StateVector(n, apply_matrix_vec(state.amplitudes, u, targets, n))
    if isinstance(state, DensityMatrix):
        return DensityMatrix(n, apply_matrix_rho(state.matrix, u, targets, n))
    raise TypeError(f"not a quantum state: {type(state).__name__}")


def apply_kraus(rho, ch: KrausChannel, targets: Sequence[int]) -> DensityMatrix:
    rho = as_density(rho)
    n = rho.num_qubits
    targets = _validate_targets(targets, n)
    if ch.arity != len(targets):
        raise ValueError(f"channel arity {ch.arity} != {len(targets)} targets")
    out = apply_kraus_rho(rho.matrix, ch.operators, targets, n)
    return DensityMatrix(n, out)


class Outcome(NamedTuple):
    outcome: int
    probability: float
    state: object  # post-measurement state, None when probability is zero


def measure_projective(state, qubit: int, basis: str = "Z", rng: np.random.Generator | None = None):
    """Projective single-qubit measurement.

    With ``rng`` the outcome is sampled and a single :class:`Outcome` returned.
    Without it the measurement is exact: both outcomes are returned as a tuple
    ``(Outcome(0, ...), Outcome(1, ...))``. Outcome 0 is the +1 eigenvalue of
    the measured Pauli.
    """
    n = state.num_qubits
    _validate_targets([qubit], n)
    rot = basis_change(basis)
    outcomes = []
    if isinstance(state, StateVector):
        vec = state.amplitudes
        if rot is not None:
            vec = apply_matrix_vec(vec, rot, [qubit], n)
        t = vec.reshape((2,) * n)
        for bit in (0, 1):
            proj = np.zeros_like(t)
            sl = projector_slices(n, qubit, bit)
            proj[sl] = t[sl]
            p = float(np.vdot(proj, proj).real)
            post = None
            if p > 1e-15:
                v = proj.reshape(-1) / np.sqrt(p)
                if rot is not None:
                    v = apply_matrix_vec(v, rot.conj().T, [qubit], n)
                post = StateVector(n, v / np.linalg.norm(v))
            outcomes.append(Outcome(bit, p, post))
    else:
        rho = as_density(state).matrix
        if rot is not None:
            rho = apply_matrix_rho(rho, rot, [qubit], n)
        t = rho.reshape((2,) * (2 * n))
        for bit in (0, 1):
            proj = np.zeros_like(t)
            idx = [slice(None)] * (2 * n)
            idx[qubit] = bit
            idx[qubit + n] = bit
            proj[tuple(idx)] = t[tuple(idx)]
            m = proj.reshape(2**n, 2**n)
            p = float(np.trace(m).real)
            post = None
            if p > 1e-15:
                m = m / p
                if rot is not None:
                    m = apply_matrix_rho(m, rot.conj().T, [qubit], n)
                post = DensityMatrix(n, (m + m.conj().T) / 2)
            outcomes.append(Outcome(bit, max(p, 0.0), post))
    if rng is None:
        return tuple(outcomes)
    p1 = outcomes[1].probability / (outcomes[0].probability + outcomes[1].probability)
    return outcomes[1] if rng.random() < p1 else outcomes[0]


def partial_trace_array(rho: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    keep = sorted(keep)
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    # trace out from the highest index down so earlier axis numbers stay valid
    for i, q in enumerate(sorted(drop, reverse=True)):
        cur_n = n - i
        t = np.trace(t, axis1=q, axis2=q + cur_n)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def partial_trace(rho, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep`` (kept qubits stay in ascending order)."""
    rho = as_density(rho)
    keep = _validate_targets(keep, rho.num_qubits)
    if not keep:
        raise ValueError("keep set must be nonempty")
    m = partial_trace_array(rho.matrix, keep, rho.num_qubits)
    return DensityMatrix(len(keep), m)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a, b) -> float:
    """Uhlmann fidelity (squared convention), ``|<psi|phi>|^2`` for pure states."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        if a.num_qubits != b.num_qubits:
            raise ValueError("dimension mismatch")
        return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
    if isinstance(a, StateVector):
        a, b = b, a
    if isinstance(b, StateVector):
        rho = as_density(a)
        if rho.num_qubits != b.num_qubits:
            raise ValueError("dimension mismatch")
        v = b.amplitudes
        return float(np.clip(np.real(np.vdot(v, rho.matrix @ v)), 0.0, 1.0))
    a, b = as_density(a), as_density(b)
    if a.num_qubits != b.num_qubits:
        raise ValueError("dimension mismatch")
    sa = psd_sqrt(a.matrix)
    m = sa @ b.matrix @ sa
    w = np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0, None)
    return float(np.clip(np.sum(np.sqrt(w)) ** 2, 0.0, 1.0))


def spectral_norm(a) -> float:
    """Largest singular value."""
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.size == 0:
        return 0.0
    if np.allclose(a, a.conj().T, atol=1e-14):
        return float(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2)).max())
    return float(np.linalg.norm(a, 2))


def trace_distance(a, b) -> float:
    a = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    b = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    d = a - b
    return float(0.5 * np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2)).sum())


def pauli_expectation(rho, pauli: PauliString) -> float:
    return as_density(rho).expectation(pauli)


def permute_qubits(rho, order: Sequence[int]):
    """Reorder qubits so that new qubit ``k`` is old qubit ``order[k]``."""
    n = rho.num_qubits
    order = list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} qubits")
    if isinstance(rho, StateVector):
        t = rho.amplitudes.reshape((2,) * n).transpose(order)
        return StateVector(n, t.reshape(-1))
    t = as_density(rho).matrix.reshape((2,) * (2 * n))
    t = t.transpose(order + [q + n for q in order])
    return DensityMatrix(n, t.reshape(2**n, 2**n))
