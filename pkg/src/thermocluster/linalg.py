"""Dense qubit operator helpers.

Operators and states are plain numpy arrays.  Multi-qubit objects use the
``np.kron`` ordering: qubit 0 (site 0) is the leftmost tensor factor, i.e. the
most significant bit of a basis index.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

PSD_TOL = 1e-10
HERMITIAN_TOL = 1e-12

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def pauli(which: str) -> np.ndarray:
    try:
        return _PAULI[which].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli {which!r}") from None


def tensor(*ops: np.ndarray) -> np.ndarray:
    if len(ops) == 1 and not isinstance(ops[0], np.ndarray):
        ops = tuple(ops[0])
    return reduce(np.kron, ops)


def n_qubits(op: np.ndarray) -> int:
    dim = op.shape[0]
    n = dim.bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Single-qubit ``op`` acting on ``site`` of an ``n``-qubit register."""
    return tensor([op if k == site else _PAULI["I"] for k in range(n)])


def projector(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())


def partial_trace(op: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced operator on the qubits in ``keep`` (returned in ascending order)."""
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("partial_trace needs a square operator")
    n = n_qubits(op)
    keep = sorted(set(keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep={keep} out of range for {n} qubits")
    drop = [k for k in range(n) if k not in keep]
    t = op.reshape((2,) * (2 * n))
    # trace pairs from the highest index down so axis numbers stay valid
    for k in sorted(drop, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + m)
    d = 1 << len(keep)
    return t.reshape(d, d)


def partial_transpose(op: np.ndarray, subsystem: int = 1) -> np.ndarray:
    """Partial transpose of a two-qubit operator on qubit 0 or 1."""
    op = np.asarray(op)
    if op.shape != (4, 4):
        raise ValueError(f"partial_transpose expects a 4x4 operator, got {op.shape}")
    t = op.reshape(2, 2, 2, 2)
    if subsystem == 0:
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError("subsystem must be 0 or 1")
    return t.reshape(4, 4)


def hermitian_part(op: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    op = np.asarray(op)
    dev = np.max(np.abs(op - op.conj().T)) if op.size else 0.0
    if dev > tol * max(1.0, np.max(np.abs(op))):
        raise ValueError(f"operator is not Hermitian (max deviation {dev:.3e})")
    return 0.5 * (op + op.conj().T)


def eigvalsh(op: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(op))


def min_eigenvalue(op: np.ndarray) -> float:
    return float(eigvalsh(op)[0])


def is_psd(op: np.ndarray, tol: float = PSD_TOL) -> bool:
    return min_eigenvalue(op) >= -tol


def is_density(op: np.ndarray, tol: float = PSD_TOL) -> bool:
    return abs(np.trace(op) - 1) < 1e-9 and is_psd(op, tol)


def clip_psd(op: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Zero eigenvalues in ``[-tol, 0)``; anything more negative is an error."""
    w, v = np.linalg.eigh(hermitian_part(op))
    if w[0] < -tol:
        raise ValueError(f"operator has eigenvalue {w[0]:.3e} below -{tol:g}")
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def is_ppt(op: np.ndarray, tol: float = PSD_TOL) -> bool:
    return is_psd(partial_transpose(op), tol)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(eigvalsh(np.asarray(a) - np.asarray(b)))))


def fidelity_pure(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


def normalize(state: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(state)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return state / norm


def two_qubit_cluster() -> np.ndarray:
    """(|0>|+> + |1>|->)/sqrt(2)."""
    return (np.kron(KET0, KET_PLUS) + np.kron(KET1, KET_MINUS)) / np.sqrt(2)


def cz() -> np.ndarray:
    return np.diag([1, 1, 1, -1]).astype(complex)


def bloch_projector(polar: float, azimuth: float, outcome: int) -> np.ndarray:
    """(I + (-1)^outcome n.sigma)/2 for the direction ``(polar, azimuth)``."""
    return projector(bloch_ket(polar, azimuth, outcome))


def bloch_ket(polar: float, azimuth: float, outcome: int) -> np.ndarray:
    c, s = np.cos(polar / 2), np.sin(polar / 2)
    phase = np.exp(1j * azimuth)
    if outcome == 0:
        return np.array([c, phase * s], dtype=complex)
    if outcome == 1:
        return np.array([s, -phase * c], dtype=complex)
    raise ValueError("outcome must be 0 or 1")


def basis_bits(n: int) -> np.ndarray:
    """All ``n``-bit strings as rows, in basis-index order."""
    idx = np.arange(1 << n)
    return (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1


def bits_to_index(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out
