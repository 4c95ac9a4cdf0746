"""Exact thermal and ground states of the cluster Hamiltonian with a Z field.

Energies are in units of the gap (gap = 1), so ``beta`` is ``gap / kT``.
The model is diagonalised by the product of CZ gates over all bonds, which
turns it into independent spins; everything here is built from that map and is
intended as a brute-force reference on small lattices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeGraph
from .linalg import KET_MINUS, KET_PLUS, basis_bits, embed, pauli, tensor

ORACLE_CAP = 12


class OracleCapError(ValueError):
    """Dense computation would exceed the configured qubit cap."""


@dataclass(frozen=True)
class ModelParams:
    beta: float
    theta: float

    def __post_init__(self) -> None:
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0.0 <= self.theta <= math.pi / 2 + 1e-15:
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta}")

    @classmethod
    def from_kt(cls, kt: float, theta: float) -> "ModelParams":
        if kt < 0:
            raise ValueError(f"kT must be >= 0, got {kt}")
        return cls(math.inf if kt == 0 else 1.0 / kt, theta)

    @property
    def kt(self) -> float:
        return 0.0 if math.isinf(self.beta) else (math.inf if self.beta == 0 else 1.0 / self.beta)

    @property
    def polarization(self) -> float:
        """tanh(beta/2), the length of each decoupled spin's Bloch vector."""
        return 1.0 if math.isinf(self.beta) else math.tanh(self.beta / 2)


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise OracleCapError(f"{n} qubits exceeds the oracle cap of {cap}")


def single_spin_thermal(params: ModelParams) -> np.ndarray:
    t = params.polarization
    X, Z = pauli("X"), pauli("Z")
    return 0.5 * (np.eye(2) + t * (math.cos(params.theta) * X + math.sin(params.theta) * Z))


def theta_ket(theta: float) -> np.ndarray:
    return math.cos(theta / 2) * KET_PLUS + math.sin(theta / 2) * KET_MINUS


def cz_phases(graph: LatticeGraph, cap: int = ORACLE_CAP) -> np.ndarray:
    """Diagonal of the all-bonds CZ unitary as a +-1 vector."""
    _check_cap(graph.n_sites, cap)
    bits = basis_bits(graph.n_sites)
    parity = np.zeros(len(bits), dtype=np.int64)
    for i, j in graph.bonds:
        parity ^= bits[:, i] & bits[:, j]
    return 1 - 2 * parity


def cz_all(graph: LatticeGraph, state: np.ndarray, cap: int = ORACLE_CAP) -> np.ndarray:
    """Apply the all-bonds CZ to a state vector, or conjugate a density operator."""
    phases = cz_phases(graph, cap)
    state = np.asarray(state)
    if state.shape[0] != len(phases):
        raise ValueError(f"state dimension {state.shape[0]} does not match {graph.n_sites} sites")
    if state.ndim == 1:
        return phases * state
    return phases[:, None] * state * phases[None, :]


def ground_state(graph: LatticeGraph, theta: float, cap: int = ORACLE_CAP) -> np.ndarray:
    _check_cap(graph.n_sites, cap)
    product = tensor([theta_ket(theta)] * graph.n_sites) if graph.n_sites else np.ones(1)
    return cz_all(graph, product, cap)


def exact_thermal_state(graph: LatticeGraph, params: ModelParams, cap: int = ORACLE_CAP) -> np.ndarray:
    _check_cap(graph.n_sites, cap)
    rho = tensor([single_spin_thermal(params)] * graph.n_sites)
    return cz_all(graph, rho, cap)


def stabilizer(graph: LatticeGraph, site: int, cap: int = ORACLE_CAP) -> np.ndarray:
    """K_i = X_i times Z on every neighbour of ``site``."""
    n = graph.n_sites
    _check_cap(n, cap)
    ops = [pauli("I")] * n
    ops[site] = pauli("X")
    for j in graph.neighbors(site):
        ops[j] = pauli("Z")
    return tensor(ops)


def hamiltonian(graph: LatticeGraph, theta: float, cap: int = ORACLE_CAP) -> np.ndarray:
    n = graph.n_sites
    _check_cap(n, cap)
    H = np.zeros((1 << n, 1 << n), dtype=complex)
    for i in range(n):
        H -= 0.5 * (math.cos(theta) * stabilizer(graph, i, cap) + math.sin(theta) * embed(pauli("Z"), i, n))
    return H
