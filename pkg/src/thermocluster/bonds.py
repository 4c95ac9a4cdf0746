"""PEPS bond states whose site projections give the thermal state.

Every site carries one virtual qubit per incident bond and the map
``A = |0><0...0| + |1><1...1|`` onto the physical qubit.  A bond ``(i, j)`` is

    1/4 (I + a_i X(x)Z + g_i Z(x)I) (I + a_j Z(x)X + g_j I(x)Z)

with the first virtual qubit at site ``i``.  The two factors commute, and each
is positive iff ``a**2 + g**2 <= 1``.  The ``(a_i, g_i)`` pair is fixed by the
degree of site ``i`` alone, which is what lets open lattices (with boundary
sites of lower degree) project onto the exact thermal state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exact import ORACLE_CAP, ModelParams, OracleCapError
from .lattice import LatticeGraph
from .linalg import basis_bits, pauli

_I4 = np.eye(4, dtype=complex)
_XZ = np.kron(pauli("X"), pauli("Z"))
_ZI = np.kron(pauli("Z"), pauli("I"))
_ZX = np.kron(pauli("Z"), pauli("X"))
_IZ = np.kron(pauli("I"), pauli("Z"))

PARAM_TOL = 1e-12


class BondSolveError(ValueError):
    """No physical bond parameters for the requested point."""


@dataclass(frozen=True)
class BondParams:
    """Half-bond parameters owned by one site.

    ``alpha`` weights the stabilizer-like term and ``gamma`` the local Z term;
    in zero field ``gamma = 0`` and ``alpha`` is the usual bond weight omega.
    """

    alpha: float
    gamma: float

    @classmethod
    def zero_field(cls, omega: float) -> "BondParams":
        return cls(float(omega), 0.0)

    @property
    def omega(self) -> float:
        return self.alpha

    @property
    def is_physical(self) -> bool:
        return self.alpha ** 2 + self.gamma ** 2 <= 1.0 + PARAM_TOL


def bond_general(p: BondParams, q: BondParams | None = None) -> np.ndarray:
    """Two-qubit bond operator; ``q`` (the second site's half) defaults to ``p``."""
    q = p if q is None else q
    for half in (p, q):
        if not half.is_physical:
            raise ValueError(f"{half} does not give a positive bond operator (alpha^2 + gamma^2 > 1)")
    left = _I4 + p.alpha * _XZ + p.gamma * _ZI
    right = _I4 + q.alpha * _ZX + q.gamma * _IZ
    return 0.25 * left @ right


def bond_zero_field(omega: float) -> np.ndarray:
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must lie in [0, 1], got {omega}")
    return bond_general(BondParams.zero_field(omega))


def omega_for_temperature(beta: float, d: int) -> float:
    if beta < 0 or d < 1:
        raise ValueError("need beta >= 0 and d >= 1")
    t = 1.0 if math.isinf(beta) else math.tanh(beta / 2)
    return t ** (1.0 / d)


def t0_angle(theta: float, d: int) -> float:
    """phi with tan(phi + pi/4)**d = tan(theta/2 + pi/4)."""
    if not 0.0 <= theta < math.pi / 2:
        raise BondSolveError(f"zero-temperature bond needs theta in [0, pi/2), got {theta}")
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {d}")
    return math.atan(math.tan(theta / 2 + math.pi / 4) ** (1.0 / d)) - math.pi / 4


def t0_params(theta: float, d: int) -> BondParams:
    phi = t0_angle(theta, d)
    return BondParams(math.cos(2 * phi), math.sin(2 * phi))


def bond_T0(theta: float, d: int, d_other: int | None = None) -> np.ndarray:
    """Pure zero-temperature bond between sites of degree ``d`` and ``d_other``."""
    d_other = d if d_other is None else d_other
    return bond_general(t0_params(theta, d), t0_params(theta, d_other))


def _even_odd_sums(gamma: float, d: int) -> tuple[float, float]:
    even = sum(math.comb(d, j) * gamma ** j for j in range(0, d + 1, 2))
    odd = sum(math.comb(d, j) * gamma ** j for j in range(1, d + 1, 2))
    return even, odd


def bond_constraint_residuals(p: BondParams, params: ModelParams, d: int) -> tuple[float, float]:
    """Residuals of the two site constraints, computed from the binomial sums.

    A site of degree ``d`` projects to a spin with X and Z polarisation
    ``alpha**d / even`` and ``odd / even``; these must equal the thermal
    values ``t cos(theta)`` and ``t sin(theta)``.
    """
    t = params.polarization
    even, odd = _even_odd_sums(p.gamma, d)
    r_alpha = p.alpha ** d - t * math.cos(params.theta) * even
    r_gamma = odd - t * math.sin(params.theta) * even
    return r_alpha, r_gamma


def solve_bond_params(params: ModelParams, d: int) -> BondParams:
    """Half-bond parameters reproducing the thermal spin at a degree-``d`` site.

    The odd/even binomial ratio equals ``tanh(d * artanh(gamma))``, strictly
    increasing on (-1, 1), so the Z constraint has the single root
    ``gamma = tanh(artanh(t sin(theta)) / d)``; ``alpha`` is then the real
    non-negative ``d``-th root of the X constraint.
    """
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {d}")
    if params.theta >= math.pi / 2:
        raise BondSolveError("bond parameters are undefined at theta = pi/2")
    t = params.polarization
    z_target = t * math.sin(params.theta)
    if z_target >= 1.0:
        raise BondSolveError(f"Z polarisation {z_target} leaves no physical root")
    gamma = math.tanh(math.atanh(z_target) / d)
    even, _ = _even_odd_sums(gamma, d)
    alpha = (t * math.cos(params.theta) * even) ** (1.0 / d)
    p = BondParams(alpha, gamma)
    res = bond_constraint_residuals(p, params, d)
    if max(abs(r) for r in res) > 1e-10 or not p.is_physical:
        raise BondSolveError(
            f"bond solve failed at beta={params.beta}, theta={params.theta}, d={d}: "
            f"residuals {res}, alpha^2+gamma^2={alpha ** 2 + gamma ** 2}"
        )
    return p


def _require_connected_sites(graph: LatticeGraph) -> np.ndarray:
    deg = graph.degrees
    if np.any(deg == 0):
        raise ValueError(f"sites {np.flatnonzero(deg == 0).tolist()} have no bonds; A is undefined there")
    return deg


def thermal_bonds(graph: LatticeGraph, params: ModelParams) -> list[np.ndarray]:
    """Per-bond operators for ``graph``, each half solved for its site's degree."""
    deg = _require_connected_sites(graph)
    halves = {int(d): solve_bond_params(params, int(d)) for d in set(deg.tolist())}
    return [bond_general(halves[int(deg[i])], halves[int(deg[j])]) for i, j in graph.bonds]


def project_peps(graph: LatticeGraph, bonds: np.ndarray | Sequence[np.ndarray],
                 cap: int = ORACLE_CAP) -> np.ndarray:
    """Apply ``A`` at every site to the product of bond states and renormalise.

    ``bonds`` is one 4x4 operator shared by all bonds or one per bond, with the
    first qubit on the lower-indexed site.  Element ``[s, s']`` of the result
    is the product over bonds of ``rho_b[(s_i s_j), (s'_i s'_j)]``, which is
    exactly ``<v(s)| (x)rho_b |v(s')>`` for the virtual strings selected by A.
    """
    n = graph.n_sites
    if n > cap:
        raise OracleCapError(f"{n} physical qubits exceeds the oracle cap of {cap}")
    _require_connected_sites(graph)
    if isinstance(bonds, np.ndarray) and bonds.ndim == 2:
        bonds = [bonds] * graph.n_bonds
    if len(bonds) != graph.n_bonds:
        raise ValueError(f"expected {graph.n_bonds} bond operators, got {len(bonds)}")
    bits = basis_bits(n)
    rho = np.ones((1 << n, 1 << n), dtype=complex)
    for (i, j), rb in zip(graph.bonds, bonds):
        idx = 2 * bits[:, i] + bits[:, j]
        rho *= np.asarray(rb)[idx[:, None], idx[None, :]]
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("projection has zero success probability")
    return rho / tr
