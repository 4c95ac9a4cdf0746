"""Split a bond state into an entangled pure state plus pure product states.

``rho = p_e |psi><psi| + sum_mu p_mu |a_mu b_mu><a_mu b_mu|``.  The entangled
component is fixed in advance (the two-qubit cluster state in zero field, the
pure zero-temperature bond otherwise), ``p_e`` is the smallest weight that
leaves a PPT residue, and the residue is split into product states with
Wootters' construction, which needs at most four terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .bonds import bond_general, bond_T0, bond_zero_field, solve_bond_params
from .exact import ModelParams
from .linalg import (PSD_TOL, eigvalsh, is_psd, partial_transpose, pauli, projector,
                     trace_distance, two_qubit_cluster)

SNAP_TOL = 1e-12
BISECT_STEPS = 60
SEPARABLE_TOL = 1e-7

_SYY = np.kron(pauli("Y"), pauli("Y"))
_HAD4 = 0.5 * np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]])


class DecompositionError(ValueError):
    """The requested split does not exist."""


@dataclass(frozen=True)
class BondEnsemble:
    """Member 0 is the entangled state; members ``1..`` are the product terms."""

    p_e: float
    entangled: np.ndarray
    product_terms: tuple[tuple[float, np.ndarray, np.ndarray], ...]

    @property
    def n_members(self) -> int:
        return 1 + len(self.product_terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.p_e] + [p for p, _, _ in self.product_terms])

    def member_state(self, m: int) -> np.ndarray:
        """Two-qubit amplitude vector of member ``m``."""
        if m == 0:
            return self.entangled
        _, a, b = self.product_terms[m - 1]
        return np.kron(a, b)

    def member_states(self) -> np.ndarray:
        return np.array([self.member_state(m) for m in range(self.n_members)])

    def side_diagonals(self) -> np.ndarray:
        """``[m, side, s]``: Z-basis populations of each member's two halves.

        Only the computational-basis diagonal enters the site success
        probabilities.  The entangled member's diagonal is a product (bond
        states of this family carry X terms only off the diagonal), so its
        marginals describe it exactly.
        """
        out = np.empty((self.n_members, 2, 2))
        for m in range(self.n_members):
            pop = np.abs(self.member_state(m).reshape(2, 2)) ** 2
            out[m, 0] = pop.sum(axis=1)
            out[m, 1] = pop.sum(axis=0)
        return out

    def to_operator(self) -> np.ndarray:
        rho = np.zeros((4, 4), dtype=complex)
        for m, w in enumerate(self.weights):
            rho += w * projector(self.member_state(m))
        return rho

    def to_dict(self) -> dict:
        def amps(v):
            return [[float(z.real), float(z.imag)] for z in v]
        return {
            "p_e": self.p_e,
            "entangled": amps(self.entangled),
            "product_terms": [{"p": p, "a": amps(a), "b": amps(b)} for p, a, b in self.product_terms],
        }


def pe_zero_field(omega: float) -> float:
    """Entangled weight of the zero-field bond, clamped to [0, 1]."""
    return min(1.0, max(0.0, (omega * omega + 2.0 * omega - 1.0) / 2.0))


def omega_for_pe(p_e: float) -> float:
    """Inverse of ``pe_zero_field`` on ``[sqrt(2) - 1, 1]``."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError(f"p_e must lie in [0, 1], got {p_e}")
    return -1.0 + math.sqrt(2.0 + 2.0 * p_e)


def _margin(rho: np.ndarray, sigma: np.ndarray, p: float) -> float:
    rest = rho - p * sigma
    return min(float(eigvalsh(rest)[0]), float(eigvalsh(partial_transpose(rest))[0]))


def max_pe(bond: np.ndarray, entangled: np.ndarray) -> float:
    """Weight the entangled state takes in the decomposition of ``bond``.

    The weights ``p`` with ``bond - p|psi><psi|`` PSD and PPT form an interval
    (both eigenvalue margins are concave in ``p``).  Its lower end is the
    weight that has to be assigned to ``|psi>`` before the rest is separable,
    so that is what is returned; it is 0 when ``bond`` is already separable.
    Raises DecompositionError when the interval is empty.
    """
    bond = np.asarray(bond, dtype=complex)
    if not is_psd(bond) or abs(np.trace(bond).real - 1) > 1e-9:
        raise ValueError("bond is not a density operator")
    sigma = projector(np.asarray(entangled, dtype=complex))
    if _margin(bond, sigma, 0.0) >= -1e-13:
        return 0.0
    if _margin(bond, sigma, 1.0) >= -1e-12:
        hi = 1.0
    else:
        best = minimize_scalar(lambda p: -_margin(bond, sigma, p), bounds=(0.0, 1.0),
                               method="bounded", options={"xatol": 1e-13})
        if -best.fun < 0:
            raise DecompositionError(
                f"no weight leaves a separable residue (best margin {-best.fun:.3e} at p={best.x:.6f})")
        hi = float(best.x)
    lo = 0.0
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if _margin(bond, sigma, mid) >= 0:
            hi = mid
        else:
            lo = mid
    if hi < SNAP_TOL:
        return 0.0
    if hi > 1 - SNAP_TOL:
        return 1.0
    return hi


def _takagi(a: np.ndarray, tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Unitary ``U`` and ``s >= 0`` with ``a = U diag(s) U^T`` for complex symmetric ``a``."""
    n = a.shape[0]
    big = np.block([[a.real, a.imag], [a.imag, -a.real]])
    w, v = np.linalg.eigh(big)
    scale = max(1.0, float(np.abs(w).max())) if n else 1.0
    cols, vals = [], []
    for k in np.argsort(w)[::-1]:
        if w[k] <= tol * scale or len(cols) == n:
            break
        u = v[:n, k] + 1j * v[n:, k]
        cols.append(u / np.linalg.norm(u))
        vals.append(float(w[k]))
    u = np.array(cols, dtype=complex).T.reshape(n, len(cols))
    # the zero block: any orthonormal completion works
    comp = []
    for e in np.eye(n, dtype=complex):
        if len(cols) + len(comp) == n:
            break
        r = e - u @ (u.conj().T @ e)
        for c in comp:
            r = r - c * np.vdot(c, r)
        if np.linalg.norm(r) > 1e-6:
            comp.append(r / np.linalg.norm(r))
    if comp:
        u = np.hstack([u, np.array(comp).T])
        vals += [0.0] * len(comp)
    return u, np.array(vals)


def _triangle_angle(a: float, b: float, c: float) -> float:
    """Angle between sides ``a`` and ``b`` (opposite ``c``) of a possibly degenerate triangle."""
    num = max(b + c - a, 0.0) * max(a + c - b, 0.0)
    den = max(a + b + c, 0.0) * max(a + b - c, 0.0)
    if num == 0 and den == 0:
        return 0.0
    return 2.0 * math.atan2(math.sqrt(num), math.sqrt(den))


def _closing_phases(lam: np.ndarray) -> np.ndarray:
    """Phases making ``sum lam_k exp(i ph_k)`` vanish, for sorted ``lam``."""
    l1, l2, l3, l4 = (float(x) for x in lam)
    if l1 <= 0:
        return np.zeros(4)
    chord = min(max(l1 - l2, l3 - l4), l3 + l4)
    p2 = math.pi - _triangle_angle(l1, l2, chord)
    if chord <= 0:
        return np.array([0.0, p2, 0.0, math.pi])
    psi = np.angle(-(l1 + l2 * np.exp(1j * p2)))
    return np.array([0.0, p2, psi + _triangle_angle(l3, chord, l4), psi - _triangle_angle(l4, chord, l3)])


def product_ensemble(rho_s: np.ndarray, tol: float = 1e-14) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Pure product decomposition of a separable two-qubit state.

    Wootters' construction: subnormalised eigenvectors are rotated so the
    spin-flip overlap matrix is diagonal, then phased and Hadamard-mixed into
    four vectors of zero concurrence, i.e. product vectors.
    """
    rho_s = np.asarray(rho_s, dtype=complex)
    if not is_psd(rho_s):
        raise DecompositionError("residue is not PSD")
    if not is_psd(partial_transpose(rho_s), PSD_TOL):
        raise DecompositionError("residue is not PPT, so it is entangled")
    mu, vec = np.linalg.eigh(0.5 * (rho_s + rho_s.conj().T))
    keep = mu > tol
    vm = vec[:, keep] * np.sqrt(mu[keep])
    tau = vm.conj().T @ _SYY @ vm.conj()
    w, lam = _takagi(0.5 * (tau + tau.T))
    x = vm @ w
    r = x.shape[1]
    if r < 4:
        x = np.hstack([x, np.zeros((4, 4 - r))])
        lam = np.concatenate([lam, np.zeros(4 - r)])
    order = np.argsort(lam)[::-1]
    x, lam = x[:, order], lam[order]
    if lam[0] > lam[1:].sum() + SEPARABLE_TOL:
        raise DecompositionError(f"concurrence {lam[0] - lam[1:].sum():.3e} > 0")
    z = x @ np.diag(np.exp(-0.5j * _closing_phases(lam))) @ _HAD4.T
    terms = []
    for k in range(4):
        p = float(np.vdot(z[:, k], z[:, k]).real)
        if p < tol:
            continue
        u, _, vh = np.linalg.svd(z[:, k].reshape(2, 2) / math.sqrt(p))
        a, b = u[:, 0], vh[0]
        for m, (q, a2, b2) in enumerate(terms):  # merge repeated product states
            if abs(np.vdot(a2, a)) * abs(np.vdot(b2, b)) > 1 - 1e-12:
                terms[m] = (q + p, a2, b2)
                break
        else:
            terms.append((p, a, b))
    return terms


def _phase_fix(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def ensemble_from_bond(bond: np.ndarray, entangled: np.ndarray) -> BondEnsemble:
    entangled = _phase_fix(np.asarray(entangled, dtype=complex) / np.linalg.norm(entangled))
    p_e = max_pe(bond, entangled)
    if p_e >= 1.0:
        return BondEnsemble(1.0, entangled, ())
    residue = (bond - p_e * projector(entangled)) / (1 - p_e)
    terms = tuple((float((1 - p_e) * p), _phase_fix(a), _phase_fix(b))
                  for p, a, b in product_ensemble(residue))
    ens = BondEnsemble(p_e, entangled, terms)
    err = trace_distance(ens.to_operator(), bond)
    if err > 1e-9:
        raise DecompositionError(f"ensemble reconstruction error {err:.3e}")
    return ens


def entangled_component(theta: float, d: int, d_other: int | None = None) -> np.ndarray:
    """Amplitudes of the fixed entangled state for a bond between degrees ``d`` and ``d_other``."""
    if theta == 0:
        return two_qubit_cluster()
    w, v = np.linalg.eigh(bond_T0(theta, d, d_other))
    return v[:, -1]


@lru_cache(maxsize=256)
def build_ensemble(params: ModelParams, d: int, d_other: int | None = None) -> BondEnsemble:
    """Decomposition of the thermal bond between sites of degree ``d`` and ``d_other``."""
    d_other = d if d_other is None else d_other
    bond = bond_general(solve_bond_params(params, d), solve_bond_params(params, d_other))
    return ensemble_from_bond(bond, entangled_component(params.theta, d, d_other))


def ensemble_for_pe(p_e: float) -> BondEnsemble:
    """Zero-field ensemble whose entangled weight is ``p_e``."""
    if p_e >= 1.0:
        return BondEnsemble(1.0, _phase_fix(two_qubit_cluster()), ())
    return ensemble_from_bond(bond_zero_field(omega_for_pe(p_e)), two_qubit_cluster())


__all__ = [
    "BondEnsemble", "DecompositionError", "build_ensemble", "ensemble_for_pe",
    "ensemble_from_bond", "entangled_component", "max_pe", "omega_for_pe", "pe_zero_field",
    "product_ensemble",
]
