"""Posterior sampling of bond configurations conditioned on every site projection.

A configuration picks one ensemble member per bond (0 = entangled state,
``mu >= 1`` = product term ``mu``).  Bonds are visited in a fixed order; each
is drawn from prior x likelihood, where the likelihood is the success
probability of ``A`` at its two end sites given what the other slots there
hold (already sampled members, or the bond marginal ``rho_0`` if not yet
visited).  ``exact_configuration_dist`` enumerates the same distribution by
brute force and is the reference the sampler is tested against.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decomposition import BondEnsemble, build_ensemble
from .exact import ORACLE_CAP, ModelParams, OracleCapError
from .lattice import ClusterPartition, LatticeGraph, connected_clusters
from .linalg import basis_bits, partial_trace

STATEVECTOR_CAP = 24
ENUMERATION_CAP = 10**6
CHUNK_SHOTS = 128

EnsembleLike = BondEnsemble | Sequence[BondEnsemble]


class SamplingError(RuntimeError):
    """Posterior normaliser vanished; the contexts are inconsistent with the bonds."""


class ClusterCapError(RuntimeError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"cluster of {size} qubits exceeds the statevector cap of {cap}")
        self.size = size
        self.cap = cap


def shot_rng(seed: int, shot: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one shot.

    Philox is keyed by the master seed; the shot index and a stream tag fill
    the upper counter words, so streams never overlap and shot ``k`` draws the
    same numbers no matter how shots are batched or distributed.
    """
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, int(shot), int(stream), 0]))


def worker_count() -> int:
    raw = os.environ.get("THERMOCLUSTER_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"THERMOCLUSTER_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class BondConfiguration:
    choices: tuple[int, ...]

    @property
    def entangled(self) -> np.ndarray:
        return np.array(self.choices) == 0

    def mask_string(self) -> str:
        return "".join("1" if c == 0 else "0" for c in self.choices)


# --- site success probabilities -------------------------------------------------

def isometry_A(d: int) -> np.ndarray:
    """``|0><0...0| + |1><1...1|`` as a 2 x 2**d matrix."""
    a = np.zeros((2, 1 << d))
    a[0, 0] = 1.0
    a[1, -1] = 1.0
    return a


def site_success_prob(slot_states: Sequence[np.ndarray]) -> float:
    """``tr[A (x)rho_k A^dag]`` for independent single-qubit slot states."""
    if not slot_states:
        raise ValueError("a site needs at least one slot")
    p0, p1 = 1.0, 1.0
    for rho in slot_states:
        rho = np.asarray(rho)
        if rho.shape != (2, 2):
            raise ValueError(f"slot state must be 2x2, got {rho.shape}")
        p0 *= rho[0, 0].real
        p1 *= rho[1, 1].real
    return p0 + p1


def projection_success(pieces: Sequence[np.ndarray], sites: Sequence[Sequence[int]]) -> float:
    """Dense ``tr[(x)A_i rho (x)A_i^dag]`` for a register built from ``pieces``.

    ``pieces`` are operators on consecutive virtual qubits (a 2x2 slot or a
    4x4 bond); ``sites`` lists, per site, the virtual qubits feeding its ``A``.
    """
    rho = pieces[0]
    for p in pieces[1:]:
        rho = np.kron(rho, p)
    n = int(round(math.log2(rho.shape[0])))
    order = [q for s in sites for q in s]
    if sorted(order) != list(range(n)):
        raise ValueError("sites must cover every virtual qubit exactly once")
    t = rho.reshape((2,) * (2 * n)).transpose(order + [n + q for q in order]).reshape(rho.shape)
    a = np.ones((1, 1))
    for s in sites:
        a = np.kron(a, isometry_A(len(s)))
    return float(np.trace(a @ t @ a.T).real)


def bond_marginals(bond: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``rho_0`` for the first and second virtual qubit of a bond."""
    return partial_trace(bond, [0]), partial_trace(bond, [1])


def posterior_bond_dist(ensemble: BondEnsemble, context_i: Sequence[np.ndarray],
                        context_j: Sequence[np.ndarray], check: bool = False) -> np.ndarray:
    """Posterior over the members of one bond given the other slots at both ends.

    The normaliser is the product of the two single-site success probabilities
    with ``rho_0`` in the bond's slot.  With ``check`` it is also computed from
    the full two-site trace, and a mismatch raises.
    """
    diag = ensemble.side_diagonals()
    rho = ensemble.to_operator()
    r0i, r0j = bond_marginals(rho)
    li = np.array([site_success_prob(list(context_i) + [np.diag(diag[m, 0])]) for m in range(len(diag))])
    lj = np.array([site_success_prob([np.diag(diag[m, 1])] + list(context_j)) for m in range(len(diag))])
    w = ensemble.weights * li * lj
    norm = site_success_prob(list(context_i) + [r0i]) * site_success_prob([r0j] + list(context_j))
    if norm <= 0:
        raise SamplingError("zero posterior normaliser")
    if check:
        pieces = list(context_i) + [rho] + list(context_j)
        ni = len(context_i)
        joint = projection_success(pieces, [list(range(ni + 1)), list(range(ni + 1, ni + 2 + len(context_j)))])
        if abs(joint - norm) > 1e-12 or abs(w.sum() - norm) > 1e-12:
            raise SamplingError(f"factorisation violated: joint {joint!r}, product {norm!r}, sum {w.sum()!r}")
    return w / norm


# --- vectorised sampler ---------------------------------------------------------

def thermal_ensembles(graph: LatticeGraph, params: ModelParams) -> list[BondEnsemble]:
    """One ensemble per bond, using the degrees of its two end sites."""
    deg = graph.degrees
    if np.any(deg == 0):
        raise ValueError("graph has isolated sites")
    return [build_ensemble(params, int(deg[i]), int(deg[j])) for i, j in graph.bonds]


def _per_bond(graph: LatticeGraph, ensemble: EnsembleLike | ModelParams) -> list[BondEnsemble]:
    if isinstance(ensemble, ModelParams):
        return thermal_ensembles(graph, ensemble)
    if isinstance(ensemble, BondEnsemble):
        return [ensemble] * graph.n_bonds
    ensembles = list(ensemble)
    if len(ensembles) != graph.n_bonds:
        raise ValueError(f"expected {graph.n_bonds} ensembles, got {len(ensembles)}")
    return ensembles


class _Tables:
    """Padded per-bond member weights and slot populations."""

    def __init__(self, graph: LatticeGraph, ensembles: list[BondEnsemble]):
        m = max(e.n_members for e in ensembles) if ensembles else 1
        nb = graph.n_bonds
        self.weights = np.zeros((nb, m))
        self.diag = np.full((nb, m, 2, 2), 0.5)
        for b, e in enumerate(ensembles):
            self.weights[b, :e.n_members] = e.weights
            self.diag[b, :e.n_members] = e.side_diagonals()
        self.prior_diag = np.einsum("bm,bmks->bks", self.weights, self.diag)
        incident = graph.incident_bonds()
        self.others = []
        for b, (i, j) in enumerate(graph.bonds):
            pair = []
            for site in (i, j):
                sb = [c for c in incident[site] if c != b]
                sides = [0 if graph.bonds[c][0] == site else 1 for c in sb]
                pair.append((np.array(sb, dtype=np.int64), np.array(sides, dtype=np.int64)))
            self.others.append(pair)


def _sample_chunk(graph: LatticeGraph, tab: _Tables, order: Sequence[int], seed: int,
                  first_shot: int, n: int) -> np.ndarray:
    nb = graph.n_bonds
    u = np.empty((n, nb))
    for k in range(n):
        u[k] = shot_rng(seed, first_shot + k).random(nb)
    slots = np.broadcast_to(tab.prior_diag, (n,) + tab.prior_diag.shape).copy()
    choice = np.zeros((n, nb), dtype=np.int8)
    for b in order:
        lik = []
        for side, (sb, sd) in enumerate(tab.others[b]):
            ctx = np.prod(slots[:, sb, sd, :], axis=1) if len(sb) else np.ones((n, 2))
            lik.append(ctx @ tab.diag[b, :, side, :].T)
        w = tab.weights[b] * lik[0] * lik[1]
        cdf = np.cumsum(w, axis=1)
        norm = cdf[:, -1]
        if np.any(norm <= 0):
            raise SamplingError(f"zero posterior normaliser at bond {graph.bonds[b]}")
        pick = np.minimum((cdf < (u[:, b] * norm)[:, None]).sum(axis=1), w.shape[1] - 1)
        choice[:, b] = pick
        slots[:, b] = tab.diag[b, pick]
    return choice


def sample_configurations(graph: LatticeGraph, ensemble: EnsembleLike | ModelParams, shots: int,
                          seed: int, order: Sequence[int] | None = None, first_shot: int = 0) -> np.ndarray:
    """Member index per (shot, bond).  Shot ``k`` depends only on ``(seed, first_shot + k)``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    ensembles = _per_bond(graph, ensemble)
    order = list(range(graph.n_bonds)) if order is None else [int(b) for b in order]
    if sorted(order) != list(range(graph.n_bonds)):
        raise ValueError("order must be a permutation of the bond indices")
    if graph.n_bonds == 0:
        return np.zeros((shots, 0), dtype=np.int64)
    tab = _Tables(graph, ensembles)
    starts = list(range(0, shots, CHUNK_SHOTS))

    def run(s: int) -> np.ndarray:
        return _sample_chunk(graph, tab, order, seed, first_shot + s, min(CHUNK_SHOTS, shots - s))

    workers = worker_count()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.vstack(parts)


def sample_configuration(graph: LatticeGraph, ensemble: EnsembleLike | ModelParams, seed: int,
                         shot: int = 0) -> BondConfiguration:
    row = sample_configurations(graph, ensemble, 1, seed, first_shot=shot)[0]
    return BondConfiguration(tuple(int(c) for c in row))


# --- brute-force oracle ---------------------------------------------------------

def _member_amplitudes(graph: LatticeGraph, ensembles: list[BondEnsemble]) -> list[np.ndarray]:
    """Per bond: ``[m, s]`` amplitude of member ``m`` on physical basis state ``s``."""
    bits = basis_bits(graph.n_sites)
    out = []
    for (i, j), e in zip(graph.bonds, ensembles):
        idx = 2 * bits[:, i] + bits[:, j]
        out.append(e.member_states()[:, idx])
    return out


def exact_configuration_dist(graph: LatticeGraph, ensemble: EnsembleLike | ModelParams,
                             cap: int = ORACLE_CAP) -> dict[tuple[int, ...], float]:
    """Posterior probability of every configuration, by enumeration.

    The likelihood of a configuration is the norm of the physical vector
    obtained by applying all ``A`` maps to the chosen pure bond states, whose
    amplitude on ``|s>`` is the product over bonds of ``psi_b[s_i s_j]``.
    """
    if graph.n_sites > cap:
        raise OracleCapError(f"{graph.n_sites} sites exceeds the oracle cap of {cap}")
    ensembles = _per_bond(graph, ensemble)
    sizes = [e.n_members for e in ensembles]
    if math.prod(sizes) > ENUMERATION_CAP:
        raise OracleCapError(f"{math.prod(sizes)} configurations exceeds {ENUMERATION_CAP}")
    amps = _member_amplitudes(graph, ensembles)
    weights = [e.weights for e in ensembles]
    dist = {}
    for config in itertools.product(*(range(s) for s in sizes)):
        amp = np.ones(1 << graph.n_sites, dtype=complex)
        prior = 1.0
        for b, m in enumerate(config):
            amp = amp * amps[b][m]
            prior *= weights[b][m]
        if prior > 0:
            dist[config] = prior * float(np.vdot(amp, amp).real)
    total = sum(dist.values())
    return {k: v / total for k, v in dist.items()}


# --- realising the pure state of one configuration -------------------------------

@dataclass(frozen=True)
class ClusterState:
    sites: np.ndarray  # ascending site indices; qubit k of ``state`` is sites[k]
    state: np.ndarray


def realize_state(graph: LatticeGraph, ensemble: EnsembleLike | ModelParams,
                  config: BondConfiguration | Sequence[int], cap: int = STATEVECTOR_CAP,
                  partition: ClusterPartition | None = None) -> list[ClusterState]:
    """Pure state of each cluster joined by entangled bonds, in cluster-id order."""
    choices = tuple(config.choices if isinstance(config, BondConfiguration) else config)
    if len(choices) != graph.n_bonds:
        raise ValueError(f"expected {graph.n_bonds} choices, got {len(choices)}")
    ensembles = _per_bond(graph, ensemble)
    entangled = np.array(choices) == 0
    part = connected_clusters(graph, entangled) if partition is None else partition
    if part.largest > cap:
        raise ClusterCapError(part.largest, cap)
    # single-site factors from product bonds, accumulated per site
    local = np.ones((graph.n_sites, 2), dtype=complex)
    pair_bonds: list[list[tuple[int, int, np.ndarray]]] = [[] for _ in range(part.n_clusters)]
    for b, ((i, j), m) in enumerate(zip(graph.bonds, choices)):
        if m == 0:
            psi = ensembles[b].entangled.reshape(2, 2)
            pair_bonds[part.labels[i]].append((i, j, psi))
        else:
            _, a, bb = ensembles[b].product_terms[m - 1]
            local[i] *= a
            local[j] *= bb
    out = []
    for c, sites in enumerate(part.groups()):
        sites = np.sort(sites)
        pos = {int(s): k for k, s in enumerate(sites)}
        bits = basis_bits(len(sites))
        amp = np.ones(1 << len(sites), dtype=complex)
        for k, s in enumerate(sites):
            amp *= local[s][bits[:, k]]
        for i, j, psi in pair_bonds[c]:
            amp *= psi[bits[:, pos[i]], bits[:, pos[j]]]
        norm = np.linalg.norm(amp)
        if norm == 0:
            raise SamplingError(f"configuration {choices} has zero projection amplitude")
        out.append(ClusterState(sites, amp / norm))
    return out


def assemble_statevector(n_sites: int, parts: Sequence[ClusterState]) -> np.ndarray:
    """Full ``n_sites`` vector from cluster states covering every site once."""
    order = [int(s) for p in parts for s in p.sites]
    if sorted(order) != list(range(n_sites)):
        raise ValueError("cluster states must cover every site exactly once")
    vec = np.ones(1, dtype=complex)
    for p in parts:
        vec = np.kron(vec, p.state)
    inv = np.argsort(order)
    return vec.reshape((2,) * n_sites).transpose(inv).reshape(-1)


def ensemble_density(graph: LatticeGraph, ensemble: EnsembleLike | ModelParams,
                     cap: int = ORACLE_CAP) -> np.ndarray:
    """``sum_config p(config) |state><state|`` over the exact posterior."""
    dist = exact_configuration_dist(graph, ensemble, cap)
    dim = 1 << graph.n_sites
    rho = np.zeros((dim, dim), dtype=complex)
    for config, p in dist.items():
        v = assemble_statevector(graph.n_sites, realize_state(graph, ensemble, config))
        rho += p * np.outer(v, v.conj())
    return rho


def naive_configurations(graph: LatticeGraph, ensemble: EnsembleLike, shots: int, seed: int) -> np.ndarray:
    """Draw members from the prior alone, ignoring the site projections (wrong; for tests)."""
    ensembles = _per_bond(graph, ensemble)
    out = np.empty((shots, graph.n_bonds), dtype=np.int64)
    for k in range(shots):
        rng = shot_rng(seed, k)
        out[k] = [rng.choice(e.n_members, p=e.weights / e.weights.sum()) for e in ensembles]
    return out


__all__ = [
    "BondConfiguration", "ClusterCapError", "ClusterState", "SamplingError", "assemble_statevector",
    "bond_marginals", "ensemble_density", "exact_configuration_dist", "isometry_A",
    "naive_configurations", "posterior_bond_dist", "projection_success", "realize_state",
    "sample_configuration", "sample_configurations", "shot_rng", "site_success_prob",
    "thermal_ensembles", "worker_count",
]
