"""Phase-diagram quantities: region C temperatures, the filtering map and the Q/Q' tests.

Region C: entangled bond weight below the bond percolation threshold.
Region Q: after local filtering plus the flip-and-Z post-processing the state
is a zero-field thermal cluster state with extra dephasing, and the total
dephasing is below the fault-tolerance threshold ``p_c``.
Region Q': the filtered ('1') sites percolate and the filtered temperature is
below the dephasing-threshold temperature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .bonds import BondSolveError, bond_general, solve_bond_params
from .decomposition import DecompositionError, entangled_component, max_pe, omega_for_pe
from .exact import ORACLE_CAP, ModelParams, OracleCapError, cz_all, exact_thermal_state, stabilizer
from .lattice import LatticeGraph, ThresholdTable, coordination, custom_graph, threshold
from .linalg import partial_trace, pauli, tensor, trace_distance
from .sampler import shot_rng

P_C_DEFAULT = 2.9e-2
KT_MAX = 1e3
KT_MIN = 1e-3


# --- region C -------------------------------------------------------------------

def tcrit_zero_field(kind: str, table: ThresholdTable | None = None) -> float:
    """kT at which the zero-field entangled weight equals the bond threshold."""
    d = coordination(kind)
    omega = omega_for_pe(threshold(kind, "bond", table))
    return 1.0 / (2.0 * math.atanh(omega ** d))


@dataclass(frozen=True)
class PeResult:
    p_e: float
    infeasible: bool = False


@lru_cache(maxsize=8192)
def thermal_pe(params: ModelParams, d: int) -> PeResult:
    """Entangled weight of the regular degree-``d`` bond.

    Where no weight of the fixed entangled state leaves a separable residue,
    the bond is reported as fully entangled (``p_e = 1``) and flagged, which
    can only place the point outside region C.
    """
    if params.beta == 0:
        return PeResult(0.0)
    try:
        p = solve_bond_params(params, d)
        return PeResult(max_pe(bond_general(p), entangled_component(params.theta, d)))
    except (DecompositionError, BondSolveError):
        return PeResult(1.0, True)


def tcrit_general(theta: float, kind: str, table: ThresholdTable | None = None,
                  xtol: float = 1e-9) -> float:
    """kT at which the thermal bond's entangled weight crosses the bond threshold."""
    if not 0.0 <= theta <= math.pi / 2:
        raise ValueError(f"theta must lie in [0, pi/2], got {theta}")
    if theta >= math.pi / 2:
        return 0.0
    d = coordination(kind)
    pc = threshold(kind, "bond", table)

    def f(kt: float) -> float:
        return thermal_pe(ModelParams(1.0 / kt, theta), d).p_e - pc

    lo, hi = KT_MIN, KT_MAX
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo >= 0 > f_hi):
        raise ValueError(f"threshold not bracketed: p_e({lo}) - pc = {f_lo}, p_e({hi}) - pc = {f_hi}")
    return float(brentq(f, lo, hi, xtol=xtol, rtol=1e-12))


# --- filtering and dephasing ---------------------------------------------------

@dataclass(frozen=True)
class FilterOutcome:
    cos2phi: float
    p0: float
    p1: float
    beta_prime: float

    @property
    def phi(self) -> float:
        return 0.5 * math.acos(self.cos2phi)

    @property
    def kt_prime(self) -> float:
        if math.isnan(self.beta_prime):
            return math.nan
        return 0.0 if math.isinf(self.beta_prime) else (math.inf if self.beta_prime == 0 else 1 / self.beta_prime)

    def operators(self) -> tuple[np.ndarray, np.ndarray]:
        """Kraus pair M0 = sqrt(1 - tan^2 phi)|0><0|, M1 = tan(phi)|0><0| + |1><1|."""
        tan = math.tan(self.phi)
        m0 = np.diag([math.sqrt(max(0.0, 1 - tan * tan)), 0.0]).astype(complex)
        m1 = np.diag([tan, 1.0]).astype(complex)
        return m0, m1


def filter_map(params: ModelParams) -> FilterOutcome:
    """Filtering statistics and the temperature of the filtered state.

    ``beta_prime`` is NaN when the filtered state is undefined (``p1 = 0``).
    """
    t = params.polarization
    s, c = math.sin(params.theta), math.cos(params.theta)
    ts = t * s
    denom = math.sqrt(max(0.0, 1 - ts * ts))
    if denom == 0:
        beta_prime = math.nan
    elif s == 0:
        beta_prime = params.beta
    else:
        tp = t * c / denom
        beta_prime = math.inf if tp >= 1 - 1e-15 else 2 * math.atanh(tp)
    return FilterOutcome(ts, ts, 1 - ts, beta_prime)


@dataclass(frozen=True)
class Dephasing:
    p: float
    beyond_channel_range: bool


def dephasing_p(params: ModelParams) -> Dephasing:
    """``tanh(beta/2) sin(theta)``; values of 1/2 or more are not a dephasing channel."""
    p = params.polarization * math.sin(params.theta)
    return Dephasing(p, p >= 0.5)


def effective_dephasing_p(params: ModelParams) -> float:
    """Extra dephasing carried by the flip-and-Z construction, which the oracle confirms.

    A site that filters to '0' ends up maximally mixed after the random flip,
    i.e. dephased with probability 1/2; averaging over the filter outcome
    gives ``p0 / 2``.
    """
    return dephasing_p(params).p / 2


def tc_dephasing(p_c: float) -> float:
    """kT whose zero-field single-spin dephasing ``1 / (1 + e^{1/kT})`` equals ``p_c``."""
    if not 0.0 < p_c < 0.5:
        raise ValueError(f"p_c must lie in (0, 1/2), got {p_c}")
    return 1.0 / math.log(1.0 / p_c - 1.0)


def total_dephasing(params: ModelParams) -> float:
    """Dephasing of the post-processed state relative to the ideal cluster state.

    Thermal dephasing at ``T'`` and the construction's extra dephasing
    compose multiplicatively in ``1 - 2p``.
    """
    f = filter_map(params)
    if math.isnan(f.beta_prime):
        return 0.5
    tp = 1.0 if math.isinf(f.beta_prime) else math.tanh(f.beta_prime / 2)
    return 0.5 * (1 - tp * (1 - 2 * effective_dephasing_p(params)))


def q_window(theta: float, p_c: float = P_C_DEFAULT) -> tuple[float, float]:
    """``(kT_min, kT_max)`` where the total dephasing is below ``p_c``; NaNs if empty.

    ``1 - 2 p_total = t cos(theta) sqrt((1 - t s) / (1 + t s))`` peaks at
    ``t s = (sqrt 5 - 1) / 2``.
    """
    s, c = math.sin(theta), math.cos(theta)
    target = 1 - 2 * p_c

    def g(t):
        return t * c * math.sqrt((1 - t * s) / (1 + t * s))

    t_peak = 1.0 if s == 0 else min(1.0, (math.sqrt(5) - 1) / 2 / s)
    if g(t_peak) <= target:
        return math.nan, math.nan
    t_low = brentq(lambda t: g(t) - target, 0.0, t_peak, xtol=1e-15)
    kt_max = 1 / (2 * math.atanh(t_low))
    kt_min = 0.0
    if t_peak < 1 and g(1.0) < target:
        t_high = brentq(lambda t: g(t) - target, t_peak, 1.0, xtol=1e-15)
        kt_min = 1 / (2 * math.atanh(t_high))
    return kt_min, kt_max


def qprime_window(theta: float, kind: str, p_c: float = P_C_DEFAULT,
                  table: ThresholdTable | None = None) -> tuple[float, float]:
    """``(kT_min, kT_max)`` with p1 above the site threshold and T' below tc_dephasing."""
    s, c = math.sin(theta), math.cos(theta)
    tau = math.tanh(1 / (2 * tc_dephasing(p_c)))
    # T' < Tc  <=>  t > tau / sqrt(c^2 + tau^2 s^2)
    denom = math.sqrt(c * c + tau * tau * s * s)
    t_min = tau / denom if denom > 0 else math.inf
    # p1 > site threshold  <=>  t s < 1 - p_site
    t_max = math.inf if s == 0 else (1 - threshold(kind, "site", table)) / s
    t_max = min(t_max, 1.0)
    if t_min >= 1.0 or t_min >= t_max:
        return math.nan, math.nan
    kt_max = 1 / (2 * math.atanh(t_min))
    kt_min = 0.0 if t_max >= 1.0 else 1 / (2 * math.atanh(t_max))
    return kt_min, kt_max


# --- classification -------------------------------------------------------------

@dataclass(frozen=True)
class RegionVerdict:
    kt: float
    theta: float
    region: str
    conditions: dict[str, bool]
    evidence: dict[str, float | bool] = field(default_factory=dict)


def classify(kt: float, theta: float, kind: str, table: ThresholdTable | None = None,
             p_c: float = P_C_DEFAULT) -> RegionVerdict:
    """Evaluate every region condition at ``(kT, theta)``; label by priority Q > Q' > C."""
    if kt < 0:
        raise ValueError(f"kT must be >= 0, got {kt}")
    params = ModelParams.from_kt(kt, theta)
    d = coordination(kind)
    if theta >= math.pi / 2:
        pe = PeResult(0.0)  # product ground state, no bond to decompose
    else:
        pe = thermal_pe(params, d)
    f = filter_map(params)
    deph = dephasing_p(params)
    p_total = total_dephasing(params)
    tc_q = tc_dephasing(p_c)
    conditions = {
        "C": pe.p_e < threshold(kind, "bond", table),
        "Q": p_total < p_c,
        "Qprime": f.p1 > threshold(kind, "site", table) and f.kt_prime < tc_q,
    }
    region = next((r for r in ("Q", "Qprime", "C") if conditions[r]), "undetermined")
    evidence = {
        "p_e": pe.p_e,
        "p_e_infeasible": pe.infeasible,
        "p_dephasing": deph.p,
        "p_dephasing_beyond_range": deph.beyond_channel_range,
        "p_dephasing_effective": effective_dephasing_p(params),
        "p_total": p_total,
        "T_prime": f.kt_prime,
        "p1": f.p1,
    }
    return RegionVerdict(kt, theta, region, conditions, evidence)


# --- dense filtering oracle -----------------------------------------------------

def induced_subgraph(graph: LatticeGraph, sites) -> LatticeGraph:
    sites = sorted(int(s) for s in sites)
    pos = {s: k for k, s in enumerate(sites)}
    edges = [(pos[i], pos[j]) for i, j in graph.bonds if i in pos and j in pos]
    return custom_graph(len(sites), edges)


def zero_field_dephased_state(graph: LatticeGraph, polarization: float, p: float,
                              cap: int = ORACLE_CAP) -> np.ndarray:
    """Zero-field thermal cluster state with polarisation ``polarization`` then dephasing ``p``."""
    r = 0.5 * (np.eye(2) + polarization * (1 - 2 * p) * pauli("X"))
    return cz_all(graph, tensor([r] * graph.n_sites), cap)


@dataclass
class FilterRecord:
    outcome: str                      # sampled filter outcome, site 0 first
    kept_sites: list[int]             # sites that gave '1'
    probability: float
    kept_state: np.ndarray            # normalised state on the kept sites
    outcome_probs: dict[str, float]
    filter: FilterOutcome
    td_kept_vs_tprime: float
    stabilizer_expectations: list[float]
    construction_state: np.ndarray | None = None
    td_stated_dephasing: float | None = None
    td_effective_dephasing: float | None = None


def _local(op: np.ndarray, site: int, n: int) -> np.ndarray:
    return tensor([op if k == site else np.eye(2) for k in range(n)])


def filter_branches(graph: LatticeGraph, params: ModelParams, cap: int = ORACLE_CAP,
                    rho: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Unnormalised ``M rho M^dag`` for every filter outcome string (site 0 first)."""
    if graph.n_sites > cap:
        raise OracleCapError(f"{graph.n_sites} sites exceeds the oracle cap of {cap}")
    m0, m1 = filter_map(params).operators()
    rho = exact_thermal_state(graph, params, cap) if rho is None else rho
    out = {}
    for bits in itertools.product((0, 1), repeat=graph.n_sites):
        k = tensor([m1 if b else m0 for b in bits])
        out["".join(map(str, bits))] = k @ rho @ k.conj().T
    return out


def kept_cluster_report(graph: LatticeGraph, params: ModelParams, key: str, branch: np.ndarray,
                        cap: int = ORACLE_CAP) -> tuple[np.ndarray, float, list[float]]:
    """Normalised state of the '1' sites of one branch, its distance to the zero-field
    thermal state at ``T'`` on the induced subgraph, and its stabilizer expectations."""
    kept = [i for i, b in enumerate(key) if b == "1"]
    if not kept:
        return np.ones((1, 1)), 0.0, []
    state = partial_trace(branch, kept) / np.trace(branch).real
    sub = induced_subgraph(graph, kept)
    reference = exact_thermal_state(sub, ModelParams(filter_map(params).beta_prime, 0.0), cap)
    expectations = [float(np.trace(state @ stabilizer(sub, i, cap)).real) for i in range(len(kept))]
    return state, trace_distance(state, reference), expectations


def apply_filter_oracle(graph: LatticeGraph, params: ModelParams, seed: int,
                        dephase: bool = True, cap: int = ORACLE_CAP) -> FilterRecord:
    """Filter every site of the exact thermal state and check the result.

    Samples one filter outcome with ``seed``, keeps the '1' sites, and compares
    their state with the zero-field thermal state at ``T'``.  With ``dephase``
    it also builds the outcome-averaged flip-and-Z state and measures its
    distance to the zero-field state at ``T'`` dephased by the stated ``p``
    and by the effective ``p / 2``.
    """
    n = graph.n_sites
    if n > cap:
        raise OracleCapError(f"{n} sites exceeds the oracle cap of {cap}")
    f = filter_map(params)
    rho = exact_thermal_state(graph, params, cap)
    states = filter_branches(graph, params, cap, rho)
    probs = {k: float(np.trace(r).real) for k, r in states.items()}
    keys = list(probs)
    weights = np.array([probs[k] for k in keys])
    pick = keys[int(np.searchsorted(np.cumsum(weights) / weights.sum(), shot_rng(seed, 0).random(), side="right"))]
    kept = [i for i, b in enumerate(pick) if b == "1"]
    kept_state, td, expectations = kept_cluster_report(graph, params, pick, states[pick], cap)
    record = FilterRecord(pick, kept, probs[pick], kept_state, probs, f, td, expectations)
    if dephase:
        total = np.zeros_like(rho)
        flips = [stabilizer(graph, i, cap) for i in range(n)]
        for key, r in states.items():
            for i, b in enumerate(key):
                if b == "0":
                    r = 0.5 * (r + flips[i] @ r @ flips[i].conj().T)
            total += r
        tp = 1.0 if math.isinf(f.beta_prime) else math.tanh(f.beta_prime / 2)
        record.construction_state = total
        record.td_stated_dephasing = trace_distance(
            total, zero_field_dephased_state(graph, tp, dephasing_p(params).p, cap))
        record.td_effective_dephasing = trace_distance(
            total, zero_field_dephased_state(graph, tp, effective_dephasing_p(params), cap))
    return record


def sample_filter_outcomes(record: FilterRecord, shots: int, seed: int) -> np.ndarray:
    """``(shots, n)`` filter outcomes drawn from the exact outcome distribution."""
    keys = list(record.outcome_probs)
    p = np.array([record.outcome_probs[k] for k in keys])
    rng = shot_rng(seed, 0, stream=2)
    idx = rng.choice(len(keys), size=shots, p=p / p.sum())
    table = np.array([[int(b) for b in k] for k in keys], dtype=np.int8)
    return table[idx]
