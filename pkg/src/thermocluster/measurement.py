"""Adaptive single-qubit measurement patterns on sampled cluster instances.

Each shot samples a bond configuration, realises the pure state of every
cluster, and measures the pattern's sites in order.  A step measures along
the Bloch direction ``(polar, azimuth)`` (outcome 0 is the ``+n`` eigenstate);
if its adaptive rule evaluates true on the earlier outcomes the azimuth is
negated.  ``born_exact`` gives the exact outcome distribution from the dense
thermal state.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .exact import ORACLE_CAP, ModelParams, OracleCapError, exact_thermal_state
from .lattice import LatticeGraph, connected_clusters
from .percolation import cost_bound
from .linalg import bloch_ket
from .sampler import (STATEVECTOR_CAP, ClusterCapError, EnsembleLike, realize_state,
                      sample_configurations, shot_rng)

MEASUREMENT_STREAM = 1


class PatternError(ValueError):
    """Malformed measurement pattern."""


_ALLOWED = (ast.Expression, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp, ast.Not, ast.BinOp,
            ast.BitXor, ast.BitAnd, ast.BitOr, ast.Compare, ast.Eq, ast.NotEq, ast.Name,
            ast.Load, ast.Constant)


def compile_rule(rule: str, n_prior: int) -> Callable[[Sequence[int]], bool]:
    """Turn ``"s0 ^ (s1 and not s2)"`` style text into a predicate on earlier outcomes.

    Names are ``s<k>`` for the outcome of step ``k``; allowed operators are
    ``and or not ^ & | == !=`` and the constants 0, 1, True, False.
    """
    try:
        tree = ast.parse(rule, mode="eval")
    except SyntaxError as exc:
        raise PatternError(f"cannot parse adaptive rule {rule!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise PatternError(f"{type(node).__name__} not allowed in adaptive rule {rule!r}")
        if isinstance(node, ast.Name):
            if not (node.id.startswith("s") and node.id[1:].isdigit()):
                raise PatternError(f"unknown name {node.id!r} in adaptive rule {rule!r}")
            if int(node.id[1:]) >= n_prior:
                raise PatternError(f"rule {rule!r} refers to {node.id}, which is not an earlier step")
        if isinstance(node, ast.Constant) and node.value not in (0, 1, True, False):
            raise PatternError(f"constant {node.value!r} not allowed in adaptive rule {rule!r}")
    code = compile(tree, "<rule>", "eval")

    def predicate(outcomes: Sequence[int]) -> bool:
        env = {f"s{k}": int(outcomes[k]) for k in range(n_prior)}
        return bool(eval(code, {"__builtins__": {}}, env))

    return predicate


@dataclass(frozen=True)
class MeasurementStep:
    site: int
    polar: float
    azimuth: float
    adaptive_rule: str | None = None


@dataclass
class MeasurementPattern:
    steps: list[MeasurementStep]
    _rules: list = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        sites = [s.site for s in self.steps]
        if len(set(sites)) != len(sites):
            raise PatternError("a site is measured more than once")
        self._rules = [None if s.adaptive_rule is None else compile_rule(s.adaptive_rule, k)
                       for k, s in enumerate(self.steps)]

    def __len__(self) -> int:
        return len(self.steps)

    def validate_for(self, graph: LatticeGraph) -> None:
        for s in self.steps:
            if not 0 <= s.site < graph.n_sites:
                raise PatternError(f"site {s.site} is not in the lattice")

    def basis(self, k: int, prior: Sequence[int]) -> tuple[float, float]:
        step = self.steps[k]
        rule = self._rules[k]
        if rule is not None and rule(prior):
            return step.polar, -step.azimuth
        return step.polar, step.azimuth

    @classmethod
    def from_json(cls, text: str) -> "MeasurementPattern":
        raw = json.loads(text)
        if isinstance(raw, dict):
            raw = raw.get("steps")
        if not isinstance(raw, list):
            raise PatternError("pattern must be a JSON list of steps")
        steps = []
        for k, item in enumerate(raw):
            try:
                if "basis" in item:
                    polar, azimuth = item["basis"]
                else:
                    polar, azimuth = item["polar"], item["azimuth"]
                steps.append(MeasurementStep(int(item["site"]), float(polar), float(azimuth),
                                             item.get("adaptive_rule")))
            except (KeyError, TypeError, ValueError) as exc:
                raise PatternError(f"step {k}: {exc}") from None
        return cls(steps)

    @classmethod
    def load(cls, path: str | Path) -> "MeasurementPattern":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps([{"site": s.site, "basis": [s.polar, s.azimuth], "adaptive_rule": s.adaptive_rule}
                           for s in self.steps])


def random_pattern(n_sites: int, n_steps: int, rng: np.random.Generator,
                   n_adaptive: int = 1) -> MeasurementPattern:
    """Random bases on distinct sites; the last ``n_adaptive`` steps get parity rules."""
    sites = rng.choice(n_sites, size=n_steps, replace=False)
    steps = []
    for k, site in enumerate(sites):
        rule = None
        if k >= n_steps - n_adaptive and k > 0:
            refs = sorted(rng.choice(k, size=min(k, 2), replace=False))
            rule = " ^ ".join(f"s{r}" for r in refs)
        steps.append(MeasurementStep(int(site), float(rng.uniform(0, np.pi)),
                                     float(rng.uniform(-np.pi, np.pi)), rule))
    return MeasurementPattern(steps)


def _branch(state: np.ndarray, local_index: int, polar: float, azimuth: float):
    """Outcome-0 probability and both normalised post-states (measured qubit removed)."""
    n = int(np.log2(len(state)))
    t = state.reshape(1 << local_index, 2, 1 << (n - local_index - 1))
    posts, probs = [], []
    for bit in (0, 1):
        v = np.einsum("i,aib->ab", bloch_ket(polar, azimuth, bit).conj(), t).reshape(-1)
        p = float(np.vdot(v, v).real)
        probs.append(p)
        posts.append(v / np.sqrt(p) if p > 0 else v)
    total = probs[0] + probs[1]
    return probs[0] / total, posts


def measure_site(cluster_state: np.ndarray, local_index: int, basis: tuple[float, float],
                 rng: np.random.Generator | float) -> tuple[int, np.ndarray]:
    """Born-rule measurement; ``rng`` may be a generator or a uniform in [0, 1)."""
    n = int(np.log2(len(cluster_state)))
    if not 0 <= local_index < n:
        raise IndexError(f"qubit {local_index} not in a {n}-qubit state")
    if n > STATEVECTOR_CAP:
        raise ClusterCapError(n, STATEVECTOR_CAP)
    p0, posts = _branch(np.asarray(cluster_state, dtype=complex), local_index, *basis)
    u = rng.random() if isinstance(rng, np.random.Generator) else float(rng)
    bit = 0 if u < p0 else 1
    return bit, posts[bit]


def outcome_probabilities(cluster_state: np.ndarray, local_index: int,
                          basis: tuple[float, float]) -> tuple[float, float]:
    p0, _ = _branch(np.asarray(cluster_state, dtype=complex), local_index, *basis)
    return p0, 1.0 - p0


@dataclass(frozen=True)
class ShotRecord:
    shot: int
    outcomes: tuple[int, ...]
    cluster_sizes: tuple[int, ...]
    cost: int
    failed: bool = False

    @property
    def bitstring(self) -> str:
        return "".join(str(b) for b in self.outcomes) if not self.failed else ""


def _walk(pattern: MeasurementPattern, k: int, clusters: dict, prefix: tuple[int, ...],
          shots: np.ndarray, u: np.ndarray, out: np.ndarray) -> None:
    """Split ``shots`` (all sharing ``prefix``) on the outcome of step ``k`` and recurse."""
    if k == len(pattern) or len(shots) == 0:
        return
    site = pattern.steps[k].site
    cid, sites, state = clusters[site]
    local = sites.index(site)
    p0, posts = _branch(state, local, *pattern.basis(k, prefix))
    bits = (u[shots, k] >= p0).astype(np.int8)
    out[shots, k] = bits
    rest = [s for s in sites if s != site]
    for bit in (0, 1):
        chosen = shots[bits == bit]
        if len(chosen) == 0:
            continue
        nxt = dict(clusters)
        for s in rest:
            nxt[s] = (cid, rest, posts[bit])
        _walk(pattern, k + 1, nxt, prefix + (bit,), chosen, u, out)


def run_pattern(graph: LatticeGraph, params: ModelParams | EnsembleLike, pattern: MeasurementPattern,
                shots: int, seed: int, cap: int = STATEVECTOR_CAP) -> list[ShotRecord]:
    """Simulate ``shots`` runs of ``pattern``; shots whose cluster exceeds ``cap`` are marked failed."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    pattern.validate_for(graph)
    choices = sample_configurations(graph, params, shots, seed)
    n_steps = len(pattern)
    u = np.empty((shots, n_steps))
    for k in range(shots):
        u[k] = shot_rng(seed, k, MEASUREMENT_STREAM).random(n_steps)
    outcomes = np.full((shots, n_steps), -1, dtype=np.int8)
    groups: dict[bytes, list[int]] = {}
    for k in range(shots):
        groups.setdefault(choices[k].tobytes(), []).append(k)
    sizes: dict[bytes, tuple[int, ...]] = {}
    failed: set[bytes] = set()
    for key, members in groups.items():
        config = tuple(int(c) for c in np.frombuffer(key, dtype=choices.dtype))
        try:
            parts = realize_state(graph, params, config, cap=cap)
        except ClusterCapError:
            part = connected_clusters(graph, np.array(config) == 0)
            sizes[key] = tuple(int(s) for s in part.sizes)
            failed.add(key)
            continue
        sizes[key] = tuple(len(p.sites) for p in parts)
        clusters = {}
        for cid, p in enumerate(parts):
            site_list = [int(s) for s in p.sites]
            for s in site_list:
                clusters[s] = (cid, site_list, p.state)
        _walk(pattern, 0, clusters, (), np.array(members), u, outcomes)
    records = []
    for k in range(shots):
        key = choices[k].tobytes()
        cs = sizes[key]
        records.append(ShotRecord(k, tuple(int(b) for b in outcomes[k]), cs,
                                  cost_bound(graph.n_sites, max(cs)), key in failed))
    return records


def outcome_histogram(records: Sequence[ShotRecord]) -> dict[str, int]:
    hist: dict[str, int] = {}
    for r in records:
        if not r.failed:
            hist[r.bitstring] = hist.get(r.bitstring, 0) + 1
    return dict(sorted(hist.items()))


def _apply_local(rho: np.ndarray, op: np.ndarray, site: int, n: int) -> np.ndarray:
    """``op_site rho op_site^dag`` without forming the full operator."""
    t = rho.reshape((2,) * (2 * n))
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [site])), 0, site)
    t = np.moveaxis(np.tensordot(op.conj(), t, axes=([1], [n + site])), 0, n + site)
    return t.reshape(rho.shape)


def born_exact(graph: LatticeGraph, params: ModelParams, pattern: MeasurementPattern,
               cap: int = ORACLE_CAP, rho: np.ndarray | None = None) -> dict[str, float]:
    """Exact probability of every outcome string, expanding each adaptive branch."""
    n = graph.n_sites
    if n > cap:
        raise OracleCapError(f"{n} sites exceeds the oracle cap of {cap}")
    pattern.validate_for(graph)
    rho = exact_thermal_state(graph, params, cap) if rho is None else rho
    out: dict[str, float] = {}

    def rec(k: int, r: np.ndarray, prefix: tuple[int, ...]) -> None:
        if k == len(pattern):
            out["".join(map(str, prefix))] = float(np.trace(r).real)
            return
        polar, azimuth = pattern.basis(k, prefix)
        for bit in (0, 1):
            ket = bloch_ket(polar, azimuth, bit)
            r2 = _apply_local(r, np.outer(ket, ket.conj()), pattern.steps[k].site, n)
            if np.trace(r2).real > 1e-300:
                rec(k + 1, r2, prefix + (bit,))

    rec(0, rho, ())
    return dict(sorted(out.items()))


def tvd(counts: dict[str, int] | dict[str, float], exact: dict[str, float]) -> float:
    total = sum(counts.values())
    keys = set(counts) | set(exact)
    return 0.5 * sum(abs(counts.get(k, 0) / total - exact.get(k, 0.0)) for k in keys)
