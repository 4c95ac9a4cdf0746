"""Oracle checks on small graphs, shared by ``thermocluster verify`` and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.linalg import expm

from .bonds import project_peps, thermal_bonds
from .decomposition import DecompositionError
from .exact import ModelParams, exact_thermal_state, hamiltonian
from .lattice import LatticeGraph, build_lattice, star_graph
from .linalg import trace_distance
from .measurement import born_exact, random_pattern
from .regions import apply_filter_oracle, tcrit_general, tcrit_zero_field
from .sampler import ensemble_density, posterior_bond_dist, thermal_ensembles

GRID = [(b, th) for b in (0.5, 2.0, 10.0) for th in (0.0, 0.3, 1.0)]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def small_graphs(max_sites: int) -> list[tuple[str, LatticeGraph]]:
    graphs = [
        ("chain-3", build_lattice("chain", [3], "open")),
        ("chain-4", build_lattice("chain", [4], "open")),
        ("square-2x2", build_lattice("square", [2, 2], "open")),
        ("star-4", star_graph(4)),
        ("chain-6", build_lattice("chain", [6], "open")),
        ("square-2x3", build_lattice("square", [2, 3], "open")),
    ]
    return [(name, g) for name, g in graphs if g.n_sites <= max_sites]


def _worst(values) -> float:
    return max(values, default=0.0)


def _gibbs(graph: LatticeGraph) -> Iterator[float]:
    for beta, theta in GRID:
        h = hamiltonian(graph, theta)
        g = expm(-beta * h)
        yield trace_distance(exact_thermal_state(graph, ModelParams(beta, theta)), g / np.trace(g))


def _peps(graph: LatticeGraph) -> Iterator[float]:
    for beta, theta in GRID:
        p = ModelParams(beta, theta)
        yield trace_distance(project_peps(graph, thermal_bonds(graph, p)), exact_thermal_state(graph, p))


def _ensemble(graph: LatticeGraph) -> Iterator[float]:
    for beta, theta in [(1.0, 0.0), (1.0, 0.3), (0.5, 1.0)]:
        p = ModelParams(beta, theta)
        yield trace_distance(ensemble_density(graph, p), exact_thermal_state(graph, p))


def _factorisation(seed: int = 0) -> Iterator[float]:
    rng = np.random.default_rng(seed)
    for _ in range(20):
        p = ModelParams(float(rng.uniform(0.2, 4.0)), float(rng.uniform(0, 1.2)))
        d = int(rng.integers(2, 7))
        try:
            ens = thermal_ensembles(star_graph(d), p)[0]
        except DecompositionError:
            continue
        ctx = []
        for _ in range(2):
            k = int(rng.integers(0, 3))
            states = []
            for _ in range(k):
                v = rng.normal(size=2) + 1j * rng.normal(size=2)
                v /= np.linalg.norm(v)
                states.append(np.outer(v, v.conj()))
            ctx.append(states)
        probs = posterior_bond_dist(ens, ctx[0], ctx[1], check=True)
        yield abs(probs.sum() - 1)


def _born(graph: LatticeGraph) -> Iterator[float]:
    rng = np.random.default_rng(1)
    for beta, theta in [(2.0, 0.2), (0.5, 1.0)]:
        pattern = random_pattern(graph.n_sites, min(4, graph.n_sites), rng)
        yield abs(sum(born_exact(graph, ModelParams(beta, theta), pattern).values()) - 1)


def _filter(graph: LatticeGraph) -> Iterator[float]:
    for beta, theta in [(2.0, 0.4), (5.0, 0.2)]:
        rec = apply_filter_oracle(graph, ModelParams(beta, theta), seed=0)
        yield rec.td_kept_vs_tprime
        yield rec.td_effective_dephasing


def run_checks(max_sites: int = 6) -> list[CheckResult]:
    results = []

    def add(name: str, values: Callable[[], Iterator[float]], tol: float) -> None:
        try:
            worst = _worst(values())
            results.append(CheckResult(name, bool(worst < tol), f"worst {worst:.3e} (tol {tol:g})"))
        except Exception as exc:  # report, keep going
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))

    for name, g in small_graphs(max_sites):
        add(f"gibbs/{name}", lambda g=g: _gibbs(g), 1e-9)
        add(f"peps/{name}", lambda g=g: _peps(g), 1e-9)
        if g.n_bonds <= 4:
            add(f"ensemble/{name}", lambda g=g: _ensemble(g), 1e-9)
        add(f"born-normalised/{name}", lambda g=g: _born(g), 1e-12)
        if g.n_sites <= 5:
            add(f"filter/{name}", lambda g=g: _filter(g), 1e-9)
    add("factorisation", _factorisation, 1e-12)
    for kind in ("honeycomb", "square", "triangular", "cubic"):
        add(f"tcrit-consistency/{kind}",
            lambda kind=kind: iter([abs(tcrit_general(0.0, kind) / tcrit_zero_field(kind) - 1)]), 1e-3)
    add("tcrit-endpoint/cubic", lambda: iter([abs(tcrit_general(math.pi / 2, "cubic"))]), 1e-12)
    return results
