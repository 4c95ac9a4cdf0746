"""Cluster statistics of sampled configurations and the simulability verdict."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decomposition import BondEnsemble, ensemble_for_pe
from .exact import ModelParams
from .lattice import LatticeGraph, ThresholdTable, build_lattice, connected_clusters, threshold
from .sampler import CHUNK_SHOTS, EnsembleLike, sample_configurations


def is_simulable(p_e: float, kind: str, table: ThresholdTable | None = None) -> bool:
    """Below the bond threshold the entangled bonds do not percolate (strict)."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError(f"p_e must lie in [0, 1], got {p_e}")
    return p_e < threshold(kind, "bond", table)


def cost_bound(n_sites: int, largest: int) -> int:
    """Work bound ``N * 2**(2 * largest)`` for simulating one shot."""
    return n_sites * 4 ** int(largest)


@dataclass
class ClusterStats:
    """Per-shot cluster data and its aggregates.

    ``chi`` for a shot is ``sum |C|^2 / N``, the mean size of the cluster that
    holds a uniformly random site.
    """

    n_sites: int
    largest: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    n_clusters: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    chi: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def shots(self) -> int:
        return len(self.largest)

    @property
    def mean_cluster_size(self) -> float:
        return float(self.chi.mean())

    @property
    def mean_cluster_size_se(self) -> float:
        return float(self.chi.std(ddof=1) / math.sqrt(self.shots)) if self.shots > 1 else math.inf

    @property
    def mean_largest(self) -> float:
        return float(self.largest.mean())

    def cost_bounds(self) -> list[int]:
        return [cost_bound(self.n_sites, k) for k in self.largest]

    def merge(self, other: "ClusterStats") -> "ClusterStats":
        if other.n_sites != self.n_sites:
            raise ValueError("cannot merge statistics from different lattices")
        return ClusterStats(self.n_sites, np.concatenate([self.largest, other.largest]),
                            np.concatenate([self.n_clusters, other.n_clusters]),
                            np.concatenate([self.chi, other.chi]))


def stats_from_masks(graph: LatticeGraph, masks: np.ndarray) -> ClusterStats:
    largest, count, chi = [], [], []
    for mask in np.atleast_2d(masks):
        part = connected_clusters(graph, mask)
        largest.append(part.largest)
        count.append(part.n_clusters)
        chi.append(float(np.sum(part.sizes.astype(float) ** 2)) / graph.n_sites)
    return ClusterStats(graph.n_sites, np.array(largest, dtype=np.int64),
                        np.array(count, dtype=np.int64), np.array(chi))


def gather_stats(graph: LatticeGraph, ensemble: EnsembleLike | ModelParams, shots: int,
                 seed: int) -> ClusterStats:
    """Sample ``shots`` configurations and record the entangled-bond clusters."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    stats = ClusterStats(graph.n_sites)
    for start in range(0, shots, CHUNK_SHOTS):
        n = min(CHUNK_SHOTS, shots - start)
        choices = sample_configurations(graph, ensemble, n, seed, first_shot=start)
        stats = stats.merge(stats_from_masks(graph, choices == 0))
    return stats


def lattice_with_sites(kind: str, n_sites: int, boundary: str = "periodic") -> LatticeGraph:
    """Regular lattice with exactly ``n_sites`` sites and equal extents."""
    ndim = {"chain": 1, "honeycomb": 2, "square": 2, "triangular": 2, "cubic": 3}.get(kind)
    if ndim is None:
        raise ValueError(f"no equal-extent family for {kind!r}")
    side = round(n_sites ** (1.0 / ndim))
    if side ** ndim != n_sites:
        raise ValueError(f"{n_sites} is not a perfect power {ndim} for {kind}")
    return build_lattice(kind, [side] * ndim, boundary)


@dataclass(frozen=True)
class ScalingReport:
    sizes: tuple[int, ...]
    mean_largest: tuple[float, ...]
    log_slope: float
    log_intercept: float
    log_residuals: tuple[float, ...]
    lin_residuals: tuple[float, ...]
    max_cost_log2: tuple[float, ...]
    mean_cluster_size: tuple[float, ...] = ()
    mean_cluster_size_se: tuple[float, ...] = ()

    def size_independent(self, n_se: float = 2.0) -> bool:
        """Every pair of mean cluster sizes agrees within ``n_se`` standard errors of the difference."""
        chi, se = self.mean_cluster_size, self.mean_cluster_size_se
        return all(abs(chi[a] - chi[b]) <= n_se * math.hypot(se[a], se[b])
                   for a in range(len(chi)) for b in range(a + 1, len(chi)))

    @property
    def log_rss(self) -> float:
        return float(np.sum(np.square(self.log_residuals)))

    @property
    def lin_rss(self) -> float:
        return float(np.sum(np.square(self.lin_residuals)))

    @property
    def log_preferred(self) -> bool:
        return self.log_rss <= self.lin_rss


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, np.ndarray]:
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), y - (slope * x + intercept)


def log_scaling_check(kind: str, p_e: float | BondEnsemble, sizes: Sequence[int], shots: int,
                      seed: int, table: ThresholdTable | None = None) -> ScalingReport:
    """Fit mean largest cluster against log2 N and against N.

    ``p_e`` is either a number (the zero-field ensemble with that weight) or an
    explicit ensemble.
    """
    if len(sizes) < 3:
        raise ValueError("need at least three lattice sizes")
    ens = ensemble_for_pe(p_e) if not isinstance(p_e, BondEnsemble) else p_e
    if not is_simulable(ens.p_e, kind, table):
        raise ValueError(f"p_e = {ens.p_e} is not below the {kind} bond threshold")
    means, costs, chi, chi_se = [], [], [], []
    for n in sizes:
        stats = gather_stats(lattice_with_sites(kind, n), ens, shots, seed)
        means.append(stats.mean_largest)
        chi.append(stats.mean_cluster_size)
        chi_se.append(stats.mean_cluster_size_se)
        costs.append(math.log2(n) + 2 * int(stats.largest.max()))
    x = np.array(sizes, dtype=float)
    y = np.array(means)
    slope, intercept, res_log = _fit(np.log2(x), y)
    _, _, res_lin = _fit(x, y)
    return ScalingReport(tuple(int(n) for n in sizes), tuple(means), slope, intercept,
                         tuple(res_log.tolist()), tuple(res_lin.tolist()), tuple(costs), tuple(chi), tuple(chi_se))
