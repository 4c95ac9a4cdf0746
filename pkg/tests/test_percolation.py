import math

import numpy as np
import pytest

from thermocluster.decomposition import ensemble_for_pe
from thermocluster.exact import ModelParams
from thermocluster.lattice import DEFAULT_THRESHOLDS, build_lattice
from thermocluster.percolation import (ClusterStats, cost_bound, gather_stats, is_simulable, lattice_with_sites,
                                       log_scaling_check, stats_from_masks)


@pytest.mark.parametrize("p_e,kind,expected", [
    (0.4, "square", True),
    (0.5, "square", False),
    (0.24, "cubic", True),
    (0.25, "cubic", False),
    (0.0, "triangular", True),
])
def test_is_simulable(p_e, kind, expected):
    assert is_simulable(p_e, kind) is expected


def test_is_simulable_respects_overrides():
    table = DEFAULT_THRESHOLDS.with_overrides({"square": 0.3})
    assert not is_simulable(0.4, "square", table)
    with pytest.raises(ValueError):
        is_simulable(1.2, "square")


def test_cost_bound():
    assert cost_bound(16, 3) == 16 * 64
    assert isinstance(cost_bound(4096, 100), int)


def test_extreme_ensembles():
    g = build_lattice("square", [6, 6], "periodic")
    none = gather_stats(g, ensemble_for_pe(0.0), 50, seed=0)
    assert none.mean_cluster_size == 1.0 and none.largest.max() == 1
    full = gather_stats(g, ensemble_for_pe(1.0), 50, seed=0)
    assert np.all(full.largest == g.n_sites)
    assert np.all(full.n_clusters == 1)


def test_chi_definition():
    g = build_lattice("chain", [4], "open")
    stats = stats_from_masks(g, np.array([[True, False, False], [True, True, True]]))
    assert stats.chi.tolist() == [(4 + 1 + 1) / 4, 16 / 4]
    assert stats.largest.tolist() == [2, 4]


def test_stats_merge_and_chunking():
    g = build_lattice("square", [4, 4], "periodic")
    ens = ensemble_for_pe(0.3)
    whole = gather_stats(g, ens, 300, seed=9)
    assert whole.shots == 300
    with pytest.raises(ValueError):
        whole.merge(ClusterStats(5))
    with pytest.raises(ValueError):
        gather_stats(g, ens, 0, seed=1)


def test_thermal_params_accepted():
    g = build_lattice("square", [4, 4], "periodic")
    stats = gather_stats(g, ModelParams(0.5, 0.2), 40, seed=3)
    assert stats.shots == 40 and 1 <= stats.mean_largest <= 16


def test_lattice_with_sites():
    assert lattice_with_sites("square", 256).dims == (16, 16)
    assert lattice_with_sites("cubic", 27).dims == (3, 3, 3)
    with pytest.raises(ValueError):
        lattice_with_sites("square", 250)


def test_log_scaling_zero_weight_is_flat():
    rep = log_scaling_check("square", 0.0, [64, 256, 1024], shots=20, seed=0)
    assert rep.log_slope == pytest.approx(0.0, abs=1e-12)
    assert rep.mean_largest == (1.0, 1.0, 1.0)


def test_log_scaling_rejects_supercritical():
    with pytest.raises(ValueError):
        log_scaling_check("square", 0.6, [64, 256, 1024], shots=10, seed=0)


def test_subcritical_largest_cluster_grows_slowly():
    rep = log_scaling_check("square", 0.3, [64, 256, 1024], shots=200, seed=4)
    assert rep.log_slope > 0
    assert rep.log_preferred
