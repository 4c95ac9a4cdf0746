"""Thermal cluster states: exact references, PEPS bond sampling and phase-diagram tools."""

__version__ = "0.1.0"

from .bonds import BondParams, bond_general, bond_T0, project_peps, solve_bond_params, thermal_bonds
from .decomposition import BondEnsemble, build_ensemble, ensemble_for_pe, max_pe, pe_zero_field, product_ensemble
from .exact import ModelParams, exact_thermal_state, ground_state
from .lattice import DEFAULT_THRESHOLDS, LatticeGraph, ThresholdTable, build_lattice, connected_clusters
from .measurement import MeasurementPattern, born_exact, run_pattern
from .percolation import gather_stats, is_simulable, log_scaling_check
from .regions import classify, tc_dephasing, tcrit_general, tcrit_zero_field
from .sampler import exact_configuration_dist, posterior_bond_dist, sample_configurations

__all__ = [
    "BondEnsemble", "BondParams", "DEFAULT_THRESHOLDS", "LatticeGraph", "MeasurementPattern", "ModelParams",
    "ThresholdTable", "bond_T0", "bond_general", "born_exact", "build_ensemble", "build_lattice", "classify",
    "connected_clusters", "ensemble_for_pe", "exact_configuration_dist", "exact_thermal_state", "gather_stats",
    "ground_state", "is_simulable", "log_scaling_check", "max_pe", "pe_zero_field", "posterior_bond_dist",
    "product_ensemble", "project_peps", "run_pattern", "sample_configurations", "solve_bond_params",
    "tc_dephasing", "tcrit_general", "tcrit_zero_field", "thermal_bonds",
]
