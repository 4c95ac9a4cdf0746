import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermocluster.decomposition import ensemble_for_pe
from thermocluster.exact import ModelParams
from thermocluster.lattice import build_lattice, custom_graph
from thermocluster.linalg import two_qubit_cluster
from thermocluster.measurement import (MeasurementPattern, MeasurementStep, PatternError, born_exact, compile_rule,
                                       measure_site, outcome_histogram, outcome_probabilities, random_pattern,
                                       run_pattern, tvd)

X_BASIS = (math.pi / 2, 0.0)
Z_BASIS = (0.0, 0.0)


def test_z_measurement_of_zero():
    assert outcome_probabilities(np.array([1, 0], complex), 0, Z_BASIS) == (1.0, 0.0)
    bit, post = measure_site(np.array([1, 0], complex), 0, Z_BASIS, 0.999)
    assert bit == 0


def test_x_measurement_on_cluster_pair():
    # X '+' on the first qubit of (|0+> + |1->)/sqrt2 leaves |0> (the '+' branch of <+| on qubit one)
    bit, post = measure_site(two_qubit_cluster(), 0, X_BASIS, 0.0)
    assert bit == 0
    assert abs(np.vdot(np.array([1, 0]), post)) == pytest.approx(1.0)
    bit, post = measure_site(two_qubit_cluster(), 0, X_BASIS, 0.99)
    assert bit == 1
    assert abs(np.vdot(np.array([0, 1]), post)) == pytest.approx(1.0)


def test_z_measurement_on_cluster_pair_leaves_plus_or_minus():
    _, post = measure_site(two_qubit_cluster(), 0, Z_BASIS, 0.0)
    assert abs(np.vdot(np.array([1, 1]) / math.sqrt(2), post)) == pytest.approx(1.0)


@pytest.mark.parametrize("beta", [0.3, 1.0, 4.0])
def test_born_single_spin_along_field(beta):
    g = custom_graph(1, [])
    pattern = MeasurementPattern([MeasurementStep(0, 0.0, 0.0)])
    dist = born_exact(g, ModelParams(beta, math.pi / 2), pattern)
    assert dist["0"] == pytest.approx((1 + math.tanh(beta / 2)) / 2)


def test_born_infinite_temperature_is_uniform():
    g = build_lattice("chain", [3], "open")
    pattern = MeasurementPattern([MeasurementStep(k, 0.0, 0.0) for k in range(3)])
    dist = born_exact(g, ModelParams(0.0, 0.3), pattern)
    assert len(dist) == 8
    assert all(v == pytest.approx(1 / 8) for v in dist.values())


def test_rule_compiler():
    rule = compile_rule("s0 ^ (s1 and not s2)", 3)
    assert rule([1, 0, 0]) is True
    assert rule([1, 1, 0]) is False
    for bad in ("__import__('os')", "s3", "s0 + 2", "x1", "s0 ^", "s0.real"):
        with pytest.raises(PatternError):
            compile_rule(bad, 3)


def test_pattern_validation_and_json():
    with pytest.raises(PatternError):
        MeasurementPattern([MeasurementStep(0, 0, 0), MeasurementStep(0, 1, 0)])
    with pytest.raises(PatternError):
        MeasurementPattern([MeasurementStep(0, 0, 0, "s0")])
    pat = MeasurementPattern([MeasurementStep(2, 1.0, 0.5), MeasurementStep(0, 0.3, 0.2, "s0")])
    with pytest.raises(PatternError):
        pat.validate_for(build_lattice("chain", [2], "open"))
    again = MeasurementPattern.from_json(pat.to_json())
    assert again.steps == pat.steps
    alt = MeasurementPattern.from_json(json.dumps({"steps": [{"site": 1, "polar": 0.1, "azimuth": 0.2}]}))
    assert alt.steps[0] == MeasurementStep(1, 0.1, 0.2)
    with pytest.raises(PatternError):
        MeasurementPattern.from_json('[{"site": 1}]')
    assert pat.basis(1, [0]) == (0.3, 0.2)
    assert pat.basis(1, [1]) == (0.3, -0.2)


def test_run_pattern_is_seeded():
    g = build_lattice("chain", [4], "open")
    pat = random_pattern(4, 3, np.random.default_rng(0))
    a = run_pattern(g, ModelParams(1.0, 0.2), pat, 200, seed=4)
    b = run_pattern(g, ModelParams(1.0, 0.2), pat, 200, seed=4)
    assert a == b
    assert [r.shot for r in a] == list(range(200))


def test_run_pattern_cap_marks_failures():
    g = build_lattice("chain", [5], "open")
    pat = MeasurementPattern([MeasurementStep(0, 0.0, 0.0)])
    recs = run_pattern(g, ensemble_for_pe(1.0), pat, 5, seed=0, cap=3)
    assert all(r.failed for r in recs)
    assert outcome_histogram(recs) == {}


@pytest.mark.parametrize("seed", range(3))
def test_run_pattern_matches_born_rule(seed):
    rng = np.random.default_rng(seed)
    g = build_lattice("chain", [4], "open")
    p = ModelParams(float(rng.uniform(0.5, 3)), float(rng.uniform(0, 1)))
    pat = random_pattern(4, 4, rng, n_adaptive=2)
    records = run_pattern(g, p, pat, 20_000, seed=seed)
    assert tvd(outcome_histogram(records), born_exact(g, p, pat)) < 0.03


def test_tvd_helper():
    assert tvd({"0": 5, "1": 5}, {"0": 0.5, "1": 0.5}) == 0.0
    assert tvd({"0": 1}, {"1": 1.0}) == 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_born_distribution_is_normalised(seed):
    rng = np.random.default_rng(seed)
    g = build_lattice("square", [2, 2], "open")
    p = ModelParams(float(rng.uniform(0.1, 5)), float(rng.uniform(0, 1.5)))
    dist = born_exact(g, p, random_pattern(4, int(rng.integers(1, 5)), rng))
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    assert min(dist.values()) >= -1e-15
