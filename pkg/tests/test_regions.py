import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermocluster.exact import ModelParams
from thermocluster.lattice import DEFAULT_THRESHOLDS, build_lattice, threshold
from thermocluster.regions import (P_C_DEFAULT, apply_filter_oracle, classify, dephasing_p, effective_dephasing_p,
                                   filter_map, q_window, qprime_window, sample_filter_outcomes, tc_dephasing,
                                   tcrit_general, tcrit_zero_field, thermal_pe, total_dephasing)

INF = math.inf
HALF_PI = math.pi / 2


@pytest.mark.parametrize("kind,value,rel", [
    ("honeycomb", 0.813, 1e-3),
    ("square", 1.6921, 1e-3),
    ("triangular", 7.1617, 1e-3),
    ("cubic", 13.1, 1e-2),
])
def test_zero_field_critical_temperatures(kind, value, rel):
    assert tcrit_zero_field(kind) == pytest.approx(value, rel=rel)


def test_square_critical_temperature_frozen():
    # kT = 1 / (2 atanh((sqrt3 - 1)^4)), from p_e = 1/2 on the quadratic closed form
    assert tcrit_zero_field("square") == pytest.approx(1 / (2 * math.atanh((math.sqrt(3) - 1) ** 4)), rel=1e-14)
    assert tcrit_zero_field("square") == pytest.approx(1.6920601057368554, rel=1e-14)


@pytest.mark.parametrize("kind", ["honeycomb", "square", "triangular", "cubic"])
def test_general_path_agrees_at_zero_field(kind):
    assert tcrit_general(0.0, kind) == pytest.approx(tcrit_zero_field(kind), rel=1e-6)


def test_general_endpoint_and_domain():
    assert tcrit_general(HALF_PI, "cubic") == 0.0
    with pytest.raises(ValueError):
        tcrit_general(2.0, "square")


def test_cubic_boundary_is_monotone():
    thetas = np.linspace(0, 0.95, 8) * HALF_PI
    kts = [tcrit_general(float(t), "cubic") for t in thetas]
    assert all(b <= a for a, b in zip(kts, kts[1:]))


def test_pe_crosses_threshold_at_tcrit():
    kt = tcrit_general(0.4, "square")
    pc = threshold("square")
    assert thermal_pe(ModelParams(1 / (kt * 0.99), 0.4), 4).p_e > pc
    assert thermal_pe(ModelParams(1 / (kt * 1.01), 0.4), 4).p_e < pc


def test_low_temperature_pe_saturates():
    assert thermal_pe(ModelParams(1000.0, 0.5), 6).p_e == 1.0
    assert thermal_pe(ModelParams(INF, 0.0), 4).p_e == 1.0


def test_filter_map_examples():
    f = filter_map(ModelParams(2.0, 0.0))
    assert f.p1 == 1.0 and f.beta_prime == pytest.approx(2.0)
    g = filter_map(ModelParams(0.0, 0.7))
    assert g.p1 == 1.0 and math.tanh(g.beta_prime / 2) == 0.0
    for theta in (0.2, 0.8, 1.3):
        h = filter_map(ModelParams(INF, theta))
        assert h.cos2phi == pytest.approx(math.sin(theta))
        assert 2 * h.phi == pytest.approx(HALF_PI - theta)
        assert h.kt_prime == 0.0


def test_filter_operators_form_an_instrument():
    m0, m1 = filter_map(ModelParams(1.5, 0.6)).operators()
    assert np.allclose(m0.conj().T @ m0 + m1.conj().T @ m1, np.eye(2))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 50.0), st.floats(0.0, 1.5))
def test_filtered_temperature_not_below_original(beta, theta):
    f = filter_map(ModelParams(beta, theta))
    if not math.isnan(f.beta_prime):
        assert math.tanh(f.beta_prime / 2) <= math.tanh(beta / 2) + 1e-15
        assert f.p0 + f.p1 == pytest.approx(1.0)


def test_dephasing_examples():
    assert tc_dephasing(0.029) == pytest.approx(0.2848, abs=5e-4)
    assert 0.28 <= tc_dephasing(P_C_DEFAULT) <= 0.29
    for beta in (0.1, 1.0, INF):
        assert dephasing_p(ModelParams(beta, 0.0)).p == 0.0
    d = dephasing_p(ModelParams(INF, HALF_PI))
    assert d.p == 1.0 and d.beyond_channel_range
    assert effective_dephasing_p(ModelParams(2.0, 0.4)) == pytest.approx(dephasing_p(ModelParams(2.0, 0.4)).p / 2)
    with pytest.raises(ValueError):
        tc_dephasing(0.6)


def test_total_dephasing_at_zero_field_is_thermal():
    kt = 0.4
    assert total_dephasing(ModelParams(1 / kt, 0.0)) == pytest.approx(1 / (1 + math.exp(1 / kt)))


@pytest.mark.parametrize("theta", [0.0, 0.02, 0.05])
def test_q_window_edges(theta):
    lo, hi = q_window(theta)
    assert hi > 0
    assert total_dephasing(ModelParams(1 / (hi * 0.99), theta)) < P_C_DEFAULT
    assert total_dephasing(ModelParams(1 / (hi * 1.01), theta)) > P_C_DEFAULT
    if lo > 0:
        assert total_dephasing(ModelParams(1 / (lo * 0.99), theta)) > P_C_DEFAULT


def test_q_window_closes_at_large_field():
    assert all(math.isnan(x) for x in q_window(0.2))
    assert all(math.isnan(x) for x in q_window(1.0))


@pytest.mark.parametrize("theta", [0.0, 0.3, 0.6])
def test_qprime_window_matches_classifier(theta):
    lo, hi = qprime_window(theta, "cubic")
    assert hi > 0
    for kt in np.linspace(max(lo, 1e-3) * 1.01, hi * 0.99, 5):
        assert classify(float(kt), theta, "cubic").conditions["Qprime"]
    assert not classify(hi * 1.02, theta, "cubic").conditions["Qprime"]


def test_qprime_window_closes_at_large_field():
    assert all(math.isnan(x) for x in qprime_window(0.9, "cubic"))
    assert not any(classify(float(kt), 0.9, "cubic").conditions["Qprime"] for kt in np.geomspace(1e-3, 10, 30))


@pytest.mark.parametrize("kt,theta,region", [(20.0, 0.3, "C"), (0.1, 0.01, "Q"), (0.1, 0.5, "Qprime")])
def test_classify_examples(kt, theta, region):
    assert classify(kt, theta, "cubic").region == region


def test_classify_evidence_is_exact():
    v = classify(0.1, 0.5, "cubic")
    assert v.evidence["p1"] == pytest.approx(1 - math.tanh(5.0) * math.sin(0.5), abs=1e-15)
    tp = math.tanh(5.0) * math.cos(0.5) / math.sqrt(1 - (math.tanh(5.0) * math.sin(0.5)) ** 2)
    assert v.evidence["T_prime"] == pytest.approx(1 / (2 * math.atanh(tp)), rel=1e-12)
    assert v.conditions["Qprime"] and not v.conditions["Q"]


def test_classify_respects_site_threshold_override():
    table = DEFAULT_THRESHOLDS.with_overrides(site={"cubic": 0.6})
    assert classify(0.1, 0.5, "cubic", table).region == "undetermined"


def test_classify_priority():
    v = classify(0.05, 0.0, "square")
    assert v.conditions["Q"] and v.conditions["Qprime"]
    assert v.region == "Q"


# --- dense filtering oracle ----------------------------------------------------

CHAIN4 = build_lattice("chain", [4], "open")


@pytest.mark.parametrize("seed", range(4))
def test_zero_temperature_filter_leaves_cluster_state(seed):
    rec = apply_filter_oracle(CHAIN4, ModelParams(INF, 0.4), seed=seed, dephase=False)
    assert all(abs(e - 1) < 1e-9 for e in rec.stabilizer_expectations)
    assert rec.td_kept_vs_tprime < 1e-9


@pytest.mark.parametrize("beta,theta", [(2.0, 0.4), (0.7, 1.0), (5.0, 0.1)])
def test_filtered_subset_is_thermal_at_tprime(beta, theta):
    for seed in range(3):
        assert apply_filter_oracle(CHAIN4, ModelParams(beta, theta), seed=seed, dephase=False).td_kept_vs_tprime < 1e-9


def test_zero_frequency_is_sin_theta():
    theta = 0.4
    rec = apply_filter_oracle(CHAIN4, ModelParams(INF, theta), seed=0, dephase=False)
    outcomes = sample_filter_outcomes(rec, 100_000, seed=1)
    freq = 1 - outcomes.mean()
    sigma = math.sqrt(math.sin(theta) * (1 - math.sin(theta)) / outcomes.size)
    assert abs(freq - math.sin(theta)) < 3 * sigma


@pytest.mark.parametrize("beta,theta", [(2.0, 0.4), (1.0, 0.8), (6.0, 0.2)])
def test_flip_and_z_construction_dephases_by_half_p(beta, theta):
    rec = apply_filter_oracle(CHAIN4, ModelParams(beta, theta), seed=0)
    assert rec.td_effective_dephasing < 1e-9
    # the full p = tanh(beta/2) sin(theta) overstates the dephasing
    assert rec.td_stated_dephasing > 1e-3
