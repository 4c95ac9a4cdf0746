import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermocluster.bonds import bond_general, bond_T0, bond_zero_field, solve_bond_params
from thermocluster.decomposition import (DecompositionError, build_ensemble, ensemble_for_pe, ensemble_from_bond,
                                         entangled_component, max_pe, omega_for_pe, pe_zero_field,
                                         product_ensemble)
from thermocluster.exact import ModelParams
from thermocluster.linalg import is_ppt, is_psd, projector, tensor, trace_distance, two_qubit_cluster
from thermocluster.regions import thermal_pe

C2 = two_qubit_cluster()
SQRT2M1 = math.sqrt(2) - 1


def _reconstruct(terms):
    return sum(p * projector(np.kron(a, b)) for p, a, b in terms)


@pytest.mark.parametrize("omega,expected", [(1.0, 1.0), (SQRT2M1, 0.0), (0.73205, 0.5), (0.2, 0.0)])
def test_pe_zero_field(omega, expected):
    assert pe_zero_field(omega) == pytest.approx(expected, abs=2e-5)


def test_omega_for_pe_inverts():
    for p in (0.0, 0.2, 0.5, 0.9, 1.0):
        assert pe_zero_field(omega_for_pe(p)) == pytest.approx(p, abs=1e-14)


def test_max_pe_examples():
    assert max_pe(projector(C2), C2) == 1.0
    assert max_pe(np.eye(4) / 4, C2) == 0.0


@pytest.mark.parametrize("omega", [0.45, 0.5, 0.6, 0.7, 0.75, 0.9, 1.0])
def test_max_pe_matches_closed_form(omega):
    assert max_pe(bond_zero_field(omega), C2) == pytest.approx(pe_zero_field(omega), abs=1e-6)


def test_max_pe_is_minimal_feasible_weight():
    bond = bond_zero_field(0.8)
    p = max_pe(bond, C2)
    for q, ok in ((p + 1e-6, True), (p - 1e-6, False)):
        rs = (bond - q * projector(C2)) / (1 - q)
        assert (is_psd(rs) and is_ppt(rs)) == ok


def test_max_pe_rejects_non_state():
    with pytest.raises(ValueError):
        max_pe(-np.eye(4) / 4, C2)


def test_product_ensemble_pure_product():
    plus = np.array([1, 1]) / math.sqrt(2)
    rho = projector(np.kron([1, 0], plus))
    terms = product_ensemble(rho)
    assert len(terms) == 1 and terms[0][0] == pytest.approx(1.0)
    assert trace_distance(_reconstruct(terms), rho) < 1e-9


def test_product_ensemble_maximally_mixed():
    terms = product_ensemble(np.eye(4) / 4)
    assert len(terms) <= 4
    assert trace_distance(_reconstruct(terms), np.eye(4) / 4) < 1e-9


def test_product_ensemble_residue_example():
    bond = bond_general(solve_bond_params(ModelParams(2.0, 0.3), 6))
    psi = entangled_component(0.3, 6)
    p = max_pe(bond, psi)
    rs = (bond - p * projector(psi)) / (1 - p)
    terms = product_ensemble(rs)
    assert trace_distance(_reconstruct(terms), rs) < 1e-9


def test_product_ensemble_rejects_entangled():
    with pytest.raises(DecompositionError):
        product_ensemble(projector(C2))


def _random_separable(rng, k):
    w = rng.dirichlet(np.ones(k))
    rho = np.zeros((4, 4), complex)
    for p in w:
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        b = rng.normal(size=2) + 1j * rng.normal(size=2)
        rho += p * projector(np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b)))
    return rho


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8))
def test_product_ensemble_reconstructs_random_separable_states(seed, k):
    rho = _random_separable(np.random.default_rng(seed), k)
    terms = product_ensemble(rho)
    assert 1 <= len(terms) <= 4
    assert sum(p for p, _, _ in terms) == pytest.approx(1.0, abs=1e-10)
    for p, a, b in terms:
        assert p >= 0
        assert np.linalg.norm(a) == pytest.approx(1.0) and np.linalg.norm(b) == pytest.approx(1.0)
    assert trace_distance(_reconstruct(terms), rho) < 1e-9


def test_build_ensemble_limits():
    pure = build_ensemble(ModelParams(math.inf, 0.0), 4)
    assert pure.p_e == 1.0 and pure.product_terms == ()
    assert build_ensemble(ModelParams(0.0, 0.7), 4).p_e == 0.0
    beta = 2 * math.atanh(0.73205 ** 4)
    assert build_ensemble(ModelParams(beta, 0.0), 4).p_e == pytest.approx(0.5, abs=2e-5)


def test_entangled_component():
    assert abs(np.vdot(entangled_component(0.0, 4), C2)) == pytest.approx(1.0)
    psi = entangled_component(0.6, 3)
    assert trace_distance(projector(psi), bond_T0(0.6, 3)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 6.0), st.floats(0.0, 1.2), st.integers(2, 6), st.integers(2, 6))
def test_ensemble_reconstructs_bond(beta, theta, d1, d2):
    params = ModelParams(beta, theta)
    try:
        ens = build_ensemble(params, d1, d2)
    except DecompositionError:
        return  # no separable residue for this fixed entangled state
    bond = bond_general(solve_bond_params(params, d1), solve_bond_params(params, d2))
    assert trace_distance(ens.to_operator(), bond) < 1e-9
    assert ens.weights.sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("theta", [0.0, 0.2, 0.5])
@pytest.mark.parametrize("d", [3, 4, 6])
def test_pe_non_increasing_in_temperature(theta, d):
    betas = np.linspace(0.05, 3.0, 25)[::-1]  # descending beta = rising temperature
    values = [thermal_pe(ModelParams(float(b), theta), d) for b in betas]
    pe = [v.p_e for v in values if not v.infeasible]
    assert len(pe) > 5
    assert all(b <= a + 1e-9 for a, b in zip(pe, pe[1:]))


def test_ensemble_for_pe():
    for p in (0.0, 0.35, 0.8):
        ens = ensemble_for_pe(p)
        assert ens.p_e == pytest.approx(p, abs=1e-12)
        assert trace_distance(ens.to_operator(), bond_zero_field(omega_for_pe(p))) < 1e-9
    assert ensemble_for_pe(1.0).product_terms == ()
