import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermocluster.linalg import (basis_bits, bits_to_index, bloch_ket, bloch_projector, embed, is_ppt, is_psd,
                                  min_eigenvalue, partial_trace, partial_transpose, pauli, projector, tensor,
                                  trace_distance, two_qubit_cluster)

from conftest import random_density

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)


def test_pauli_examples():
    assert np.allclose(pauli("X") @ KET0, KET1)
    assert np.allclose(pauli("Z") @ PLUS, MINUS)
    assert np.allclose(pauli("X") @ pauli("Y"), 1j * pauli("Z"))


def test_cluster_state():
    c2 = two_qubit_cluster()
    expanded = np.array([1, 1, 1, -1]) / 2
    assert abs(np.vdot(expanded, c2)) == pytest.approx(1.0)
    rho = projector(c2)
    for keep in ([0], [1]):
        assert np.allclose(partial_trace(rho, keep), np.eye(2) / 2)


def test_partial_trace_of_product():
    a, b = np.diag([0.3, 0.7]), projector(PLUS)
    assert np.allclose(partial_trace(tensor(a, b), [0]), a)
    assert np.allclose(partial_trace(tensor(a, b), [1]), b)


def test_partial_trace_three_qubits_ordering(rng):
    a, b, c = (random_density(rng) for _ in range(3))
    abc = tensor(a, b, c)
    assert np.allclose(partial_trace(abc, [0, 2]), tensor(a, c))
    assert np.allclose(partial_trace(abc, [1]), b)


def test_embed_places_site_zero_first():
    z0 = embed(pauli("Z"), 0, 2)
    assert np.allclose(np.diag(z0), [1, 1, -1, -1])
    assert basis_bits(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert bits_to_index([1, 0, 1]) == 5


def test_spectral_examples():
    assert is_psd(np.eye(2) / 2, 1e-10)
    assert trace_distance(projector(KET0), projector(KET1)) == pytest.approx(1.0)
    assert min_eigenvalue(pauli("Z")) == pytest.approx(-1.0)
    assert not is_ppt(projector(two_qubit_cluster()))
    assert is_ppt(np.eye(4) / 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_partial_transpose_is_involution_and_ppt_for_products(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 2)
    assert np.allclose(partial_transpose(partial_transpose(rho, 0), 0), rho)
    assert np.allclose(partial_transpose(rho, 0), partial_transpose(rho, 1).T)
    prod = tensor(random_density(rng), random_density(rng))
    assert is_ppt(prod)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_bloch_basis_is_orthonormal(polar, azimuth):
    k0, k1 = bloch_ket(polar, azimuth, 0), bloch_ket(polar, azimuth, 1)
    assert abs(np.vdot(k0, k1)) < 1e-12
    total = bloch_projector(polar, azimuth, 0) + bloch_projector(polar, azimuth, 1)
    assert np.allclose(total, np.eye(2))
    n = np.array([math.sin(polar) * math.cos(azimuth), math.sin(polar) * math.sin(azimuth), math.cos(polar)])
    obs = n[0] * pauli("X") + n[1] * pauli("Y") + n[2] * pauli("Z")
    assert np.vdot(k0, obs @ k0).real == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_trace_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(rng, 2) for _ in range(3))
    assert trace_distance(a, a) < 1e-12
    assert trace_distance(a, b) == pytest.approx(trace_distance(b, a))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12
    assert 0 <= trace_distance(a, b) <= 1 + 1e-12
