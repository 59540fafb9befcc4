import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PLUS, SX, SY, SZ
from sea_dynamics import (
    DensityState,
    bilinear_form,
    commutator_form,
    correlation_coefficients,
    covariance,
    entropy,
    entropy_operator,
    inner_product,
    make_state,
    mean_value,
)
from sea_dynamics.errors import DimensionMismatch, NegativeEigenvalue, NotHermitian, NotUnitTrace, ZeroSpread
from sea_dynamics.operators import KB, spread

E01 = np.array([[0, 1], [0, 0]], dtype=complex)


def random_state(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = a @ a.conj().T
    return make_state(rho / np.trace(rho).real)


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


seeds = st.integers(0, 2**32 - 1)
dims = st.sampled_from([2, 3, 4, 6])


def test_inner_product_examples():
    assert inner_product(SX, SX) == pytest.approx(2.0)
    assert inner_product(SX, SY) == pytest.approx(0.0, abs=1e-15)
    assert inner_product(np.diag([1, 2]), np.diag([3, 4])) == pytest.approx(11.0)


def test_bilinear_form_examples():
    assert bilinear_form(SX, SX) == pytest.approx(0.0, abs=1e-15)
    assert bilinear_form(E01, 1j * E01) == pytest.approx(-1.0)
    assert bilinear_form(SX, SY) == pytest.approx(0.0, abs=1e-15)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        inner_product(SX, np.eye(3))
    with pytest.raises(DimensionMismatch):
        mean_value(make_state(np.eye(2) / 2), np.eye(3))


def test_make_state_examples():
    s = make_state(np.diag([0.25, 0.75]))
    assert np.allclose(s.sqrt_rho, np.diag([0.5, math.sqrt(0.75)]), atol=1e-12)
    pure = make_state(np.diag([1.0, 0.0]))
    assert np.allclose(pure.range_projector, np.diag([1.0, 0.0]))
    with pytest.raises(NotUnitTrace):
        make_state(np.diag([0.6, 0.5]))
    with pytest.raises(NotHermitian):
        make_state(np.array([[0.5, 0.1], [0.3, 0.5]]))
    with pytest.raises(NegativeEigenvalue):
        make_state(np.diag([1.1, -0.1]))


def test_make_state_invariants():
    s = random_state(np.random.default_rng(1), 5, rank=3)
    assert s.rank == 3
    assert np.allclose(s.sqrt_rho @ s.sqrt_rho, s.rho, atol=1e-9)
    P = s.range_projector
    assert np.allclose(P @ P, P, atol=1e-9)
    assert np.allclose(P @ s.rho, s.rho, atol=1e-9)


def test_mean_value_examples():
    rho = make_state(np.diag([0.6, 0.4]))
    assert mean_value(rho, np.diag([0.0, 1.0])) == pytest.approx(0.4)
    assert mean_value(random_state(np.random.default_rng(2), 3), np.eye(3)) == pytest.approx(1.0)
    assert mean_value(make_state(np.diag([1.0, 0.0])), SZ) == pytest.approx(1.0)


def test_covariance_examples():
    P = np.diag([0.0, 1.0])
    assert covariance(make_state(np.diag([0.6, 0.4])), P, P) == pytest.approx(0.24)
    assert covariance(make_state(np.eye(2) / 2), SZ, SZ) == pytest.approx(1.0)
    assert covariance(make_state(np.diag([1.0, 0.0])), SZ, SZ) == pytest.approx(0.0, abs=1e-15)


def test_commutator_form_examples():
    ground = make_state(np.diag([1.0, 0.0]))
    assert commutator_form(ground, SX, SY) == pytest.approx(1.0)
    s = random_state(np.random.default_rng(3), 3)
    F = random_hermitian(np.random.default_rng(4), 3)
    assert commutator_form(s, F, F) == pytest.approx(0.0, abs=1e-14)
    d = make_state(np.diag([0.2, 0.3, 0.5]))
    assert commutator_form(d, np.diag([1, 2, 3]), np.diag([0, 5, 1])) == 0.0


def test_correlation_examples():
    s = random_state(np.random.default_rng(5), 3)
    F = random_hermitian(np.random.default_rng(6), 3)
    r, c = correlation_coefficients(s, F, F)
    assert r == pytest.approx(1.0) and c == pytest.approx(0.0, abs=1e-14)
    r, c = correlation_coefficients(make_state(PLUS), SZ, SY)
    assert abs(c) == pytest.approx(1.0) and r == pytest.approx(0.0, abs=1e-14)
    r, c = correlation_coefficients(make_state(np.eye(2) / 2), SZ, SZ + SX)
    assert r * r + c * c <= 1 + 1e-9
    with pytest.raises(ZeroSpread):
        correlation_coefficients(make_state(np.diag([1.0, 0.0])), SZ, SX)


def test_entropy_operator_examples():
    S = entropy_operator(make_state(np.eye(2) / 2))
    assert np.allclose(S, KB * math.log(2) * np.eye(2))
    assert np.allclose(entropy_operator(make_state(PLUS)), 0.0)
    assert entropy(make_state(np.diag([0.6, 0.4, 0.0, 0.0]))) == pytest.approx(0.67301, abs=1e-5)


def test_diagonal_fast_path_matches_general():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    fast = DensityState.from_probabilities(p)
    slow = make_state(np.diag(p) + 0j * np.ones((4, 4)))
    F = np.diag([1.0, -2.0, 0.5, 3.0])
    G = np.diag([0.0, 1.0, 1.0, 2.0])
    assert covariance(fast, F, G) == pytest.approx(covariance(slow, F, G), rel=1e-12)
    assert entropy(fast) == pytest.approx(entropy(slow), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, dims)
def test_forms_properties(seed, n):
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    assert inner_product(F, G) == pytest.approx(inner_product(G, F), abs=1e-9)
    assert bilinear_form(F, G) == pytest.approx(-bilinear_form(G, F), abs=1e-9)
    assert bilinear_form(F, G) == pytest.approx(inner_product(F, 1j * G), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seeds, dims, st.integers(1, 6))
def test_state_functional_properties(seed, n, rank):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n, min(rank, n))
    F, G = random_hermitian(rng, n), random_hermitian(rng, n)
    vf, vg = covariance(s, F, F), covariance(s, G, G)
    cfg, kfg = covariance(s, F, G), commutator_form(s, F, G)
    scale = max(vf * vg, 1e-300)
    assert (vf * vg - cfg**2 - kfg**2) / scale >= -1e-9
    assert spread(s, F) * spread(s, G) >= abs(kfg) * (1 - 1e-9)
    assert cfg == pytest.approx(covariance(s, G, F), abs=1e-12)
    assert covariance(s, np.eye(n), G) == pytest.approx(0.0, abs=1e-12)
    assert mean_value(s, F) == pytest.approx(inner_product(s.sqrt_rho, s.sqrt_rho @ F), abs=1e-10)
    S = entropy(s)
    assert S >= -1e-12
    assert (abs(S) < 1e-9) == (s.rank == 1)
