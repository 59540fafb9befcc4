import math

import numpy as np
import pytest

from sea_dynamics import (
    LindbladModel,
    PauliModel,
    compare_cardinality,
    entropy,
    entropy_rate_lindblad,
    lindblad_rhs,
    make_state,
    pauli_rhs,
)
from sea_dynamics.errors import DimensionMismatch


def ket_bra(n, r, s):
    m = np.zeros((n, n), dtype=complex)
    m[r, s] = 1.0
    return m


def test_lindblad_no_jumps_is_von_neumann():
    H = np.array([[0.0, 0.3], [0.3, 1.0]])
    rho = make_state(np.diag([0.7, 0.3]))
    expected = -1j * (H @ rho.rho - rho.rho @ H)
    assert np.allclose(lindblad_rhs(rho, LindbladModel(H)), expected)


def test_lindblad_single_jump_example():
    w = 0.7
    model = LindbladModel(np.zeros((2, 2)), (math.sqrt(w) * ket_bra(2, 1, 0),))
    d = lindblad_rhs(make_state(np.diag([1.0, 0.0])), model)
    assert np.allclose(d, w * (ket_bra(2, 1, 1) - ket_bra(2, 0, 0)))


def test_lindblad_matches_pauli_on_diagonal():
    rng = np.random.default_rng(1)
    w = rng.uniform(0, 1, (3, 3))
    np.fill_diagonal(w, 0)
    p = np.array([0.2, 0.5, 0.3])
    d = lindblad_rhs(make_state(np.diag(p)), LindbladModel.from_pauli(w))
    assert np.allclose(np.diagonal(d).real, pauli_rhs(p, PauliModel(w)), atol=1e-14)
    assert np.allclose(d, d.conj().T) and abs(np.trace(d)) < 1e-14


def test_pauli_examples():
    w = 0.4
    m = PauliModel(np.array([[0.0, 0.0], [w, 0.0]]))
    assert np.allclose(pauli_rhs([1.0, 0.0], m), [-w, w])
    sym = PauliModel(np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]], dtype=float))
    assert np.allclose(pauli_rhs(np.ones(3) / 3, sym), 0.0, atol=1e-15)
    rng = np.random.default_rng(2)
    wr = rng.uniform(0, 1, (3, 3))
    p = np.array([0.1, 0.6, 0.3])
    oracle = [sum(wr[n, r] * p[r] - wr[r, n] * p[n] for r in range(3) if r != n) for n in range(3)]
    dp = pauli_rhs(p, PauliModel(wr))
    assert np.allclose(dp, oracle, atol=1e-15)
    assert abs(dp.sum()) < 1e-15
    with pytest.raises(DimensionMismatch):
        pauli_rhs([0.5, 0.5], PauliModel(wr))
    with pytest.raises(ValueError):
        PauliModel(-wr)


def test_entropy_rate_examples():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    H = np.diag([0.0, 0.5, 1.2])
    V = (0.6 * ket_bra(3, 1, 0), 0.4 * ket_bra(3, 2, 1) + 0.2j * ket_bra(3, 0, 2))
    model = LindbladModel(H, V)
    h = 1e-5

    def S_at(dt):
        r = rho.copy()
        d = lindblad_rhs(make_state(r), model)
        r2 = r + dt * d
        d2 = lindblad_rhs(make_state((r2 + r2.conj().T) / 2), model)
        return entropy(make_state(r + 0.5 * dt * (d + d2)))

    fd = (S_at(h) - S_at(-h)) / (2 * h)
    assert entropy_rate_lindblad(make_state(rho), model) == pytest.approx(fd, rel=1e-6)
    div = LindbladModel(np.zeros((2, 2)), (math.sqrt(0.5) * ket_bra(2, 1, 0),))
    assert entropy_rate_lindblad(make_state(np.diag([1.0, 0.0])), div) == math.inf
    assert entropy_rate_lindblad(make_state(rho), LindbladModel(H)) == 0.0


def test_compare_cardinality():
    rep = compare_cardinality(horizon=20.0)
    assert rep.pauli_max_error <= 1e-9
    assert 0 < rep.pauli_first_order_p2 == pytest.approx(1e-6, rel=1e-5)
    assert np.all(rep.pauli_forward[1:, 1] > 0)
    assert rep.pauli_backward_min < 0
    assert rep.pauli_backward_crossing == pytest.approx(math.log(1 / (1 - math.exp(-1))))
    assert rep.sea_max_zero_component == 0.0
    assert rep.sea_backward.min() >= 0 and rep.sea_near_pure_backward_min >= 0
