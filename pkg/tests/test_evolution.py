import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PLUS
from sea_dynamics import (
    DensityState,
    GeneratorSet,
    IntegratorConfig,
    LEVELS,
    RhsKind,
    TauPolicy,
    entropy,
    integrate,
    make_state,
    rate_of_mean,
    rhs_diagonal,
    rhs_full,
)
from sea_dynamics.boltzmann import initial_log_state
from sea_dynamics.errors import InvalidPolicy, ZeroEnergySpread
from sea_dynamics.generator import evaluate
from sea_dynamics.operators import KB, projector

E = np.array(LEVELS)
PE = np.array([0.3474, 0.2722, 0.2133, 0.1671])
GENERIC = np.array([0.5, 0.3, 0.1, 0.1])
TAU1 = TauPolicy.constant(1.0)


def pdot_oracle(p, e, tau):
    """Occupation rates from the bracket form, term by term."""
    S = -sum(x * math.log(x) for x in p if x > 0)
    H = sum(x * y for x, y in zip(p, e))
    dh = [y - H for y in e]
    ds = [(-math.log(x) if x > 0 else 0.0) - S for x in p]
    vh = sum(x * a * a for x, a in zip(p, dh))
    inv_theta = sum(x * a * b for x, a, b in zip(p, dh, ds)) / vh
    return np.array(
        [-(x * math.log(x) + x * S + x * a * inv_theta) / tau if x > 0 else 0.0 for x, a in zip(p, dh)]
    )


def test_rhs_full_examples(gens4):
    w = np.exp(-E)
    canon = DensityState.from_probabilities(w / w.sum())
    assert np.allclose(rhs_full(canon, gens4, TAU1), 0.0, atol=1e-14)
    g = GeneratorSet.from_levels([0.0, 1.0])
    d = rhs_full(make_state(PLUS), g, TAU1)
    assert np.allclose(d, d.conj().T)
    assert abs(np.trace(d)) < 1e-14
    assert np.allclose(d, -1j * (g.H @ PLUS - PLUS @ g.H))
    s = DensityState.from_probabilities(GENERIC)
    assert np.allclose(np.diagonal(rhs_full(s, gens4, TAU1)).real, rhs_diagonal(GENERIC, E, TAU1), atol=1e-12)


def test_rhs_diagonal_examples():
    assert np.abs(rhs_diagonal(PE, E, TAU1)).max() < 4e-4
    assert np.abs(rhs_diagonal([0.6, 0.0, 0.0, 0.4], E, TAU1)).max() < 1e-3
    dp = rhs_diagonal(GENERIC, E, TAU1)
    assert np.allclose(dp, pdot_oracle(GENERIC, E, 1.0), atol=1e-14)
    assert abs(dp.sum()) < 1e-12 and abs(dp @ E) < 1e-12
    assert -(dp * (np.log(GENERIC) + 1)).sum() > 0
    with pytest.raises(ZeroEnergySpread):
        rhs_diagonal([1.0, 0, 0, 0], E, TauPolicy.lower_bound_equality())


def test_rhs_diagonal_lower_bound_limit(gens4):
    lbe = TauPolicy.lower_bound_equality()
    s = DensityState.from_probabilities(GENERIC)
    sea = evaluate(s, gens4, lbe)
    assert np.allclose(rhs_diagonal(GENERIC, E, lbe), GENERIC * np.diagonal(sea.D).real, atol=1e-12)
    w = np.exp(-E)
    assert np.all(rhs_diagonal(w / w.sum(), E, lbe) == 0.0)


def test_rate_of_mean_examples(gens4):
    s = DensityState.from_probabilities(GENERIC)
    assert rate_of_mean(s, gens4, TAU1, gens4.H) == pytest.approx(0.0, abs=1e-14)
    assert rate_of_mean(s, gens4, TAU1, np.eye(4)) == pytest.approx(0.0, abs=1e-14)
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    st_ = make_state(rho / np.trace(rho).real)
    F = projector(4, 1) + 0.3 * (np.eye(4, k=1) + np.eye(4, k=-1))
    assert rate_of_mean(st_, gens4, TAU1, F) == pytest.approx(np.trace(F @ rhs_full(st_, gens4, TAU1)).real, abs=1e-9)


def test_rate_of_mean_matches_finite_difference(gens4):
    h = 1e-3
    cfg = IntegratorConfig(t_span=(0.0, 0.4), sample_interval=h, step=h, stop_on_convergence=False)
    rec = integrate(
        RhsKind.DIAGONAL_BOLTZMANN, None, gens4, TAU1, cfg, reports=False, log_initial=initial_log_state()
    )
    P = rec.populations()
    S = rec.entropies()
    for k in (50, 200, 350):
        s = rec.samples[k]
        fd = (P[k + 1, 1] - P[k - 1, 1]) / (2 * h)
        assert rate_of_mean(s.state, gens4, TAU1, projector(4, 1)) == pytest.approx(fd, rel=1e-6)
        fd_s = (S[k + 1] - S[k - 1]) / (2 * h)
        assert s.sea.var_M / (KB * s.sea.tau) == pytest.approx(fd_s, rel=1e-6)


def test_full_and_diagonal_paths_agree(gens4):
    cfg = IntegratorConfig(t_span=(0.0, 10.0), sample_interval=1.0, stop_on_convergence=False)
    diag = integrate(RhsKind.DIAGONAL_BOLTZMANN, np.diag(GENERIC), gens4, TAU1, cfg, reports=False)
    full = integrate(RhsKind.FULL_MATRIX, np.diag(GENERIC), gens4, TAU1, cfg, reports=False)
    assert len(diag) == len(full) == 11
    assert np.abs(diag.populations() - full.populations()).max() < 1e-9


def test_backward_full_matches_diagonal(gens4):
    cfg = IntegratorConfig(t_span=(0.0, -1.0), sample_interval=0.25, stop_on_convergence=False)
    diag = integrate(RhsKind.DIAGONAL_BOLTZMANN, np.diag(GENERIC), gens4, TAU1, cfg, reports=False)
    full = integrate(RhsKind.FULL_MATRIX, np.diag(GENERIC), gens4, TAU1, cfg, reports=False)
    assert np.allclose(diag.times, [0, -0.25, -0.5, -0.75, -1.0])
    assert np.abs(diag.populations() - full.populations()).max() < 1e-9
    assert np.all(np.diff(diag.entropies()) <= 1e-15)


def test_unitary_only_preserves_spectrum():
    g = GeneratorSet.from_levels([0.0, 0.4, 1.0])
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T
    s0 = make_state(rho / np.trace(rho).real)
    cfg = IntegratorConfig(t_span=(0.0, 5.0), sample_interval=0.5, stop_on_convergence=False)
    rec = integrate(RhsKind.UNITARY_ONLY, s0, g, TAU1, cfg, reports=False)
    for s in rec.samples:
        assert np.allclose(s.state.eigenvalues, s0.eigenvalues, atol=1e-10)
    assert np.ptp(rec.entropies()) <= 1e-10


def test_pure_state_precession():
    g = GeneratorSet.from_levels([0.0, 1.0])
    cfg = IntegratorConfig(t_span=(0.0, math.pi), sample_interval=math.pi / 2, stop_on_convergence=False)
    rec = integrate(RhsKind.FULL_MATRIX, PLUS, g, TAU1, cfg, reports=False)
    minus = 0.5 * np.array([[1, -1], [-1, 1]])
    assert np.allclose(rec.samples[-1].state.rho, minus, atol=1e-8)
    for s in rec.samples:
        assert s.state.rank == 1


def test_canonical_fixed_point(gens4):
    w = np.exp(-1.3 * E)
    p = w / w.sum()
    cfg = IntegratorConfig(t_span=(0.0, 5.0), sample_interval=0.5)
    rec = integrate(RhsKind.DIAGONAL_BOLTZMANN, np.diag(p), gens4, TAU1, cfg, reports=False)
    assert rec.status == "converged" and len(rec) == 1
    assert np.abs(rec.populations() - p).max() < 1e-14
    cfg = IntegratorConfig(t_span=(0.0, 5.0), sample_interval=0.5, stop_on_convergence=False)
    rec = integrate(RhsKind.DIAGONAL_BOLTZMANN, np.diag(p), gens4, TAU1, cfg, reports=False)
    assert len(rec) == 11 and np.abs(rec.populations() - p).max() < 1e-14
    full = integrate(RhsKind.FULL_MATRIX, np.diag(p), gens4, TAU1, cfg, reports=False)
    assert np.abs(full.populations() - p).max() < 1e-14


def test_cardinality_preserved(gens4):
    p = np.array([0.5, 0.0, 0.3, 0.2])
    for t1 in (8.0, -2.0):
        cfg = IntegratorConfig(t_span=(0.0, t1), sample_interval=0.5, stop_on_convergence=False)
        rec = integrate(RhsKind.DIAGONAL_BOLTZMANN, np.diag(p), gens4, TAU1, cfg, reports=False)
        P = rec.populations()
        assert np.all(P[:, 1] == 0.0)
        assert np.all(P[:, [0, 2, 3]] > 0)
        assert all(s.state.rank == 3 for s in rec.samples)


def test_rk4_matches_rk45(gens4):
    kw = dict(t_span=(0.0, 3.0), sample_interval=0.5, stop_on_convergence=False)
    a = integrate(RhsKind.DIAGONAL_BOLTZMANN, np.diag(GENERIC), gens4, TAU1, IntegratorConfig(**kw), reports=False)
    b = integrate(
        RhsKind.DIAGONAL_BOLTZMANN, np.diag(GENERIC), gens4, TAU1,
        IntegratorConfig(method="rk4", step=0.005, **kw), reports=False,
    )
    assert np.abs(a.populations() - b.populations()).max() < 1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(step=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=-1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]))
def test_full_matrix_conservation(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T + 0.05 * np.eye(n)
    g = GeneratorSet.from_levels(np.sort(rng.uniform(0, 1, n)) + np.arange(n) * 0.1)
    cfg = IntegratorConfig(t_span=(0.0, 1.0), sample_interval=0.25, stop_on_convergence=False)
    rec = integrate(RhsKind.FULL_MATRIX, rho / np.trace(rho).real, g, TAU1, cfg, reports=False)
    for c in rec.conservation_log:
        assert abs(c["trace"]) <= 1e-9 and abs(c["energy"]) <= 1e-9
    S = rec.entropies()
    assert np.all(np.diff(S) >= -1e-12)


def test_full_matrix_cardinality_non_commuting():
    g = GeneratorSet.from_levels([0.0, 0.5, 1.0])
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    rho = a @ a.conj().T
    for t1 in (4.0, -1.0):
        cfg = IntegratorConfig(t_span=(0.0, t1), sample_interval=0.5, stop_on_convergence=False)
        rec = integrate(RhsKind.FULL_MATRIX, rho / np.trace(rho).real, g, TAU1, cfg, reports=False)
        assert all(s.state.rank == 2 for s in rec.samples)
        S = rec.entropies()
        assert np.all(np.sign(t1) * np.diff(S) >= -1e-12)
