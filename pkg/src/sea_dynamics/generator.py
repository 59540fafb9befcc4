"""Steepest-entropy-ascent dissipative generator.

The multipliers are solved in the inverse-temperature variables
``lambda0 = 1/theta`` and ``nu = mu/theta`` so that

    dM = dS - lambda0 * dH + sum_i nu_i * dN_i

with ``cov(H, M) = cov(N_j, M) = 0``. In these variables the linear system is
the Gram matrix of the vectors ``sqrt(rho) dH, sqrt(rho) dN_i``, which stays
positive definite at equilibrium where the (theta, mu) form degenerates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateState, InfiniteTheta, InvalidPolicy, SingularGram, ZeroEnergySpread
from .operators import (
    EIG_TOL,
    HBAR,
    KB,
    DensityState,
    anticommutator,
    commutator,
    deviation_vector,
    entropy,
    entropy_operator,
    hermitian,
    mean_value,
)

NONDISS_TOL = 1e-10
GRAM_COND_MAX = 1e12
COMMUTE_TOL = 1e-10


@dataclass(frozen=True)
class GeneratorSet:
    """Hamiltonian plus non-Hamiltonian generators that commute with it."""

    H: np.ndarray
    N: tuple = ()

    def __post_init__(self):
        H = hermitian(self.H, "H")
        N = tuple(hermitian(n, f"N[{i}]") for i, n in enumerate(self.N))
        for i, n in enumerate(N):
            if n.shape != H.shape:
                raise ValueError(f"N[{i}] has shape {n.shape}, H has {H.shape}")
            scale = max(1.0, np.abs(H).max() * np.abs(n).max())
            if np.abs(commutator(n, H)).max() > COMMUTE_TOL * scale:
                raise ValueError(f"N[{i}] does not commute with H")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "N", N)

    @classmethod
    def from_levels(cls, levels) -> "GeneratorSet":
        return cls(np.diag(np.asarray(levels, dtype=float)).astype(complex))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def operators(self) -> tuple:
        return (self.H,) + self.N


class TauKind(Enum):
    CONSTANT = "constant"
    LOWER_BOUND_EQUALITY = "lower_bound_equality"


@dataclass(frozen=True)
class TauPolicy:
    """How the dissipation time tau(rho) is chosen.

    ``constant(value)`` fixes tau; ``lower_bound_equality()`` pins tau to
    ``(HBAR/2KB) * spread_M / spread_H`` so that a_tau = 1.
    """

    kind: TauKind = TauKind.CONSTANT
    value: float = 1.0

    def __post_init__(self):
        if self.kind is TauKind.CONSTANT and not (self.value > 0 and math.isfinite(self.value)):
            raise InvalidPolicy(f"constant tau must be positive and finite, got {self.value}")

    @classmethod
    def constant(cls, value: float = 1.0) -> "TauPolicy":
        return cls(TauKind.CONSTANT, float(value))

    @classmethod
    def lower_bound_equality(cls) -> "TauPolicy":
        return cls(TauKind.LOWER_BOUND_EQUALITY, 0.0)

    @property
    def is_constant(self) -> bool:
        return self.kind is TauKind.CONSTANT


ROUNDOFF_FLOOR = 64 * np.finfo(float).eps


def _deviation(state, op):
    return op - mean_value(state, op) * np.eye(state.dim)


def _massieu(state, gens, multipliers=None):
    """Multipliers and dM, with one re-orthogonalization step applied to dM.

    Forming ``dS - lambda0 dH`` loses absolute precision near equilibrium where
    dM is small; correcting dM by its residual projection on the generator
    directions keeps ``cov(H, M)`` at round-off relative to the spread of M.
    """
    dS = _deviation(state, entropy_operator(state))
    dG = [_deviation(state, g) for g in gens.operators]
    Xg = [deviation_vector(state, g) for g in gens.operators]
    G = np.array([[np.vdot(a, b).real for b in Xg] for a in Xg])
    r = len(gens.N)
    if multipliers is None:
        XS = deviation_vector(state, dS)
        b = np.array([np.vdot(a, XS).real for a in Xg])
        if r == 0:
            if G[0, 0] < EIG_TOL:
                if abs(b[0]) < EIG_TOL:
                    return 0.0, np.zeros(0), dS
                raise DegenerateState(f"cov(H,H) = {G[0, 0]:.3e} with cov(S,H) = {b[0]:.3e}")
            x = np.array([b[0] / G[0, 0]])
        else:
            if np.linalg.cond(G) > GRAM_COND_MAX:
                raise SingularGram(f"Gram condition number {np.linalg.cond(G):.3e}")
            x = np.linalg.solve(G, b)
    else:
        lambda0, nu = multipliers
        x = np.concatenate([[lambda0], -np.asarray(nu, dtype=float)])
    dM = dS - sum(xi * dGi for xi, dGi in zip(x, dG))
    if G[0, 0] >= EIG_TOL or r > 0:
        XM = deviation_vector(state, dM)
        resid = np.array([np.vdot(Xi, XM).real for Xi in Xg])
        dx = np.linalg.solve(G, resid)
        dM = dM - sum(c * dGi for c, dGi in zip(dx, dG))
        x = x + dx
    dM = (dM + dM.conj().T) / 2
    # dM at round-off level relative to dS is exactly zero (canonical states)
    XM, XS = deviation_vector(state, dM), deviation_vector(state, dS)
    if np.vdot(XM, XM).real <= ROUNDOFF_FLOOR**2 * np.vdot(XS, XS).real:
        dM = np.zeros_like(dM)
    return float(x[0]), -x[1:], dM


def solve_multipliers(state: DensityState, gens: GeneratorSet) -> tuple[float, np.ndarray]:
    """Return ``(lambda0, nu)`` with ``lambda0 = 1/theta`` and ``nu = mu/theta``."""
    lambda0, nu, _ = _massieu(state, gens)
    return lambda0, nu


def theta_mu(lambda0: float, nu) -> tuple[float, np.ndarray]:
    """Convert ``(lambda0, nu)`` to ``(theta, mu)``; theta is +-inf at lambda0 = 0."""
    nu = np.asarray(nu, dtype=float)
    if lambda0 == 0.0:
        return math.inf, np.full(nu.shape, math.nan)
    return 1.0 / lambda0, nu / lambda0


def massieu_deviation(state: DensityState, gens: GeneratorSet, multipliers=None) -> np.ndarray:
    """``dM = dS - lambda0 dH + nu . dN`` as a Hermitian matrix."""
    return _massieu(state, gens, multipliers)[2]


def massieu_variance(state: DensityState, gens: GeneratorSet, multipliers=None) -> float:
    X = deviation_vector(state, massieu_deviation(state, gens, multipliers))
    return float(np.vdot(X, X).real)


def is_nondissipative(state: DensityState, gens: GeneratorSet) -> bool:
    """True iff ``cov(M, M) < NONDISS_TOL``."""
    return massieu_variance(state, gens) < NONDISS_TOL


def dissipation_time(state: DensityState, gens: GeneratorSet, policy: TauPolicy, multipliers=None) -> float:
    if policy.is_constant:
        return policy.value
    chh = deviation_vector(state, gens.H)
    spread_h = float(np.sqrt(np.vdot(chh, chh).real))
    if spread_h < EIG_TOL:
        raise ZeroEnergySpread(f"spread of H is {spread_h:.3e}")
    spread_m = math.sqrt(max(massieu_variance(state, gens, multipliers), 0.0))
    return HBAR / (2 * KB) * spread_m / spread_h


@dataclass(frozen=True)
class SeaEvaluation:
    """Dissipative data at one state.

    ``D`` is the operator ``dM / (KB tau)`` that multiplies the anticommutator
    in the equation of motion. Under the lower-bound policy it is evaluated as
    its limit ``(2 spread_H / HBAR) dM / spread_M`` and set to zero when
    ``cov(M, M) < NONDISS_TOL``.
    """

    lambda0: float
    nu: np.ndarray
    theta: float
    mu: np.ndarray
    delta_M: np.ndarray
    D: np.ndarray
    tau: float
    C: np.ndarray
    a_tau: float
    var_M: float
    spread_H: float

    @property
    def spread_M(self) -> float:
        return math.sqrt(max(self.var_M, 0.0))

    @property
    def nondissipative(self) -> bool:
        return self.var_M < NONDISS_TOL


def evaluate(state: DensityState, gens: GeneratorSet, policy: TauPolicy) -> SeaEvaluation:
    lambda0, nu, dM = _massieu(state, gens)
    theta, mu = theta_mu(lambda0, nu)
    XM = deviation_vector(state, dM)
    XH = deviation_vector(state, gens.H)
    var_m = float(np.vdot(XM, XM).real)
    spread_h = float(np.sqrt(np.vdot(XH, XH).real))
    spread_m = math.sqrt(max(var_m, 0.0))
    if policy.is_constant:
        tau = policy.value
        D = dM / (KB * tau)
        if spread_m == 0.0:
            a_tau = 0.0
        elif spread_h == 0.0:
            a_tau = math.inf
        else:
            a_tau = HBAR * spread_m / (2 * KB * tau * spread_h)
    else:
        if spread_h < EIG_TOL:
            raise ZeroEnergySpread(f"spread of H is {spread_h:.3e}")
        tau = HBAR / (2 * KB) * spread_m / spread_h
        if var_m < NONDISS_TOL:
            D = np.zeros_like(dM)
        else:
            D = (2 * spread_h / HBAR) * dM / spread_m
        a_tau = 1.0
    C = 2j * XH / HBAR + deviation_vector(state, D)
    return SeaEvaluation(lambda0, nu, theta, mu, dM, D, tau, C, a_tau, var_m, spread_h)


def evolution_operator_C(
    state: DensityState, gens: GeneratorSet, policy: TauPolicy, unitary: bool = True, dissipative: bool = True
) -> np.ndarray:
    """``C = 2i sqrt(rho) dH / HBAR + sqrt(rho) dM / (KB tau) = 2 sqrt(rho) E(rho)``.

    ``unitary`` and ``dissipative`` select the two branches.
    """
    sea = evaluate(state, gens, policy)
    if unitary and dissipative:
        return sea.C
    C = np.zeros_like(sea.C)
    if unitary:
        C = C + 2j * deviation_vector(state, gens.H) / HBAR
    if dissipative:
        C = C + deviation_vector(state, sea.D)
    return C


def mean_massieu(state: DensityState, gens: GeneratorSet, multipliers=None) -> float:
    """``<M> = <S> - <H>/theta + mu.<N>/theta`` in units of KB."""
    lambda0, nu = multipliers if multipliers is not None else solve_multipliers(state, gens)
    if lambda0 == 0.0:
        raise InfiniteTheta("theta is infinite (lambda0 = 0)")
    val = entropy(state) - lambda0 * mean_value(state, gens.H)
    for nui, Ni in zip(nu, gens.N):
        val += nui * mean_value(state, Ni)
    return float(val)


def sea_rhs(state: DensityState, gens: GeneratorSet, sea: SeaEvaluation, unitary=True, dissipative=True):
    """``-(i/HBAR)[H, rho] + {D, rho}/2`` with either term switchable."""
    out = np.zeros_like(state.rho)
    if unitary:
        out = out - 1j / HBAR * commutator(gens.H, state.rho)
    if dissipative:
        out = out + 0.5 * anticommutator(sea.D, state.rho)
    return out
