"""Kossakowski-Lindblad and Pauli master equations, for contrast with SEA.

Rate convention: ``w[r, s]`` is the transition rate from level ``s`` into
level ``r``, so the gain term of the Pauli equation is ``sum_r w[n, r] p_r``.
The diagonal of ``w`` is ignored.

The Lindblad dissipator is written in the trace-preserving form
``sum_j (V_j rho V_j^dagger - {V_j^dagger V_j, rho}/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .boltzmann import LEVELS
from .errors import DimensionMismatch
from .evolution import IntegratorConfig, RhsKind, integrate
from .generator import GeneratorSet, TauPolicy
from .operators import HBAR, KB, _square, anticommutator, as_state, commutator, hermitian


@dataclass(frozen=True)
class LindbladModel:
    H: np.ndarray
    V: tuple = ()

    def __post_init__(self):
        H = hermitian(self.H, "H")
        V = tuple(_square(v, f"V[{j}]") for j, v in enumerate(self.V))
        for j, v in enumerate(V):
            if v.shape != H.shape:
                raise DimensionMismatch(f"V[{j}] has shape {v.shape}, H has {H.shape}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "V", V)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @classmethod
    def from_pauli(cls, w, H=None) -> "LindbladModel":
        """One jump operator ``sqrt(w[r, s]) |r><s|`` per nonzero off-diagonal rate."""
        w = np.asarray(w, dtype=float)
        n = w.shape[0]
        V = []
        for r in range(n):
            for s in range(n):
                if r != s and w[r, s] > 0:
                    op = np.zeros((n, n), dtype=complex)
                    op[r, s] = math.sqrt(w[r, s])
                    V.append(op)
        return cls(np.zeros((n, n)) if H is None else H, tuple(V))


@dataclass(frozen=True)
class PauliModel:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch(f"rate matrix must be square, got {w.shape}")
        if np.any(w < 0):
            raise ValueError("transition rates must be nonnegative")
        np.fill_diagonal(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def generator(self) -> np.ndarray:
        """Matrix ``A`` with ``dp/dt = A p``."""
        return self.w - np.diag(self.w.sum(axis=0))

    def propagate(self, p0, t: float) -> np.ndarray:
        """Exact solution ``expm(A t) p0``; negative ``t`` runs backward."""
        return expm(self.generator * t) @ np.asarray(p0, dtype=float)


def lindblad_rhs(state, model: LindbladModel) -> np.ndarray:
    state = as_state(state)
    rho = state.rho
    if rho.shape != model.H.shape:
        raise DimensionMismatch(f"state dim {rho.shape[0]} != model dim {model.dim}")
    out = -1j / HBAR * commutator(model.H, rho)
    for V in model.V:
        Vd = V.conj().T
        out = out + V @ rho @ Vd - 0.5 * anticommutator(Vd @ V, rho)
    return out


def pauli_rhs(p, model: PauliModel) -> np.ndarray:
    """``dp_n/dt = sum_r w[n, r] p_r - p_n sum_r w[r, n]``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (model.w.shape[0],):
        raise DimensionMismatch(f"p has shape {p.shape}, rates are {model.w.shape}")
    return model.generator @ p


def entropy_rate_lindblad(state, model: LindbladModel) -> float:
    """``d<S>/dt`` under the Lindblad equation, ``+inf`` when it diverges.

    In the eigenbasis of rho, with ``|V_nr|^2`` the jump matrix elements,
    ``d<S>/dt = KB sum_{j,n,r} |V_nr|^2 rho_r (ln rho_r - ln rho_n)``. A
    populated level feeding an empty one makes the rate infinite.
    """
    state = as_state(state)
    lam = state.eigenvalues
    U = state.eigenvectors
    pos = lam > 0
    ln = np.where(pos, np.log(np.where(pos, lam, 1.0)), -np.inf)
    total = 0.0
    for V in model.V:
        W = np.abs(U.conj().T @ V @ U) ** 2
        for n in range(lam.size):
            for r in range(lam.size):
                if W[n, r] == 0.0 or lam[r] == 0.0:
                    continue
                if lam[n] == 0.0:
                    return math.inf
                total += W[n, r] * lam[r] * (ln[r] - ln[n])
    return KB * total


@dataclass
class CardinalityReport:
    """Side-by-side evidence that Pauli dynamics breaks cardinality and SEA keeps it."""

    t: np.ndarray
    pauli_forward: np.ndarray
    pauli_analytic_p2: np.ndarray
    pauli_max_error: float
    pauli_first_order_p2: float
    pauli_backward_min: float
    pauli_backward_crossing: float
    sea_forward: np.ndarray
    sea_backward: np.ndarray
    sea_max_zero_component: float
    sea_near_pure_backward_min: float
    notes: dict = field(default_factory=dict)


def compare_cardinality(levels=LEVELS, horizon: float = 20.0, tau0: float = 1.0, n_points: int = 201) -> CardinalityReport:
    """Pauli versus SEA on zero occupations, forward and backward in time.

    Pauli: a two-level decay ``w[1, 0] = 1/tau0`` from ``p = (1, 0)``, compared
    with ``1 - exp(-t/tau0)``, and the same model run backward from
    ``(1 - 1/e, 1/e)`` until a component turns negative. SEA: the two-level
    primordial state ``(0.6, 0, 0, 0.4)`` integrated both ways over the full
    horizon, and a near-pure state ``(1 - 3d/2, d, d/2, 0, ...)`` integrated
    backward, with constant tau.
    """
    e = np.asarray(levels, dtype=float)
    pauli = PauliModel(np.array([[0.0, 0.0], [1.0 / tau0, 0.0]]))
    t = np.linspace(0.0, horizon * tau0, n_points)
    fwd = np.array([pauli.propagate([1.0, 0.0], ti) for ti in t])
    analytic = -np.expm1(-t / tau0)
    err = float(np.abs(fwd[:, 1] - analytic).max())
    eps = 1e-6 * tau0
    first = float(pauli.propagate([1.0, 0.0], eps)[1])
    p_b = np.array([-math.expm1(-1.0), math.exp(-1.0)])
    back = np.array([pauli.propagate(p_b, -ti) for ti in t])
    crossing = tau0 * math.log(1.0 / (1.0 - math.exp(-1.0)))

    gens = GeneratorSet.from_levels(e)
    policy = TauPolicy.constant(tau0)
    p_nd = np.zeros(e.size)
    p_nd[0], p_nd[-1] = 0.6, 0.4
    sea_runs = []
    for sign in (1, -1):
        cfg = IntegratorConfig(method="rk4", step=0.01 * tau0, t_span=(0.0, sign * horizon * tau0),
                               sample_interval=horizon * tau0 / (n_points - 1), stop_on_convergence=False)
        sea_runs.append(integrate(RhsKind.DIAGONAL_BOLTZMANN, p_nd, gens, policy, cfg, reports=False))
    sea_f = sea_runs[0].populations()
    sea_b = sea_runs[1].populations()
    zero_max = float(max(np.abs(sea_f[:, 1:-1]).max(), np.abs(sea_b[:, 1:-1]).max()))

    d = 1e-3
    p_np = np.zeros(e.size)
    p_np[:3] = 1 - 1.5 * d, d, 0.5 * d
    cfg = IntegratorConfig(method="rk4", step=0.01 * tau0, t_span=(0.0, -horizon * tau0), sample_interval=0.1 * tau0)
    near = integrate(RhsKind.DIAGONAL_BOLTZMANN, p_np, gens, policy, cfg, reports=False)
    return CardinalityReport(
        t=t,
        pauli_forward=fwd,
        pauli_analytic_p2=analytic,
        pauli_max_error=err,
        pauli_first_order_p2=first,
        pauli_backward_min=float(back.min()),
        pauli_backward_crossing=crossing,
        sea_forward=sea_f,
        sea_backward=sea_b,
        sea_max_zero_component=zero_max,
        sea_near_pure_backward_min=float(near.populations().min()),
        notes={"sea_forward_status": sea_runs[0].status, "sea_backward_status": sea_runs[1].status},
    )
