"""Time integration of the SEA equation of motion.

Two code paths share one :func:`integrate` entry point:

* ``FULL_MATRIX`` (and the ``UNITARY_ONLY`` / ``DISSIPATIVE_ONLY`` splits)
  integrates the density matrix itself with RK4 or Dormand-Prince 5(4),
  re-hermitizing, renormalizing the trace and clipping eigenvalue dust after
  every accepted step.
* ``DIAGONAL_BOLTZMANN`` integrates occupation probabilities of an
  H-diagonal state through the compiled kernels in :mod:`._kernels`, using
  log-probabilities and the dissipative clock ``s`` (``ds = dt / tau``).
  Under the lower-bound tau policy ``step`` and ``sample_interval`` are
  measured on that clock; physical time is carried along as an extra state
  variable and reported in every sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, InvariantBreach, StepFailure, ZeroEnergySpread
from .generator import GeneratorSet, SeaEvaluation, TauPolicy, evaluate, sea_rhs
from .operators import (
    EIG_TOL,
    HBAR,
    KB,
    DensityState,
    as_state,
    commutator_form,
    covariance,
    entropy,
    make_state,
    mean_value,
)

CONV_TOL = 1e-12
CONV_COUNT = 3
ENTROPY_SLACK = 1e-12


class RhsKind(Enum):
    FULL_MATRIX = "full"
    DIAGONAL_BOLTZMANN = "diagonal"
    UNITARY_ONLY = "unitary"
    DISSIPATIVE_ONLY = "dissipative"


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings.

    ``t_span = (t0, t1)`` with ``t1 < t0`` integrates backward in time.
    ``method`` is ``"rk45"`` (adaptive Dormand-Prince) or ``"rk4"``.
    """

    method: str = "rk45"
    step: float = 0.01
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    t_span: tuple = (0.0, 50.0)
    sample_interval: float = 0.1
    max_steps: int = 10_000_000
    max_samples: int = 100_000
    stop_on_convergence: bool = True

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.step > 0 and self.rel_tol > 0 and self.abs_tol > 0 and self.sample_interval > 0):
            raise ValueError("step, tolerances and sample_interval must be positive")
        if self.t_span[1] == self.t_span[0]:
            raise ValueError("empty t_span")

    @property
    def direction(self) -> int:
        return 1 if self.t_span[1] > self.t_span[0] else -1

    @property
    def duration(self) -> float:
        return abs(self.t_span[1] - self.t_span[0])


@dataclass
class Sample:
    t: float
    state: DensityState
    sea: SeaEvaluation
    report: object = None
    s: float = math.nan


@dataclass
class TrajectoryRecord:
    samples: list = field(default_factory=list)
    conservation_log: list = field(default_factory=list)
    status: str = "running"
    direction: int = 1
    kind: RhsKind = RhsKind.FULL_MATRIX

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def populations(self) -> np.ndarray:
        """Diagonal of rho at every sample (occupations for H-diagonal runs)."""
        return np.array([np.diagonal(s.state.rho).real for s in self.samples])

    def entropies(self) -> np.ndarray:
        return np.array([entropy(s.state) for s in self.samples])

    def __len__(self):
        return len(self.samples)


# -- right-hand sides --------------------------------------------------------


def rhs_full(state, gens: GeneratorSet, policy: TauPolicy, kind: RhsKind = RhsKind.FULL_MATRIX) -> np.ndarray:
    """``-(i/HBAR)[H, rho] + {dM, rho}/(2 KB tau)``."""
    state = as_state(state)
    sea = evaluate(state, gens, policy)
    return sea_rhs(
        state,
        gens,
        sea,
        unitary=kind is not RhsKind.DISSIPATIVE_ONLY,
        dissipative=kind is not RhsKind.UNITARY_ONLY,
    )


def rhs_diagonal(p, e, policy: TauPolicy) -> np.ndarray:
    """Occupation rates ``dp_n/dt = p_n dM_n / (KB tau)`` for an H-diagonal state.

    Zero occupations have zero rate (``0 ln 0 = 0``).
    """
    p = np.asarray(p, dtype=float)
    e = np.asarray(e, dtype=float)
    if p.shape != e.shape:
        raise DimensionMismatch(f"p has shape {p.shape}, e has {e.shape}")
    pos = p > 0
    lnp = np.zeros_like(p)
    lnp[pos] = np.log(p[pos])
    S = -KB * np.dot(p, lnp)
    H = np.dot(p, e)
    dh = e - H
    ds = -KB * lnp - S
    var_h = np.dot(p, dh * dh)
    lam = np.dot(p, dh * ds) / var_h if var_h > 0 else 0.0
    dM = np.where(pos, ds - lam * dh, 0.0)
    if policy.is_constant:
        return p * dM / (KB * policy.value)
    if var_h < EIG_TOL:
        raise ZeroEnergySpread(f"cov(H,H) = {var_h:.3e}")
    var_m = np.dot(p, dM * dM)
    if var_m < 1e-10:
        return np.zeros_like(p)
    return (2 * math.sqrt(var_h) / HBAR) * p * dM / math.sqrt(var_m)


def rate_of_mean(state, gens: GeneratorSet, policy: TauPolicy, F, sea: SeaEvaluation | None = None) -> float:
    """``d<F>/dt = (F\\H)/(HBAR/2) + cov(F, D)`` with ``D = dM/(KB tau)``."""
    state = as_state(state)
    if sea is None:
        sea = evaluate(state, gens, policy)
    return 2.0 * commutator_form(state, F, gens.H) / HBAR + covariance(state, F, sea.D)


# -- full-matrix integrator --------------------------------------------------


RANK_TOL = 1e-6


def _clean(rho, null_dim=0):
    """Hermitize, renormalize and clip eigenvalue dust; return the new state.

    The ``null_dim`` smallest eigenvalues are set to exactly zero: SEA keeps
    the cardinality of rho, so integration noise in the initial null space
    is removed instead of being amplified by the entropy gradient.
    """
    rho = (rho + rho.conj().T) / 2
    w, v = np.linalg.eigh(rho / np.trace(rho).real)
    if null_dim:
        if np.abs(w[:null_dim]).max() > RANK_TOL:
            raise InvariantBreach(f"null-space eigenvalue {np.abs(w[:null_dim]).max():.3e} grew beyond {RANK_TOL}")
        w[:null_dim] = 0.0
    if w.min() < -EIG_TOL:
        raise InvariantBreach(f"eigenvalue {w.min():.3e} below -{EIG_TOL}")
    w = np.clip(w, 0.0, None)
    return DensityState._from_spectrum(w / w.sum(), v)


def _dopri_step(f, y, h):
    K = _kernels
    k1 = f(y)
    k2 = f(y + h * (K._A21 * k1))
    k3 = f(y + h * (K._A31 * k1 + K._A32 * k2))
    k4 = f(y + h * (K._A41 * k1 + K._A42 * k2 + K._A43 * k3))
    k5 = f(y + h * (K._A51 * k1 + K._A52 * k2 + K._A53 * k3 + K._A54 * k4))
    k6 = f(y + h * (K._A61 * k1 + K._A62 * k2 + K._A63 * k3 + K._A64 * k4 + K._A65 * k5))
    yn = y + h * (K._B1 * k1 + K._B3 * k3 + K._B4 * k4 + K._B5 * k5 + K._B6 * k6)
    k7 = f(yn)
    err = h * (K._E1 * k1 + K._E3 * k3 + K._E4 * k4 + K._E5 * k5 + K._E6 * k6 + K._E7 * k7)
    return yn, err


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), None


def _integrate_full(kind, state, gens, policy, config):
    sign = config.direction
    t0 = config.t_span[0]

    def f(rho):
        st = make_state(rho) if not isinstance(rho, DensityState) else rho
        return sign * rhs_full(st, gens, policy, kind)

    null_dim = state.dim - state.rank

    def f_raw(rho):
        rho = (rho + rho.conj().T) / 2
        w, v = np.linalg.eigh(rho / np.trace(rho).real)
        w[:null_dim] = 0.0
        return sign * rhs_full(DensityState._from_spectrum(np.clip(w, 0.0, None), v), gens, policy, kind)

    samples = [(t0, state)]
    quiet = 0
    status = "running"
    tau_elapsed = 0.0
    h = config.step
    next_sample = config.sample_interval
    steps = 0
    S_prev = entropy(state)
    h_min = 1e-15 * config.duration
    while status == "running":
        if steps >= config.max_steps:
            status = "max_steps"
            break
        steps += 1
        h_try = min(h, next_sample - tau_elapsed)
        y = state.rho
        if config.method == "rk4":
            yn, err = _rk4_step(f_raw, y, h_try)
            accept = True
        else:
            yn, errv = _dopri_step(f_raw, y, h_try)
            sc = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(yn))
            err = float(np.sqrt(np.mean((np.abs(errv) / sc) ** 2)))
            if not math.isfinite(err):
                err = 1e10
            accept = err <= 1.0
        if not accept:
            h = h_try * max(0.1, 0.9 * err ** (-0.2))
            if h < h_min:
                raise StepFailure(f"step underflow at t = {t0 + sign * tau_elapsed:.6g}")
            continue
        new_state = _clean(yn, null_dim)
        S_new = entropy(new_state)
        if sign * (S_new - S_prev) < -ENTROPY_SLACK * max(1.0, abs(S_prev)) and kind is not RhsKind.UNITARY_ONLY:
            raise InvariantBreach(f"entropy decreased by {abs(S_new - S_prev):.3e}")
        S_prev = S_new
        state = new_state
        tau_elapsed += h_try
        if config.method == "rk45":
            h = h_try * min(5.0, max(0.2, 0.9 * err ** (-0.2) if err > 0 else 5.0))
        hit = abs(tau_elapsed - next_sample) <= 1e-12 * max(1.0, next_sample)
        if hit:
            tau_elapsed = next_sample
            next_sample += config.sample_interval
            samples.append((t0 + sign * tau_elapsed, state))
            if np.linalg.norm(f(state)) < CONV_TOL:
                quiet += 1
            else:
                quiet = 0
            if quiet >= CONV_COUNT and config.stop_on_convergence:
                status = "converged"
            elif tau_elapsed >= config.duration * (1 - 1e-14):
                status = "reached_end"
            elif len(samples) >= config.max_samples:
                status = "max_steps"
    return samples, status, [math.nan] * len(samples)


def _propagate_unitary(state, gens, config):
    """Exact ``U rho U^dagger`` with ``U = exp(-i H t / HBAR)`` at every sample time."""
    w, V = np.linalg.eigh(gens.H)
    t0 = config.t_span[0]
    n = int(math.floor(config.duration / config.sample_interval * (1 + 1e-12)))
    offsets = [k * config.sample_interval for k in range(n + 1)]
    if config.duration - offsets[-1] > 1e-12 * config.duration:
        offsets.append(config.duration)
    samples = []
    for dt in offsets:
        U = (V * np.exp(-1j * w * config.direction * dt / HBAR)) @ V.conj().T
        samples.append((t0 + config.direction * dt, DensityState._from_spectrum(state.eigenvalues, U @ state.eigenvectors)))
    return samples, "reached_end", [math.nan] * len(samples)


# -- diagonal path -----------------------------------------------------------

_STATUS = {
    _kernels.REACHED_END: "reached_end",
    _kernels.CONVERGED: "converged",
    _kernels.MAX_STEPS: "max_steps",
}


def diagonal_log_state(p):
    """Split a probability vector into (q, active) with q = ln p on the support."""
    p = np.asarray(p, dtype=float)
    active = p > 0
    q = np.zeros_like(p)
    q[active] = np.log(p[active])
    return q, active


def integrate_diagonal(q0, active, e, policy: TauPolicy, config: IntegratorConfig, E0=None):
    """Run the compiled log-probability integrator.

    Returns ``(s, t, q, status)`` arrays with ``t`` relative to ``t_span[0]``.
    Accepts ``q0`` directly so that occupations far below double-precision
    underflow (``ln p < -745``) can be seeded.
    """
    q0 = np.ascontiguousarray(q0, dtype=np.float64)
    active = np.ascontiguousarray(active, dtype=np.bool_)
    e = np.ascontiguousarray(e, dtype=np.float64)
    if E0 is None:
        p = np.where(active, np.exp(np.where(active, q0, 0.0)), 0.0)
        E0 = float(np.dot(p, e) / p.sum())
    sign = float(config.direction)
    if policy.is_constant:
        kind, tau0 = _kernels.TAU_CONSTANT, policy.value
        ds, s_sample = config.step / tau0, config.sample_interval / tau0
    else:
        kind, tau0 = _kernels.TAU_LOWER_BOUND, 0.0
        ds, s_sample = config.step, config.sample_interval
    t_limit = config.duration
    conv_count = CONV_COUNT if config.stop_on_convergence else 2**62
    # constant tau: t = tau s, so the span is hit exactly on the s clock
    s_limit = config.duration / tau0 if policy.is_constant else math.inf
    if config.method == "rk4":
        every = max(1, int(round(s_sample / ds)))
        n_steps = min(config.max_steps, config.max_samples * every)
        if policy.is_constant:
            n_steps = min(n_steps, int(round(s_limit / ds)))
        s, t, q, k, code = _kernels.run_rk4(
            q0, active, e, E0, kind, tau0, sign, ds, n_steps, every, t_limit, CONV_TOL, conv_count, config.max_samples
        )
    else:
        s, t, q, k, code = _kernels.run_dopri(
            q0, active, e, E0, kind, tau0, sign, ds, s_sample, s_limit, t_limit,
            config.rel_tol, config.abs_tol, CONV_TOL, conv_count, config.max_samples, config.max_steps,
        )
    if code == _kernels.STEP_FAILURE:
        raise StepFailure(f"step underflow after {k} samples")
    if code == _kernels.NONFINITE:
        raise StepFailure(f"non-finite state after {k} samples")
    return s[:k], t[:k], q[:k], _STATUS[code]


def _check_diagonal(state, gens):
    H = gens.H
    if np.any(H - np.diag(np.diagonal(H))):
        raise ValueError("diagonal integration needs H diagonal in the computational basis")
    if len(gens.N):
        raise ValueError("diagonal integration supports no extra generators")
    e = np.diagonal(H).real
    if len(np.unique(e)) != e.size:
        raise ValueError("diagonal integration needs a nondegenerate H spectrum")
    if np.any(state.rho - np.diag(np.diagonal(state.rho))):
        raise ValueError("diagonal integration needs [rho(0), H] = 0")
    return e


def _stationary(rhs_fn) -> bool:
    """True when the initial right-hand side already vanishes (fixed point)."""
    try:
        return bool(np.linalg.norm(rhs_fn()) < CONV_TOL)
    except ZeroEnergySpread:
        return False


def integrate(
    rhs: RhsKind,
    initial,
    gens: GeneratorSet,
    policy: TauPolicy,
    config: IntegratorConfig = IntegratorConfig(),
    observables: dict | None = None,
    reports: bool = True,
    log_initial=None,
) -> TrajectoryRecord:
    """Integrate from ``initial`` over ``config.t_span`` and attach per-sample reports.

    A fixed point (initial right-hand side below the convergence threshold)
    returns a single sample with status ``converged`` when
    ``config.stop_on_convergence`` is set.

    ``log_initial = (q, active)`` seeds the diagonal path in log-probabilities
    and overrides ``initial`` there.
    """
    from .uncertainty import inequality_suite

    record = TrajectoryRecord(direction=config.direction, kind=rhs)
    if rhs is RhsKind.DIAGONAL_BOLTZMANN:
        if log_initial is not None:
            q0, active = log_initial
            q0 = np.asarray(q0, dtype=float)
            active = np.asarray(active, dtype=bool)
            e = _check_diagonal(DensityState.from_probabilities(np.ones(q0.size) / q0.size), gens)
            p0 = np.where(active, np.exp(np.where(active, q0, 0.0)), 0.0)
            E0 = float(np.dot(p0, e) / p0.sum())
        else:
            state0 = as_state(initial)
            e = _check_diagonal(state0, gens)
            q0, active = diagonal_log_state(np.diagonal(state0.rho).real)
            E0 = float(np.dot(state0.eigenvalues, e)) if state0.diagonal else mean_value(state0, gens.H)
        p0 = np.where(active, np.exp(np.where(active, q0, 0.0)), 0.0)
        if config.stop_on_convergence and _stationary(lambda: rhs_diagonal(p0 / p0.sum(), e, policy)):
            s, t, q, status = np.zeros(1), np.zeros(1), q0[None, :], "converged"
        else:
            s, t, q, status = integrate_diagonal(q0, active, e, policy, config, E0)
        pairs = []
        for si, ti, qi in zip(s, t, q):
            p = np.where(active, np.exp(np.where(active, qi, 0.0)), 0.0)
            record.conservation_log.append(
                {"t": config.t_span[0] + ti, "trace": p.sum() - 1.0, "energy": np.dot(p, e) - E0, "N": [],
                 "populations": p / p.sum()}
            )
            pairs.append((config.t_span[0] + ti, DensityState.from_probabilities(p / p.sum()), si))
    else:
        state0 = as_state(initial)
        if state0.dim != gens.dim:
            raise DimensionMismatch(f"state dim {state0.dim} != generator dim {gens.dim}")
        if config.stop_on_convergence and _stationary(lambda: rhs_full(state0, gens, policy, rhs)):
            raw, status, s_vals = [(config.t_span[0], state0)], "converged", [math.nan]
        elif rhs is RhsKind.UNITARY_ONLY:
            raw, status, s_vals = _propagate_unitary(state0, gens, config)
        else:
            raw, status, s_vals = _integrate_full(rhs, state0, gens, policy, config)
        E0 = mean_value(state0, gens.H)
        N0 = [mean_value(state0, n) for n in gens.N]
        pairs = []
        for (ti, st), si in zip(raw, s_vals):
            record.conservation_log.append(
                {
                    "t": ti,
                    "trace": float(np.trace(st.rho).real) - 1.0,
                    "energy": mean_value(st, gens.H) - E0,
                    "N": [mean_value(st, n) - n0 for n, n0 in zip(gens.N, N0)],
                }
            )
            pairs.append((ti, st, si))
    S_prev = None
    for ti, st, si in pairs:
        S = entropy(st)
        if S_prev is not None and rhs is not RhsKind.UNITARY_ONLY:
            if config.direction * (S - S_prev) < -ENTROPY_SLACK * max(1.0, abs(S_prev)):
                raise InvariantBreach(f"entropy not monotone at t = {ti:.6g}")
        S_prev = S
        sea = evaluate(st, gens, policy)
        rep = inequality_suite(st, gens, policy, observables or {}, sea=sea) if reports else None
        record.samples.append(Sample(ti, st, sea, rep, si))
    record.status = status
    return record


def merge_backward_forward(backward: TrajectoryRecord, forward: TrajectoryRecord) -> TrajectoryRecord:
    """One time-ordered record from a backward and a forward run sharing t = t0."""
    samples = list(reversed(backward.samples)) + forward.samples[1:]
    log = list(reversed(backward.conservation_log)) + forward.conservation_log[1:]
    return TrajectoryRecord(samples, log, f"{backward.status}/{forward.status}", 0, forward.kind)
