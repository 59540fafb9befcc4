"""Four-level dilute Boltzmann gas relaxation scenario.

Levels are ``e = (0, 1/3, 2/3, 1) u`` with mean energy ``2u/5`` and reduced
units ``u = KB = HBAR = 1``. Three nondissipative reference states share that
mean energy: the two-level primordial state on ``(e1, e4)``, the
three-level false target on ``(e1, e2, e4)`` and the four-level maximal
entropy state.

The initial state seeds level 3 with a tiny occupation ``delta`` and mixes
the three-level canonical part with a fraction ``mix`` of the two-level
canonical part. Any state that is canonical on a subset of levels stays
canonical on that subset under the dynamics (``ln p`` stays affine in
``e``), so without the mixing the backward trajectory would sit on the
false target forever instead of reaching the primordial state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import OutOfRange, UnknownScenario
from .evolution import IntegratorConfig, RhsKind, TrajectoryRecord, integrate, merge_backward_forward
from .generator import GeneratorSet, TauPolicy
from .operators import KB
from .uncertainty import level_projectors

LEVELS = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)
MEAN_ENERGY = 0.4
DEFAULT_LOG_DELTA = -70.0
DEFAULT_MIX = 0.2

SCENARIOS = ("fig1", "fig3")


def canonical_solve(levels, mean_energy: float) -> tuple[np.ndarray, float]:
    """Canonical ``p_i ~ exp(-e_i / KB theta)`` with ``sum p_i e_i = mean_energy``.

    Brent's method on ``beta = 1/(KB theta)``; ``theta = inf`` when the
    mean energy sits at the level average.
    """
    e = np.asarray(levels, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("need at least two levels")
    lo, hi = e.min(), e.max()
    if not (lo < mean_energy < hi):
        raise OutOfRange(f"mean energy {mean_energy} outside ({lo}, {hi})")

    def dist(beta):
        x = -beta * (e - lo)
        x -= x.max()
        w = np.exp(x)
        return w / w.sum()

    def f(beta):
        return dist(beta) @ e - mean_energy

    scale = max(hi - lo, 1e-300)
    b = 1.0 / scale
    while f(-b) <= 0 or f(b) >= 0:
        b *= 2.0
        if b > 1e6 / scale:
            raise OutOfRange("mean energy too close to a level bound")
    beta = brentq(f, -b, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    p = dist(beta)
    theta = math.inf if beta == 0 else 1.0 / (KB * beta)
    return p, theta


@dataclass(frozen=True)
class ReferenceState:
    p: np.ndarray
    theta: float


@dataclass(frozen=True)
class ReferenceStates:
    primordial: ReferenceState
    false_target: ReferenceState
    maximal_entropy: ReferenceState


def _embed(p_sub, idx, n):
    p = np.zeros(n)
    p[list(idx)] = p_sub
    return p


def reference_states(levels=LEVELS, mean_energy: float = MEAN_ENERGY) -> ReferenceStates:
    """Canonical states on levels (1,4), (1,2,4) and (1,2,3,4)."""
    e = np.asarray(levels, dtype=float)
    out = []
    for idx in ((0, 3), (0, 1, 3), (0, 1, 2, 3)):
        p, th = canonical_solve(e[list(idx)], mean_energy)
        out.append(ReferenceState(_embed(p, idx, e.size), th))
    return ReferenceStates(*out)


def initial_log_state(delta: float = math.exp(DEFAULT_LOG_DELTA), mix: float = DEFAULT_MIX, log_delta: float | None = None):
    """Log-probabilities ``q = ln p`` of the seeded initial state.

    ``log_delta`` overrides ``delta`` so that seeds below double-precision
    underflow can be used. Returns ``(q, active)``.
    """
    if log_delta is None:
        if not (0 < delta < 0.01):
            raise OutOfRange(f"delta must lie in (0, 0.01), got {delta}")
        log_delta = math.log(delta)
    elif not log_delta < math.log(0.01):
        raise OutOfRange(f"log_delta must be below ln 0.01, got {log_delta}")
    if not (0.0 <= mix < 1.0):
        raise OutOfRange(f"mix must lie in [0, 1), got {mix}")
    e = np.asarray(LEVELS)
    delta = math.exp(log_delta)
    rest = -math.expm1(log_delta)
    e_rest = (MEAN_ENERGY - delta * e[2]) / rest
    p3, _ = canonical_solve(e[[0, 1, 3]], e_rest)
    p2, _ = canonical_solve(e[[0, 3]], e_rest)
    r = (1.0 - mix) * p3 + mix * np.array([p2[0], 0.0, p2[1]])
    q = np.empty(4)
    q[[0, 1, 3]] = np.log(rest * r)
    q[2] = log_delta
    return q, np.ones(4, dtype=bool)


def build_initial_state(delta: float = 1e-4, mix: float = 0.0) -> np.ndarray:
    """Probability vector with ``p3 = delta`` and total mean energy ``2u/5``.

    The remaining mass ``1 - delta`` is canonical on (e1, e2, e4), optionally
    mixed with a fraction ``mix`` of the canonical (e1, e4) state.
    """
    q, _ = initial_log_state(delta, mix)
    return np.exp(q)


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of a scenario run (times in units of tau or HBAR/u)."""

    tau: float = 1.0
    log_delta: float = DEFAULT_LOG_DELTA
    mix: float = DEFAULT_MIX
    t_end: float = 200.0
    step: float = 0.01
    sample_interval: float = 0.05
    method: str = "rk45"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    reports: bool = True


@dataclass
class ScenarioResult:
    name: str
    policy: TauPolicy
    forward: TrajectoryRecord
    backward: TrajectoryRecord
    references: ReferenceStates
    observables: dict = field(default_factory=dict)

    @property
    def full(self) -> TrajectoryRecord:
        """Backward and forward runs merged in increasing time."""
        return merge_backward_forward(self.backward, self.forward)


def scenario_policy(name: str, tau: float = 1.0) -> TauPolicy:
    if name == "fig1":
        return TauPolicy.constant(tau)
    if name == "fig3":
        return TauPolicy.lower_bound_equality()
    raise UnknownScenario(f"unknown scenario {name!r}; choose from {SCENARIOS}")


def run_scenario(name: str = "fig1", config: ScenarioConfig = ScenarioConfig()) -> ScenarioResult:
    """Integrate the four-level model forward and backward from the seeded state.

    ``fig1`` uses a constant dissipation time; ``fig3`` pins tau to its lower
    bound so that ``a_tau = 1``. Reports track the level projectors and H.
    """
    policy = scenario_policy(name, config.tau)
    gens = GeneratorSet.from_levels(LEVELS)
    obs = level_projectors(4)
    obs["H"] = gens.H
    q0, active = initial_log_state(mix=config.mix, log_delta=config.log_delta)
    runs = []
    for t1 in (config.t_end, -config.t_end):
        ic = IntegratorConfig(
            method=config.method,
            step=config.step,
            rel_tol=config.rel_tol,
            abs_tol=config.abs_tol,
            t_span=(0.0, t1),
            sample_interval=config.sample_interval,
        )
        runs.append(
            integrate(
                RhsKind.DIAGONAL_BOLTZMANN, None, gens, policy, ic,
                observables=obs, reports=config.reports, log_initial=(q0, active),
            )
        )
    return ScenarioResult(name, policy, runs[0], runs[1], reference_states(), obs)


def plateau_index(record) -> int | None:
    """Sample index of the slowest entropy production between the two largest peaks.

    Returns ``None`` when the entropy-rate history has fewer than two local
    maxima (no intermediate slowdown).
    """
    r = np.array([s.report.entropy_rate for s in record.samples])
    if r.size < 3:
        return None
    peaks = [i for i in range(1, r.size - 1) if r[i] >= r[i - 1] and r[i] >= r[i + 1] and r[i] > 0]
    if len(peaks) < 2:
        return None
    a, b = sorted(sorted(peaks, key=lambda i: r[i])[-2:])
    return int(a + np.argmin(r[a:b + 1]))


def summarize(result: ScenarioResult) -> dict:
    """Endpoint distributions, plateau temperature and relation extremes of a run."""
    from .output import residual_extremes

    full = result.full
    first, last = full.samples[0], full.samples[-1]
    summary = {
        "scenario": result.name,
        "policy": result.policy.kind.value,
        "tau": result.policy.value if result.policy.is_constant else None,
        "status": {"forward": result.forward.status, "backward": result.backward.status},
        "t_range": [first.t, last.t],
        "p_backward_end": np.diagonal(first.state.rho).real.tolist(),
        "p_forward_end": np.diagonal(last.state.rho).real.tolist(),
        "theta_backward_end": first.sea.theta,
        "theta_forward_end": last.sea.theta,
        "references": {
            name: {"p": ref.p.tolist(), "theta": ref.theta}
            for name, ref in zip(
                ("primordial", "false_target", "maximal_entropy"),
                (result.references.primordial, result.references.false_target, result.references.maximal_entropy),
            )
        },
        "max_trace_drift": max(abs(c["trace"]) for c in full.conservation_log),
        "max_energy_drift": max(abs(c["energy"]) for c in full.conservation_log),
    }
    k = plateau_index(full) if full.samples[0].report is not None else None
    if k is not None:
        s = full.samples[k]
        rates = [x.report.entropy_rate for x in full.samples]
        summary["plateau"] = {
            "t": s.t,
            "theta": s.sea.theta,
            "p": np.diagonal(s.state.rho).real.tolist(),
            "entropy_rate_fraction": s.report.entropy_rate / max(rates),
        }
    if full.samples[0].report is not None:
        res, ids = residual_extremes(full.samples)
        summary["min_residuals"] = res
        summary["max_identity_deviations"] = ids
    return summary
