"""Characteristic times and the time-energy / time-entropy relation suite.

Times are handled through their inverses (rates) internally, so vanishing
spreads and rates give ``inf`` times rather than division errors. ``nan``
marks a quantity that is not applicable at the state (for instance
correlations with M at a nondissipative state).

Residual conventions in :class:`UncertaintyReport`:

* ``residuals[name]`` is the normalized signed slack of an inequality
  ``lhs <= rhs``: ``(rhs - lhs) / max(|lhs|, |rhs|)``; positive means
  satisfied. When several instances exist (observable pairs, several F) the
  minimum is kept.
* ``identities[name]`` is the relative deviation ``|a - b| / max(|a|, |b|)``
  of an equality, maximized over instances.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroSpread
from .generator import NONDISS_TOL, COMMUTE_TOL, GeneratorSet, SeaEvaluation, TauPolicy, evaluate
from .operators import (
    EIG_TOL,
    HBAR,
    KB,
    as_state,
    commutator,
    deviation_vector,
    entropy_operator,
    moment_matrices,
    projector,
)

NA = math.nan


def _inv(x):
    if math.isnan(x):
        return NA
    return math.inf if x == 0 else 1.0 / x


def slack(lhs, rhs):
    """Normalized signed slack of ``lhs <= rhs``."""
    if math.isnan(lhs) or math.isnan(rhs):
        return NA
    if lhs == rhs:
        return 0.0
    if math.isinf(rhs) and rhs > 0:
        return 1.0
    if math.isinf(lhs):
        return -1.0
    return (rhs - lhs) / max(abs(lhs), abs(rhs))


def deviation(a, b, floor=0.0):
    """Relative deviation ``|a - b| / max(|a|, |b|, floor)`` (0 when equal).

    ``floor`` makes the comparison absolute for quantities that are already
    normalized (correlation-like values bounded by O(1)).
    """
    if math.isnan(a) or math.isnan(b):
        return NA
    if a == b:
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return abs(a - b) / max(abs(a), abs(b), floor)


def _exact_gram(vectors):
    """Real Gram matrix ``Re <x_a, x_b>`` in exact rational arithmetic.

    Used for quantities such as ``1 - r_SH'^2`` whose double-precision
    evaluation cancels catastrophically near nondissipative states.
    """
    parts = []
    for x in vectors:
        x = np.asarray(x).ravel()
        nz = np.flatnonzero(x)
        parts.append({int(i): (Fraction(float(x[i].real)), Fraction(float(x[i].imag))) for i in nz})
    n = len(parts)
    G = [[Fraction(0)] * n for _ in range(n)]
    for a in range(n):
        for b in range(a, n):
            acc = Fraction(0)
            pa, pb = parts[a], parts[b]
            for i in pa.keys() & pb.keys():
                acc += pa[i][0] * pb[i][0] + pa[i][1] * pb[i][1]
            G[a][b] = G[b][a] = acc
    return G


def _keep_min(d, key, val):
    if math.isnan(val):
        d.setdefault(key, NA)
        return
    cur = d.get(key, NA)
    d[key] = val if math.isnan(cur) else min(cur, val)


def _keep_max(d, key, val):
    if math.isnan(val):
        d.setdefault(key, NA)
        return
    cur = d.get(key, NA)
    d[key] = val if math.isnan(cur) else max(cur, val)


def level_projectors(n: int) -> dict:
    """``{"P_e1": |1><1|, ...}`` for an H-diagonal basis."""
    return {f"P_e{i + 1}": projector(n, i) for i in range(n)}


@dataclass
class CharacteristicTimes:
    tau_F: dict
    tau_S: float
    tau_U: float
    tau_D: float
    tau_K: float
    tau_UD: float
    a_tau: float


@dataclass
class UncertaintyReport:
    times: CharacteristicTimes
    rates: dict
    correlations: dict
    residuals: dict = field(default_factory=dict)
    identities: dict = field(default_factory=dict)
    entropy_rate: float = NA
    theta: float = NA

    def min_residual(self):
        """``(name, value)`` of the smallest applicable residual."""
        items = [(k, v) for k, v in self.residuals.items() if not math.isnan(v)]
        if not items:
            return "", NA
        return min(items, key=lambda kv: kv[1])


@dataclass
class _Core:
    """Rates and spreads shared by every relation at one state."""

    var_H: float
    var_S: float
    var_M: float
    var_Hp: float
    cov_SM: float
    cov_SHp: float
    w_U: float
    w_D: float
    w_K: float
    w_UD: float
    w_S: float
    rate_S: float
    a_tau: float
    c_MH: float
    r_SM: float
    r_SHp: float
    dissipative: bool
    commutes: bool
    one_minus_rSHp2: float = NA
    var_M_from_S: float = NA


def _core(state, gens, policy, sea):
    S = entropy_operator(state)
    dM = sea.delta_M
    ops = [gens.H, S, dM, sea.D]
    Hp = [gens.H] + list(gens.N)
    cov, com = moment_matrices(state, ops)
    var_H, var_S, var_M = cov[0, 0], cov[1, 1], max(cov[2, 2], 0.0)
    # H' enters only through lambda0 * dH' = lambda0 dH - nu . dN
    XH = deviation_vector(state, gens.H)
    if gens.N and sea.lambda0 != 0.0:
        XN = [deviation_vector(state, n) for n in gens.N]
        XHp = XH - sum(nu / sea.lambda0 * x for nu, x in zip(sea.nu, XN))
    else:
        XHp = XH
    XS = deviation_vector(state, S)
    var_Hp = float(np.vdot(XHp, XHp).real)
    cov_SHp = float(np.vdot(XS, XHp).real)
    dissipative = var_M >= NONDISS_TOL
    w_U = 2.0 * math.sqrt(max(var_H, 0.0)) / HBAR
    if policy.is_constant:
        w_D = math.sqrt(var_M) / (KB * policy.value)
        w_K = math.sqrt(max(var_S, 0.0)) / (KB * policy.value)
    else:
        # limit values: tau_D = tau_U by construction of the policy
        w_D = w_U
        w_K = w_U * math.sqrt(max(var_S, 0.0) / var_M) if var_M > 0 else math.inf
    w_UD = float(np.linalg.norm(sea.C))
    rate_S = cov[1, 3]
    spread_S = math.sqrt(max(var_S, 0.0))
    w_S = abs(rate_S) / spread_S if spread_S > 0 else (0.0 if rate_S == 0 else math.inf)
    if dissipative and var_H > 0:
        c_MH = com[2, 0] / math.sqrt(var_M * var_H)
    else:
        c_MH = NA
    r_SM = cov[1, 2] / math.sqrt(var_S * var_M) if dissipative and var_S > 0 else NA
    r_SHp = cov_SHp / math.sqrt(var_S * var_Hp) if var_S > 0 and var_Hp > 0 else NA
    commutes = float(np.abs(commutator(state.rho, gens.H)).max()) <= COMMUTE_TOL * max(1.0, np.abs(gens.H).max())
    gap = from_s = NA
    if dissipative and var_S > 0 and var_Hp > 0:
        G = _exact_gram([XS, XHp])
        det = G[0][0] * G[1][1] - G[0][1] ** 2
        gap = float(det / (G[0][0] * G[1][1]))
        from_s = float(det / G[1][1])
    return _Core(
        var_H, var_S, var_M, var_Hp, cov[1, 2], cov_SHp, w_U, w_D, w_K, w_UD, w_S, rate_S,
        sea.a_tau, c_MH, r_SM, r_SHp, dissipative, commutes, gap, from_s,
    )


def characteristic_time(state, gens: GeneratorSet, policy: TauPolicy, F, sea: SeaEvaluation | None = None) -> float:
    """``tau_F = Delta_F / |d<F>/dt|``; ``inf`` when the rate is negligible."""
    from .evolution import rate_of_mean

    state = as_state(state)
    sea = sea if sea is not None else evaluate(state, gens, policy)
    XF = deviation_vector(state, F)
    spread_F = math.sqrt(max(np.vdot(XF, XF).real, 0.0))
    if spread_F ** 2 < EIG_TOL:
        raise ZeroSpread(f"variance of F is {spread_F ** 2:.3e}")
    rate = rate_of_mean(state, gens, policy, F, sea)
    w_ref = max(float(np.linalg.norm(sea.C)), 2.0 * math.sqrt(max(sea.spread_H ** 2, 0.0)) / HBAR, 1e-300)
    if abs(rate) < 1e-15 * spread_F * w_ref:
        return math.inf
    return spread_F / abs(rate)


def shortest_times(state, gens: GeneratorSet, policy: TauPolicy, sea: SeaEvaluation | None = None) -> CharacteristicTimes:
    """tau_U, tau_D, tau_K, tau_S, tau_UD and a_tau at one state."""
    state = as_state(state)
    sea = sea if sea is not None else evaluate(state, gens, policy)
    c = _core(state, gens, policy, sea)
    return CharacteristicTimes({}, _inv(c.w_S), _inv(c.w_U), _inv(c.w_D), _inv(c.w_K), _inv(c.w_UD), c.a_tau)


def entropy_time(state, gens: GeneratorSet, policy: TauPolicy, sea: SeaEvaluation | None = None) -> float:
    """``tau_S = Delta_S / |d<S>/dt|`` with ``d<S>/dt = cov(S, M)/(KB tau)``."""
    state = as_state(state)
    sea = sea if sea is not None else evaluate(state, gens, policy)
    c = _core(state, gens, policy, sea)
    if c.var_S < EIG_TOL:
        raise ZeroSpread(f"entropy variance {c.var_S:.3e}")
    return _inv(c.w_S)


def inequality_suite(
    state, gens: GeneratorSet, policy: TauPolicy, observables: dict, sea: SeaEvaluation | None = None
) -> UncertaintyReport:
    """Evaluate every relation at one state; see the module docstring for conventions."""
    state = as_state(state)
    sea = sea if sea is not None else evaluate(state, gens, policy)
    c = _core(state, gens, policy, sea)
    res: dict = {}
    ids: dict = {}
    corr: dict = {"r_SM": c.r_SM, "r_SHp": c.r_SHp, "c_MH": c.c_MH}
    names = list(observables)
    S = entropy_operator(state)
    ops = [observables[k] for k in names] + [gens.H, S, sea.delta_M, sea.D]
    cov, com = moment_matrices(state, ops)
    nF = len(names)
    iH, iS, iM, iD = nF, nF + 1, nF + 2, nF + 3

    # Schroedinger and Heisenberg-Robertson over every pair of F, H, S
    for a in range(nF + 2):
        for b in range(a + 1, nF + 2):
            vv = cov[a, a] * cov[b, b]
            if vv < EIG_TOL ** 2:
                continue
            _keep_min(res, "Sinequality", slack(cov[a, b] ** 2 + com[a, b] ** 2, vv))
            _keep_min(res, "Rinequality", slack(abs(com[a, b]), math.sqrt(vv)))

    spread_M = math.sqrt(c.var_M)
    tau_F = {}
    rates = {"S": c.rate_S}
    for k, name in enumerate(names):
        vF = cov[k, k]
        if vF < EIG_TOL:
            tau_F[name] = NA
            continue
        dF = math.sqrt(vF)
        rate = 2.0 * com[k, iH] / HBAR + cov[k, iD]
        rates[name] = rate
        w_F = abs(rate) / dF
        w_ref = max(c.w_UD, c.w_U, 1e-300)
        if abs(rate) < 1e-15 * dF * w_ref:
            w_F = 0.0
        tau_F[name] = _inv(w_F)
        c_FH = com[k, iH] / (dF * math.sqrt(c.var_H)) if c.var_H > 0 else NA
        # the M term is present exactly when D is nonzero (constant tau keeps it below NONDISS_TOL)
        d_active = spread_M > 0 and (policy.is_constant or c.dissipative)
        r_FM = cov[k, iM] / (dF * spread_M) if d_active else 0.0
        corr[f"c_{name}H"] = c_FH
        corr[f"r_{name}M"] = r_FM if c.dissipative else NA
        commutes_H = abs(com[k, iH]) <= COMMUTE_TOL * dF * max(math.sqrt(c.var_H), 1.0) and float(
            np.abs(commutator(observables[name], gens.H)).max()
        ) <= COMMUTE_TOL * max(1.0, np.abs(gens.H).max())

        if c.w_U > 0:
            _keep_max(ids, "exactTE", deviation(w_F / c.w_U, abs(c_FH + c.a_tau * r_FM), 1.0))
            _keep_min(res, "genunc1", slack((w_F / c.w_U) ** 2, 1 + c.a_tau ** 2 + 2 * c.a_tau * (c.c_MH if c.dissipative else 0.0)))
            _keep_min(res, "genunc8", slack(w_F / c.w_U, 1 + c.a_tau))
            _keep_min(res, "genunc9", slack((w_F / c.w_U) ** 2, 1 + c.a_tau ** 2))
            if not policy.is_constant:
                _keep_min(res, "genunc9_lbe", slack(w_F, math.sqrt(2.0) * c.w_U))
        lhs2 = c.w_U ** 2 + c.w_D ** 2 + (2 * c.c_MH * c.w_U * c.w_D if c.dissipative else 0.0)
        _keep_min(res, "genunc2", slack(w_F ** 2, lhs2))
        _keep_min(res, "ineqCF", slack(w_F, c.w_UD))
        _keep_min(res, "genunc6M", slack(w_F ** 2, c.w_U ** 2 + c.w_D ** 2))
        _keep_min(res, "genunc6", slack(w_F ** 2, c.w_U ** 2 + c.w_K ** 2))
        if c.w_D == 0 or sea.a_tau == 0:
            _keep_min(res, "genunc11", slack(w_F, c.w_U))
            if c.var_H > 0:
                r_FH = cov[k, iH] / (dF * math.sqrt(c.var_H))
                _keep_min(res, "nondissTE", slack(c_FH ** 2 + r_FH ** 2, 1.0))
        if c.commutes:
            _keep_min(res, "genunc12", slack(w_F, c.w_K))
        if commutes_H:
            if c.w_U > 0:
                _keep_min(res, "dissTEA", slack(w_F / c.w_U, c.a_tau))
            _keep_min(res, "dissTEA2", slack(w_F, c.w_D))
            _keep_min(res, "teuPen", slack(w_F, c.w_D))
            _keep_min(res, "dpndt", slack(abs(rate), 0.5 * c.w_UD))
            if c.dissipative:
                _keep_max(ids, "teuPen_eq", deviation(w_F / c.w_D, abs(r_FM), 1.0))
        if c.dissipative and c.w_S > 0:
            # chained lower bound tau_UD' = a/(1+a) |r_SM| tau_S <= tau_F
            tau_hd = c.a_tau / (1 + c.a_tau) * abs(c.r_SM) / c.w_S
            _keep_min(res, "genunc4", slack(tau_hd * w_F, 1.0))

    # entropy relations
    spread_S = math.sqrt(max(c.var_S, 0.0))
    _keep_min(res, "rateSbound", slack(abs(c.rate_S), spread_S * c.w_D))
    _keep_min(res, "genunc7", min(slack(c.rate_S, spread_S * c.w_D), slack(spread_S * c.w_D, spread_S * c.w_K)))
    _keep_min(res, "tauSD", slack(c.w_S, c.w_D))
    spread_Hp = math.sqrt(max(c.var_Hp, 0.0))
    lam = abs(sea.lambda0)
    _keep_min(res, "thetabound", slack(lam * spread_Hp, spread_S))
    _keep_min(res, "thetabound2", slack(2 * lam * spread_M * spread_Hp, c.var_S))
    _keep_min(res, "tauK_le_tauD", slack(c.w_D, c.w_K))
    if c.dissipative:
        _keep_min(res, "genunc5", min(slack(c.w_S / c.w_K, abs(c.r_SM)), slack(abs(c.r_SM), 1.0)))
        _keep_max(ids, "genunc5_eq", deviation(c.w_S / c.w_K, c.r_SM ** 2))
        _keep_max(ids, "identity", deviation(c.w_D ** 2, c.w_S * c.w_K))
        chain = [c.r_SM ** 2, c.var_M / c.var_S, c.w_D ** 2 / c.w_K ** 2, c.w_S / c.w_K, c.one_minus_rSHp2]
        _keep_max(ids, "rrSM", max(deviation(chain[0], x) for x in chain[1:]))
        _keep_max(ids, "identitygen", deviation(spread_M / spread_S * c.w_S * c.w_K / c.w_D ** 2, abs(c.r_SM)))
        _keep_max(ids, "covSM", max(deviation(c.cov_SM, c.var_M), deviation(c.var_M, c.var_M_from_S)))
        _keep_max(ids, "c_MH", abs(c.c_MH))
        _keep_max(ids, "ineqUD2", deviation(c.w_UD ** 2, c.w_U ** 2 + c.w_D ** 2 + 2 * c.c_MH * c.w_U * c.w_D))
        if c.w_U > 0:
            _keep_max(ids, "TES", deviation(c.w_S / c.w_U, c.a_tau * abs(c.r_SM)))
    else:
        for key in ("genunc5", "genunc4"):
            res.setdefault(key, NA)
        for key in ("genunc5_eq", "identity", "rrSM", "identitygen", "covSM", "c_MH", "ineqUD2", "TES"):
            ids.setdefault(key, NA)

    times = CharacteristicTimes(tau_F, _inv(c.w_S), _inv(c.w_U), _inv(c.w_D), _inv(c.w_K), _inv(c.w_UD), c.a_tau)
    return UncertaintyReport(times, rates, corr, res, ids, c.rate_S, sea.theta)


def occupation_bounds(trajectory, n: int) -> dict:
    """Per-sample and integral occupation bounds for level ``n`` (0-based).

    Returns arrays ``teuPen`` (slack of ``1/tau_P <= 1/tau_D``), ``dpndt``
    (slack of ``|dp/dt| <= 1/(2 tau_UD)``), ``cosfinite`` (slack of the
    arccos bound between consecutive samples, trapezoidal quadrature) and the
    ratio ``tau_D / tau_P`` used to locate coincidence segments.
    """
    samples = trajectory.samples
    name = f"P_e{n + 1}"
    t = np.array([s.t for s in samples])
    # the diagonal path logs populations before the EIG_TOL support cut; the
    # arccos bound is sensitive to that cut on intervals of order 1e-6
    log = trajectory.conservation_log
    if len(log) == len(samples) and all("populations" in c for c in log):
        p = np.array([c["populations"][n] for c in log])
    else:
        p = np.array([s.state.rho[n, n].real for s in samples])
    teu, dpn, ratio = [], [], []
    w_ud = []
    for s in samples:
        rep = s.report
        if rep is None:
            raise ValueError("trajectory was integrated without reports")
        tF = rep.times.tau_F.get(name, NA)
        rate = rep.rates.get(name, 0.0)
        w_D = _inv(rep.times.tau_D)
        w_P = _inv(tF)
        teu.append(slack(w_P, w_D))
        w_ud.append(_inv(rep.times.tau_UD))
        dpn.append(slack(abs(rate), 0.5 * w_ud[-1]))
        ratio.append(w_P / w_D if w_D > 0 and not math.isnan(w_P) else NA)
    w_ud = np.array(w_ud)
    ang = np.arccos(np.sqrt(np.clip(p, 0.0, 1.0)))
    cosf = []
    for i in range(len(samples) - 1):
        lhs = abs(ang[i + 1] - ang[i])
        rhs = abs(t[i + 1] - t[i]) * 0.25 * (w_ud[i] + w_ud[i + 1])
        cosf.append(slack(lhs, rhs))
    return {
        "t": t,
        "p": p,
        "teuPen": np.array(teu),
        "dpndt": np.array(dpn),
        "cosfinite": np.array(cosf),
        "tauD_over_tauP": np.array(ratio),
    }
