"""Hot loops for the diagonal (energy-basis) steepest-entropy-ascent dynamics.

The occupation vector is carried as log-probabilities ``q = ln p`` on the
active levels (``active[n]`` false means ``p_n = 0`` exactly, which the
dynamics preserves). In the dissipative clock ``s`` with ``ds = dt / tau`` the
equation of motion is linear-plus-mean-field in ``q``::

    dq_n/ds = dM_n = -q_n - <S> - lambda0 (e_n - <H>)
    dt/ds   = tau(q)

so backward integration toward vanishing occupations never produces
negative probabilities. After every accepted step the state is pulled back
onto ``sum p = 1, sum p e = E0`` by the canonical tilt
``q_n <- q_n + a + b e_n``.

Two interchangeable backends are provided: numba-compiled scalar loops and a
vectorized numpy path. Set ``SEA_DISABLE_NUMBA=1`` to force numpy.
"""

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SEA_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")
BACKEND = "numba" if USE_NUMBA else "numpy"

# status codes returned by the run loops
RUNNING = 0
REACHED_END = 1
CONVERGED = 2
STEP_FAILURE = 3
MAX_STEPS = 4
NONFINITE = 5

TAU_CONSTANT = 0
TAU_LOWER_BOUND = 1

HALF_HBAR_OVER_KB = 0.5


# -- scalar-loop versions (compiled by numba) --------------------------------


def _stats_loop(q, active, e):
    """Return (dM, S, H, lambda0, var_H, var_M, var_S)."""
    n = q.shape[0]
    p = np.zeros(n)
    S = 0.0
    H = 0.0
    for i in range(n):
        if active[i]:
            p[i] = math.exp(q[i])
            S -= p[i] * q[i]
            H += p[i] * e[i]
    vhh = 0.0
    vhs = 0.0
    vss = 0.0
    for i in range(n):
        if active[i]:
            dh = e[i] - H
            ds = -q[i] - S
            vhh += p[i] * dh * dh
            vhs += p[i] * dh * ds
            vss += p[i] * ds * ds
    lam = vhs / vhh if vhh > 1e-300 else 0.0
    dM = np.zeros(n)
    vmm = 0.0
    for i in range(n):
        if active[i]:
            dM[i] = -q[i] - S - lam * (e[i] - H)
            vmm += p[i] * dM[i] * dM[i]
    return dM, S, H, lam, vhh, vmm, vss


def _project_loop(q, active, e, E0):
    a_tot = 0.0
    b_tot = 0.0
    for _ in range(30):
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        for i in range(q.shape[0]):
            if active[i]:
                p = math.exp(q[i] + a_tot + b_tot * e[i])
                s0 += p
                s1 += p * e[i]
                s2 += p * e[i] * e[i]
        r0 = s0 - 1.0
        r1 = s1 - E0
        if abs(r0) < 1e-16 and abs(r1) < 1e-16:
            break
        det = s0 * s2 - s1 * s1
        if det <= 1e-300 * max(s0 * s2, 1e-300):
            a_tot -= math.log(s0)
            break
        da = -(s2 * r0 - s1 * r1) / det
        db = -(-s1 * r0 + s0 * r1) / det
        a_tot += da
        b_tot += db
        if abs(da) < 1e-17 and abs(db) < 1e-17:
            break
    out = q.copy()
    for i in range(q.shape[0]):
        if active[i]:
            out[i] = q[i] + a_tot + b_tot * e[i]
    return out


def _norm_dp_loop(q, active, dM):
    acc = 0.0
    for i in range(q.shape[0]):
        if active[i]:
            v = math.exp(q[i]) * dM[i]
            acc += v * v
    return math.sqrt(acc)


# -- vectorized numpy versions ----------------------------------------------


def _stats_vec(q, active, e):
    p = np.where(active, np.exp(np.where(active, q, 0.0)), 0.0)
    qa = np.where(active, q, 0.0)
    S = -np.dot(p, qa)
    H = np.dot(p, e)
    dh = e - H
    dsv = -qa - S
    vhh = np.dot(p, dh * dh)
    vhs = np.dot(p, dh * dsv)
    vss = np.dot(p, dsv * dsv)
    lam = vhs / vhh if vhh > 1e-300 else 0.0
    dM = np.where(active, dsv - lam * dh, 0.0)
    vmm = np.dot(p, dM * dM)
    return dM, S, H, lam, vhh, vmm, vss


def _project_vec(q, active, e, E0):
    a_tot = 0.0
    b_tot = 0.0
    ea = np.where(active, e, 0.0)
    qa = np.where(active, q, 0.0)
    for _ in range(30):
        p = np.where(active, np.exp(qa + a_tot + b_tot * ea), 0.0)
        s0 = p.sum()
        s1 = np.dot(p, ea)
        s2 = np.dot(p, ea * ea)
        r0 = s0 - 1.0
        r1 = s1 - E0
        if abs(r0) < 1e-16 and abs(r1) < 1e-16:
            break
        det = s0 * s2 - s1 * s1
        if det <= 1e-300 * max(s0 * s2, 1e-300):
            a_tot -= math.log(s0)
            break
        da = -(s2 * r0 - s1 * r1) / det
        db = -(-s1 * r0 + s0 * r1) / det
        a_tot += da
        b_tot += db
        if abs(da) < 1e-17 and abs(db) < 1e-17:
            break
    return np.where(active, q + a_tot + b_tot * e, q)


def _norm_dp_vec(q, active, dM):
    v = np.where(active, np.exp(np.where(active, q, 0.0)) * dM, 0.0)
    return math.sqrt(np.dot(v, v))


if USE_NUMBA:
    _stats = njit(cache=True)(_stats_loop)
    _project = njit(cache=True)(_project_loop)
    _norm_dp = njit(cache=True)(_norm_dp_loop)
else:
    _stats = _stats_vec
    _project = _project_vec
    _norm_dp = _norm_dp_vec


# -- run loops (same source for both backends) -------------------------------


def _tau_of(tau_kind, tau0, vhh, vmm):
    if tau_kind == TAU_CONSTANT:
        return tau0
    if vhh <= 0.0:
        return 0.0
    return HALF_HBAR_OVER_KB * math.sqrt(max(vmm, 0.0) / vhh)


def _deriv(q, active, e, tau_kind, tau0):
    dM, S, H, lam, vhh, vmm, vss = _stats(q, active, e)
    return dM, _tau_of(tau_kind, tau0, vhh, vmm)


def _run_rk4(q0, active, e, E0, tau_kind, tau0, sign, ds, n_steps, sample_every,
             t_limit, conv_tol, conv_count, max_samples):
    """Fixed-step RK4 in the dissipative clock.

    Returns (s, t, q, n_samples, status). Samples are taken every
    ``sample_every`` steps; ``t_limit`` bounds |t| (physical time span).
    """
    n = q0.shape[0]
    s_out = np.zeros(max_samples)
    t_out = np.zeros(max_samples)
    q_out = np.zeros((max_samples, n))
    q = _project(q0, active, e, E0)
    s = 0.0
    t = 0.0
    s_out[0] = 0.0
    t_out[0] = 0.0
    q_out[0, :] = q
    k = 1
    quiet = 0
    status = RUNNING
    h = sign * ds
    for step in range(1, n_steps + 1):
        k1, r1 = _deriv(q, active, e, tau_kind, tau0)
        k2, r2 = _deriv(q + 0.5 * h * k1, active, e, tau_kind, tau0)
        k3, r3 = _deriv(q + 0.5 * h * k2, active, e, tau_kind, tau0)
        k4, r4 = _deriv(q + h * k3, active, e, tau_kind, tau0)
        q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + (h / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
        q = _project(q, active, e, E0)
        s = step * h
        finite = True
        for i in range(n):
            if active[i] and not math.isfinite(q[i]):
                finite = False
        if not finite:
            status = NONFINITE
            break
        done_t = abs(t) >= t_limit * (1.0 - 1e-12)
        if step % sample_every == 0 or done_t or step == n_steps:
            if k < max_samples:
                s_out[k] = s
                t_out[k] = t
                q_out[k, :] = q
                k += 1
            dM, S, H, lam, vhh, vmm, vss = _stats(q, active, e)
            if _norm_dp(q, active, dM) < conv_tol:
                quiet += 1
            else:
                quiet = 0
            if quiet >= conv_count:
                status = CONVERGED
                break
            if done_t or (step == n_steps and tau_kind == TAU_CONSTANT):
                status = REACHED_END
                break
            if k >= max_samples:
                status = MAX_STEPS
                break
    if status == RUNNING:
        status = MAX_STEPS
    return s_out, t_out, q_out, k, status


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9
_A21 = 1.0 / 5
_A31, _A32 = 3.0 / 40, 9.0 / 40
_A41, _A42, _A43 = 44.0 / 45, -56.0 / 15, 32.0 / 9
_A51, _A52, _A53, _A54 = 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729
_A61, _A62, _A63, _A64, _A65 = 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525, -1.0 / 40,
)


def _run_dopri(q0, active, e, E0, tau_kind, tau0, sign, h0, s_sample, s_limit,
               t_limit, rtol, atol, conv_tol, conv_count, max_samples, max_steps):
    """Adaptive Dormand-Prince 5(4) in the dissipative clock.

    Steps are clipped so that every multiple of ``s_sample`` is hit exactly.
    Returns (s, t, q, n_samples, status).
    """
    n = q0.shape[0]
    s_out = np.zeros(max_samples)
    t_out = np.zeros(max_samples)
    q_out = np.zeros((max_samples, n))
    q = _project(q0, active, e, E0)
    s = 0.0
    t = 0.0
    q_out[0, :] = q
    k = 1
    quiet = 0
    status = RUNNING
    h = h0
    next_sample = s_sample
    h_min = 1e-15 * max(s_limit if math.isfinite(s_limit) else 1.0, 1.0)
    k1, r1 = _deriv(q, active, e, tau_kind, tau0)
    for _ in range(max_steps):
        h = min(h, next_sample - s, s_limit - s)
        hs = sign * h
        y2 = q + hs * (_A21 * k1)
        k2, r2 = _deriv(y2, active, e, tau_kind, tau0)
        y3 = q + hs * (_A31 * k1 + _A32 * k2)
        k3, r3 = _deriv(y3, active, e, tau_kind, tau0)
        y4 = q + hs * (_A41 * k1 + _A42 * k2 + _A43 * k3)
        k4, r4 = _deriv(y4, active, e, tau_kind, tau0)
        y5 = q + hs * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)
        k5, r5 = _deriv(y5, active, e, tau_kind, tau0)
        y6 = q + hs * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)
        k6, r6 = _deriv(y6, active, e, tau_kind, tau0)
        qn = q + hs * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        tn = t + hs * (_B1 * r1 + _B3 * r3 + _B4 * r4 + _B5 * r5 + _B6 * r6)
        k7, r7 = _deriv(qn, active, e, tau_kind, tau0)
        err = 0.0
        cnt = 0
        for i in range(n):
            if active[i]:
                ei = hs * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
                sc = atol + rtol * max(abs(q[i]), abs(qn[i]))
                err += (ei / sc) ** 2
                cnt += 1
        et = hs * (_E1 * r1 + _E3 * r3 + _E4 * r4 + _E5 * r5 + _E6 * r6 + _E7 * r7)
        err += (et / (atol + rtol * max(abs(t), abs(tn)))) ** 2
        err = math.sqrt(err / (cnt + 1))
        if not math.isfinite(err):
            err = 1e10
        if err <= 1.0:
            s = s + h
            t = tn
            q = _project(qn, active, e, E0)
            k1, r1 = _deriv(q, active, e, tau_kind, tau0)
            hit = abs(s - next_sample) <= 1e-12 * max(1.0, abs(next_sample))
            if hit:
                s = next_sample
                next_sample = next_sample + s_sample
            done_t = abs(t) >= t_limit * (1.0 - 1e-12)
            done_s = s >= s_limit * (1.0 - 1e-14)
            if done_s:
                hit = True
            if hit or done_t or done_s:
                if k < max_samples:
                    s_out[k] = sign * s
                    t_out[k] = t
                    q_out[k, :] = q
                    k += 1
                if _norm_dp(q, active, k1) < conv_tol:
                    quiet += 1
                else:
                    quiet = 0
                if quiet >= conv_count:
                    status = CONVERGED
                    break
                if done_t or done_s:
                    status = REACHED_END
                    break
                if k >= max_samples:
                    status = MAX_STEPS
                    break
            fac = 0.9 * err ** (-0.2) if err > 0 else 5.0
            h = h * min(5.0, max(0.2, fac))
        else:
            h = h * max(0.1, 0.9 * err ** (-0.2))
            if h < h_min:
                status = STEP_FAILURE
                break
    if status == RUNNING:
        status = MAX_STEPS
    return s_out, t_out, q_out, k, status


if USE_NUMBA:
    _tau_of = njit(cache=True)(_tau_of)
    _deriv = njit(cache=True)(_deriv)
    run_rk4 = njit(cache=True)(_run_rk4)
    run_dopri = njit(cache=True)(_run_dopri)
else:
    run_rk4 = _run_rk4
    run_dopri = _run_dopri

stats = _stats
project = _project


def diag_stats(q, active, e):
    """Public wrapper: (dM, S, H, lambda0, var_H, var_M, var_S)."""
    return _stats(np.ascontiguousarray(q, dtype=np.float64), np.ascontiguousarray(active, dtype=np.bool_),
                  np.ascontiguousarray(e, dtype=np.float64))
