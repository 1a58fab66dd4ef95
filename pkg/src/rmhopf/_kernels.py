"""Compiled inner loops for the simulators.

The kernels never draw random numbers themselves. They consume caller
supplied buffers of uniforms or standard normals and report how many
they used, so a trajectory is a pure function of the random stream no
matter how that stream is chunked. Mutable loop state lives in small
arrays that the caller passes back on the next call.
"""

import math

import numpy as np
from numba import njit

RUNNING = 0
FINISHED = 1
ABSORBED = 2
STEP_FAILURE = 3

# closure codes for the diffusion kernel
BERNOULLI = 0
EFFECTIVE = 1
SPLIT = 2

MAX_REDRAWS = 100
CLAMP_FLOOR = 1e-9


@njit(cache=True, nogil=True)
def _channel_rate(kind, weight, n, p, m, c, k, omega):
    if kind == 0:
        base = n
    elif kind == 1:
        base = n * n / (k * omega)
    elif kind == 2:
        base = c * p
    else:
        base = m * n * p / (omega + n)
    return weight * base


@njit(cache=True, nogil=True)
def ssa_advance(fstate, istate, kinds, weights, dn, dp, m, c, k, omega, t_end,
                u, sample_times, out_n, out_p):
    """Gillespie direct method on integer counts.

    ``fstate = [t, n, p]``; ``istate = [status, next_sample, n_events]``.
    Each event uses two uniforms: one for the waiting time, one for the
    channel. Returns the number of uniforms consumed.
    """
    t, n, p = fstate[0], fstate[1], fstate[2]
    status, ks, events = istate[0], istate[1], istate[2]
    nch = kinds.shape[0]
    rates = np.empty(nch)
    nsamp = sample_times.shape[0]
    i = 0
    while i + 1 < u.shape[0]:
        a0 = 0.0
        for j in range(nch):
            r = _channel_rate(kinds[j], weights[j], n, p, m, c, k, omega)
            rates[j] = r
            a0 += r
        if a0 <= 0.0:
            status = ABSORBED
            break
        t_next = t - math.log(1.0 - u[i]) / a0
        while ks < nsamp and sample_times[ks] < t_next:
            out_n[ks] = n
            out_p[ks] = p
            ks += 1
        if t_next > t_end:
            t = t_end
            status = FINISHED
            i += 1
            break
        target = u[i + 1] * a0
        acc = 0.0
        pick = nch - 1
        while rates[pick] <= 0.0:
            pick -= 1
        for j in range(nch):
            acc += rates[j]
            if target < acc and rates[j] > 0.0:
                pick = j
                break
        n += dn[pick]
        p += dp[pick]
        t = t_next
        events += 1
        i += 2
        if n <= 0.0 or p <= 0.0:
            status = ABSORBED
            break
    fstate[0], fstate[1], fstate[2] = t, n, p
    istate[0], istate[1], istate[2] = status, ks, events
    return i


@njit(cache=True, nogil=True)
def _covariance(closure, n, p, m, c, k, omega, e):
    f = m * n * p / (1.0 + n)
    q11 = (n + n * n / k + f) / omega
    q22 = c * p / omega
    if closure == BERNOULLI:
        q12 = -e * f / omega
        q22 += e * f / omega
    elif closure == EFFECTIVE:
        q12 = -e * f / omega
        q22 += e * e * f / omega
    else:
        q12 = 0.0
        q22 += e * f / omega
    return q11, q12, q22


@njit(cache=True, nogil=True)
def _factor(q11, q12, q22):
    """Lower-triangular factor of a 2x2 PSD matrix; ok=False if not PSD."""
    big = max(abs(q11), abs(q12), abs(q22))
    tol = 1e-12 * big
    det = q11 * q22 - q12 * q12
    scale = abs(q11 * q22) + q12 * q12
    if q11 < -tol or q22 < -tol or det < -1e-12 * scale:
        return 0.0, 0.0, 0.0, False
    if q11 <= tol:
        return 0.0, 0.0, math.sqrt(max(q22, 0.0)), True
    l11 = math.sqrt(q11)
    l21 = q12 / l11
    schur = q22 - l21 * l21
    l22 = math.sqrt(schur) if (det > 1e-14 * scale and schur > 0.0) else 0.0
    return l11, l21, l22, True


@njit(cache=True, nogil=True)
def em_advance(fstate, istate, closure, m, c, k, omega, e, dt, n_steps, stride,
               absorbing, z, out_n, out_p):
    """Euler-Maruyama for the density diffusion.

    ``fstate = [n, p]``; ``istate = [status, step, next_sample, clamps,
    boundary]`` with boundary bit 1 for prey at zero and bit 2 for
    predator at zero. Samples are taken every ``stride`` steps, starting
    with the initial state. Returns the number of normals consumed.
    """
    n, p = fstate[0], fstate[1]
    status, step, ks, clamps, boundary = istate[0], istate[1], istate[2], istate[3], istate[4]
    nsamp = out_n.shape[0]
    sqdt = math.sqrt(dt)
    need = 2 if absorbing else 2 * MAX_REDRAWS
    i = 0
    while status == RUNNING:
        if ks < nsamp and step == ks * stride:
            out_n[ks] = n
            out_p[ks] = p
            ks += 1
        if step >= n_steps:
            status = FINISHED
            break
        if i + need > z.shape[0]:
            break
        sat = m * n / (1.0 + n)
        bn = n * (1.0 - n / k) - sat * p
        bp = p * (sat - c)
        q11, q12, q22 = _covariance(closure, n, p, m, c, k, omega, e)
        l11, l21, l22, ok = _factor(q11, q12, q22)
        if not ok:
            status = STEP_FAILURE
            break
        mn = n + bn * dt
        mp = p + bp * dt
        if absorbing:
            nn = mn + sqdt * (l11 * z[i])
            pp = mp + sqdt * (l21 * z[i] + l22 * z[i + 1])
            i += 2
            step += 1
            if nn <= 0.0 or pp <= 0.0:
                if nn <= 0.0:
                    boundary |= 1
                if pp <= 0.0:
                    boundary |= 2
                n = max(nn, 0.0)
                p = max(pp, 0.0)
                status = ABSORBED
                break
            n, p = nn, pp
        else:
            nn = 0.0
            pp = 0.0
            for _ in range(MAX_REDRAWS):
                nn = mn + sqdt * (l11 * z[i])
                pp = mp + sqdt * (l21 * z[i] + l22 * z[i + 1])
                i += 2
                if nn > 0.0 and pp > 0.0:
                    break
            if nn <= 0.0 or pp <= 0.0:
                clamps += 1
                nn = max(nn, CLAMP_FLOOR)
                pp = max(pp, CLAMP_FLOOR)
            n, p = nn, pp
            step += 1
    fstate[0], fstate[1] = n, p
    istate[0], istate[1], istate[2], istate[3], istate[4] = status, step, ks, clamps, boundary
    return i


@njit(cache=True, nogil=True)
def ou_advance(fstate, istate, j11, j12, j21, j22, b11, b21, b22, dt, n_steps, stride,
               z, out_n, out_p):
    """Euler-Maruyama for ``dy = J y dt + B dW`` with constant lower-triangular ``B``.

    ``fstate = [y1, y2]``; ``istate = [status, step, next_sample]``.
    """
    y1, y2 = fstate[0], fstate[1]
    status, step, ks = istate[0], istate[1], istate[2]
    nsamp = out_n.shape[0]
    sqdt = math.sqrt(dt)
    i = 0
    while True:
        if ks < nsamp and step == ks * stride:
            out_n[ks] = y1
            out_p[ks] = y2
            ks += 1
        if step >= n_steps:
            status = FINISHED
            break
        if i + 2 > z.shape[0]:
            break
        d1 = (j11 * y1 + j12 * y2) * dt + sqdt * (b11 * z[i])
        d2 = (j21 * y1 + j22 * y2) * dt + sqdt * (b21 * z[i] + b22 * z[i + 1])
        y1 += d1
        y2 += d2
        i += 2
        step += 1
    fstate[0], fstate[1] = y1, y2
    istate[0], istate[1], istate[2] = status, step, ks
    return i
