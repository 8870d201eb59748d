"""Pure-Python versions of the routines in ``_kernels.pyx``.

Used when the compiled extension is unavailable or when
``PENDULUM_VPG_BACKEND=python`` is set.
"""
from __future__ import annotations

import math

import numpy as np

B_P, B_EQ, G, J_M, K_G, K_T, K_M, L_P, M_CART, M_P, R_M, R_MP, H = range(13)


def accelerations(consts, alpha, x_dot, alpha_dot, voltage):
    c = consts
    sa = math.sin(alpha)
    ca = math.cos(alpha)
    r2 = c[R_MP] * c[R_MP]
    kg2 = c[K_G] * c[K_G]
    d = 4.0 * c[M_CART] * r2 + c[M_P] * r2 + 4.0 * c[J_M] * kg2 + 3.0 * c[M_P] * r2 * sa * sa
    inertia = c[M_CART] * r2 + c[M_P] * r2 + c[J_M] * kg2
    friction = c[R_M] * r2 * c[B_EQ] + kg2 * c[K_T] * c[K_M]
    drive = c[R_MP] * c[K_G] * c[K_T] * voltage / c[R_M]
    ad2 = alpha_dot * alpha_dot
    xdd = (-3.0 * r2 * c[B_P] * ca * alpha_dot / (c[L_P] * d)
           - 4.0 * c[M_P] * c[L_P] * r2 * sa * ad2 / d
           - 4.0 * friction * x_dot / (c[R_M] * d)
           + 3.0 * c[M_P] * r2 * c[G] * ca * sa / d
           + 4.0 * drive / d)
    add = (-3.0 * inertia * c[B_P] * alpha_dot / (c[M_P] * c[L_P] * c[L_P] * d)
           - 3.0 * c[M_P] * r2 * ca * sa * ad2 / d
           - 3.0 * friction * ca * x_dot / (c[R_M] * c[L_P] * d)
           + 3.0 * inertia * c[G] * sa / (c[L_P] * d)
           + 3.0 * drive * ca / (c[L_P] * d))
    return xdd, add


def _softplus(z):
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


def integrate(consts, s0, voltages):
    consts = [float(v) for v in consts]
    h = consts[H]
    x, a, xd, ad = (float(v) for v in s0)
    out = np.empty((len(voltages) + 1, 4))
    out[0] = (x, a, xd, ad)
    for t, v in enumerate(voltages):
        xdd, add = accelerations(consts, a, xd, ad, float(v))
        xd = xd + h * xdd
        ad = ad + h * add
        x = x + h * xd
        a = a + h * ad
        out[t + 1] = (x, a, xd, ad)
    return out


def policy_rollout(w1, b1, w2, b2, consts, s0, noise, impulses, deterministic,
                   x_limit, alpha_limit):
    consts = [float(v) for v in consts]
    h = consts[H]
    n = len(noise)
    states = np.empty((n, 4))
    nxt = np.empty((n, 4))
    raw = np.empty(n)
    mus = np.empty(n)
    sigmas = np.empty(n)
    x, a, xd, ad = (float(v) for v in s0)
    terminated = False
    length = 0
    for t in range(n):
        ad = ad + float(impulses[t])
        s = np.array((x, a, xd, ad))
        states[t] = s
        hidden = np.maximum(w1 @ s + b1, 0.0)
        out = w2 @ hidden + b2
        mu = float(out[0])
        sigma = _softplus(float(out[1]))
        act = mu if deterministic else mu + sigma * float(noise[t])
        mus[t] = mu
        sigmas[t] = sigma
        raw[t] = act
        # same comparisons as the kernel, so a NaN action stays NaN
        v = act
        if v > 10.0:
            v = 10.0
        elif v < -10.0:
            v = -10.0
        xdd, add = accelerations(consts, a, xd, ad, v)
        xd = xd + h * xdd
        ad = ad + h * add
        x = x + h * xd
        a = a + h * ad
        nxt[t] = (x, a, xd, ad)
        length = t + 1
        if not (abs(x) <= x_limit and abs(a) <= alpha_limit):
            terminated = True
            break
    return (states[:length], nxt[:length], raw[:length], mus[:length],
            sigmas[:length], terminated)
