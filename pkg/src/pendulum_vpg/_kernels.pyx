# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rollout kernel: cart-pole dynamics plus Gaussian policy inference.

Mirrors ``_fallback.py`` operation for operation; the two must agree to
rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, log1p, fabs

cnp.import_array()

# Offsets into the packed constant vector (see dynamics.PACKED_FIELDS).
cdef enum:
    B_P = 0
    B_EQ = 1
    G = 2
    J_M = 3
    K_G = 4
    K_T = 5
    K_M = 6
    L_P = 7
    M_CART = 8
    M_P = 9
    R_M = 10
    R_MP = 11
    H = 12


cdef inline void _accel(const double[::1] c, double alpha, double x_dot,
                        double alpha_dot, double v, double* xdd, double* add) noexcept nogil:
    cdef double sa = sin(alpha)
    cdef double ca = cos(alpha)
    cdef double r2 = c[R_MP] * c[R_MP]
    cdef double kg2 = c[K_G] * c[K_G]
    cdef double d = (4.0 * c[M_CART] * r2 + c[M_P] * r2 + 4.0 * c[J_M] * kg2
                     + 3.0 * c[M_P] * r2 * sa * sa)
    cdef double inertia = c[M_CART] * r2 + c[M_P] * r2 + c[J_M] * kg2
    cdef double friction = c[R_M] * r2 * c[B_EQ] + kg2 * c[K_T] * c[K_M]
    cdef double drive = c[R_MP] * c[K_G] * c[K_T] * v / c[R_M]
    cdef double ad2 = alpha_dot * alpha_dot
    xdd[0] = (-3.0 * r2 * c[B_P] * ca * alpha_dot / (c[L_P] * d)
              - 4.0 * c[M_P] * c[L_P] * r2 * sa * ad2 / d
              - 4.0 * friction * x_dot / (c[R_M] * d)
              + 3.0 * c[M_P] * r2 * c[G] * ca * sa / d
              + 4.0 * drive / d)
    add[0] = (-3.0 * inertia * c[B_P] * alpha_dot / (c[M_P] * c[L_P] * c[L_P] * d)
              - 3.0 * c[M_P] * r2 * ca * sa * ad2 / d
              - 3.0 * friction * ca * x_dot / (c[R_M] * c[L_P] * d)
              + 3.0 * inertia * c[G] * sa / (c[L_P] * d)
              + 3.0 * drive * ca / (c[L_P] * d))


cdef inline double _softplus(double z) noexcept nogil:
    if z > 0.0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


def accelerations(double[::1] consts, double alpha, double x_dot, double alpha_dot, double voltage):
    cdef double xdd, add
    _accel(consts, alpha, x_dot, alpha_dot, voltage, &xdd, &add)
    return xdd, add


def integrate(double[::1] consts, double[::1] s0, double[::1] voltages):
    """Open-loop integration; returns the (n + 1, 4) state history."""
    cdef Py_ssize_t n = voltages.shape[0], t
    out = np.empty((n + 1, 4), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double x = s0[0], a = s0[1], xd = s0[2], ad = s0[3], xdd, add
    cdef double h = consts[H]
    o[0, 0] = x; o[0, 1] = a; o[0, 2] = xd; o[0, 3] = ad
    with nogil:
        for t in range(n):
            _accel(consts, a, xd, ad, voltages[t], &xdd, &add)
            xd = xd + h * xdd
            ad = ad + h * add
            x = x + h * xd
            a = a + h * ad
            o[t + 1, 0] = x; o[t + 1, 1] = a; o[t + 1, 2] = xd; o[t + 1, 3] = ad
    return out


def policy_rollout(double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
                   double[::1] consts, double[::1] s0, double[::1] noise,
                   double[::1] impulses, bint deterministic,
                   double x_limit, double alpha_limit):
    """Roll out the Gaussian policy for at most ``len(noise)`` steps.

    ``impulses[t]`` is added to alpha_dot before the policy sees step ``t``.
    Returns ``(states, next_states, raw, mu, sigma, terminated)`` truncated to
    the episode length.
    """
    cdef Py_ssize_t n = noise.shape[0], width = b1.shape[0]
    cdef Py_ssize_t t, j, length = 0
    states_arr = np.empty((n, 4), dtype=np.float64)
    next_arr = np.empty((n, 4), dtype=np.float64)
    raw_arr = np.empty(n, dtype=np.float64)
    mu_arr = np.empty(n, dtype=np.float64)
    sigma_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] st = states_arr
    cdef double[:, ::1] nx = next_arr
    cdef double[::1] raw = raw_arr
    cdef double[::1] mus = mu_arr
    cdef double[::1] sigmas = sigma_arr
    cdef double x = s0[0], a = s0[1], xd = s0[2], ad = s0[3]
    cdef double h = consts[H]
    cdef double hid, mu, pre_sigma, sigma, act, v, xdd, add
    cdef bint terminated = False

    with nogil:
        for t in range(n):
            ad = ad + impulses[t]
            st[t, 0] = x; st[t, 1] = a; st[t, 2] = xd; st[t, 3] = ad
            mu = b2[0]
            pre_sigma = b2[1]
            for j in range(width):
                hid = b1[j] + w1[j, 0] * x + w1[j, 1] * a + w1[j, 2] * xd + w1[j, 3] * ad
                if hid > 0.0:
                    mu = mu + w2[0, j] * hid
                    pre_sigma = pre_sigma + w2[1, j] * hid
            sigma = _softplus(pre_sigma)
            if deterministic:
                act = mu
            else:
                act = mu + sigma * noise[t]
            mus[t] = mu
            sigmas[t] = sigma
            raw[t] = act
            v = act
            if v > 10.0:
                v = 10.0
            elif v < -10.0:
                v = -10.0
            _accel(consts, a, xd, ad, v, &xdd, &add)
            xd = xd + h * xdd
            ad = ad + h * add
            x = x + h * xd
            a = a + h * ad
            nx[t, 0] = x; nx[t, 1] = a; nx[t, 2] = xd; nx[t, 3] = ad
            length = t + 1
            # Negated comparisons so a NaN state also terminates.
            if not (fabs(x) <= x_limit and fabs(a) <= alpha_limit):
                terminated = True
                break

    return (states_arr[:length], next_arr[:length], raw_arr[:length],
            mu_arr[:length], sigma_arr[:length], bool(terminated))
