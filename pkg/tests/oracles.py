"""Independent reference implementations used only by the tests.

Written straight from the published equations with literal constants, sharing
no code with the package.
"""
import math

# Identified rig constants.
B_P = 0.0024
B_EQ = 5.4
G = 9.8
J_M = 3.90e-7
K_G = 3.71
K_T = 0.00767
K_M = 0.00767
L_P = 0.3302
M = 0.94
M_P = 0.230
R_M = 2.6
R_MP = 6.35e-3
H = 0.02


def accel(alpha, xd, ad, v):
    """Five-term horizontal and angular accelerations."""
    s = math.sin(alpha)
    c = math.cos(alpha)
    D = 4 * M * R_MP**2 + M_P * R_MP**2 + 4 * J_M * K_G**2 + 3 * M_P * R_MP**2 * s**2
    xdd = (-(3 * R_MP**2 * B_P * c * ad) / (L_P * D)
           - (4 * M_P * L_P * R_MP**2 * s * ad**2) / D
           - (4 * (R_M * R_MP**2 * B_EQ + K_G**2 * K_T * K_M) * xd) / (R_M * D)
           + (3 * M_P * R_MP**2 * G * c * s) / D
           + (4 * R_MP * K_G * K_T * v) / (R_M * D))
    add = (-(3 * (M * R_MP**2 + M_P * R_MP**2 + J_M * K_G**2) * B_P * ad) / (M_P * L_P**2 * D)
           - (3 * M_P * R_MP**2 * c * s * ad**2) / D
           - (3 * (R_M * R_MP**2 * B_EQ + K_G**2 * K_T * K_M) * c * xd) / (R_M * L_P * D)
           + (3 * (M * R_MP**2 + M_P * R_MP**2 + J_M * K_G**2) * G * s) / (L_P * D)
           + (3 * R_MP * K_G * K_T * c * v) / (R_M * L_P * D))
    return xdd, add


def step(x, alpha, xd, ad, v):
    """Symplectic Euler: velocities first, positions from the new velocities."""
    xdd, add = accel(alpha, xd, ad, v)
    xd1 = xd + H * xdd
    ad1 = ad + H * add
    return x + H * xd1, alpha + H * ad1, xd1, ad1


def two_steps(state, v1, v2):
    return step(*step(*state, v1), v2)


def brute_force_returns(rewards, gamma):
    n = len(rewards)
    return [sum(gamma ** (k - t) * rewards[k] for k in range(t, n)) for t in range(n)]


def episode_loss_extended(w1, b1, w2, b2, states, raw, adv, eps):
    """-sum R log pi + eps sum H, evaluated in extended precision.

    Finite differences of this carry about a thousand times less rounding
    noise than a float64 evaluation, so they can check small gradient entries.
    """
    import numpy as np

    ld = np.longdouble
    w1, b1, w2, b2 = (np.asarray(a, dtype=ld) for a in (w1, b1, w2, b2))
    s = np.asarray(states, dtype=ld)
    hidden = np.maximum(s @ w1.T + b1, ld(0))
    out = hidden @ w2.T + b2
    mu = out[:, 0]
    z = out[:, 1]
    sigma = np.where(z > 0, z + np.log1p(np.exp(-z)), np.log1p(np.exp(z)))
    two_pi = 2 * ld(np.pi)
    a = np.asarray(raw, dtype=ld)
    logp = -np.log(sigma) - np.log(np.sqrt(two_pi)) - (a - mu) ** 2 / (2 * sigma**2)
    ent = np.log(sigma * np.sqrt(two_pi * np.exp(ld(1))))
    return -np.dot(np.asarray(adv, dtype=ld), logp) + ld(eps) * ent.sum()


def fd_gradient_extended(params, states, raw, adv, eps, step=1e-6):
    """Central differences of ``episode_loss_extended`` over every flat parameter."""
    import numpy as np

    width = params.b1.shape[0]
    flat = np.concatenate([a.ravel() for a in (params.w1, params.b1, params.w2, params.b2)])
    flat = flat.astype(np.longdouble)
    sizes = np.cumsum([4 * width, width, 2 * width])

    def loss(v):
        w1, b1, w2, b2 = np.split(v, sizes)
        return episode_loss_extended(w1.reshape(width, 4), b1, w2.reshape(2, width), b2,
                                     states, raw, adv, eps)

    out = np.empty(flat.size)
    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += step
        down[i] -= step
        out[i] = float((loss(up) - loss(down)) / (2 * np.longdouble(step)))
    return out
