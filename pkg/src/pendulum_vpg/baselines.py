"""Classical PID and LQR balance controllers for comparison with the learned policy."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import dynamics
from .dynamics import ModelParameters
from .policy import VOLTAGE_LIMIT


class RiccatiError(RuntimeError):
    """The Riccati iteration failed to reach the residual tolerance."""


@dataclass(frozen=True)
class PidConfig:
    k_p: float = 0.0
    k_i: float = 0.0
    k_d: float = 0.0
    setpoint: float = 0.0
    u_min: float = -VOLTAGE_LIMIT
    u_max: float = VOLTAGE_LIMIT

    def __post_init__(self) -> None:
        if not all(np.isfinite([self.k_p, self.k_i, self.k_d, self.setpoint])):
            raise ValueError("PID gains and setpoint must be finite")
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be below u_max")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0


def pid_step(config: PidConfig, state: PidState, error: float, h: float) -> tuple[float, PidState]:
    """One rectangle-rule PID tick with a backward-difference derivative.

    The integral is frozen whenever the unclipped output saturates.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    candidate = state.integral + error * h
    u = (config.k_p * error + config.k_i * candidate
         + config.k_d * (error - state.prev_error) / h)
    clipped = min(config.u_max, max(config.u_min, u))
    integral = state.integral if clipped != u else candidate
    return clipped, PidState(integral, error)


class PidController:
    """Stateful ``state -> voltage`` wrapper acting on the pole angle error."""

    def __init__(self, config: PidConfig, h: float):
        self.config = config
        self.h = h
        self.state = PidState()

    def reset(self) -> None:
        self.state = PidState()

    def __call__(self, s) -> float:
        u, self.state = pid_step(self.config, self.state, self.config.setpoint - s[1], self.h)
        return u


@dataclass(frozen=True)
class LqrConfig:
    q: np.ndarray = field(default_factory=lambda: np.diag([5.0, 50.0, 1.0, 1.0]))
    r: float = 1.0

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=np.float64)
        object.__setattr__(self, "q", q)
        if q.shape != (4, 4):
            raise ValueError(f"q must be 4x4, got {q.shape}")
        if not np.allclose(q, q.T, rtol=0, atol=1e-12):
            raise ValueError("q must be symmetric")
        if np.linalg.eigvalsh(q).min() < -1e-12:
            raise ValueError("q must be positive semidefinite")
        if not self.r > 0:
            raise ValueError("r must be positive")


def riccati_residual(a, b, q, r, p) -> float:
    a, b, q, r = _as_matrices(a, b, q, r)
    res = a.T @ p + p @ a - p @ b @ np.linalg.solve(r, b.T @ p) + q
    return float(np.linalg.norm(res, "fro"))


def _as_matrices(a, b, q, r):
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    b = b.reshape(a.shape[0], -1)
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    return a, b, q, r


def solve_riccati(a, b, q, r, tol: float = 1e-8, max_iter: int = 50) -> np.ndarray:
    """Stabilising solution of A'P + PA - P B R^-1 B' P + Q = 0.

    An ordered Schur decomposition of the Hamiltonian gives the initial
    estimate; Newton-Kleinman iterations then polish it until the Frobenius
    residual drops below ``tol``.
    """
    a, b, q, r = _as_matrices(a, b, q, r)
    n = a.shape[0]
    g = b @ np.linalg.solve(r, b.T)
    ham = np.block([[a, -g], [-q, -a.T]])
    t, z, sdim = scipy.linalg.schur(ham, output="real", sort="lhp")
    if sdim != n:
        raise RiccatiError(f"Hamiltonian has {sdim} stable eigenvalues, expected {n}; "
                           "(A, B) may not be stabilisable")
    try:
        p = np.linalg.solve(z[:n, :n].T, z[n:, :n].T).T
    except np.linalg.LinAlgError as exc:
        raise RiccatiError("stable invariant subspace is singular; "
                           "(A, B) may not be stabilisable") from exc
    p = 0.5 * (p + p.T)

    res = riccati_residual(a, b, q, r, p)
    for _ in range(max_iter):
        if res < tol:
            break
        k = np.linalg.solve(r, b.T @ p)
        ak = a - b @ k
        p_new = scipy.linalg.solve_continuous_lyapunov(ak.T, -(q + k.T @ r @ k))
        p_new = 0.5 * (p_new + p_new.T)
        res_new = riccati_residual(a, b, q, r, p_new)
        if not res_new < res:
            break
        p, res = p_new, res_new
    if not res < tol:
        raise RiccatiError(f"Riccati residual {res:.3e} above tolerance {tol:.1e}")
    return p


def lqr_gain(a, b, q, r) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(K, P)`` with ``K = R^-1 B' P`` as a flat gain vector."""
    p = solve_riccati(a, b, q, r)
    a, b, q, r = _as_matrices(a, b, q, r)
    k = np.linalg.solve(r, b.T @ p)
    return k.ravel(), p


def closed_loop_eigenvalues(a, b, k) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64).reshape(-1, 1)
    return np.linalg.eigvals(np.asarray(a) - b @ np.atleast_2d(k))


def lqr_control(k, state) -> float:
    u = -float(np.dot(k, state))
    return min(VOLTAGE_LIMIT, max(-VOLTAGE_LIMIT, u))


@dataclass
class LqrDesign:
    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    p: np.ndarray
    q: np.ndarray = field(default_factory=lambda: LqrConfig().q)
    r: float = 1.0

    @property
    def residual(self) -> float:
        return riccati_residual(self.a, self.b, self.q, self.r, self.p)

    def __call__(self, state) -> float:
        return lqr_control(self.k, state)


def design_lqr(params: ModelParameters | None = None, config: LqrConfig | None = None) -> LqrDesign:
    """Linearise at the upright equilibrium and solve for the LQR gain."""
    params = ModelParameters() if params is None else params
    config = LqrConfig() if config is None else config
    a, b = dynamics.linearize(params)
    k, p = lqr_gain(a, b, config.q, config.r)
    return LqrDesign(a, b, k, p, config.q, config.r)
