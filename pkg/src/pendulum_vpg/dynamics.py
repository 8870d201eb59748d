"""Cart-pole equations of motion and the semi-implicit Euler update.

States are 4-vectors ``[x, alpha, x_dot, alpha_dot]`` (metres, radians, and
their rates). ``alpha`` is measured counterclockwise from vertical, so the
upright equilibrium is the origin.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import IO, NamedTuple, Sequence

import numpy as np

# Order used when packing constants for the compiled kernels.
PACKED_FIELDS = (
    "b_p", "b_eq", "g", "j_m", "k_g", "k_t", "k_m",
    "l_p", "m_cart", "m_p", "r_m", "r_mp", "h",
)


@dataclass(frozen=True)
class ModelParameters:
    """Physical constants of the Quanser linear cart and pendulum.

    Defaults are the identified values of the lab rig, a 50 Hz integration
    step and the episode bounds used during training.
    """

    b_p: float = 0.0024  # N m s / rad, pendulum axis damping
    b_eq: float = 5.4  # N m s / rad, damping seen at motor pinion
    g: float = 9.8
    i_p: float = 8.539e-3  # kg m^2, about CoG; unused by the EOM
    j_p: float = 3.344e-2  # kg m^2, at hinge; unused by the EOM
    j_m: float = 3.90e-7  # kg m^2, rotor
    k_g: float = 3.71
    k_t: float = 0.00767  # N m / A
    k_m: float = 0.00767  # V s / rad
    l_p: float = 0.3302  # m, pivot to CoG
    m_cart: float = 0.94
    m_p: float = 0.230
    r_m: float = 2.6  # ohm
    r_mp: float = 6.35e-3  # m
    h: float = 1.0 / 50.0
    track_half_length: float = 0.4
    alpha_limit: float = math.radians(12.0)

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value!r}")
        positive = ("j_m", "k_g", "l_p", "m_cart", "m_p", "r_m", "r_mp", "h",
                    "track_half_length", "alpha_limit")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("b_p", "b_eq", "g", "i_p", "j_p", "k_t", "k_m"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def packed(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PACKED_FIELDS], dtype=np.float64)

    def to_dict(self) -> dict:
        d = asdict(self)
        # 12 significant digits so that e.g. radians(12) comes back as 12.
        d["alpha_limit_deg"] = float(f"{math.degrees(d.pop('alpha_limit')):.12g}")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParameters":
        data = dict(data)
        if "alpha_limit_deg" in data:
            if "alpha_limit" in data:
                raise ValueError("give either alpha_limit or alpha_limit_deg, not both")
            data["alpha_limit"] = math.radians(float(data.pop("alpha_limit_deg")))
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown model parameter(s): {', '.join(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def load_parameters(stream: IO[str]) -> ModelParameters:
    """Read a JSON document of parameter overrides; missing keys keep defaults."""
    data = json.load(stream)
    if not isinstance(data, dict):
        raise ValueError("model parameter document must be a JSON object")
    return ModelParameters.from_dict(data)


class Acceleration(NamedTuple):
    x_ddot: float
    alpha_ddot: float


def make_state(x: float = 0.0, alpha: float = 0.0, x_dot: float = 0.0,
               alpha_dot: float = 0.0) -> np.ndarray:
    return np.array([x, alpha, x_dot, alpha_dot], dtype=np.float64)


def denominator(params: ModelParameters, alpha: float) -> float:
    """Common denominator D(alpha) of both accelerations; always positive."""
    r2 = params.r_mp * params.r_mp
    s = math.sin(alpha)
    return (4.0 * params.m_cart * r2 + params.m_p * r2
            + 4.0 * params.j_m * params.k_g ** 2
            + 3.0 * params.m_p * r2 * s * s)


def accelerations(params: ModelParameters, state: Sequence[float], voltage: float) -> Acceleration:
    p = params
    _, alpha, x_dot, alpha_dot = state
    sa, ca = math.sin(alpha), math.cos(alpha)
    r2 = p.r_mp * p.r_mp
    d = denominator(p, alpha)
    inertia = p.m_cart * r2 + p.m_p * r2 + p.j_m * p.k_g ** 2
    friction = p.r_m * r2 * p.b_eq + p.k_g ** 2 * p.k_t * p.k_m
    drive = p.r_mp * p.k_g * p.k_t * voltage / p.r_m

    x_ddot = (
        -3.0 * r2 * p.b_p * ca * alpha_dot / (p.l_p * d)
        - 4.0 * p.m_p * p.l_p * r2 * sa * alpha_dot ** 2 / d
        - 4.0 * friction * x_dot / (p.r_m * d)
        + 3.0 * p.m_p * r2 * p.g * ca * sa / d
        + 4.0 * drive / d
    )
    alpha_ddot = (
        -3.0 * inertia * p.b_p * alpha_dot / (p.m_p * p.l_p ** 2 * d)
        - 3.0 * p.m_p * r2 * ca * sa * alpha_dot ** 2 / d
        - 3.0 * friction * ca * x_dot / (p.r_m * p.l_p * d)
        + 3.0 * inertia * p.g * sa / (p.l_p * d)
        + 3.0 * drive * ca / (p.l_p * d)
    )
    return Acceleration(x_ddot, alpha_ddot)


def step(params: ModelParameters, state: Sequence[float], voltage: float) -> np.ndarray:
    """Advance one step of length ``params.h``.

    Velocities are updated from the accelerations at the current state, then
    positions are advanced with the *updated* velocities (symplectic Euler).
    """
    x, alpha, x_dot, alpha_dot = state
    acc = accelerations(params, state, voltage)
    h = params.h
    x_dot_next = x_dot + h * acc.x_ddot
    alpha_dot_next = alpha_dot + h * acc.alpha_ddot
    return np.array([x + h * x_dot_next, alpha + h * alpha_dot_next,
                     x_dot_next, alpha_dot_next], dtype=np.float64)


def state_derivative(params: ModelParameters, state: Sequence[float], voltage: float) -> np.ndarray:
    """Continuous-time right-hand side ``[x_dot, alpha_dot, x_ddot, alpha_ddot]``."""
    acc = accelerations(params, state, voltage)
    return np.array([state[2], state[3], acc.x_ddot, acc.alpha_ddot], dtype=np.float64)


def linearize(params: ModelParameters, at: Sequence[float] | None = None,
              at_voltage: float = 0.0, delta: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of the continuous dynamics by central differences.

    Returns ``(A, B)`` with ``A`` 4x4 and ``B`` a length-4 vector.
    """
    at = make_state() if at is None else np.asarray(at, dtype=np.float64)
    a = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = delta
        a[:, j] = (state_derivative(params, at + e, at_voltage)
                   - state_derivative(params, at - e, at_voltage)) / (2.0 * delta)
    b = (state_derivative(params, at, at_voltage + delta)
         - state_derivative(params, at, at_voltage - delta)) / (2.0 * delta)
    # Kinematic rows are exact; differencing would only add rounding noise.
    a[0] = (0.0, 0.0, 1.0, 0.0)
    a[1] = (0.0, 0.0, 0.0, 1.0)
    b[:2] = 0.0
    return a, b
