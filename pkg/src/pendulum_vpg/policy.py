"""One-hidden-layer Gaussian policy with hand-written backpropagation.

Network: ``state (4) -> ReLU hidden (64) -> [mu (linear), sigma (softplus)]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
ENTROPY_CONST = 0.5 * math.log(2.0 * math.pi * math.e)
VOLTAGE_LIMIT = 10.0

PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass
class PolicyParameters:
    """Weights and biases; row 0 of ``w2``/``b2`` feeds the mean head, row 1 the std head."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        for name in PARAM_NAMES:
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))
        width = self.b1.shape[0] if self.b1.ndim == 1 else -1
        expected = {"w1": (width, 4), "b1": (width,), "w2": (2, width), "b2": (2,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape or width < 1:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def hidden_width(self) -> int:
        return self.b1.shape[0]

    def arrays(self) -> Iterator[np.ndarray]:
        return (getattr(self, name) for name in PARAM_NAMES)

    def copy(self) -> "PolicyParameters":
        return PolicyParameters(*(a.copy() for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_flat(cls, vector: np.ndarray, hidden_width: int) -> "PolicyParameters":
        shapes = ((hidden_width, 4), (hidden_width,), (2, hidden_width), (2,))
        out, pos = [], 0
        for shape in shapes:
            size = int(np.prod(shape))
            out.append(np.asarray(vector[pos:pos + size], dtype=np.float64).reshape(shape))
            pos += size
        if pos != len(vector):
            raise ValueError("flat vector length does not match hidden width")
        return cls(*out)

    def zeros_like(self) -> "PolicyParameters":
        return PolicyParameters(*(np.zeros_like(a) for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


# Gradients share the parameter layout.
PolicyGradient = PolicyParameters


class ActionDistribution(NamedTuple):
    mu: float
    sigma: float


class ForwardCache(NamedTuple):
    state: np.ndarray
    pre_hidden: np.ndarray
    hidden: np.ndarray
    pre_sigma: float


def init_policy(hidden_width: int = 64, rng: np.random.Generator | None = None,
                init_sigma: float | None = None) -> PolicyParameters:
    """Fan-in scaled normal weights (He for the ReLU layer), zero biases.

    ``init_sigma`` optionally sets the std-head bias so the policy starts
    with that exploration noise (in volts) instead of ``ln 2``.
    """
    if hidden_width < 1:
        raise ValueError("hidden_width must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    w1 = rng.standard_normal((hidden_width, 4)) * math.sqrt(2.0 / 4)
    w2 = rng.standard_normal((2, hidden_width)) * math.sqrt(1.0 / hidden_width)
    b2 = np.zeros(2)
    if init_sigma is not None:
        if not init_sigma > 0:
            raise ValueError("init_sigma must be positive")
        b2[1] = inverse_softplus(init_sigma)
    return PolicyParameters(w1, np.zeros(hidden_width), w2, b2)


def inverse_softplus(y: float) -> float:
    return y + math.log(-math.expm1(-y))


def softplus(z):
    """ln(1 + e^z) without overflow for large |z|."""
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z)))


def forward(params: PolicyParameters, state) -> tuple[ActionDistribution, ForwardCache]:
    s = np.asarray(state, dtype=np.float64)
    pre = params.w1 @ s + params.b1
    hidden = np.maximum(pre, 0.0)
    out = params.w2 @ hidden + params.b2
    dist = ActionDistribution(float(out[0]), float(softplus(out[1])))
    return dist, ForwardCache(s, pre, hidden, float(out[1]))


def forward_batch(params: PolicyParameters, states: np.ndarray):
    """Vectorised forward pass over a (T, 4) batch.

    Returns ``(mu, sigma, pre_hidden, hidden, pre_sigma)``.
    """
    pre = states @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    out = hidden @ params.w2.T + params.b2
    return out[:, 0], softplus(out[:, 1]), pre, hidden, out[:, 1]


def deterministic_action(params: PolicyParameters, state) -> float:
    return forward(params, state)[0].mu


def sample(dist: ActionDistribution, rng: np.random.Generator) -> float:
    return dist.mu + dist.sigma * float(rng.standard_normal())


def clip_action(raw):
    out = np.clip(raw, -VOLTAGE_LIMIT, VOLTAGE_LIMIT)
    return out if np.ndim(raw) else float(out)


def log_prob(dist: ActionDistribution, raw_action):
    """Gaussian log-density at the pre-clip action. Works elementwise on arrays."""
    mu, sigma = dist
    return -np.log(sigma) - LOG_SQRT_2PI - (raw_action - mu) ** 2 / (2.0 * sigma ** 2)


def entropy(dist: ActionDistribution):
    return np.log(dist.sigma) + ENTROPY_CONST


def episode_objective(params: PolicyParameters, states, raw_actions, normalized_returns,
                      epsilon: float) -> float:
    """L = -sum_t R_t log pi(a_t | s_t) + epsilon * sum_t H_t."""
    mu, sigma, *_ = forward_batch(params, np.asarray(states, dtype=np.float64))
    lp = log_prob(ActionDistribution(mu, sigma), np.asarray(raw_actions))
    return float(-np.dot(normalized_returns, lp) + epsilon * np.sum(entropy(ActionDistribution(mu, sigma))))


def backprop_episode(params: PolicyParameters, trace, normalized_returns,
                     epsilon: float = 0.0) -> PolicyGradient:
    """Exact gradient of the episode loss with respect to every parameter.

    ``trace`` needs ``states`` (T, 4) and ``raw_actions`` (T,). Returns are
    treated as constants.
    """
    states = np.asarray(trace.states, dtype=np.float64)
    raw = np.asarray(trace.raw_actions, dtype=np.float64)
    adv = np.asarray(normalized_returns, dtype=np.float64)
    if not (len(states) == len(raw) == len(adv)):
        raise ValueError(f"length mismatch: {len(states)} states, {len(raw)} actions, "
                         f"{len(adv)} returns")

    mu, sigma, pre, hidden, pre_sigma = forward_batch(params, states)
    diff = raw - mu
    inv_var = 1.0 / sigma ** 2
    # d log_prob / d mu and d log_prob / d sigma
    dlp_dmu = diff * inv_var
    dlp_dsigma = -1.0 / sigma + diff ** 2 * inv_var / sigma
    d_mu = -adv * dlp_dmu
    d_sigma = -adv * dlp_dsigma + epsilon / sigma
    d_out = np.stack([d_mu, d_sigma * _sigmoid(pre_sigma)], axis=1)

    g_w2 = d_out.T @ hidden
    g_b2 = d_out.sum(axis=0)
    d_pre = (d_out @ params.w2) * (pre > 0.0)
    g_w1 = d_pre.T @ states
    g_b1 = d_pre.sum(axis=0)
    return PolicyGradient(g_w1, g_b1, g_w2, g_b2)
