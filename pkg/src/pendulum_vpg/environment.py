"""Episode semantics: initial states, termination, rewards, disturbances, rollouts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import dynamics
from ._backend import kernels
from .dynamics import ModelParameters
from .policy import ActionDistribution, PolicyParameters, clip_action, entropy, log_prob


@dataclass(frozen=True)
class EnvConfig:
    params: ModelParameters = field(default_factory=ModelParameters)
    init_x_bound: float = 0.4
    init_alpha_bound: float = math.radians(12.0)
    init_velocity_bound: float = 0.0
    max_steps: int = 500

    def __post_init__(self) -> None:
        if min(self.init_x_bound, self.init_alpha_bound, self.init_velocity_bound) < 0:
            raise ValueError("initial-state bounds must be non-negative")
        if self.init_x_bound > self.params.track_half_length:
            raise ValueError("init_x_bound exceeds the track half-length")
        if self.init_alpha_bound > self.params.alpha_limit:
            raise ValueError("init_alpha_bound exceeds the angle limit")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class Disturbance:
    """Instantaneous kick to the pole's angular velocity before step ``at_step``."""

    at_step: int
    delta_alpha_dot: float

    def __post_init__(self) -> None:
        if self.at_step < 0:
            raise ValueError("at_step must be non-negative")


def disturbances_from_seconds(pairs: Iterable[tuple[float, float]], h: float) -> list[Disturbance]:
    """Convert ``(time_s, delta_alpha_dot)`` pairs to step-indexed disturbances."""
    return [Disturbance(int(round(t / h)), float(d)) for t, d in pairs]


@dataclass
class EpisodeTrace:
    """Per-step record of one episode.

    ``states[t]`` is what the controller saw at step ``t`` (after any
    disturbance), ``next_states[t]`` the state produced by the step.
    ``log_probs``/``entropies``/``mu``/``sigma`` are ``None`` for controllers
    that do not define an action distribution.
    """

    states: np.ndarray
    next_states: np.ndarray
    raw_actions: np.ndarray
    voltages: np.ndarray
    rewards: np.ndarray
    terminated: bool
    log_probs: np.ndarray | None = None
    entropies: np.ndarray | None = None
    mu: np.ndarray | None = None
    sigma: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def final_state(self) -> np.ndarray:
        return self.next_states[-1]

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())


def reset(config: EnvConfig, rng: np.random.Generator) -> np.ndarray:
    """Sample an initial state uniformly from the configured box."""
    x = rng.uniform(-config.init_x_bound, config.init_x_bound)
    alpha = rng.uniform(-config.init_alpha_bound, config.init_alpha_bound)
    if config.init_velocity_bound > 0:
        x_dot, alpha_dot = rng.uniform(-config.init_velocity_bound, config.init_velocity_bound, 2)
    else:
        x_dot = alpha_dot = 0.0
    return dynamics.make_state(x, alpha, x_dot, alpha_dot)


def is_terminal(config: EnvConfig, state: Sequence[float]) -> bool:
    """True once the cart leaves the track or the pole passes the angle limit.

    Non-finite states count as terminal.
    """
    p = config.params
    return not (abs(state[0]) <= p.track_half_length and abs(state[1]) <= p.alpha_limit)


def transition(config: EnvConfig, state, voltage: float) -> tuple[np.ndarray, int, bool]:
    nxt = dynamics.step(config.params, state, voltage)
    if is_terminal(config, nxt):
        return nxt, 0, True
    return nxt, 1, False


def apply_disturbance(state, d: Disturbance) -> np.ndarray:
    out = np.array(state, dtype=np.float64)
    out[3] += d.delta_alpha_dot
    return out


def _impulses(disturbances: Iterable[Disturbance], max_steps: int) -> np.ndarray:
    out = np.zeros(max_steps)
    for d in disturbances:
        if d.at_step < max_steps:
            out[d.at_step] += d.delta_alpha_dot
    return out


def _rewards(length: int, terminated: bool) -> np.ndarray:
    rewards = np.ones(length)
    if terminated:
        rewards[-1] = 0.0
    return rewards


def rollout(config: EnvConfig, controller: Callable[[np.ndarray], float],
            rng: np.random.Generator | None = None, max_steps: int | None = None,
            disturbances: Iterable[Disturbance] = (), initial_state=None) -> EpisodeTrace:
    """Run an arbitrary ``state -> voltage`` controller until crash or ``max_steps``.

    The controller output is clipped to the motor range before stepping.
    """
    max_steps = config.max_steps if max_steps is None else max_steps
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    if initial_state is None:
        initial_state = reset(config, rng if rng is not None else np.random.default_rng())
    impulses = _impulses(disturbances, max_steps)
    state = np.array(initial_state, dtype=np.float64)
    states, nexts, raws = [], [], []
    terminated = False
    for t in range(max_steps):
        if impulses[t]:
            state = apply_disturbance(state, Disturbance(t, impulses[t]))
        raw = float(controller(state))
        nxt, _, terminated = transition(config, state, clip_action(raw))
        states.append(state)
        nexts.append(nxt)
        raws.append(raw)
        state = nxt
        if terminated:
            break
    raw_arr = np.array(raws)
    return EpisodeTrace(np.array(states), np.array(nexts), raw_arr, clip_action(raw_arr),
                        _rewards(len(raws), terminated), terminated)


def policy_rollout(config: EnvConfig, params: PolicyParameters, rng: np.random.Generator,
                   max_steps: int | None = None, disturbances: Iterable[Disturbance] = (),
                   deterministic: bool = False, initial_state=None) -> EpisodeTrace:
    """Roll out the Gaussian policy through the compiled kernel.

    Consumes the generator in a fixed order: the initial state (unless given),
    then ``max_steps`` standard normals, whatever the episode length.
    """
    max_steps = config.max_steps if max_steps is None else max_steps
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    s0 = reset(config, rng) if initial_state is None else np.asarray(initial_state, dtype=np.float64)
    noise = rng.standard_normal(max_steps)
    p = config.params
    states, nexts, raw, mu, sigma, terminated = kernels.policy_rollout(
        params.w1, params.b1, params.w2, params.b2, p.packed(), s0, noise,
        _impulses(disturbances, max_steps), deterministic, p.track_half_length, p.alpha_limit)
    dist = ActionDistribution(mu, sigma)
    return EpisodeTrace(
        states=np.asarray(states), next_states=np.asarray(nexts), raw_actions=np.asarray(raw),
        voltages=clip_action(np.asarray(raw)), rewards=_rewards(len(raw), terminated),
        terminated=terminated, log_probs=log_prob(dist, np.asarray(raw)),
        entropies=entropy(dist), mu=np.asarray(mu), sigma=np.asarray(sigma))


def with_params(config: EnvConfig, **changes) -> EnvConfig:
    """Copy of ``config`` with model parameters replaced."""
    return replace(config, params=replace(config.params, **changes))
