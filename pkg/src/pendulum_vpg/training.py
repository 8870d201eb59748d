"""Vanilla policy gradient: returns, loss, optimiser updates, the trial loop and sweeps."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

from .environment import EnvConfig, policy_rollout
from .policy import PolicyGradient, PolicyParameters, backprop_episode, init_policy

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple((g, lr) for g in (0.95, 0.97, 0.99, 0.995) for lr in (0.003, 0.01, 0.03))


@dataclass(frozen=True)
class TrainingConfig:
    gamma: float = 0.99
    learning_rate: float = 0.01
    epsilon_entropy: float = 0.0
    success_steps: int = 500
    # Consecutive successful episodes required to stop; 1 stops at the first.
    success_streak: int = 1
    max_trials: int = 5000
    seed: int = 0
    hidden_width: int = 64
    # Initial exploration std in volts; None leaves both output biases at zero.
    init_sigma: float | None = 3.0
    # Global L2 bound on each episode gradient; 0 disables clipping.
    grad_clip: float = 10.0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    finetune_trials: int = 0
    finetune_learning_rate: float = 0.001

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if self.epsilon_entropy < 0.0:
            raise ValueError("epsilon_entropy must be non-negative")
        if self.success_steps < 1:
            raise ValueError("success_steps must be at least 1")
        if self.success_streak < 1:
            raise ValueError("success_streak must be at least 1")
        if self.max_trials < 0 or self.finetune_trials < 0:
            raise ValueError("trial counts must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be at least 1")
        if self.init_sigma is not None and not self.init_sigma > 0:
            raise ValueError("init_sigma must be positive")
        if self.grad_clip < 0:
            raise ValueError("grad_clip must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: PolicyParameters
    v: PolicyParameters
    step: int = 0

    @classmethod
    def zeros(cls, like: PolicyParameters) -> "AdamState":
        return cls(like.zeros_like(), like.zeros_like(), 0)


@dataclass
class TrainingResult:
    trials_used: int
    succeeded: bool
    episode_lengths: list[int]
    params: PolicyParameters
    wall_time_s: float
    config: TrainingConfig = field(default_factory=TrainingConfig)

    def summary(self) -> dict:
        return {"trials": self.trials_used, "succeeded": self.succeeded,
                "wall_time_s": self.wall_time_s}


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """R_t = r_t + gamma * R_{t+1}, truncated at the last reward."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("rewards must be non-empty")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    # Backward first-order recursion, run as an IIR filter over the reversed sequence.
    return lfilter([1.0], [1.0, -gamma], r[::-1])[::-1].copy()


def normalize_returns(returns: Sequence[float]) -> np.ndarray:
    r = np.asarray(returns, dtype=np.float64)
    if r.size == 0:
        raise ValueError("returns must be non-empty")
    centred = r - r.mean()
    std = r.std()
    if std < 1e-8:
        return centred
    return centred / std


def episode_loss(log_probs, normalized_returns, entropies, epsilon: float) -> float:
    lp = np.asarray(log_probs, dtype=np.float64)
    adv = np.asarray(normalized_returns, dtype=np.float64)
    ent = np.asarray(entropies, dtype=np.float64)
    if not (lp.shape == adv.shape == ent.shape):
        raise ValueError(f"length mismatch: {lp.shape}, {adv.shape}, {ent.shape}")
    return float(-np.dot(adv, lp) + epsilon * ent.sum())


def adam_update(state: AdamState, params: PolicyParameters, grad: PolicyGradient,
                config: TrainingConfig, learning_rate: float | None = None
                ) -> tuple[PolicyParameters, AdamState]:
    """One optimiser step; ``config.optimizer == "sgd"`` gives plain gradient descent."""
    lr = config.learning_rate if learning_rate is None else learning_rate
    if config.optimizer == "sgd":
        new = PolicyParameters(*(p - lr * g for p, g in zip(params.arrays(), grad.arrays())))
        return new, AdamState(state.m, state.v, state.step + 1)

    b1, b2 = config.beta1, config.beta2
    t = state.step + 1
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grad.arrays(), state.m.arrays(), state.v.arrays()):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_p.append(p - lr * (m / bc1) / (np.sqrt(v / bc2) + config.adam_eps))
        new_m.append(m)
        new_v.append(v)
    return PolicyParameters(*new_p), AdamState(PolicyParameters(*new_m), PolicyParameters(*new_v), t)


def clip_gradient(grad: PolicyGradient, max_norm: float) -> PolicyGradient:
    """Rescale ``grad`` so its global L2 norm is at most ``max_norm`` (0 = no-op)."""
    if max_norm <= 0:
        return grad
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grad.arrays()))
    if norm <= max_norm:
        return grad
    return PolicyGradient(*(g * (max_norm / norm) for g in grad.arrays()))


def policy_gradient(params: PolicyParameters, trace, config: TrainingConfig) -> PolicyGradient:
    """Clipped episode gradient from normalised discounted returns."""
    adv = normalize_returns(discounted_returns(trace.rewards, config.gamma))
    # A collapsed sigma can overflow here; train() catches the resulting
    # non-finite parameters and ends the run as a failure.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        grad = backprop_episode(params, trace, adv, config.epsilon_entropy)
        return clip_gradient(grad, config.grad_clip)


def train(config: TrainingConfig, env: EnvConfig | None = None,
          rng: np.random.Generator | None = None) -> TrainingResult:
    """Train until one episode survives ``success_steps`` steps or trials run out.

    Every crashed episode yields exactly one optimiser step, on the gradient
    clipped to ``grad_clip``; surviving episodes yield none. Training ends after
    ``success_streak`` consecutive survivors (optionally followed by
    ``finetune_trials`` extra updates at ``finetune_learning_rate``).
    Non-finite parameters abort the run as a failure.
    """
    env = EnvConfig() if env is None else env
    rng = np.random.default_rng(config.seed) if rng is None else rng
    start = time.perf_counter()
    params = init_policy(config.hidden_width, rng, config.init_sigma)
    opt = AdamState.zeros(params)
    lengths: list[int] = []
    succeeded = False
    streak = 0

    for _ in range(config.max_trials):
        trace = policy_rollout(env, params, rng, max_steps=config.success_steps)
        lengths.append(len(trace))
        if not trace.terminated:
            streak += 1
            if streak >= config.success_streak:
                succeeded = True
                break
            continue
        streak = 0
        grad = policy_gradient(params, trace, config)
        params, opt = adam_update(opt, params, grad, config)
        if not params.is_finite():
            log.warning("parameters diverged after %d trials (seed %d)", len(lengths), config.seed)
            break

    if succeeded and config.finetune_trials:
        for _ in range(config.finetune_trials):
            trace = policy_rollout(env, params, rng, max_steps=config.success_steps)
            grad = policy_gradient(params, trace, config)
            params, opt = adam_update(opt, params, grad, config, config.finetune_learning_rate)

    elapsed = time.perf_counter() - start
    log.debug("train seed=%d gamma=%g lr=%g -> %s after %d trials",
              config.seed, config.gamma, config.learning_rate,
              "success" if succeeded else "failure", len(lengths))
    return TrainingResult(len(lengths), succeeded, lengths, params, elapsed, config)


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    learning_rate: float
    seed: int
    succeeded: bool
    trials: int
    wall_time_s: float


@dataclass
class SweepReport:
    rows: list[SweepRow]

    @property
    def runs(self) -> int:
        return len(self.rows)

    @property
    def success_rate(self) -> float:
        return sum(r.succeeded for r in self.rows) / len(self.rows) if self.rows else math.nan

    @property
    def mean_trials(self) -> float:
        """Mean trials-to-success over successful runs."""
        done = [r.trials for r in self.rows if r.succeeded]
        return float(np.mean(done)) if done else math.nan

    def cells(self) -> dict[tuple[float, float], dict]:
        """Per-(gamma, learning_rate) success rate and mean trials-to-success."""
        grouped: dict[tuple[float, float], list[SweepRow]] = {}
        for row in self.rows:
            grouped.setdefault((row.gamma, row.learning_rate), []).append(row)
        out = {}
        for key, rows in grouped.items():
            ok = [r.trials for r in rows if r.succeeded]
            out[key] = {"runs": len(rows), "success_rate": len(ok) / len(rows),
                        "mean_trials": float(np.mean(ok)) if ok else math.nan}
        return out


def _sweep_cell(args) -> SweepRow:
    config, env = args
    result = train(config, env)
    return SweepRow(config.gamma, config.learning_rate, config.seed, result.succeeded,
                    result.trials_used, result.wall_time_s)


def sweep(grid: Iterable[tuple[float, float]] = DEFAULT_GRID, seeds_per_cell: int = 10,
          env: EnvConfig | None = None, base: TrainingConfig | None = None,
          parallel: bool = False, max_workers: int | None = None) -> SweepReport:
    """Train once per grid cell per seed (seeds ``base.seed .. base.seed + n - 1``)."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    env = EnvConfig() if env is None else env
    base = TrainingConfig() if base is None else base
    jobs = [(replace(base, gamma=g, learning_rate=lr, seed=base.seed + k), env)
            for g, lr in grid for k in range(seeds_per_cell)]
    if parallel:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(job) for job in jobs]
    return SweepReport(rows)
