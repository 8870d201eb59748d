"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--trials 50]

Times open-loop integration, a full 500-step policy rollout, and a short
training run on each backend, and prints the speedup.
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from pendulum_vpg import _fallback
from pendulum_vpg.dynamics import ModelParameters
from pendulum_vpg.policy import init_policy

try:
    from pendulum_vpg import _kernels
except ImportError:  # extension not built
    _kernels = None


def _cases(mod, trials: int):
    params = ModelParameters()
    packed = params.packed()
    rng = np.random.default_rng(0)
    volts = rng.uniform(-1, 1, 10_000)
    s0 = np.array([0.0, 0.01, 0.0, 0.0])
    pol = init_policy(64, rng, 3.0)
    noise = np.zeros(500)
    imp = np.zeros(500)

    def integrate():
        mod.integrate(packed, s0, volts)

    def rollout():
        # bounds pushed out so every call runs the full 500 steps
        mod.policy_rollout(pol.w1, pol.b1, pol.w2, pol.b2, packed, s0, noise, imp, True,
                           1e9, 1e9)

    def train():
        from pendulum_vpg import environment, training

        saved = environment.kernels
        environment.kernels = mod
        try:
            training.train(training.TrainingConfig(seed=0, max_trials=trials))
        finally:
            environment.kernels = saved

    return {"integrate 10k steps": integrate, "rollout 500 steps": rollout,
            f"train {trials} trials": train}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=50)
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not available; build with `pip install -e .`")

    py_cases = _cases(_fallback, args.trials)
    cy_cases = _cases(_kernels, args.trials)
    print(f"{'case':<22}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name in py_cases:
        times = []
        for cases in (py_cases, cy_cases):
            number = 1 if "train" in name else 3
            best = min(timeit.repeat(cases[name], number=number, repeat=args.repeat)) / number
            times.append(best * 1e3)
        speedup = times[0] / times[1] if times[1] > 0 else math.inf
        print(f"{name:<22}{times[0]:>12.2f}{times[1]:>12.2f}{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
