"""The compiled kernels and the pure-Python fallback must agree."""
import math

import numpy as np
import pytest

import oracles
from conftest import rel_err
from pendulum_vpg import _backend, _fallback, dynamics, environment
from pendulum_vpg.dynamics import ModelParameters, make_state
from pendulum_vpg.environment import Disturbance, EnvConfig
from pendulum_vpg.policy import forward, init_policy

P = ModelParameters()
compiled = pytest.importorskip("pendulum_vpg._kernels")


def test_backend_selected():
    assert _backend.BACKEND in ("cython", "python")


def test_kernel_accelerations_match_oracle():
    rng = np.random.default_rng(0)
    for _ in range(500):
        x, a, xd, ad = rng.uniform(-3, 3, 4)
        v = rng.uniform(-10, 10)
        ref = oracles.accel(a, xd, ad, v)
        for mod in (compiled, _fallback):
            assert np.max(rel_err(mod.accelerations(P.packed(), a, xd, ad, v), ref)) < 1e-12


def test_integrate_matches_step():
    rng = np.random.default_rng(1)
    volts = rng.uniform(-10, 10, 40)
    s0 = make_state(0.05, 0.1, -0.2, 0.3)
    ref = [s0]
    for v in volts:
        ref.append(dynamics.step(P, ref[-1], v))
    for mod in (compiled, _fallback):
        out = mod.integrate(P.packed(), s0, volts)
        assert np.max(rel_err(out, np.array(ref))) < 1e-12


@pytest.mark.parametrize("deterministic", [False, True])
def test_rollout_parity(deterministic):
    params = init_policy(64, np.random.default_rng(3), 3.0)
    rng = np.random.default_rng(4)
    for _ in range(10):
        s0 = environment.reset(EnvConfig(), rng)
        noise = rng.standard_normal(500)
        imp = np.zeros(500)
        imp[7] = 0.3
        args = (params.w1, params.b1, params.w2, params.b2, P.packed(), s0, noise, imp,
                deterministic, 0.4, math.radians(12))
        a = compiled.policy_rollout(*args)
        b = _fallback.policy_rollout(*args)
        assert a[5] == b[5] and len(a[0]) == len(b[0])
        for x, y in zip(a[:5], b[:5]):
            np.testing.assert_allclose(np.asarray(x), np.asarray(y), rtol=1e-11, atol=1e-12)


def test_kernel_rollout_matches_generic_rollout():
    params = init_policy(64, np.random.default_rng(3), 3.0)
    env = EnvConfig()
    s0 = make_state(0.1, 0.02)
    fast = environment.policy_rollout(env, params, np.random.default_rng(0), 300,
                                      [Disturbance(20, 0.4)], True, s0)
    slow = environment.rollout(env, lambda s: forward(params, s)[0].mu, max_steps=300,
                               disturbances=[Disturbance(20, 0.4)], initial_state=s0)
    assert len(fast) == len(slow) and fast.terminated == slow.terminated
    np.testing.assert_allclose(fast.next_states, slow.next_states, rtol=1e-10, atol=1e-12)


def test_nan_state_terminates():
    params = init_policy(8, np.random.default_rng(0))
    params.w2[0, :] = np.nan
    for mod in (compiled, _fallback):
        out = mod.policy_rollout(params.w1, params.b1, params.w2, params.b2, P.packed(),
                                 make_state(0.1, 0.05, 0.2, -0.1), np.zeros(10), np.zeros(10),
                                 True, 0.4, 0.2)
        # a NaN voltage survives clipping and makes the next state non-finite
        assert out[5] and len(out[0]) == 1
