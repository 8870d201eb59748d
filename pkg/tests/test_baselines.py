import math

import numpy as np
import pytest
import scipy.linalg

from pendulum_vpg import baselines, dynamics
from pendulum_vpg.baselines import LqrConfig, PidConfig, PidState
from pendulum_vpg.dynamics import make_state
from pendulum_vpg.environment import EnvConfig, rollout


def test_pid_proportional():
    u, _ = baselines.pid_step(PidConfig(k_p=20), PidState(), 0.1, 0.02)
    assert u == pytest.approx(2.0)


def test_pid_integral_grows_linearly():
    cfg, st, h = PidConfig(k_i=3.0), PidState(), 0.02
    outs = []
    for _ in range(50):
        u, st = baselines.pid_step(cfg, st, 0.2, h)
        outs.append(u)
    np.testing.assert_allclose(np.diff(outs), 3.0 * 0.2 * h, rtol=1e-10)
    assert outs[-1] == pytest.approx(3.0 * 0.2 * 1.0)


def test_pid_derivative():
    u, st = baselines.pid_step(PidConfig(k_d=1.0), PidState(prev_error=0.0), 0.1, 0.02)
    assert u == pytest.approx(5.0) and st.prev_error == 0.1


def test_pid_clip_and_anti_windup():
    cfg, st = PidConfig(k_p=200, k_i=10), PidState()
    for _ in range(100):
        u, st = baselines.pid_step(cfg, st, 0.1, 0.02)
    assert u == 10.0 and st.integral == 0.0


def test_pid_controller_sign_and_reset():
    ctrl = baselines.PidController(PidConfig(k_p=10), 0.02)
    assert ctrl(make_state(0, 0.1)) == pytest.approx(-1.0)
    ctrl.reset()
    assert ctrl.state == PidState()


def test_lqr_config_validation():
    with pytest.raises(ValueError, match="symmetric"):
        LqrConfig(q=np.triu(np.ones((4, 4))))
    with pytest.raises(ValueError, match="semidefinite"):
        LqrConfig(q=-np.eye(4))
    with pytest.raises(ValueError):
        LqrConfig(r=0.0)


def test_scalar_riccati():
    p = baselines.solve_riccati([[0.0]], [1.0], [[1.0]], 1.0)
    assert p[0, 0] == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("q", [np.eye(4), np.diag([5.0, 50.0, 1.0, 1.0])])
def test_cartpole_riccati_against_scipy(q):
    a, b = dynamics.linearize(dynamics.ModelParameters())
    p = baselines.solve_riccati(a, b, q, 1.0)
    assert baselines.riccati_residual(a, b, q, 1.0, p) < 1e-8
    assert np.max(np.abs(p - p.T)) < 1e-10
    assert np.linalg.eigvalsh(p).min() >= -1e-10
    ref = scipy.linalg.solve_continuous_are(a, b.reshape(4, 1), q, np.array([[1.0]]))
    np.testing.assert_allclose(p, ref, rtol=1e-6, atol=1e-9)
    # substitute back by hand
    res = a.T @ p + p @ a - np.outer(p @ b, b @ p) + q
    assert np.linalg.norm(res) < 1e-8


def test_closed_loop_stable():
    design = baselines.design_lqr()
    assert design.residual < 1e-8
    assert baselines.closed_loop_eigenvalues(design.a, design.b, design.k).real.max() < 0


def test_unstabilisable_pair_fails_loudly():
    a = np.diag([1.0, -1.0])
    b = np.array([0.0, 1.0])  # unstable mode unreachable
    with pytest.raises(baselines.RiccatiError):
        baselines.solve_riccati(a, b, np.eye(2), 1.0)


def test_lqr_control():
    k = baselines.design_lqr().k
    assert baselines.lqr_control(k, np.zeros(4)) == 0.0
    s = make_state(0.001, 0.002, 0.0, -0.001)
    assert baselines.lqr_control(k, 2 * s) == pytest.approx(2 * baselines.lqr_control(k, s))
    assert abs(baselines.lqr_control(k, make_state(0, 1.0))) == 10.0


def test_lqr_balances_from_three_degrees():
    design = baselines.design_lqr()
    tr = rollout(EnvConfig(), design, max_steps=500, initial_state=make_state(0, math.radians(3)))
    assert not tr.terminated and len(tr) == 500
    assert abs(tr.final_state[1]) < math.radians(0.5)
