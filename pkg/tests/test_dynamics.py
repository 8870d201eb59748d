import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import rel_err
from pendulum_vpg import dynamics
from pendulum_vpg.dynamics import ModelParameters, make_state

P = ModelParameters()

finite = st.floats(-50.0, 50.0, allow_nan=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)


def test_defaults_match_rig_table():
    assert (P.b_p, P.b_eq, P.g, P.j_m, P.k_g) == (0.0024, 5.4, 9.8, 3.90e-7, 3.71)
    assert (P.k_t, P.k_m, P.l_p, P.m_cart, P.m_p) == (0.00767, 0.00767, 0.3302, 0.94, 0.230)
    assert (P.r_m, P.r_mp, P.i_p, P.j_p) == (2.6, 6.35e-3, 8.539e-3, 3.344e-2)
    assert P.h == 0.02 and P.track_half_length == 0.4
    assert P.alpha_limit == pytest.approx(math.radians(12))


@pytest.mark.parametrize("field", ["m_cart", "l_p", "h", "r_m", "k_g", "alpha_limit"])
def test_non_positive_parameters_rejected(field):
    with pytest.raises(ValueError, match=field):
        ModelParameters(**{field: 0.0})


def test_denominator_at_zero():
    expected = 4 * 0.94 * 6.35e-3**2 + 0.230 * 6.35e-3**2 + 4 * 3.90e-7 * 3.71**2
    assert dynamics.denominator(P, 0.0) == pytest.approx(expected, rel=1e-15)
    assert dynamics.denominator(P, 0.0) == pytest.approx(1.824e-4, rel=1e-3)


def test_denominator_period_and_quarter_turn():
    for a in (0.3, -1.1, 2.0):
        assert dynamics.denominator(P, a) == pytest.approx(dynamics.denominator(P, a + math.pi), rel=1e-14)
    assert dynamics.denominator(P, math.pi / 2) == pytest.approx(
        dynamics.denominator(P, 0.0) + 3 * P.m_p * P.r_mp**2, rel=1e-14)


def test_accelerations_at_rest_are_zero():
    assert dynamics.accelerations(P, make_state(), 0.0) == (0.0, 0.0)


def test_unit_voltage_from_rest():
    d0 = dynamics.denominator(P, 0.0)
    acc = dynamics.accelerations(P, make_state(), 1.0)
    assert acc.x_ddot == pytest.approx(4 * P.r_mp * P.k_g * P.k_t / (P.r_m * d0), rel=1e-14)
    assert acc.alpha_ddot == pytest.approx(3 * P.r_mp * P.k_g * P.k_t / (P.r_m * P.l_p * d0), rel=1e-14)


def test_equilibrium_is_fixed_point():
    assert np.array_equal(dynamics.step(P, make_state(), 0.0), np.zeros(4))


def test_step_uses_updated_velocity():
    acc = dynamics.accelerations(P, make_state(0, 0, 1, 0), 0.0)
    nxt = dynamics.step(P, make_state(0, 0, 1, 0), 0.0)
    x_dot_next = 1.0 + 0.02 * acc.x_ddot
    assert nxt[2] == pytest.approx(x_dot_next, rel=1e-15)
    assert nxt[0] == pytest.approx(0.02 * x_dot_next, rel=1e-15)
    # explicit Euler would give 0.02 exactly
    assert abs(nxt[0] - 0.02) > 1e-4


def test_two_steps_match_reference():
    s = (0.1, 0.05, -0.2, 0.3)
    got = dynamics.step(P, dynamics.step(P, s, 2.0), -1.5)
    assert np.max(rel_err(got, oracles.two_steps(s, 2.0, -1.5))) < 1e-13


@settings(max_examples=200, deadline=None)
@given(finite, angle, finite, finite, st.floats(-10, 10))
def test_odd_symmetry(x, a, xd, ad, v):
    fwd = dynamics.accelerations(P, (x, a, xd, ad), v)
    rev = dynamics.accelerations(P, (-x, -a, -xd, -ad), -v)
    np.testing.assert_allclose(rev, [-fwd[0], -fwd[1]], rtol=1e-12, atol=1e-300)


@settings(max_examples=200, deadline=None)
@given(*(st.floats(-1e3, 1e3) for _ in range(4)), st.floats(-1e3, 1e3))
def test_accelerations_finite_on_large_inputs(x, a, xd, ad, v):
    assert dynamics.denominator(P, a) > 0
    assert np.all(np.isfinite(dynamics.accelerations(P, (x, a, xd, ad), v)))


@settings(max_examples=200, deadline=None)
@given(finite, angle, finite, finite, st.floats(-10, 10))
def test_velocity_increment_matches_acceleration(x, a, xd, ad, v):
    acc = dynamics.accelerations(P, (x, a, xd, ad), v)
    nxt = dynamics.step(P, (x, a, xd, ad), v)
    # (new - old) / h loses digits to cancellation when |acc*h| << |v|
    np.testing.assert_allclose(nxt[2], xd + P.h * acc.x_ddot, rtol=1e-12, atol=0)
    np.testing.assert_allclose(nxt[3], ad + P.h * acc.alpha_ddot, rtol=1e-12, atol=0)


def test_linearize_at_origin():
    a, b = dynamics.linearize(P)
    assert np.array_equal(a[0], [0, 0, 1, 0]) and np.array_equal(a[1], [0, 0, 0, 1])
    assert b[0] == 0 and b[1] == 0
    d0 = dynamics.denominator(P, 0.0)
    assert a[2, 1] == pytest.approx(3 * P.m_p * P.r_mp**2 * P.g / d0, rel=1e-6)
    d0v = 4 * P.r_mp * P.k_g * P.k_t / (P.r_m * d0)
    assert b[2] == pytest.approx(d0v, rel=1e-8)


def test_parameters_json_roundtrip():
    text = json.dumps(P.to_dict())
    assert "alpha_limit_deg" in json.loads(text)
    assert dynamics.load_parameters(io.StringIO(text)) == P


def test_parameters_json_rejects_unknown_key():
    with pytest.raises(ValueError, match="mass"):
        ModelParameters.from_dict({"mass": 1.0})


def test_partial_override():
    p = ModelParameters.from_dict({"m_p": 0.3, "alpha_limit_deg": 15})
    assert p.m_p == 0.3 and p.alpha_limit == pytest.approx(math.radians(15))
    assert p.m_cart == P.m_cart
