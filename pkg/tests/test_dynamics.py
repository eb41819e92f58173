import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kiteplan import dynamics as D
from kiteplan.dynamics import (DOUBLE_INTEGRATOR, MODELS, SECOND_ORDER_CAR, UNICYCLE, SystemId,
                               propagate, propagate_steps, translate)

from oracles import di_closed_form, uc_closed_form

finite = st.floats(-50, 50, allow_nan=False)


def test_model_constants():
    assert UNICYCLE.control_lo.tolist() == [-0.5, -0.5] and UNICYCLE.control_hi.tolist() == [0.5, 0.5]
    assert UNICYCLE.footprint == ("circle", 0.4)
    soc = SECOND_ORDER_CAR
    assert soc.state_lo[3:].tolist() == [-1.0, -math.pi / 3]
    assert soc.state_hi[3:].tolist() == [1.0, math.pi / 3]
    assert soc.control_hi.tolist() == [2.0, 0.5]
    assert soc.footprint == ("rect", 0.7, 0.4) and soc.wheelbase == 0.7
    di = DOUBLE_INTEGRATOR
    assert di.state_hi[3:].tolist() == [0.5] * 3 and di.control_hi.tolist() == [2.0] * 3
    assert di.footprint == ("sphere", 0.1)
    assert all(m.dt == 0.1 for m in MODELS.values())


def test_unicycle_straight_line():
    seg = propagate(UNICYCLE, [0, 0, 0], [0.5, 0.0], 1.0)
    np.testing.assert_allclose(seg.terminal, [0.5, 0.0, 0.0], atol=1e-12)
    assert seg.nsteps == 10 and seg.states.shape == (11, 3)


def test_di_from_rest_frozen_value():
    # p = a t^2 / 2 exactly under RK4 for a constant input
    seg = propagate(DOUBLE_INTEGRATOR, np.zeros(6), [1.0, 0, 0], 0.3)
    np.testing.assert_allclose(seg.terminal, [0.045, 0, 0, 0.3, 0, 0], atol=1e-15)


def test_unicycle_matches_closed_form_arc():
    x0, u = np.array([1.0, -2.0, 0.3]), np.array([0.4, 0.35])
    seg = propagate(UNICYCLE, x0, u, 3.0)
    np.testing.assert_allclose(seg.terminal, uc_closed_form(x0, u, 3.0), atol=1e-8)


def test_unicycle_rk4_error_shrinks_fourth_order():
    # halving dt should cut the global error by about 16x
    x0, u = np.array([0.0, 0.0, 0.0]), np.array([0.5, 0.5])
    from dataclasses import replace
    errs = []
    for dt in (0.2, 0.1):
        m = replace(UNICYCLE, dt=dt)
        seg = propagate_steps(m, x0, u, round(2.0 / dt))
        errs.append(np.abs(seg.terminal - uc_closed_form(x0, u, 2.0)).max())
    assert 10 < errs[0] / errs[1] < 20


def test_heading_is_wrapped():
    seg = propagate(UNICYCLE, [0, 0, 3.1], [0.0, 0.5], 3.0)
    assert np.all(seg.states[:, 2] > -math.pi) and np.all(seg.states[:, 2] <= math.pi)
    assert seg.terminal[2] == pytest.approx(3.1 + 1.5 - 2 * math.pi, abs=1e-12)


def test_duration_must_be_a_multiple_of_dt():
    with pytest.raises(ValueError):
        propagate(UNICYCLE, [0, 0, 0], [0.1, 0.1], 0.25)
    with pytest.raises(ValueError):
        propagate(UNICYCLE, [0, 0, 0], [0.1, 0.1], 0.0)
    with pytest.raises(ValueError):
        propagate(UNICYCLE, [0, 0], [0.1, 0.1], 1.0)


def test_second_order_car_speed_bound_detected():
    seg = propagate(SECOND_ORDER_CAR, [0, 0, 0, 0.9, 0], [2.0, 0.0], 1.0)
    assert not D.is_dyn_feasible(SECOND_ORDER_CAR, seg)
    ok = propagate(SECOND_ORDER_CAR, [0, 0, 0, 0.0, 0], [0.5, 0.1], 1.0)
    assert D.is_dyn_feasible(SECOND_ORDER_CAR, ok)


def test_truncated_segment_keeps_the_first_samples():
    seg = propagate(SECOND_ORDER_CAR, [0, 0, 0, 0.2, 0], [0.3, 0.2], 0.5)
    short = seg.truncated(3)
    assert short.nsteps == 3 and np.array_equal(short.states, seg.states[:4])


@settings(max_examples=60, deadline=None)
@given(sid=st.sampled_from(list(SystemId)), data=st.data())
def test_translation_invariance_property(sid, data):
    m = MODELS[sid]
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    x0 = np.concatenate([rng.uniform(-20, 20, m.workspace_dim), m.sample_rem(rng)])
    u = D.sample_control(m, rng)
    n = int(D.sample_steps(m, 3.0, rng))
    beta = np.array([data.draw(finite) for _ in range(m.workspace_dim)])
    a = translate(propagate_steps(m, x0, u, n).states, beta)
    b = propagate_steps(m, translate(x0, beta), u, n).states
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 30))
def test_di_rk4_is_exact(seed, n):
    rng = np.random.default_rng(seed)
    x0 = np.concatenate([rng.uniform(-5, 5, 3), rng.uniform(-0.5, 0.5, 3)])
    u = rng.uniform(-2, 2, 3)
    seg = propagate_steps(DOUBLE_INTEGRATOR, x0, u, n)
    np.testing.assert_allclose(seg.terminal, di_closed_form(x0, u, n * 0.1), rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(sid=st.sampled_from(list(SystemId)), seed=st.integers(0, 2**31))
def test_sampled_controls_and_starts_respect_bounds(sid, seed):
    m = MODELS[sid]
    rng = np.random.default_rng(seed)
    u = D.sample_control(m, rng, size=50)
    assert np.all(u >= m.control_lo) and np.all(u <= m.control_hi)
    x = D.sample_start_at_origin(m, rng, size=50)
    assert np.all(x[:, : m.workspace_dim] == 0)
    assert np.all(x >= m.state_lo) and np.all(x <= m.state_hi)
    steps = D.sample_steps(m, 3.0, rng, size=200)
    assert steps.min() >= 1 and steps.max() <= 30


def test_key_is_the_remainder():
    x = np.array([3.0, 4.0, 0.5, 0.2, -0.1])
    assert D.key(SECOND_ORDER_CAR, x).tolist() == [0.5, 0.2, -0.1]
