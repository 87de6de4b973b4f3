import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamtrack.control import (
    MIRROR_LIMIT,
    AxisControllerState,
    ControlParams,
    MirrorState,
    TimeRegression,
    adapt_gain,
    advance,
    command_mirror,
    new_axis_state,
    pid_command,
)

LEVER = 1.97
K = 1 / (2 * LEVER)


def state(**kw):
    base = dict(k=K, s=1.5, d_prev=0.0, alpha=0.1, p1=0.01, p2=0.02, q=3.0)
    base.update(kw)
    return AxisControllerState(**base)


def test_oscillation_shrinks_scale():
    _, st_ = adapt_gain(state(d_prev=0.02), -0.02, 0.0)
    assert st_.s == pytest.approx(1.4, abs=1e-15)
    assert st_.d_prev == -0.02


def test_sluggish_response_grows_scale():
    k_p, st_ = adapt_gain(state(d_prev=0.03), 0.03, 0.0)
    assert st_.s == pytest.approx(1.6, abs=1e-15)
    assert k_p == pytest.approx(1.6 * K, rel=1e-15)


def test_scale_floor():
    _, st_ = adapt_gain(state(s=1.05, d_prev=0.02), -0.02, 0.0)
    assert st_.s == 1.0


def test_no_change_at_rest():
    k_p, st_ = adapt_gain(state(s=1.7), 0.0, 0.0)
    assert st_.s == 1.7 and k_p == 1.7 * K


def test_ceiling_steps_back():
    _, st_ = adapt_gain(state(s=3.0, d_prev=0.03), 0.03, 0.0)
    assert st_.s == pytest.approx(3.0, abs=1e-12)


def test_offset_is_measured_minus_target():
    _, st_ = adapt_gain(state(), 0.05, 0.02)
    assert st_.d_prev == pytest.approx(0.03)


def test_small_opposite_offsets_leave_scale():
    # sign flip below p1 does not damp; no flip branch does not fire either
    _, st_ = adapt_gain(state(d_prev=0.005), -0.005, 0.0)
    assert st_.s == 1.5


def test_adapt_gain_is_pure():
    st0 = state(d_prev=0.02)
    a = adapt_gain(st0, -0.03, 0.0)
    b = adapt_gain(st0, -0.03, 0.0)
    assert a == b and st0.d_prev == 0.02


@settings(max_examples=200)
@given(st.lists(st.floats(-0.1, 0.1), min_size=1, max_size=200),
       st.floats(0.01, 0.5), st.floats(1.01, 5.0), st.floats(1e-4, 0.05), st.floats(1e-4, 0.05))
def test_scale_confined(xs, alpha, q, p1, p2):
    st_ = state(s=1.0, alpha=alpha, q=q, p1=p1, p2=p2)
    for x in xs:
        _, st_ = adapt_gain(st_, x, 0.0)
        assert 1.0 <= st_.s <= q + 1e-12


def test_pid_pure_proportional():
    st_ = replace(state(), s=2.0 / K)      # k_p = 2 rad/m
    out, _ = pid_command(st_, 0.01, 0.007)
    assert out == pytest.approx(-0.02, rel=1e-15)


def test_pid_zero_history_zero_output():
    st_ = new_axis_state()
    for _ in range(10):
        out, st_ = pid_command(st_, 0.0, 0.007)
        assert out == 0.0


@given(st.floats(-0.1, 0.1, allow_subnormal=False).filter(lambda d: d != 0))
def test_pid_sign_opposes_offset(d):
    out, _ = pid_command(state(k_i=0.0, k_d=0.0), d, 0.007)
    assert np.sign(out) == -np.sign(d)


def test_pid_integral_and_derivative_terms():
    st_ = state(s=1.0, k_i=2.0, k_d=0.5, integ_max=1.0)
    out, st2 = pid_command(st_, 0.01, 0.01)
    assert st2.integ == pytest.approx(1e-4)
    assert out == pytest.approx(-(K * 0.01 + 2.0 * 1e-4 + 0.5 * 0.01 / 0.01))
    out, st3 = pid_command(st2, 0.01, 0.01)
    assert out == pytest.approx(-(K * 0.01 + 2.0 * 2e-4))


def test_pid_anti_windup():
    st_ = state(k_i=1.0, integ_max=0.001)
    for _ in range(100):
        _, st_ = pid_command(st_, 0.05, 0.007)
    assert st_.integ == 0.001


def test_pid_rejects_bad_dt():
    with pytest.raises(ValueError):
        pid_command(state(), 0.01, 0.0)


def test_param_validation():
    for bad in (dict(alpha=0), dict(p1=0), dict(q=1.0), dict(s0=0.5), dict(s0=4.0)):
        with pytest.raises(ValueError):
            ControlParams(**bad)


def test_base_coefficient_cancels_offset_through_lever():
    st_ = new_axis_state(ControlParams(s0=1.0, k_d=0.0), LEVER)
    out, _ = pid_command(st_, 0.004, 0.007)
    assert 2 * LEVER * out == pytest.approx(-0.004, rel=1e-15)


def _lever_loop(params, e0, n):
    """Static plant: the offset moves by 2*lever*tilt each cycle."""
    st_ = new_axis_state(params, LEVER)
    e, out = e0, [e0]
    for _ in range(n):
        _, st_ = adapt_gain(st_, e, 0.0)
        d, st_ = pid_command(st_, e, 0.007)
        e = e + 2 * LEVER * d
        out.append(e)
    return np.array(out)


def test_step_decays_within_five_cycles():
    e = _lever_loop(ControlParams(), 0.005, 5)
    assert abs(e[-1]) < 0.1 * 0.005


@pytest.mark.parametrize("e0", [0.001, 0.005, -0.02, 0.1])
def test_static_loop_non_divergent(e0):
    e = _lever_loop(ControlParams(), e0, 200)
    assert np.max(np.abs(e)) <= abs(e0) + 1e-15
    assert abs(e[-1]) < 1e-6 * abs(e0)


def test_mirror_clamps_and_delays():
    m = command_mirror(MirrorState(), (0.06, -0.06), now=1.0)
    assert m.pending[0] == (MIRROR_LIMIT, -MIRROR_LIMIT)
    assert MIRROR_LIMIT == pytest.approx(0.04712, abs=1e-5)
    early = advance(m, 1.0019)
    assert (early.tilt_x, early.tilt_y) == (0.0, 0.0)
    at = advance(early, 1.002)
    assert (at.tilt_x, at.tilt_y) == (MIRROR_LIMIT, -MIRROR_LIMIT)
    assert at.pending is None


def test_advance_identity_without_pending():
    m = MirrorState(tilt_x=0.01)
    m2 = advance(m, 0.5)
    assert (m2.tilt_x, m2.tilt_y, m2.pending) == (0.01, 0.0, None)


def test_advance_applies_late():
    m = command_mirror(MirrorState(), (0.01, 0.0), now=0.0)
    assert advance(m, 0.005).tilt_x == 0.01


def test_last_write_wins():
    m = command_mirror(MirrorState(), (0.01, 0.0), now=0.0)
    m = command_mirror(m, (0.02, 0.0), now=0.001)
    m = advance(m, 0.0025)
    assert m.tilt_x == 0.0
    m = advance(m, 0.003)
    assert m.tilt_x == 0.02


def test_time_regression():
    m = advance(MirrorState(), 1.0)
    with pytest.raises(TimeRegression):
        advance(m, 0.5)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 0.01)),
                min_size=1, max_size=30))
def test_tilt_never_exceeds_limit(cmds):
    m, t = MirrorState(), 0.0
    for tx, ty, dt in cmds:
        m = command_mirror(m, (tx, ty), t)
        t += dt
        m = advance(m, t)
        assert abs(m.tilt_x) <= m.limit and abs(m.tilt_y) <= m.limit
