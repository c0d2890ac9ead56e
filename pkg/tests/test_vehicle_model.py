import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import analytic_arc, central_jacobian

from cautraj.errors import SteeringSingularity
from cautraj.vehicle_model import (WHEELBASE, ControlInput, VehicleState, derivative, linearize,
                                   simulate, step)

states = st.tuples(st.floats(-1e3, 1e3), st.floats(-20, 20), st.floats(0, 45),
                   st.floats(-math.pi, math.pi))
controls = st.tuples(st.floats(-6, 6), st.floats(-math.pi / 4, math.pi / 4))


def test_straight_derivative():
    assert derivative([0, 0, 10, 0], [0, 0]) == pytest.approx([10, 0, 0, 0])


def test_rotated_derivative():
    assert derivative([0, 0, 10, math.pi / 2], [0, 0]) == pytest.approx([0, 10, 0, 0], abs=1e-12)


def test_yaw_rate_on_a_circle():
    delta = math.atan(WHEELBASE / 20.0)
    assert derivative([0, 0, 10, 0], [0, delta])[3] == pytest.approx(0.5)


def test_zero_control_step():
    assert step([0, 1, 20, 0], [0, 0], 0.2) == pytest.approx([4, 1, 20, 0])


def test_zero_dt_is_identity():
    s = np.array([1.0, 2.0, 3.0, 0.4])
    assert np.array_equal(step(s, [1.0, 0.1], 0.0), s)


def test_steering_singularity():
    with pytest.raises(SteeringSingularity):
        step([0, 0, 10, 0], [0, math.pi / 2], 0.2)


def test_arc_error_is_first_order():
    def err(dt, n):
        delta = math.atan(WHEELBASE / 20.0)
        s = simulate([0, 0, 10, 0], [[0, delta]] * n, dt)
        x, y = analytic_arc(10, 20, n * dt)
        return math.hypot(s[-1, 0] - x, s[-1, 1] - y)

    e1, e2, e3 = err(0.2, 20), err(0.1, 40), err(0.05, 80)
    assert 1.8 <= e1 / e2 <= 2.2 and 1.8 <= e2 / e3 <= 2.2


def test_b_entry_at_zero_steer():
    lin = linearize([0, 0, 15, 0], [0, 0], 0.2)
    assert lin.B[3, 1] == pytest.approx(15 * 0.2 / WHEELBASE)


@given(states, controls)
def test_linearization_matches_finite_differences(s, u):
    s, u = np.array(s), np.array(u)
    lin = linearize(s, u, 0.2)
    A = central_jacobian(lambda z: step(z, u, 0.2), s)
    B = central_jacobian(lambda w: step(s, w, 0.2), u)
    assert np.all(np.abs(A - lin.A) <= 1e-5 * np.maximum(np.abs(lin.A), 1e-2))
    assert np.all(np.abs(B - lin.B) <= 1e-5 * np.maximum(np.abs(lin.B), 1e-2))


@given(states, controls)
def test_affine_model_is_exact_at_expansion_point(s, u):
    lin = linearize(s, u, 0.2)
    assert np.linalg.norm(lin.apply(s, u) - step(s, u, 0.2)) < 1e-10 * max(1.0, abs(s[0]))


def test_value_types_round_trip():
    s = VehicleState(1.0, 2.0, 10.0, math.pi / 6)
    assert VehicleState.from_array(s.as_array()) == s
    assert s.vy == pytest.approx(5.0) and s.vx == pytest.approx(10 * math.cos(math.pi / 6))
    assert ControlInput.from_array(ControlInput(1.0, 0.1).as_array()) == ControlInput(1.0, 0.1)
