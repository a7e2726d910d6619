import numpy as np
import pytest

from services.bench_service import verify_jacobians
from utils.dynamics import f_r, linearize, rollout, step
from utils.exceptions import InfeasibleControlError

DT = 0.1
B = 2.5


def test_straight_step_advances_by_dt_v():
    x = np.array([1.0, 2.0, 0.0, 3.0])
    nxt = step(x, [0.0, 1.0], DT, B)
    np.testing.assert_allclose(nxt, [1.0 + DT * 3.0, 2.0, 0.0, 3.0 + DT * 1.0], atol=1e-14)


def test_f_r_is_exact_at_zero_steer():
    assert f_r(4.0, 0.0, DT, B) == pytest.approx(0.4, abs=1e-15)


def test_f_r_matches_closed_form():
    v, delta = 3.0, 0.3
    closed = B + DT * v * np.cos(delta) - np.sqrt(B**2 - (DT * v * np.sin(delta)) ** 2)
    assert f_r(v, delta, DT, B) == pytest.approx(closed, rel=1e-12)


def test_heading_follows_arcsin():
    v, delta = 2.0, 0.2
    nxt = step([0.0, 0.0, 0.5, v], [delta, 0.0], DT, B)
    assert nxt[2] == pytest.approx(0.5 + np.arcsin(DT * v * np.sin(delta) / B))


def test_steer_at_right_angle_is_infeasible():
    with pytest.raises(InfeasibleControlError):
        step([0.0, 0.0, 0.0, 1.0], [np.pi / 2, 0.0], DT, B)


def test_rollout_reports_failing_timestep():
    controls = np.array([[0.0, 0.0], [0.5, 0.0]])
    with pytest.raises(InfeasibleControlError) as info:
        rollout([0.0, 0.0, 0.0, 100.0], controls, DT, B)
    assert info.value.timestep == 1


def test_rollout_shapes_and_initial_state():
    x0 = np.array([0.0, 1.0, 0.2, 2.0])
    traj = rollout(x0, np.zeros((5, 2)), DT, B)
    assert traj.states.shape == (6, 4)
    assert traj.controls.shape == (5, 2)
    assert traj.feasible
    np.testing.assert_array_equal(traj.initial_state, x0)


def test_linearize_input_matrix_has_dt_on_acceleration():
    traj = rollout([0.0, 0.0, 0.3, 2.0], [[0.1, 0.5], [-0.1, 0.0]], DT, B)
    dynamics = linearize(traj, DT, B)
    assert dynamics.A.shape == (2, 4, 4)
    assert dynamics.B.shape == (2, 4, 2)
    np.testing.assert_allclose(dynamics.B[:, 3, 1], DT)


def test_jacobians_match_finite_differences(rng):
    result = verify_jacobians(rng, 100)
    assert result.passed, result
