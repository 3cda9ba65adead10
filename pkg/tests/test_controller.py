"""Grasp torque law and the closing-phase servo."""

import math

import numpy as np
import pytest

from pinchsim import controller as ctl
from pinchsim.errors import DegenerateTips


def _params(f_d=4.0, r=0.015, kv=0.07, n=4):
    return ctl.ControllerParams(f_d=f_d, K_v=kv * np.eye(n), r=r)


def test_controller_params_validation():
    with pytest.raises(ValueError):
        ctl.ControllerParams(f_d=-1.0, K_v=np.eye(4), r=0.015)
    with pytest.raises(ValueError):
        ctl.ControllerParams(f_d=4.0, K_v=np.array([[0.07, 0.01], [0.01, 0.07]]), r=0.015)
    p = ctl.ControllerParams(f_d=4.0, K_v=np.full(4, 0.07), r=0.015)  # vector form
    assert p.K_v.shape == (4, 4)


def test_grasp_torque_formula():
    rng = np.random.default_rng(0)
    params = _params()
    for i in (1, 2):
        qdot = rng.normal(size=4)
        J_v = rng.normal(size=(3, 4))
        J_w = rng.normal(size=(3, 4))
        p_t1 = np.array([0.0, -0.04, 0.0])
        p_t2 = np.array([0.01, 0.05, 0.002])
        t_x = np.array([1.0, 0.0, 0.0])
        t_y = np.array([0.0, 0.0, 1.0])
        phi, psi = 0.07, -0.03
        u = ctl.grasp_torque(i, qdot, J_v, J_w, p_t1, p_t2, t_x, t_y, phi, psi, params)
        t12 = (p_t2 - p_t1) / np.linalg.norm(p_t2 - p_t1)
        s_i = (-1.0) ** i
        expected = (
            -params.K_v @ qdot
            - s_i * params.f_d * (J_v.T @ t12)
            - params.r * params.f_d
            * (J_w.T @ (-s_i * math.sin(psi) * t_x - math.sin(phi) * t_y))
        )
        assert np.allclose(u, expected, atol=1e-14)


def test_grasp_torque_pulls_tips_together():
    # with zero velocity and zero rolling angles, the force term moves each
    # tip toward the other along the tip line
    params = _params()
    J_v = np.hstack([np.eye(3), np.zeros((3, 1))])  # first three joints move the tip
    J_w = np.zeros((3, 4))
    p_t1 = np.array([0.0, -0.04, 0.0])
    p_t2 = np.array([0.0, 0.04, 0.0])
    u1 = ctl.grasp_torque(1, np.zeros(4), J_v, J_w, p_t1, p_t2, np.array([1.0, 0, 0]),
                          np.array([0.0, 0, 1.0]), 0.0, 0.0, params)
    u2 = ctl.grasp_torque(2, np.zeros(4), J_v, J_w, p_t1, p_t2, np.array([1.0, 0, 0]),
                          np.array([0.0, 0, 1.0]), 0.0, 0.0, params)
    assert u1[1] > 0   # finger 1 pushed toward +y
    assert u2[1] < 0   # finger 2 pushed toward -y
    assert math.isclose(u1[1], params.f_d, rel_tol=1e-12)


def test_grasp_torque_degenerate_tips():
    params = _params()
    p = np.array([0.0, 0.01, 0.0])
    with pytest.raises(DegenerateTips):
        ctl.grasp_torque(1, np.zeros(4), np.zeros((3, 4)), np.zeros((3, 4)),
                         p, p, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                         0.0, 0.0, params)


def test_phase_update_latches_and_switches():
    st = ctl.PhaseState()
    assert ctl.phase_update(st, [True, False]) == ctl.GraspPhase.CLOSING
    assert st.contact == [True, False]
    # latched flags persist even if the signal drops
    assert ctl.phase_update(st, [False, True]) == ctl.GraspPhase.GRASPING


def test_closing_servo_rate_limit_and_pd():
    q0 = np.zeros(3)
    target = np.array([0.5, 0.0, 0.0])
    params = ctl.ClosingParams(targets=(target, target), kp=5.0, kd=0.2, speed_cap=0.1)
    servo = ctl.ClosingServo(params, (q0, q0))
    dt = 0.01
    u = servo.command(0, q0, np.zeros(3), gap=0.01, contact_latched=False, dt=dt)
    # after one step the reference moved by speed_cap * dt
    assert np.allclose(servo.refs[0], [0.1 * dt, 0.0, 0.0])
    assert np.allclose(u, 5.0 * (servo.refs[0] - q0))
    # damping acts on the measured joint velocity
    u = servo.command(0, q0, np.array([1.0, 0, 0]), gap=0.01, contact_latched=False, dt=dt)
    assert math.isclose(u[0], 5.0 * servo.refs[0][0] - 0.2, rel_tol=1e-12)


def test_closing_servo_slows_near_contact():
    q0 = np.zeros(1)
    target = np.array([1.0])
    params = ctl.ClosingParams(targets=(target, target), speed_cap=0.1,
                               slow_gap=0.002, slow_floor=0.2)
    servo = ctl.ClosingServo(params, (q0, q0))
    dt = 0.01
    servo.command(0, q0, np.zeros(1), gap=0.001, contact_latched=False, dt=dt)
    step_near = servo.refs[0][0]
    servo2 = ctl.ClosingServo(params, (q0, q0))
    servo2.command(0, q0, np.zeros(1), gap=0.01, contact_latched=False, dt=dt)
    step_far = servo2.refs[0][0]
    assert step_near < step_far
    assert step_near >= 0.2 * step_far - 1e-15  # floored, never stalls


def test_closing_servo_freezes_on_contact():
    q0 = np.zeros(1)
    params = ctl.ClosingParams(targets=(np.array([1.0]), np.array([1.0])))
    servo = ctl.ClosingServo(params, (q0, q0))
    dt = 0.01
    for _ in range(10):
        servo.command(0, q0, np.zeros(1), gap=0.01, contact_latched=False, dt=dt)
    q_now = np.array([0.0005])
    servo.command(0, q_now, np.zeros(1), gap=-1e-5, contact_latched=True, dt=dt)
    # the reference snapped to the measured posture and stays there
    assert np.allclose(servo.refs[0], q_now)
    servo.command(0, q_now, np.zeros(1), gap=-1e-5, contact_latched=True, dt=dt)
    assert np.allclose(servo.refs[0], q_now)


def test_closing_params_validation():
    with pytest.raises(ValueError):
        ctl.ClosingParams(targets=(np.zeros(1), np.zeros(1)), speed_cap=0.0)
    with pytest.raises(ValueError):
        ctl.ClosingParams(targets=(np.zeros(1), np.zeros(1)), kp=-1.0)
