"""Spatial algebra: hat operator, rotations, quaternions."""

import math

import numpy as np
import pytest

from pinchsim import spatial


def test_skew_matches_cross_product():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(size=3)
        w = rng.normal(size=3)
        assert np.allclose(spatial.skew(v) @ w, np.cross(v, w), atol=1e-14)


def test_skew_antisymmetric():
    rng = np.random.default_rng(1)
    S = spatial.skew(rng.normal(size=3))
    assert np.allclose(S, -S.T)


def test_normalize_unit_and_direction():
    v = np.array([3.0, 0.0, 4.0])
    u = spatial.normalize(v)
    assert math.isclose(np.linalg.norm(u), 1.0, abs_tol=1e-15)
    assert np.allclose(u, v / 5.0)


def test_normalize_rejects_zero():
    with pytest.raises(ValueError):
        spatial.normalize(np.zeros(3))


def test_rotation_about_z_quarter_turn():
    R = spatial.rotation_about(np.array([0.0, 0.0, 1.0]), math.pi / 2)
    assert np.allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-14)
    assert np.allclose(R @ [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], atol=1e-14)


def test_rotation_about_is_special_orthogonal():
    rng = np.random.default_rng(2)
    for _ in range(50):
        axis = spatial.normalize(rng.normal(size=3))
        angle = rng.uniform(-math.pi, math.pi)
        R = spatial.rotation_about(axis, angle)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert math.isclose(np.linalg.det(R), 1.0, abs_tol=1e-12)
        # the axis is fixed by its own rotation
        assert np.allclose(R @ axis, axis, atol=1e-12)


def test_rotation_matches_scipy():
    from scipy.spatial.transform import Rotation

    rng = np.random.default_rng(3)
    for _ in range(50):
        axis = spatial.normalize(rng.normal(size=3))
        angle = rng.uniform(-math.pi, math.pi)
        R_ref = Rotation.from_rotvec(angle * axis).as_matrix()
        assert np.allclose(spatial.rotation_about(axis, angle), R_ref, atol=1e-12)


def test_quat_multiply_composes_rotations():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = spatial.quat_from_axis_angle(spatial.normalize(rng.normal(size=3)),
                                         rng.uniform(-math.pi, math.pi))
        b = spatial.quat_from_axis_angle(spatial.normalize(rng.normal(size=3)),
                                         rng.uniform(-math.pi, math.pi))
        Rab = spatial.quat_to_matrix(spatial.quat_multiply(a, b))
        assert np.allclose(Rab, spatial.quat_to_matrix(a) @ spatial.quat_to_matrix(b),
                           atol=1e-12)


def test_quat_axis_angle_matches_rotation_matrix():
    rng = np.random.default_rng(5)
    for _ in range(50):
        axis = spatial.normalize(rng.normal(size=3))
        angle = rng.uniform(-math.pi, math.pi)
        q = spatial.quat_from_axis_angle(axis, angle)
        assert np.allclose(spatial.quat_to_matrix(q),
                           spatial.rotation_about(axis, angle), atol=1e-12)


def test_quat_identity_round_trip():
    q = spatial.quat_identity()
    assert np.allclose(spatial.quat_to_matrix(q), np.eye(3))


def test_integrate_orientation_constant_rate():
    # spinning at a constant world rate for T seconds equals one big rotation
    omega = np.array([0.3, -0.2, 0.5])
    T = 1.0
    steps = 20000
    q = spatial.quat_identity()
    for _ in range(steps):
        q = spatial.integrate_orientation(q, omega, T / steps)
    R_ref = spatial.rotation_about(spatial.normalize(omega), np.linalg.norm(omega) * T)
    assert np.allclose(spatial.quat_to_matrix(q), R_ref, atol=1e-6)
    assert math.isclose(np.linalg.norm(q), 1.0, abs_tol=1e-12)


def test_integrate_orientation_zero_rate_is_identity():
    q0 = spatial.quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), 0.7)
    q1 = spatial.integrate_orientation(q0, np.zeros(3), 0.01)
    assert np.allclose(q0, q1)
