"""Minimal 3-D spatial algebra: hat operator, rotations, unit quaternions.

Vectors are numpy arrays of shape (3,), rotation matrices (3, 3).  Quaternions
are arrays [w, x, y, z] kept at unit norm; angular velocities are world-frame
rad/s.
"""

import math

import numpy as np


def skew(v):
    """Return the skew-symmetric matrix v^ with skew(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def normalize(v):
    """Unit vector along v; raises on (near-)zero input."""
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero vector")
    return v / n


def rotation_about(axis, angle):
    """Rodrigues rotation matrix about a unit axis."""
    k = skew(axis)
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def quat_identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    return q / np.linalg.norm(q)


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_axis_angle(axis, angle):
    half = 0.5 * angle
    return np.concatenate([[math.cos(half)], math.sin(half) * np.asarray(axis)])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def integrate_orientation(q, omega, dt):
    """Advance q by the rotation generated by world-frame omega over dt.

    First-order exponential-map update; the result is renormalized so the
    unit-norm invariant survives arbitrarily long integrations.
    """
    omega = np.asarray(omega, dtype=float)
    angle = np.linalg.norm(omega) * dt
    if angle == 0.0:
        return np.array(q, dtype=float)
    axis = omega / np.linalg.norm(omega)
    dq = quat_from_axis_angle(axis, angle)
    return quat_normalize(quat_multiply(dq, q))
