"""Serial-chain finger model: forward kinematics and geometric Jacobians.

A finger is a chain of revolute joints.  The transform of joint k is
Rot(axis_k, q_k) followed by a fixed link offset, all stacked onto the base
pose.  The fingertip is a hemisphere of radius ``tip_radius`` centered at the
chain's end point.

The module exposes a batched evaluation path (``fk_batch``) because the
dynamics layer needs kinematics at many nearby configurations per step
(numeric mass-matrix derivatives, constraint-rate finite differences).
"""

from dataclasses import dataclass, field

import numpy as np

from .spatial import skew


@dataclass
class FingerChain:
    """Kinematic and inertial description of one finger.

    axes/offsets/coms/inertias are per-joint, expressed in the parent (resp.
    link) frame.  Link k is the body rigidly attached to the frame after
    joint k's rotation; its COM and inertia are given in that frame.
    """

    base_pos: np.ndarray
    base_rot: np.ndarray
    axes: np.ndarray       # (n, 3), unit
    offsets: np.ndarray    # (n, 3), m
    masses: np.ndarray     # (n,), kg
    coms: np.ndarray       # (n, 3), m
    inertias: np.ndarray   # (n, 3, 3), kg m^2, link frame
    tip_radius: float
    _axis_skews: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.base_pos = np.asarray(self.base_pos, dtype=float)
        self.base_rot = np.asarray(self.base_rot, dtype=float)
        self.axes = np.asarray(self.axes, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        self.coms = np.asarray(self.coms, dtype=float)
        self.inertias = np.asarray(self.inertias, dtype=float)
        n = self.n_joints
        if n < 1:
            raise ValueError("chain needs at least one joint")
        if not np.allclose(np.linalg.norm(self.axes, axis=1), 1.0, atol=1e-9):
            raise ValueError("joint axes must be unit vectors")
        if np.any(self.masses <= 0):
            raise ValueError("link masses must be positive")
        for k in range(n):
            I = self.inertias[k]
            if not np.allclose(I, I.T, atol=1e-12):
                raise ValueError(f"link {k} inertia not symmetric")
            if np.any(np.linalg.eigvalsh(I) <= 0):
                raise ValueError(f"link {k} inertia not positive definite")
        self._axis_skews = np.stack([skew(a) for a in self.axes])

    @property
    def n_joints(self):
        return self.axes.shape[0]


@dataclass
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot must have equal length")


def fk_batch(chain, Q):
    """Evaluate the chain at a batch of configurations.

    Q has shape (B, n).  Returns a dict with world-frame per-joint axes,
    joint origins, post-joint rotations, and the tip pose, all batched.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    B, n = Q.shape
    if n != chain.n_joints:
        raise ValueError(f"expected {chain.n_joints} joint angles, got {n}")

    R = np.broadcast_to(chain.base_rot, (B, 3, 3)).copy()
    p = np.broadcast_to(chain.base_pos, (B, 3)).copy()
    axes_w = np.empty((B, n, 3))
    joint_pos = np.empty((B, n, 3))
    R_after = np.empty((B, n, 3, 3))

    eye = np.eye(3)
    for k in range(n):
        axes_w[:, k] = R @ chain.axes[k]
        joint_pos[:, k] = p
        K = chain._axis_skews[k]
        s = np.sin(Q[:, k])[:, None, None]
        c = np.cos(Q[:, k])[:, None, None]
        Rk = eye + s * K + (1.0 - c) * (K @ K)
        R = R @ Rk
        R_after[:, k] = R
        p = p + R @ chain.offsets[k]

    return {
        "axes_w": axes_w,
        "joint_pos": joint_pos,
        "R_after": R_after,
        "tip": p,
        "R_tip": R,
    }


def point_jacobians(fk, points):
    """Geometric Jacobians of batched world points rigidly past the last joint.

    points: (B, 3).  Returns (Jv, Jw) of shape (B, 3, n).
    """
    axes_w = fk["axes_w"]
    arms = points[:, None, :] - fk["joint_pos"]       # (B, n, 3)
    Jv = np.cross(axes_w, arms).transpose(0, 2, 1)    # (B, 3, n)
    Jw = axes_w.transpose(0, 2, 1)
    return Jv, Jw


def mass_matrices(chain, fk):
    """Joint-space inertia matrices for a batch of configurations: (B, n, n)."""
    axes_w = fk["axes_w"]
    joint_pos = fk["joint_pos"]
    R_after = fk["R_after"]
    B, n = axes_w.shape[:2]
    M = np.zeros((B, n, n))
    for k in range(n):
        Ra = R_after[:, k]
        com_w = joint_pos[:, k] + Ra @ chain.coms[k]
        cols = slice(0, k + 1)
        arms = com_w[:, None, :] - joint_pos[:, cols]
        Jv = np.cross(axes_w[:, cols], arms)          # (B, k+1, 3) rows=cols
        Jw = axes_w[:, cols]
        Iw = Ra @ chain.inertias[k] @ Ra.transpose(0, 2, 1)
        Mk = chain.masses[k] * np.einsum("bic,bjc->bij", Jv, Jv)
        Mk += np.einsum("bic,bcd,bjd->bij", Jw, Iw, Jw)
        M[:, : k + 1, : k + 1] += Mk
    return M


def forward_kinematics(chain, q):
    """Fingertip center position and orientation in the world frame."""
    fk = fk_batch(chain, np.asarray(q)[None, :])
    return fk["tip"][0], fk["R_tip"][0]


def jacobians(chain, q):
    """Translational and rotational tip Jacobians (3 x n each)."""
    fk = fk_batch(chain, np.asarray(q)[None, :])
    Jv, Jw = point_jacobians(fk, fk["tip"])
    return Jv[0], Jw[0]


def tip_angular_velocity(chain, state):
    """World angular velocity of the fingertip body, J_w(q) @ qdot."""
    _, Jw = jacobians(chain, state.q)
    return Jw @ state.qdot
