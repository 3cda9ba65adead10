"""Contact-frame bookkeeping, constraint-matrix blocks, rolling kinematics.

A contact frame is a right-handed orthonormal triad (t_x, t_y, n_z) at a
contact point, with n_z pointing from the fingertip into the object.  The
constraint blocks couple one finger's joint velocities to the object twist:
one row keeps the tip on the surface, two rows enforce rolling without slip.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateContacts
from .spatial import normalize, skew


@dataclass
class ContactFrame:
    p_c: np.ndarray   # contact point, world, m
    t_x: np.ndarray
    t_y: np.ndarray
    n_z: np.ndarray   # unit, into the object

    def __post_init__(self):
        self.p_c = np.asarray(self.p_c, dtype=float)
        self.t_x = np.asarray(self.t_x, dtype=float)
        self.t_y = np.asarray(self.t_y, dtype=float)
        self.n_z = np.asarray(self.n_z, dtype=float)

    def validate(self, tol=1e-10):
        for a, b in ((self.t_x, self.t_y), (self.t_x, self.n_z), (self.t_y, self.n_z)):
            if abs(float(a @ b)) > tol:
                raise ValueError("contact frame not orthogonal")
        if np.linalg.norm(np.cross(self.t_x, self.t_y) - self.n_z) > tol:
            raise ValueError("contact frame not right-handed")


@dataclass
class RollingState:
    """Integrated rolling distances per fingertip, zeroed at grasp entry."""

    phi1: float = 0.0
    phi2: float = 0.0
    psi1: float = 0.0
    psi2: float = 0.0

    def reset(self):
        self.phi1 = self.phi2 = self.psi1 = self.psi2 = 0.0

    def advance(self, rates_prev, rates_new, dt):
        # trapezoidal rule so the controller sees angles current to this step
        avg = 0.5 * (np.asarray(rates_prev) + np.asarray(rates_new))
        self.phi1 += dt * avg[0]
        self.phi2 += dt * avg[1]
        self.psi1 += dt * avg[2]
        self.psi2 += dt * avg[3]


@dataclass
class ConstraintBlocks:
    D_ii: np.ndarray  # (1, n)
    D_i3: np.ndarray  # (1, 6)
    A_ii: np.ndarray  # (2, n)
    A_i3: np.ndarray  # (2, 6)

    def stacked(self):
        """All three constraint rows over [qdot_i; v_o; w_o]: (3, n + 6)."""
        top = np.hstack([self.D_ii, self.D_i3])
        bottom = np.hstack([self.A_ii, self.A_i3])
        return np.vstack([top, bottom])


def constraint_blocks(frame, J_v, J_w, p_o, r):
    """Constraint rows for one finger at the given contact frame.

    The contact row equates the normal velocities of tip center and object
    surface point; the two rolling rows equate the tangential velocities of
    the material contact points on the tip sphere and the object.
    """
    t_x, t_y, n_z = frame.t_x, frame.t_y, frame.n_z
    p_oc_hat = skew(frame.p_c - p_o)
    D_ii = (n_z @ J_v)[None, :]
    D_i3 = np.hstack([-n_z, n_z @ p_oc_hat])[None, :]
    A_ii = np.vstack([t_x @ J_v + r * (t_y @ J_w), t_y @ J_v - r * (t_x @ J_w)])
    A_i3 = np.vstack(
        [
            np.hstack([-t_x, t_x @ p_oc_hat]),
            np.hstack([-t_y, t_y @ p_oc_hat]),
        ]
    )
    return ConstraintBlocks(D_ii, D_i3, A_ii, A_i3)


def rolling_rates(w_t1, w_t2, frame1, frame2):
    """Rolling-angle rates (phi1., phi2., psi1., psi2.) from tip spins.

    Finger 2's phi rate carries a minus sign so that the relative angles of
    ``relative_angles`` measure opposing rolling consistently.
    """
    phi1 = float(frame1.t_y @ w_t1)
    phi2 = -float(frame2.t_y @ w_t2)
    psi1 = float(frame1.t_x @ w_t1)
    psi2 = float(frame2.t_x @ w_t2)
    return phi1, phi2, psi1, psi2


def relative_angles(rs):
    """Relative rolling angles (phi, psi) = (phi2 - phi1, psi1 - psi2)."""
    return rs.phi2 - rs.phi1, rs.psi1 - rs.psi2


def interaction_line(p_c1, p_c2):
    """Unit direction from contact 1 to contact 2."""
    d = np.asarray(p_c2, dtype=float) - np.asarray(p_c1, dtype=float)
    if np.linalg.norm(d) <= 1e-9:
        raise DegenerateContacts("contact points coincide")
    return normalize(d)


def spin_projection(line):
    """Rank-1 projector onto the interaction line (the object-spin direction)."""
    line = np.asarray(line, dtype=float)
    return np.outer(line, line)
