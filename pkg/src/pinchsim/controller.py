"""Grasp torque law and the two-phase (closing/grasping) state machine.

The grasping torque uses only proprioception (joint velocities, tip
positions, Jacobians), the sensed tangent directions, and the integrated
rolling angles; it needs no object model.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTips


@dataclass
class ControllerParams:
    f_d: float                 # desired grasping force, N
    K_v: np.ndarray            # diagonal joint damping, (n, n) or (n,)
    r: float                   # fingertip radius, m

    def __post_init__(self):
        K = np.asarray(self.K_v, dtype=float)
        if K.ndim == 1:
            K = np.diag(K)
        self.K_v = K
        if self.f_d <= 0:
            raise ValueError("f_d must be positive")
        if np.any(np.diag(self.K_v) <= 0) or np.any(self.K_v - np.diag(np.diag(self.K_v))):
            raise ValueError("K_v must be diagonal with positive entries")


@dataclass
class ClosingParams:
    targets: tuple             # per-finger target joint angles (rad)
    kp: float = 5.0
    kd: float = 0.2
    speed_cap: float = 0.15    # rad/s cap on the reference progression
    slow_gap: float = 0.002    # m; reference slows below this gap
    slow_floor: float = 0.15   # fraction of the cap kept near contact
    dwell: float = 0.3         # s held at contact before the grasp law engages

    def __post_init__(self):
        self.targets = tuple(np.asarray(t, dtype=float) for t in self.targets)
        if self.kp < 0 or self.kd < 0:
            raise ValueError("closing gains must be nonnegative")
        if self.speed_cap <= 0:
            raise ValueError("approach speed cap must be positive")


class GraspPhase:
    CLOSING = "closing"
    GRASPING = "grasping"


@dataclass
class PhaseState:
    phase: str = GraspPhase.CLOSING
    contact: list = field(default_factory=lambda: [False, False])


def phase_update(state, contact_signals):
    """Latch per-finger contact flags; switch to grasping once both are set."""
    for i, sig in enumerate(contact_signals):
        state.contact[i] = state.contact[i] or bool(sig)
    if all(state.contact):
        state.phase = GraspPhase.GRASPING
    return state.phase


def grasp_torque(i, qdot, J_v, J_w, p_t1, p_t2, t_x, t_y, phi, psi, params):
    """Grasping-phase joint torques for finger i (1 or 2).

    t_x, t_y are the sensed tangent directions at this finger's contact;
    phi, psi the integrated relative rolling angles.
    """
    d = p_t2 - p_t1
    dist = np.linalg.norm(d)
    if dist < 1e-9:
        raise DegenerateTips("fingertip centers coincide")
    t12 = d / dist
    sign = -1.0 if i == 1 else 1.0  # (-1)^i
    u = -params.K_v @ qdot
    u -= sign * params.f_d * (J_v.T @ t12)
    tangent = -sign * math.sin(psi) * t_x - math.sin(phi) * t_y  # (-1)^(i+1) t_x sin(psi) - t_y sin(phi)
    u -= params.r * params.f_d * (J_w.T @ tangent)
    return u


class ClosingServo:
    """Rate-limited joint position servo used during the closing phase.

    The reference creeps from the initial posture toward the targets at the
    capped speed, slowing as the fingertip gap shrinks; a finger's reference
    freezes once its contact is detected.
    """

    def __init__(self, params, q0_per_finger):
        self.params = params
        self.refs = [np.array(q, dtype=float) for q in q0_per_finger]
        self._stopped = [False, False]

    def command(self, i, q, qdot, gap, contact_latched, dt):
        p = self.params
        ref = self.refs[i]
        if contact_latched:
            if not self._stopped[i]:
                # drop the tracking lag so the finger stops pushing inward
                ref[:] = q
                self._stopped[i] = True
        else:
            scale = 1.0
            if gap is not None and gap < p.slow_gap:
                scale = max(p.slow_floor, max(gap, 0.0) / p.slow_gap)
            step = np.clip(p.targets[i] - ref, -p.speed_cap * scale * dt, p.speed_cap * scale * dt)
            ref += step
        return p.kp * (ref - q) - p.kd * qdot
