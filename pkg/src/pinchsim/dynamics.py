"""Constrained equations of motion: assembly, KKT solve, time stepping.

Generalized coordinates stack both fingers' joint angles and the object pose;
generalized velocity is xdot = [qd1, qd2, v_o, w_o].  Contact and rolling
constraints enter through Lagrange multipliers solved simultaneously with the
accelerations in one KKT system.  Constraint drift is suppressed with
Baumgarte feedback; the spinning-friction force is treated implicitly in the
velocity update so the object's tiny inertia cannot destabilize the step.
"""

from dataclasses import dataclass

import numpy as np

from . import kinematics as kin
from .contact import constraint_blocks, interaction_line, spin_projection
from .errors import SingularKKT
from .shapes import ObjectState, surface_query
from .spatial import integrate_orientation, quat_to_matrix

MASS_FD_STEP = 1e-6        # central-difference step for dM/dq (Christoffel terms)
CONSTRAINT_FD_STEP = 1e-7  # central-difference step for (d/dt A^T) xdot


@dataclass
class FrictionParams:
    """Spinning-friction coefficient matrices, diagonal and nonnegative."""

    K_s1: np.ndarray
    K_s2: np.ndarray

    def __post_init__(self):
        self.K_s1 = np.asarray(self.K_s1, dtype=float)
        self.K_s2 = np.asarray(self.K_s2, dtype=float)
        for K in (self.K_s1, self.K_s2):
            if np.any(K - np.diag(np.diag(K))) or np.any(np.diag(K) < 0):
                raise ValueError("K_s must be diagonal with nonnegative entries")

    @staticmethod
    def isotropic(k=0.01):
        return FrictionParams(k * np.eye(3), k * np.eye(3))


@dataclass
class Multipliers:
    f1: float
    f2: float
    lam1: np.ndarray
    lam2: np.ndarray


@dataclass
class SystemState:
    fingers: tuple        # (JointState, JointState)
    obj: ObjectState
    rolling: object       # RollingState
    t: float = 0.0

    def xdot(self):
        return np.concatenate(
            [self.fingers[0].qdot, self.fingers[1].qdot, self.obj.v_o, self.obj.w_o]
        )


@dataclass
class FingerEval:
    """Per-step kinematic/dynamic data for one finger (plus FD side points)."""

    p_t: np.ndarray
    R_t: np.ndarray
    Jv: np.ndarray
    Jw: np.ndarray
    M: np.ndarray
    C: np.ndarray          # Coriolis matrix (Christoffel), C @ qdot is the force
    p_t_pm: tuple          # tip positions at q +/- h*qdot
    Jv_pm: tuple
    Jw_pm: tuple


def _christoffel_from_dM(dMdq, qd):
    t1 = np.einsum("kij,k->ij", dMdq, qd)
    t2 = np.einsum("jik,k->ij", dMdq, qd)
    t3 = np.einsum("ijk,k->ij", dMdq, qd)
    return 0.5 * (t1 + t2 - t3)


def finger_eval(chain, q, qd, h_vel=CONSTRAINT_FD_STEP):
    """Evaluate everything the step needs for one finger in one batched pass."""
    n = chain.n_joints
    h = MASS_FD_STEP
    Q = np.empty((2 * n + 3, n))
    Q[0] = q
    for k in range(n):
        Q[1 + 2 * k] = q
        Q[1 + 2 * k, k] += h
        Q[2 + 2 * k] = q
        Q[2 + 2 * k, k] -= h
    Q[2 * n + 1] = q + h_vel * qd
    Q[2 * n + 2] = q - h_vel * qd

    fk = kin.fk_batch(chain, Q)
    fk_mass = {key: val[: 2 * n + 1] for key, val in fk.items()}
    Ms = kin.mass_matrices(chain, fk_mass)
    dMdq = np.stack([(Ms[1 + 2 * k] - Ms[2 + 2 * k]) / (2 * h) for k in range(n)])
    C = _christoffel_from_dM(dMdq, qd)

    Jv, Jw = kin.point_jacobians(fk, fk["tip"])
    return FingerEval(
        p_t=fk["tip"][0],
        R_t=fk["R_tip"][0],
        Jv=Jv[0],
        Jw=Jw[0],
        M=Ms[0],
        C=C,
        p_t_pm=(fk["tip"][2 * n + 1], fk["tip"][2 * n + 2]),
        Jv_pm=(Jv[2 * n + 1], Jv[2 * n + 2]),
        Jw_pm=(Jw[2 * n + 1], Jw[2 * n + 2]),
    )


def mass_matrix(chain, q):
    """Joint-space inertia matrix (symmetric positive definite)."""
    fk = kin.fk_batch(chain, np.asarray(q)[None, :])
    return kin.mass_matrices(chain, fk)[0]


def coriolis_matrix(chain, q, qd):
    """Coriolis matrix from Christoffel symbols of numeric dM/dq."""
    n = chain.n_joints
    h = MASS_FD_STEP
    Q = np.empty((2 * n, n))
    for k in range(n):
        Q[2 * k] = q
        Q[2 * k, k] += h
        Q[2 * k + 1] = q
        Q[2 * k + 1, k] -= h
    Ms = kin.mass_matrices(chain, kin.fk_batch(chain, Q))
    dMdq = np.stack([(Ms[2 * k] - Ms[2 * k + 1]) / (2 * h) for k in range(n)])
    return _christoffel_from_dM(dMdq, np.asarray(qd, dtype=float))


def coriolis(chain, q, qd):
    """Vector of Coriolis and centripetal joint forces, C(q, qd) @ qd."""
    return coriolis_matrix(chain, q, qd) @ np.asarray(qd, dtype=float)


@dataclass
class StepEval:
    """All per-step quantities shared by controller, solver and diagnostics."""

    fingers: tuple          # (FingerEval, FingerEval)
    queries: tuple          # (ContactQuery, ContactQuery) with true frames
    I_w: np.ndarray         # object world-frame inertia
    Q_s: np.ndarray         # spin projector (None when a contact is missing)
    blocks: tuple           # per-finger ConstraintBlocks (None when free)


class GraspDynamics:
    """Owns the physical model: two finger chains, the object shape, friction."""

    def __init__(
        self,
        chains,
        shape,
        friction,
        baumgarte_alpha=20.0,
        baumgarte_beta=20.0,
        include_gyroscopic=False,
    ):
        self.chains = chains
        self.shape = shape
        self.friction = friction
        self.alpha = baumgarte_alpha
        self.beta = baumgarte_beta
        self.include_gyroscopic = include_gyroscopic
        self.n1 = chains[0].n_joints
        self.n2 = chains[1].n_joints
        self.nv = self.n1 + self.n2 + 6

    # -- evaluation -------------------------------------------------------

    def evaluate(self, state, with_contacts=True):
        obj = state.obj
        R_o = obj.rotation()
        fes = tuple(
            finger_eval(self.chains[i], state.fingers[i].q, state.fingers[i].qdot)
            for i in range(2)
        )
        queries = (None, None)
        Q_s = None
        blocks = (None, None)
        if with_contacts:
            queries = tuple(
                surface_query(self.shape, obj.p_o, R_o, fes[i].p_t, self.chains[i].tip_radius)
                for i in range(2)
            )
            line = interaction_line(queries[0].frame.p_c, queries[1].frame.p_c)
            Q_s = spin_projection(line)
            blocks = tuple(
                constraint_blocks(
                    queries[i].frame, fes[i].Jv, fes[i].Jw, obj.p_o, self.chains[i].tip_radius
                )
                for i in range(2)
            )
        I_w = R_o @ obj.inertia @ R_o.T
        return StepEval(fes, queries, I_w, Q_s, blocks)

    def contact_gaps(self, state):
        """Gaps only, used during the closing phase for contact detection."""
        obj = state.obj
        R_o = obj.rotation()
        gaps = []
        for i in range(2):
            p_t, _ = kin.forward_kinematics(self.chains[i], state.fingers[i].q)
            gaps.append(
                surface_query(self.shape, obj.p_o, R_o, p_t, self.chains[i].tip_radius).gap
            )
        return gaps

    # -- constraint machinery --------------------------------------------

    def _constraint_matrix(self, data):
        n1, n2 = self.n1, self.n2
        G = np.zeros((6, self.nv))
        for i, (blk, sl) in enumerate(
            zip(data.blocks, (slice(0, n1), slice(n1, n1 + n2)))
        ):
            rows = slice(3 * i, 3 * i + 3)
            stacked = blk.stacked()
            G[rows, sl] = stacked[:, : sl.stop - sl.start]
            G[rows, n1 + n2 :] = stacked[:, sl.stop - sl.start :]
        return G

    def constraint_rate(self, state, data):
        """Central-difference estimate of (d/dt A^T) xdot along the motion."""
        h = CONSTRAINT_FD_STEP
        xd = state.xdot()
        obj = state.obj
        rates = np.empty(6)
        for sgn_idx, sgn in enumerate((1.0, -1.0)):
            p_o = obj.p_o + sgn * h * obj.v_o
            quat = integrate_orientation(obj.orientation, obj.w_o, sgn * h)
            R_o = quat_to_matrix(quat)
            rows = np.zeros(6)
            for i in range(2):
                fe = data.fingers[i]
                p_t = fe.p_t_pm[sgn_idx]
                Jv = fe.Jv_pm[sgn_idx]
                Jw = fe.Jw_pm[sgn_idx]
                q = surface_query(self.shape, p_o, R_o, p_t, self.chains[i].tip_radius)
                blk = constraint_blocks(q.frame, Jv, Jw, p_o, self.chains[i].tip_radius)
                sl = slice(0, self.n1) if i == 0 else slice(self.n1, self.n1 + self.n2)
                stacked = blk.stacked()
                rows[3 * i : 3 * i + 3] = stacked[:, : sl.stop - sl.start] @ xd[sl] + stacked[
                    :, sl.stop - sl.start :
                ] @ xd[self.n1 + self.n2 :]
            if sgn_idx == 0:
                plus = rows
            else:
                minus = rows
        rates[:] = (plus - minus) / (2 * h)
        return rates

    def _friction_matrix(self, data):
        """PSD matrix D with friction generalized force = -D @ xdot."""
        D = np.zeros((self.nv, self.nv))
        if data.Q_s is None:
            return D
        slices = (slice(0, self.n1), slice(self.n1, self.n1 + self.n2))
        wo = slice(self.nv - 3, self.nv)
        for i, Ks in enumerate((self.friction.K_s1, self.friction.K_s2)):
            W = Ks @ data.Q_s
            Jw = data.fingers[i].Jw
            sl = slices[i]
            D[sl, sl] += Jw.T @ W @ Jw
            D[sl, wo] -= Jw.T @ W
            D[wo, sl] -= W @ Jw
            D[wo, wo] += W
        return D

    def system_mass(self, data):
        Ms = np.zeros((self.nv, self.nv))
        n1, n2 = self.n1, self.n2
        Ms[:n1, :n1] = data.fingers[0].M
        Ms[n1 : n1 + n2, n1 : n1 + n2] = data.fingers[1].M
        Ms[n1 + n2 : n1 + n2 + 3, n1 + n2 : n1 + n2 + 3] = np.eye(3)
        return Ms

    def assembled_mass(self, data, mass):
        Ms = self.system_mass(data)
        i0 = self.n1 + self.n2
        Ms[i0 : i0 + 3, i0 : i0 + 3] *= mass
        Ms[i0 + 3 :, i0 + 3 :] = data.I_w
        return Ms

    def generalized_forces(self, state, data, u1, u2):
        """Applied + velocity forces, excluding constraint and friction forces."""
        obj = state.obj
        rhs = np.concatenate(
            [
                u1 - data.fingers[0].C @ state.fingers[0].qdot,
                u2 - data.fingers[1].C @ state.fingers[1].qdot,
                np.zeros(3),
                np.zeros(3),
            ]
        )
        if self.include_gyroscopic:
            rhs[self.nv - 3 :] -= np.cross(obj.w_o, data.I_w @ obj.w_o)
        return rhs

    # -- solvers ----------------------------------------------------------

    def solve_free(self, state, data, u1, u2, dt=0.0, vdamp=None):
        """Unconstrained dynamics (closing phase / no contact).

        vdamp is an optional (nv,) diagonal of velocity-damping gains whose
        force is already inside u1/u2; passing it makes that damping implicit
        in the velocity update (stiff gains stay stable at the working dt).
        """
        rhs = self.generalized_forces(state, data, u1, u2)
        n1, n2 = self.n1, self.n2
        M1 = data.fingers[0].M
        M2 = data.fingers[1].M
        if vdamp is not None:
            M1 = M1 + dt * np.diag(vdamp[:n1])
            M2 = M2 + dt * np.diag(vdamp[n1 : n1 + n2])
        xdd = np.zeros(self.nv)
        xdd[:n1] = np.linalg.solve(M1, rhs[:n1])
        xdd[n1 : n1 + n2] = np.linalg.solve(M2, rhs[n1 : n1 + n2])
        xdd[n1 + n2 : n1 + n2 + 3] = rhs[n1 + n2 : n1 + n2 + 3] / state.obj.mass
        xdd[n1 + n2 + 3 :] = np.linalg.solve(data.I_w, rhs[n1 + n2 + 3 :])
        return xdd, None

    def solve_constrained(self, state, data, u1, u2, dt, vdamp=None):
        """KKT solve for accelerations and contact/rolling multipliers.

        dt > 0 makes the spinning-friction force implicit in the velocity
        update (the friction matrix is added to the mass block scaled by dt).
        vdamp optionally does the same for the joint-damping force already
        contained in u1/u2.
        """
        xd = state.xdot()
        G = self._constraint_matrix(data)
        Dfr = self._friction_matrix(data)
        Ms = self.assembled_mass(data, state.obj.mass)
        rhs_v = self.generalized_forces(state, data, u1, u2) - Dfr @ xd
        if vdamp is not None:
            Dfr = Dfr + np.diag(vdamp)

        gdot = G @ xd
        c_rhs = -self.constraint_rate(state, data) - 2.0 * self.alpha * gdot
        # the contact row value is -(d/dt gap), so the position feedback that
        # drives gap -> 0 enters with a positive sign
        for i in range(2):
            c_rhs[3 * i] += self.beta**2 * data.queries[i].gap

        nv = self.nv
        KKT = np.zeros((nv + 6, nv + 6))
        KKT[:nv, :nv] = Ms + dt * Dfr
        KKT[:nv, nv:] = G.T
        KKT[nv:, :nv] = G
        rhs = np.concatenate([rhs_v, c_rhs])
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularKKT(f"KKT solve failed: {exc}", time=state.t) from None
        if not np.all(np.isfinite(sol)):
            raise SingularKKT("KKT produced non-finite solution", time=state.t)
        xdd = sol[:nv]
        mu = sol[nv:]
        mult = Multipliers(f1=mu[0], f2=mu[3], lam1=mu[1:3].copy(), lam2=mu[4:6].copy())
        return xdd, mult

    def project_velocities(self, state, data):
        """Mass-weighted least-squares removal of constraint-violating velocity.

        Used once at the closing-to-grasping switch to absorb the first-contact
        velocity mismatch.
        """
        xd = state.xdot()
        G = self._constraint_matrix(data)
        Ms = self.assembled_mass(data, state.obj.mass)
        MG = np.linalg.solve(Ms, G.T)
        lam = np.linalg.solve(G @ MG, G @ xd)
        return xd - MG @ lam

    # -- integration ------------------------------------------------------

    def integrate(self, state, xdd, dt):
        """Semi-implicit Euler: velocities first, then positions."""
        n1, n2 = self.n1, self.n2
        xd = state.xdot() + dt * xdd
        qd1, qd2 = xd[:n1], xd[n1 : n1 + n2]
        v_o, w_o = xd[n1 + n2 : n1 + n2 + 3], xd[n1 + n2 + 3 :]
        f1 = kin.JointState(state.fingers[0].q + dt * qd1, qd1)
        f2 = kin.JointState(state.fingers[1].q + dt * qd2, qd2)
        obj = ObjectState(
            state.obj.p_o + dt * v_o,
            integrate_orientation(state.obj.orientation, w_o, dt),
            v_o,
            w_o,
            state.obj.mass,
            state.obj.inertia,
        )
        return SystemState((f1, f2), obj, state.rolling, state.t + dt)
