"""Stability bookkeeping: energy function, dissipation, equilibrium residuals.

The energy function V combines system kinetic energy, the fingertip
separation potential and the rolling-angle potentials; its dissipation rate W
collects the joint damping and spinning-friction quadratic forms.  Residuals
measure how far a state sits from the grasp equilibrium manifold (contact
forces of magnitude f_d along the tip line, tip line parallel to the contact
line, rolling angles matching their tangent projections).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainExceeded

VEL_TOL = 1e-4         # rad/s and m/s, converged-velocity threshold
FORCE_TOL_FRAC = 0.02  # converged-force band as a fraction of f_d
WINDOW = 0.5           # s of trailing samples used by the convergence check


@dataclass
class EnergyReport:
    V: float
    kinetic: float
    distance: float   # f_d * |p_t2 - p_t1|
    z1: float         # 1 - cos(phi)
    z2: float         # 1 - cos(psi)
    W: float


@dataclass
class EquilibriumResiduals:
    df: tuple            # (|Delta f_1| source values), signed, N
    dlam: tuple          # per finger (Delta lambda_x, Delta lambda_y), N
    dN_norm: tuple       # per finger, N
    S_N_norm: float      # N m
    parallelism: float   # m^2 scale: |(p_oc2 - p_oc1) x t12|
    force_err: tuple     # |f_i - f_d|, N
    beta_psi: float
    beta_phi: float

    def max_delta(self):
        vals = [abs(v) for v in self.df]
        vals += [abs(v) for pair in self.dlam for v in pair]
        vals += list(self.dN_norm)
        vals.append(self.S_N_norm)
        return max(vals)


def lyapunov(xdot, M_s, p_t1, p_t2, phi, psi, f_d, r, kv_diags, omega_rels, K_s_list, Q_s):
    """Energy function V and dissipation rate W at one instant.

    kv_diags: per-finger arrays of joint damping gains; omega_rels: per-finger
    tip-minus-object angular velocities; Q_s the spin projector (None before
    both contacts exist, dropping the friction term).
    """
    if abs(phi) >= math.pi / 2 or abs(psi) >= math.pi / 2:
        raise DomainExceeded(f"rolling angle outside (-pi/2, pi/2): phi={phi}, psi={psi}")
    kinetic = 0.5 * float(xdot @ M_s @ xdot)
    distance = f_d * float(np.linalg.norm(p_t2 - p_t1))
    z1 = 1.0 - math.cos(phi)
    z2 = 1.0 - math.cos(psi)
    V = kinetic + distance + r * f_d * (z1 + z2)

    n_total = sum(len(k) for k in kv_diags)
    qd = xdot[:n_total]
    W = float(np.concatenate(kv_diags) @ (qd * qd))
    if Q_s is not None:
        for w_rel, K_s in zip(omega_rels, K_s_list):
            W += float(w_rel @ K_s @ Q_s @ w_rel)
    return EnergyReport(V, kinetic, distance, z1, z2, W)


def equilibrium_residuals(p_t1, p_t2, p_o, mult, frames, phi, psi, f_d):
    """Distance of the current state from the grasp equilibrium manifold."""
    t12 = p_t2 - p_t1
    t12 = t12 / np.linalg.norm(t12)
    f_vals = (mult.f1, mult.f2)
    lam_vals = (mult.lam1, mult.lam2)
    df = []
    dlam = []
    dN_norm = []
    beta_psi = 0.0
    beta_phi = 0.0
    for i, frame in enumerate(frames):
        s = 1.0 if i == 0 else -1.0  # (-1)^(i+1)
        df.append(float(f_vals[i] - s * f_d * (frame.n_z @ t12)))
        dlam.append(
            (
                float(lam_vals[i][0] - s * f_d * (frame.t_x @ t12)),
                float(lam_vals[i][1] - s * f_d * (frame.t_y @ t12)),
            )
        )
        dN = s * f_d * (
            frame.t_y * (frame.t_x @ t12) - frame.t_x * (frame.t_y @ t12)
        ) + f_d * (s * math.sin(psi) * frame.t_x - math.sin(phi) * frame.t_y)
        dN_norm.append(float(np.linalg.norm(dN)))
        beta_psi = max(beta_psi, abs(math.sin(psi) - float(frame.t_y @ t12)))
        beta_phi = max(beta_phi, abs(math.sin(phi) - s * float(frame.t_x @ t12)))

    p_oc1 = frames[0].p_c - p_o
    p_oc2 = frames[1].p_c - p_o
    cross = np.cross(p_oc2 - p_oc1, t12)
    parallelism = float(np.linalg.norm(cross))
    S_N_norm = f_d * parallelism
    force_err = tuple(abs(f - f_d) for f in f_vals)
    return EquilibriumResiduals(
        df=tuple(df),
        dlam=tuple(dlam),
        dN_norm=tuple(dN_norm),
        S_N_norm=S_N_norm,
        parallelism=parallelism,
        force_err=force_err,
        beta_psi=beta_psi,
        beta_phi=beta_phi,
    )


def window_converged(maxvel, f1, f2, f_d, vel_tol=VEL_TOL, force_tol_frac=FORCE_TOL_FRAC):
    """True if every sample in the window is inside the convergence bands."""
    band = force_tol_frac * f_d
    return (
        np.max(maxvel) < vel_tol
        and np.max(np.abs(np.asarray(f1) - f_d)) < band
        and np.max(np.abs(np.asarray(f2) - f_d)) < band
    )


def convergence_check(t, maxvel, f1, f2, f_d, window=WINDOW,
                      vel_tol=VEL_TOL, force_tol_frac=FORCE_TOL_FRAC):
    """Classify a trajectory window as converged / settling / diverged."""
    t = np.asarray(t, dtype=float)
    if len(t) < 2 or t[-1] - t[0] < window - 1e-9:
        return "settling"
    mask = t >= t[-1] - window
    mv = np.asarray(maxvel, dtype=float)[mask]
    if window_converged(mv, np.asarray(f1)[mask], np.asarray(f2)[mask], f_d,
                        vel_tol, force_tol_frac):
        return "converged"
    if len(mv) >= 3 and np.all(np.diff(mv) > 0):
        return "diverged"
    return "settling"
