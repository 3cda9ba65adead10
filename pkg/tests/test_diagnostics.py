"""Energy function, dissipation rate, equilibrium residuals, convergence check."""

import math

import numpy as np
import pytest

from pinchsim import diagnostics as diag
from pinchsim.contact import ContactFrame
from pinchsim.dynamics import Multipliers
from pinchsim.errors import DomainExceeded


def test_lyapunov_hand_computed():
    nv = 4  # two 1-dof fingers + a 2-dof "object" stand-in is overkill; use 4
    xdot = np.array([1.0, -2.0, 0.5, 0.0])
    M_s = np.diag([2.0, 1.0, 4.0, 1.0])
    p_t1 = np.array([0.0, -0.03, 0.0])
    p_t2 = np.array([0.0, 0.05, 0.0])
    phi, psi = 0.2, -0.1
    f_d, r = 4.0, 0.015
    kv_diags = (np.array([0.07]), np.array([0.05]))
    omega_rels = (np.array([0.1, 0.0, 0.0]), np.array([0.0, 0.2, 0.0]))
    K_s = 0.01 * np.eye(3)
    Q_s = np.outer([0, 1.0, 0], [0, 1.0, 0])
    rep = diag.lyapunov(xdot, M_s, p_t1, p_t2, phi, psi, f_d, r,
                        kv_diags, omega_rels, (K_s, K_s), Q_s)
    kinetic = 0.5 * (2.0 + 4.0 + 1.0)
    assert math.isclose(rep.kinetic, kinetic, rel_tol=1e-12)
    assert math.isclose(rep.distance, 4.0 * 0.08, rel_tol=1e-12)
    assert math.isclose(rep.z1, 1 - math.cos(0.2), rel_tol=1e-12)
    assert math.isclose(rep.z2, 1 - math.cos(0.1), rel_tol=1e-12)
    assert math.isclose(rep.V, kinetic + 0.32 + r * f_d * (rep.z1 + rep.z2), rel_tol=1e-12)
    W_exp = 0.07 * 1.0 + 0.05 * 4.0  # joint damping terms
    W_exp += 0.0  # omega_rel_1 is orthogonal to the spin line
    W_exp += 0.01 * 0.2 * 0.2  # omega_rel_2 projects fully onto it
    assert math.isclose(rep.W, W_exp, rel_tol=1e-12)


def test_lyapunov_domain_limit():
    with pytest.raises(DomainExceeded):
        diag.lyapunov(np.zeros(2), np.eye(2), np.zeros(3), np.array([0.0, 0.1, 0.0]),
                      math.pi / 2, 0.0, 4.0, 0.015, (np.array([0.07]), np.array([0.07])),
                      (np.zeros(3), np.zeros(3)), (np.eye(3),) * 2, None)


def _perfect_equilibrium(f_d=4.0, d=0.039):
    p_t1 = np.array([0.0, -d, 0.0])
    p_t2 = np.array([0.0, d, 0.0])
    c = 0.024
    frames = (
        ContactFrame(np.array([0.0, -c, 0.0]), np.array([1.0, 0, 0]),
                     np.array([0.0, 0, 1.0]), np.array([0.0, 1.0, 0.0])),
        ContactFrame(np.array([0.0, c, 0.0]), np.array([1.0, 0, 0]),
                     np.array([0.0, 0, -1.0]), np.array([0.0, -1.0, 0.0])),
    )
    mult = Multipliers(f1=f_d, f2=f_d, lam1=np.zeros(2), lam2=np.zeros(2))
    return p_t1, p_t2, np.zeros(3), mult, frames


def test_equilibrium_residuals_vanish_at_equilibrium():
    p_t1, p_t2, p_o, mult, frames = _perfect_equilibrium()
    res = diag.equilibrium_residuals(p_t1, p_t2, p_o, mult, frames, 0.0, 0.0, 4.0)
    assert res.max_delta() < 1e-14
    assert res.parallelism < 1e-15
    assert res.beta_phi < 1e-15 and res.beta_psi < 1e-15
    assert max(res.force_err) < 1e-15


def test_equilibrium_residuals_detect_force_error():
    p_t1, p_t2, p_o, mult, frames = _perfect_equilibrium()
    mult = Multipliers(f1=3.0, f2=4.0, lam1=np.array([0.2, 0.0]), lam2=np.zeros(2))
    res = diag.equilibrium_residuals(p_t1, p_t2, p_o, mult, frames, 0.0, 0.0, 4.0)
    assert math.isclose(res.df[0], -1.0, abs_tol=1e-12)
    assert math.isclose(res.dlam[0][0], 0.2, abs_tol=1e-12)
    assert math.isclose(res.force_err[0], 1.0, abs_tol=1e-12)
    assert res.max_delta() >= 1.0


def test_equilibrium_residuals_detect_rolling_mismatch():
    p_t1, p_t2, p_o, mult, frames = _perfect_equilibrium()
    phi = 0.1
    res = diag.equilibrium_residuals(p_t1, p_t2, p_o, mult, frames, phi, 0.0, 4.0)
    # t_x . t12 = 0 here, so beta_phi = |sin(phi)| and dN picks up the same term
    assert math.isclose(res.beta_phi, math.sin(phi), abs_tol=1e-12)
    assert res.dN_norm[0] > 0.1


def test_equilibrium_residuals_parallelism():
    p_t1, p_t2, p_o, mult, frames = _perfect_equilibrium()
    shifted = (
        frames[0],
        ContactFrame(frames[1].p_c + np.array([0.005, 0.0, 0.0]),
                     frames[1].t_x, frames[1].t_y, frames[1].n_z),
    )
    res = diag.equilibrium_residuals(p_t1, p_t2, p_o, mult, shifted, 0.0, 0.0, 4.0)
    assert math.isclose(res.parallelism, 0.005, rel_tol=1e-12)
    assert math.isclose(res.S_N_norm, 4.0 * 0.005, rel_tol=1e-12)


def test_window_converged_bands():
    f_d = 4.0
    ok = diag.window_converged(np.full(5, 5e-5), np.full(5, 4.01), np.full(5, 3.99), f_d)
    assert ok
    assert not diag.window_converged(np.full(5, 2e-4), np.full(5, 4.0), np.full(5, 4.0), f_d)
    assert not diag.window_converged(np.full(5, 5e-5), np.full(5, 4.2), np.full(5, 4.0), f_d)


def test_convergence_check_classification():
    dt = 0.01
    t = np.arange(0.0, 2.0, dt)
    n = len(t)
    f = np.full(n, 4.0)
    settled = np.full(n, 5e-5)
    assert diag.convergence_check(t, settled, f, f, 4.0) == "converged"
    # too short a window
    assert diag.convergence_check(t[:10], settled[:10], f[:10], f[:10], 4.0) == "settling"
    # strictly growing velocities in the trailing window
    growing = np.concatenate([np.full(n - 60, 1e-5), np.geomspace(1e-4, 1e-1, 60)])
    assert diag.convergence_check(t, growing, f, f, 4.0) == "diverged"
    # decaying but not yet under tolerance
    slow = np.geomspace(1.0, 1e-3, n)
    assert diag.convergence_check(t, slow, f, f, 4.0) == "settling"
