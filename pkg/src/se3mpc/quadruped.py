"""Stance-phase single-rigid-body MPC with ground-reaction-force inputs.

The decision variables are the stacked body-frame GRFs f_b at each stance
foot; the input matrix maps them to the error-state dynamics, gravity is
added as a constant term with the rotation frozen over the horizon, and the
friction pyramid |f_wx| <= mu f_wz, |f_wy| <= mu f_wz, f_wz > 0 is imposed
in the world frame through that same frozen rotation.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import GRAVITY
from .lie import hat3
from .mpc import NX, mpc_step


@dataclass(frozen=True)
class ContactConfig:
    """Stance feet (body-frame lever arms, meters), friction coefficient
    and vertical-force bounds.  f_min > 0 stands in for the strict
    inequality f_wz > 0."""

    feet: np.ndarray  # (n, 3)
    mu: float
    f_min: float
    f_max: float

    def __post_init__(self):
        feet = np.atleast_2d(np.asarray(self.feet, dtype=float))
        object.__setattr__(self, "feet", feet)
        if feet.shape[0] < 1 or feet.shape[1] != 3:
            raise ValueError("need at least one 3-vector lever arm")
        if self.mu <= 0.0 or self.f_min <= 0.0 or self.f_max <= self.f_min:
            raise ValueError("need mu > 0 and 0 < f_min < f_max")

    @property
    def n_feet(self):
        return self.feet.shape[0]


def grf_input_matrix(contact, J):
    """12 x 3n input matrix: zero error rows, torque rows I_b^{-1} hat(r_k),
    force rows I_3 / m for every foot."""
    n = contact.n_feet
    B = np.zeros((NX, 3 * n))
    for k in range(n):
        cols = slice(3 * k, 3 * (k + 1))
        B[6:9, cols] = J.I_b_inv @ hat3(contact.feet[k])
        B[9:12, cols] = np.eye(3) / J.m
    return B


def friction_constraints(R, contact):
    """Linearized friction pyramid over the stacked f_b, 6 rows per foot.

    The world force is f_w = R f_b with R the stance-frozen rotation; rows
    are mu f_wz -+ f_wx >= 0, mu f_wz -+ f_wy >= 0, and
    f_min <= f_wz, f_wz <= f_max.
    """
    R = np.asarray(R, dtype=float)
    n = contact.n_feet
    A = np.zeros((6 * n, 3 * n))
    l = np.zeros(6 * n)
    u = np.zeros(6 * n)
    rx, ry, rz = R[0], R[1], R[2]
    for k in range(n):
        rows = slice(6 * k, 6 * (k + 1))
        cols = slice(3 * k, 3 * (k + 1))
        A[rows, cols] = np.vstack([
            contact.mu * rz - rx,
            contact.mu * rz + rx,
            contact.mu * rz - ry,
            contact.mu * rz + ry,
            rz,
            rz,
        ])
        l[rows] = [0.0, 0.0, 0.0, 0.0, contact.f_min, -np.inf]
        u[rows] = [np.inf, np.inf, np.inf, np.inf, np.inf, contact.f_max]
    return A, l, u


def grfs_feasible(f_b, R, contact, tol=0.0):
    """Direct evaluation of the pyramid inequalities on f_w = R f_b."""
    R = np.asarray(R, dtype=float)
    f_b = np.asarray(f_b, dtype=float).reshape(contact.n_feet, 3)
    for k in range(contact.n_feet):
        fw = R @ f_b[k]
        if abs(fw[0]) > contact.mu * fw[2] + tol:
            return False
        if abs(fw[1]) > contact.mu * fw[2] + tol:
            return False
        if fw[2] < contact.f_min - tol or fw[2] > contact.f_max + tol:
            return False
    return True


def grf_wrench(f_b, contact):
    """Body wrench (torque, force) equivalent to the stacked GRFs."""
    f_b = np.asarray(f_b, dtype=float).reshape(contact.n_feet, 3)
    tau = np.zeros(3)
    frc = np.zeros(3)
    for k in range(contact.n_feet):
        tau += np.cross(contact.feet[k], f_b[k])
        frc += f_b[k]
    return np.concatenate([tau, frc])


def stance_lever_arms(pose, foot_positions_world):
    """Body-frame lever arms of world-fixed stance feet for the current
    pose: r_b,k = R^T (p_foot - p)."""
    feet_w = np.atleast_2d(np.asarray(foot_positions_world, dtype=float))
    return (feet_w - pose.p) @ pose.R


def quadruped_mpc_step(state, ref, cfg, contact, J, t=0.0, g=GRAVITY,
                       P_prev=None, prev_solution=None, qp_settings=None):
    """One stance MPC cycle: GRF input matrix, gravity-augmented dynamics
    and friction rows, all with quantities frozen at the current state.

    Returns (f_b, predicted, info); a QP infeasibility surfaces as a solver
    error, signalling a wrench the friction cones cannot deliver.
    """
    R = state.pose.R
    B = grf_input_matrix(contact, J)
    h_extra = np.zeros(NX)
    h_extra[9:] = R.T @ np.asarray(g, dtype=float)
    input_rows = friction_constraints(R, contact)
    return mpc_step(
        state, ref, cfg, J, t=t,
        P_prev=P_prev, prev_solution=prev_solution, qp_settings=qp_settings,
        B=B, h_extra=h_extra, input_rows=input_rows,
    )
