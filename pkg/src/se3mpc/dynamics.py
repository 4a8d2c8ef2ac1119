"""Rigid-body plant: forced Euler-Poincare twist dynamics and geometric
integration.

The twist evolves by J_b xi_dot = ad*_xi J_b xi + u with J_b =
blockdiag(I_b, m I_3); the pose is reconstructed from X_dot = X hat6(xi).
The integrator is Runge-Kutta-Munthe-Kaas order 4 (RK4 on the twist plus an
exponential pose update), which keeps the pose on SE(3) by construction.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lie import Pose, coad_se3

GRAVITY = np.array([0.0, 0.0, -9.81])


class InvalidDt(ValueError):
    """Non-positive integration step."""


@dataclass(frozen=True)
class InertiaParams:
    """Body moment of inertia (kg m^2) and mass (kg), principal axes."""

    I_b: np.ndarray
    m: float

    def __post_init__(self):
        I_b = np.asarray(self.I_b, dtype=float)
        object.__setattr__(self, "I_b", I_b)
        if np.abs(I_b - I_b.T).max() > 1e-12:
            raise ValueError("inertia matrix must be symmetric")
        if np.linalg.eigvalsh(I_b).min() <= 0.0 or self.m <= 0.0:
            raise ValueError("inertia and mass must be positive definite")
        object.__setattr__(self, "I_b_inv", np.linalg.inv(I_b))

    @property
    def J_b(self):
        J = np.zeros((6, 6))
        J[:3, :3] = self.I_b
        J[3:, 3:] = self.m * np.eye(3)
        return J

    @property
    def J_b_inv(self):
        J = np.zeros((6, 6))
        J[:3, :3] = self.I_b_inv
        J[3:, 3:] = np.eye(3) / self.m
        return J


@dataclass(frozen=True)
class RigidBodyState:
    pose: Pose
    twist: np.ndarray


def twist_rate(xi, u, J):
    """xi_dot = J_b^{-1} (ad*_xi J_b xi + u)."""
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=float)
    return J.J_b_inv @ (coad_se3(xi) @ (J.J_b @ xi) + u)


def twist_rate_with_gravity(xi, u, J, R, g=GRAVITY):
    """twist_rate plus the body-frame gravity term (0, R^T g)."""
    rate = twist_rate(xi, u, J)
    rate[3:] += np.asarray(R, dtype=float).T @ np.asarray(g, dtype=float)
    return rate


def integrate_step(s, u, J, dt, gravity=None):
    """One RKMK4 step under a constant body wrench u."""
    if dt <= 0.0:
        raise InvalidDt(f"dt must be positive, got {dt}")
    use_gravity = gravity is not None
    g = np.asarray(gravity, dtype=float) if use_gravity else np.zeros(3)
    R, p, xi = _kernels.rollout(
        s.pose.R, s.pose.p, s.twist, np.asarray(u, dtype=float),
        J.I_b, J.I_b_inv, J.m, g, use_gravity, float(dt), 1,
    )
    return RigidBodyState(Pose(R, p), xi)


def rollout(s, u, J, dt, nsteps, gravity=None):
    """Advance nsteps with a held wrench; only the final state is returned.

    This is the hot path of the closed-loop benchmark (one call per control
    cycle, nsteps = dt_control / dt_sim).
    """
    if dt <= 0.0:
        raise InvalidDt(f"dt must be positive, got {dt}")
    use_gravity = gravity is not None
    g = np.asarray(gravity, dtype=float) if use_gravity else np.zeros(3)
    R, p, xi = _kernels.rollout(
        s.pose.R, s.pose.p, s.twist, np.asarray(u, dtype=float),
        J.I_b, J.I_b_inv, J.m, g, use_gravity, float(dt), int(nsteps),
    )
    return RigidBodyState(Pose(R, p), xi)


def simulate(s0, controller, J, dt, steps, gravity=None):
    """Closed-loop simulation at the plant rate.

    ``controller(t, state) -> wrench`` is queried every step.  Returns the
    list of states (length steps + 1) and the list of applied wrenches.
    """
    states = [s0]
    inputs = []
    s = s0
    for k in range(steps):
        u = np.asarray(controller(k * dt, s), dtype=float)
        s = integrate_step(s, u, J, dt, gravity=gravity)
        inputs.append(u)
        states.append(s)
    return states, inputs


def kinetic_energy(xi, J):
    xi = np.asarray(xi, dtype=float)
    return 0.5 * float(xi @ (J.J_b @ xi))


def spatial_momentum(state, J):
    """World-frame momentum Ad_{X^{-1}}^T (J_b xi); conserved when u = 0."""
    from .lie import adjoint_SE3

    Ad_inv = adjoint_SE3(state.pose.inverse())
    return Ad_inv.T @ (J.J_b @ state.twist)
