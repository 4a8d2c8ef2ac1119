"""Pure-numpy implementations of the hot kernels.

Mirrors the API of the compiled extension ``se3mpc._kernels._core``; one of
the two is selected at import time by ``se3mpc._kernels``.  Everything here
is written against plain float64 ndarrays and kept allocation-light, but no
attempt is made to avoid Python-level loops: the compiled twin exists for
that.
"""

import math

import numpy as np

BACKEND = "python"

_SMALL_ANGLE = 1e-6


def _hat(w):
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def exp_so3(w):
    """Rodrigues formula with a series fallback for small angles."""
    w = np.asarray(w, dtype=float)
    theta2 = float(w @ w)
    theta = math.sqrt(theta2)
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    K = _hat(w)
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R):
    """Logarithm of a rotation matrix, returned with angle in [0, pi].

    The skew part pins sin(theta); near theta = pi the axis is recovered
    from the largest diagonal entry of (R + I)/2, where the skew part
    degenerates.
    """
    R = np.asarray(R, dtype=float)
    s_vec = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = float(np.linalg.norm(s_vec))
    c = 0.5 * (np.trace(R) - 1.0)
    c = min(1.0, max(-1.0, c))
    theta = math.atan2(s, c)
    if theta < _SMALL_ANGLE:
        return s_vec * (1.0 + theta * theta / 6.0)
    if math.pi - theta > 1e-4:
        return s_vec * (theta / s)
    # Near pi the skew part degenerates; the symmetric part gives
    # (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T, which recovers
    # the axis a to full precision (the divisor is ~2 here).
    M = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(M)))
    axis = M[:, k] / math.sqrt(M[k, k])
    axis /= np.linalg.norm(axis)
    if s > 0.0 and axis @ s_vec < 0.0:
        axis = -axis
    return theta * axis


def _so3_left_jacobian(w):
    theta2 = float(w @ w)
    theta = math.sqrt(theta2)
    if theta < _SMALL_ANGLE:
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
        cc = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0
    else:
        b = (1.0 - math.cos(theta)) / theta2
        cc = (theta - math.sin(theta)) / (theta2 * theta)
    K = _hat(w)
    return np.eye(3) + b * K + cc * (K @ K)


def _so3_left_jacobian_inv(w):
    theta2 = float(w @ w)
    theta = math.sqrt(theta2)
    if theta < 1e-4:
        e = 1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
        e = (1.0 - a / (2.0 * b)) / theta2
    K = _hat(w)
    return np.eye(3) - 0.5 * K + e * (K @ K)


def exp_se3(xi):
    """SE(3) exponential of a twist (omega, v), returned as a 4x4 matrix."""
    xi = np.asarray(xi, dtype=float)
    w, v = xi[:3], xi[3:]
    T = np.eye(4)
    T[:3, :3] = exp_so3(w)
    T[:3, 3] = _so3_left_jacobian(w) @ v
    return T


def log_se3(T):
    """Inverse of exp_se3, as a twist (omega, v)."""
    T = np.asarray(T, dtype=float)
    w = log_so3(T[:3, :3])
    v = _so3_left_jacobian_inv(w) @ T[:3, 3]
    return np.concatenate([w, v])


def _twist_rate(xi, u, I_b, I_b_inv, m, R, g, use_gravity):
    w, v = xi[:3], xi[3:]
    wdot = I_b_inv @ (u[:3] - np.cross(w, I_b @ w))
    vdot = u[3:] / m - np.cross(w, v)
    if use_gravity:
        vdot = vdot + R.T @ g
    return np.concatenate([wdot, vdot])


def _ad(sigma, xi):
    # se(3) adjoint: ad_{(w,v)} (w', v') = (w x w', v x w' + w x v')
    sw, sv = sigma[:3], sigma[3:]
    xw, xv = xi[:3], xi[3:]
    return np.concatenate([np.cross(sw, xw), np.cross(sv, xw) + np.cross(sw, xv)])


def _dexpinv(sigma, xi):
    # dexpinv_{-sigma}(xi), matching the right update X <- X exp(sigma).
    # Truncated at ad^2; sigma = O(dt) so this keeps the integrator 4th order.
    a1 = _ad(sigma, xi)
    a2 = _ad(sigma, a1)
    return xi + 0.5 * a1 + a2 / 12.0


def rollout(R, p, xi, u, I_b, I_b_inv, m, g, use_gravity, dt, nsteps):
    """Advance a rigid body under a constant body wrench for nsteps of dt.

    Runge-Kutta-Munthe-Kaas order 4: the twist and the algebra increment
    sigma are integrated together, then the pose is updated by the group
    exponential X <- X exp(sigma).  Returns (R, p, xi) after the last step.
    """
    R = np.array(R, dtype=float)
    p = np.array(p, dtype=float)
    xi = np.array(xi, dtype=float)
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    zero6 = np.zeros(6)

    for _ in range(nsteps):
        def f(sigma, xi_s):
            if use_gravity:
                R_s = R @ exp_so3(sigma[:3])
            else:
                R_s = R
            xd = _twist_rate(xi_s, u, I_b, I_b_inv, m, R_s, g, use_gravity)
            sd = _dexpinv(sigma, xi_s)
            return sd, xd

        s1, k1 = f(zero6, xi)
        s2, k2 = f(0.5 * dt * s1, xi + 0.5 * dt * k1)
        s3, k3 = f(0.5 * dt * s2, xi + 0.5 * dt * k2)
        s4, k4 = f(dt * s3, xi + dt * k3)

        sigma = (dt / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
        xi = xi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        G = exp_se3(sigma)
        p = p + R @ G[:3, 3]
        R = R @ G[:3, :3]

    return R, p, xi
