"""SO(3)/SE(3) operators: hat/vee isomorphisms, exp/log maps, Adjoint,
adjoint and coadjoint.

Conventions: twists are ordered angular-first, ``xi = (w1, w2, w3, v1, v2,
v3)``, and every 6x6 matrix uses the same block ordering.  All functions are
pure; ``Pose`` and raw rotation matrices are treated as immutable values.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import exp_se3 as _exp_se3_mat
from ._kernels import exp_so3, log_so3
from ._kernels import log_se3 as _log_se3_mat

ROTATION_TOL = 1e-9


class NotSkew(ValueError):
    """Input matrix has a symmetric part above tolerance."""


class NotRigid(ValueError):
    """Matrix is not a valid SE(3)/SO(3) element."""


def hat3(w):
    """Map a 3-vector to its skew (cross-product) matrix."""
    w = np.asarray(w, dtype=float)
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def vee3(M, tol=ROTATION_TOL):
    """Inverse of hat3; rejects matrices with a significant symmetric part."""
    M = np.asarray(M, dtype=float)
    if np.abs(M + M.T).max() > tol:
        raise NotSkew("matrix is not skew-symmetric")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def hat6(xi):
    """Twist (w, v) to its 4x4 se(3) matrix [[hat3(w), v], [0, 0]]."""
    xi = np.asarray(xi, dtype=float)
    M = np.zeros((4, 4))
    M[:3, :3] = hat3(xi[:3])
    M[:3, 3] = xi[3:]
    return M


def vee6(M, tol=ROTATION_TOL):
    """Inverse of hat6; validates the se(3) structure."""
    M = np.asarray(M, dtype=float)
    if np.abs(M[3, :]).max() > tol:
        raise NotSkew("bottom row of an se(3) matrix must be zero")
    w = vee3(M[:3, :3], tol=tol)
    return np.concatenate([w, M[:3, 3]])


def _project_rotation(R):
    # Polar factor via SVD; nearest rotation in Frobenius norm.
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_defect(R):
    """Frobenius distance of R^T R from the identity."""
    R = np.asarray(R, dtype=float)
    return float(np.linalg.norm(R.T @ R - np.eye(3)))


def check_rotation(R, tol=ROTATION_TOL):
    """Validate or repair a rotation matrix.

    Drift within ``tol`` passes through untouched; larger drift is repaired
    by polar projection so that long simulations cannot silently leave the
    group.  A matrix with a non-positive determinant is rejected.
    """
    R = np.asarray(R, dtype=float)
    if np.linalg.det(R) <= 0.0:
        raise NotRigid("determinant must be +1")
    if rotation_defect(R) > tol:
        R = _project_rotation(R)
    return R


@dataclass(frozen=True)
class Pose:
    """SE(3) element as a rotation matrix and a position (meters)."""

    R: np.ndarray
    p: np.ndarray

    @staticmethod
    def identity():
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(T, tol=ROTATION_TOL):
        T = np.asarray(T, dtype=float)
        return Pose(check_rotation(T[:3, :3], tol=tol), T[:3, 3].copy())

    def as_matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.p
        return T

    def inverse(self):
        return Pose(self.R.T.copy(), -(self.R.T @ self.p))

    def __matmul__(self, other):
        return Pose(self.R @ other.R, self.R @ other.p + self.p)


def exp_se3(xi):
    """SE(3) exponential of a twist, with the left-Jacobian translation
    coupling, returned as a Pose."""
    T = _exp_se3_mat(np.asarray(xi, dtype=float))
    return Pose(T[:3, :3], T[:3, 3])


def log_se3(X):
    """Twist coordinates of a Pose; inverse of exp_se3 for angles <= pi."""
    return _log_se3_mat(X.as_matrix())


def adjoint_SE3(X):
    """6x6 Adjoint of a Pose: [[R, 0], [hat3(p) R, R]]."""
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = X.R
    Ad[3:, :3] = hat3(X.p) @ X.R
    Ad[3:, 3:] = X.R
    return Ad


def ad_se3(xi):
    """6x6 adjoint of a twist: [[hat3(w), 0], [hat3(v), hat3(w)]]."""
    xi = np.asarray(xi, dtype=float)
    ad = np.zeros((6, 6))
    W = hat3(xi[:3])
    ad[:3, :3] = W
    ad[3:, :3] = hat3(xi[3:])
    ad[3:, 3:] = W
    return ad


def coad_se3(xi):
    """Coadjoint ad*_xi = ad_xi^T."""
    return ad_se3(xi).T.copy()


__all__ = [
    "NotSkew",
    "NotRigid",
    "Pose",
    "ROTATION_TOL",
    "ad_se3",
    "adjoint_SE3",
    "check_rotation",
    "coad_se3",
    "exp_se3",
    "exp_so3",
    "hat3",
    "hat6",
    "log_se3",
    "log_so3",
    "rotation_defect",
    "vee3",
    "vee6",
]
