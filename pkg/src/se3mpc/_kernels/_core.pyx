# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: SO(3)/SE(3) exp and log maps and the rigid-body
RKMK4 rollout.  Behaviour matches se3mpc._kernels._purepy bit-for-bit up to
floating-point reassociation; the pure module is the readable reference.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, atan2, M_PI

cnp.import_array()

BACKEND = "compiled"

cdef double _SMALL_ANGLE = 1e-6


cdef inline void _cross(const double* a, const double* b, double* out) nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline void _mat33_vec(const double* M, const double* x, double* out) nogil:
    cdef int i
    for i in range(3):
        out[i] = M[3 * i] * x[0] + M[3 * i + 1] * x[1] + M[3 * i + 2] * x[2]


cdef inline void _mat33_tvec(const double* M, const double* x, double* out) nogil:
    # M^T x
    cdef int i
    for i in range(3):
        out[i] = M[i] * x[0] + M[i + 3] * x[1] + M[i + 6] * x[2]


cdef inline void _mat33_mul(const double* A, const double* B, double* out) nogil:
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = 0.0
            for k in range(3):
                out[3 * i + j] += A[3 * i + k] * B[3 * k + j]


cdef void _exp_so3(const double* w, double* R) nogil:
    cdef double theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    cdef double theta = sqrt(theta2)
    cdef double a, b
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        a = sin(theta) / theta
        b = (1.0 - cos(theta)) / theta2
    # R = I + a K + b K^2 with K = hat(w); K^2 = w w^T - theta2 I
    R[0] = 1.0 + b * (w[0] * w[0] - theta2)
    R[1] = -a * w[2] + b * w[0] * w[1]
    R[2] = a * w[1] + b * w[0] * w[2]
    R[3] = a * w[2] + b * w[1] * w[0]
    R[4] = 1.0 + b * (w[1] * w[1] - theta2)
    R[5] = -a * w[0] + b * w[1] * w[2]
    R[6] = -a * w[1] + b * w[2] * w[0]
    R[7] = a * w[0] + b * w[2] * w[1]
    R[8] = 1.0 + b * (w[2] * w[2] - theta2)


cdef void _log_so3(const double* R, double* w) nogil:
    cdef double s_vec[3]
    cdef double axis[3]
    cdef double s, c, theta, f, mkk, nrm
    cdef int k, i
    s_vec[0] = 0.5 * (R[7] - R[5])
    s_vec[1] = 0.5 * (R[2] - R[6])
    s_vec[2] = 0.5 * (R[3] - R[1])
    s = sqrt(s_vec[0] * s_vec[0] + s_vec[1] * s_vec[1] + s_vec[2] * s_vec[2])
    c = 0.5 * (R[0] + R[4] + R[8] - 1.0)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    theta = atan2(s, c)
    if theta < _SMALL_ANGLE:
        f = 1.0 + theta * theta / 6.0
        w[0] = s_vec[0] * f
        w[1] = s_vec[1] * f
        w[2] = s_vec[2] * f
        return
    if M_PI - theta > 1e-4:
        f = theta / s
        w[0] = s_vec[0] * f
        w[1] = s_vec[1] * f
        w[2] = s_vec[2] * f
        return
    # near pi: (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T recovers
    # the axis to full precision where the skew part degenerates
    k = 0
    if R[4] > R[0]:
        k = 1
    if R[8] > R[3 * k + k]:
        k = 2
    mkk = (R[3 * k + k] - c) / (1.0 - c)
    for i in range(3):
        axis[i] = (0.5 * (R[3 * i + k] + R[3 * k + i])
                   - (c if i == k else 0.0)) / (1.0 - c) / sqrt(mkk)
    nrm = sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2])
    for i in range(3):
        axis[i] /= nrm
    if s > 0.0 and axis[0] * s_vec[0] + axis[1] * s_vec[1] + axis[2] * s_vec[2] < 0.0:
        for i in range(3):
            axis[i] = -axis[i]
    for i in range(3):
        w[i] = theta * axis[i]


cdef void _left_jacobian(const double* w, double* V) nogil:
    cdef double theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    cdef double theta = sqrt(theta2)
    cdef double b, cc
    cdef double K[9]
    cdef double K2[9]
    cdef int i
    if theta < _SMALL_ANGLE:
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
        cc = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0
    else:
        b = (1.0 - cos(theta)) / theta2
        cc = (theta - sin(theta)) / (theta2 * theta)
    K[0] = 0.0; K[1] = -w[2]; K[2] = w[1]
    K[3] = w[2]; K[4] = 0.0; K[5] = -w[0]
    K[6] = -w[1]; K[7] = w[0]; K[8] = 0.0
    _mat33_mul(K, K, K2)
    for i in range(9):
        V[i] = b * K[i] + cc * K2[i]
    V[0] += 1.0
    V[4] += 1.0
    V[8] += 1.0


cdef void _left_jacobian_inv(const double* w, double* V) nogil:
    cdef double theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    cdef double theta = sqrt(theta2)
    cdef double a, b, e
    cdef double K[9]
    cdef double K2[9]
    cdef int i
    if theta < 1e-4:
        e = 1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    else:
        a = sin(theta) / theta
        b = (1.0 - cos(theta)) / theta2
        e = (1.0 - a / (2.0 * b)) / theta2
    K[0] = 0.0; K[1] = -w[2]; K[2] = w[1]
    K[3] = w[2]; K[4] = 0.0; K[5] = -w[0]
    K[6] = -w[1]; K[7] = w[0]; K[8] = 0.0
    _mat33_mul(K, K, K2)
    for i in range(9):
        V[i] = -0.5 * K[i] + e * K2[i]
    V[0] += 1.0
    V[4] += 1.0
    V[8] += 1.0


def exp_so3(w_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.empty((3, 3))
    _exp_so3(&w[0], &R[0, 0])
    return R


def log_so3(R_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.ascontiguousarray(R_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(3)
    _log_so3(&R[0, 0], &w[0])
    return w


def exp_se3(xi_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xi = np.ascontiguousarray(xi_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] T = np.eye(4)
    cdef double V[9]
    cdef double p[3]
    cdef double R[9]
    _exp_so3(&xi[0], R)
    cdef int i, j
    for i in range(3):
        for j in range(3):
            T[i, j] = R[3 * i + j]
    _left_jacobian(&xi[0], V)
    _mat33_vec(V, &xi[3], p)
    for i in range(3):
        T[i, 3] = p[i]
    T[3, 0] = 0.0; T[3, 1] = 0.0; T[3, 2] = 0.0; T[3, 3] = 1.0
    return T


def log_se3(T_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] T = np.ascontiguousarray(T_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xi = np.empty(6)
    cdef double R[9]
    cdef double V[9]
    cdef double t[3]
    cdef int i, j
    for i in range(3):
        for j in range(3):
            R[3 * i + j] = T[i, j]
        t[i] = T[i, 3]
    _log_so3(R, &xi[0])
    _left_jacobian_inv(&xi[0], V)
    _mat33_vec(V, t, &xi[3])
    return xi


cdef void _twist_rate_c(const double* xi, const double* u,
                        const double* I_b, const double* I_b_inv, double m,
                        const double* R, const double* g, bint use_gravity,
                        double* out) nogil:
    cdef double Iw[3]
    cdef double wxIw[3]
    cdef double tmp[3]
    cdef double wxv[3]
    cdef double Rtg[3]
    cdef int i
    _mat33_vec(I_b, xi, Iw)
    _cross(xi, Iw, wxIw)
    for i in range(3):
        tmp[i] = u[i] - wxIw[i]
    _mat33_vec(I_b_inv, tmp, out)
    _cross(xi, &xi[3], wxv)
    for i in range(3):
        out[3 + i] = u[3 + i] / m - wxv[i]
    if use_gravity:
        _mat33_tvec(R, g, Rtg)
        for i in range(3):
            out[3 + i] += Rtg[i]


cdef void _ad_c(const double* s, const double* x, double* out) nogil:
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef int i
    _cross(s, x, a)          # s_w x x_w
    _cross(&s[3], x, b)      # s_v x x_w
    _cross(s, &x[3], c)      # s_w x x_v
    for i in range(3):
        out[i] = a[i]
        out[3 + i] = b[i] + c[i]


cdef void _dexpinv_c(const double* sigma, const double* xi, double* out) nogil:
    # dexpinv_{-sigma}(xi), matching the right update X <- X exp(sigma)
    cdef double a1[6]
    cdef double a2[6]
    cdef int i
    _ad_c(sigma, xi, a1)
    _ad_c(sigma, a1, a2)
    for i in range(6):
        out[i] = xi[i] + 0.5 * a1[i] + a2[i] / 12.0


cdef void _stage(const double* R0, const double* sigma, const double* xi_s,
                 const double* u, const double* I_b, const double* I_b_inv,
                 double m, const double* g, bint use_gravity,
                 double* sd, double* xd) nogil:
    cdef double Rw[9]
    cdef double Rs[9]
    if use_gravity:
        _exp_so3(sigma, Rw)
        _mat33_mul(R0, Rw, Rs)
        _twist_rate_c(xi_s, u, I_b, I_b_inv, m, Rs, g, use_gravity, xd)
    else:
        _twist_rate_c(xi_s, u, I_b, I_b_inv, m, R0, g, use_gravity, xd)
    _dexpinv_c(sigma, xi_s, sd)


def rollout(R_in, p_in, xi_in, u_in, I_b_in, I_b_inv_in, double m,
            g_in, bint use_gravity, double dt, int nsteps):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.ascontiguousarray(R_in, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(p_in, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xi = np.ascontiguousarray(xi_in, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] I_b = np.ascontiguousarray(I_b_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] I_b_inv = np.ascontiguousarray(I_b_inv_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.ascontiguousarray(g_in, dtype=np.float64)

    cdef double* Rp = &R[0, 0]
    cdef double sig[6]
    cdef double xs[6]
    cdef double s1[6]
    cdef double s2[6]
    cdef double s3[6]
    cdef double s4[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double sigma[6]
    cdef double Gr[9]
    cdef double Gp[3]
    cdef double V[9]
    cdef double Rnew[9]
    cdef double dp[3]
    cdef double half = 0.5 * dt
    cdef int step, i

    with nogil:
        for step in range(nsteps):
            for i in range(6):
                sig[i] = 0.0
            _stage(Rp, sig, &xi[0], &u[0], &I_b[0, 0], &I_b_inv[0, 0], m, &g[0], use_gravity, s1, k1)
            for i in range(6):
                sig[i] = half * s1[i]
                xs[i] = xi[i] + half * k1[i]
            _stage(Rp, sig, xs, &u[0], &I_b[0, 0], &I_b_inv[0, 0], m, &g[0], use_gravity, s2, k2)
            for i in range(6):
                sig[i] = half * s2[i]
                xs[i] = xi[i] + half * k2[i]
            _stage(Rp, sig, xs, &u[0], &I_b[0, 0], &I_b_inv[0, 0], m, &g[0], use_gravity, s3, k3)
            for i in range(6):
                sig[i] = dt * s3[i]
                xs[i] = xi[i] + dt * k3[i]
            _stage(Rp, sig, xs, &u[0], &I_b[0, 0], &I_b_inv[0, 0], m, &g[0], use_gravity, s4, k4)
            for i in range(6):
                sigma[i] = (dt / 6.0) * (s1[i] + 2.0 * s2[i] + 2.0 * s3[i] + s4[i])
                xi[i] = xi[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            _exp_so3(sigma, Gr)
            _left_jacobian(sigma, V)
            _mat33_vec(V, &sigma[3], Gp)
            _mat33_vec(Rp, Gp, dp)
            for i in range(3):
                p[i] += dp[i]
            _mat33_mul(Rp, Gr, Rnew)
            for i in range(9):
                Rp[i] = Rnew[i]

    return R, p, xi
