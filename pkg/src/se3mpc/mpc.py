"""Error-state MPC in the Lie algebra.

The tracking error Psi = X_d^{-1} X is lifted to psi = log(Psi); together
with the body twist it forms the stacked state x = [psi; xi] whose
linearized dynamics

    x_dot = A x + B u + h,   A = [[-ad_{xi_d}, I], [0, H]]

contain no pose-dependent entries.  The receding-horizon controller
discretizes this system, builds a condensed QP and applies the first input.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .lie import Pose, ad_se3, adjoint_SE3, exp_se3, hat6, log_se3, vee3
from .qp import QpProblem, QpSettings, solve as qp_solve, warm_start

NX = 12


class NoConvergence(RuntimeError):
    """Riccati recursion hit the iteration cap above tolerance."""


@dataclass(frozen=True)
class TrackingError:
    Psi: Pose
    psi: np.ndarray


def tracking_error(X_d, X):
    """Left-invariant tracking error Psi = X_d^{-1} X and psi = log(Psi)."""
    Psi = X_d.inverse() @ X
    return TrackingError(Psi=Psi, psi=log_se3(Psi))


def exact_error_rate(Psi, xi, xi_d):
    """Exact error dynamics Psi_dot = Psi (xi - Ad_{Psi^{-1}} xi_d)^.

    Used as the oracle the linearization is validated against; the
    controller itself never calls this.
    """
    rel = np.asarray(xi, dtype=float) - adjoint_SE3(Psi.inverse()) @ np.asarray(xi_d, dtype=float)
    return Psi.as_matrix() @ hat6(rel)


def linearized_error_rate(psi, xi, xi_d):
    """psi_dot = -ad_{xi_d} psi + xi - xi_d; independent of the poses."""
    psi = np.asarray(psi, dtype=float)
    xi = np.asarray(xi, dtype=float)
    xi_d = np.asarray(xi_d, dtype=float)
    return -(ad_se3(xi_d) @ psi) + xi - xi_d


def linearize_twist_dynamics(xi_bar, J):
    """Affine model xi_dot ~= H xi + b + J_b^{-1} u around xi_bar.

    H = J_b^{-1} ad*_{xi_bar} J_b + J_b^{-1} M,  b = -J_b^{-1} M xi_bar,
    with M = [[hat(I_b w), m hat(v)], [m hat(v), 0]]; exact at xi = xi_bar.
    """
    from .lie import coad_se3, hat3

    xi_bar = np.asarray(xi_bar, dtype=float)
    w, v = xi_bar[:3], xi_bar[3:]
    M = np.zeros((6, 6))
    M[:3, :3] = hat3(J.I_b @ w)
    M[:3, 3:] = J.m * hat3(v)
    M[3:, :3] = J.m * hat3(v)
    H = J.J_b_inv @ (coad_se3(xi_bar) @ J.J_b) + J.J_b_inv @ M
    b = -(J.J_b_inv @ (M @ xi_bar))
    return H, b


@dataclass(frozen=True)
class CtMatrices:
    A: np.ndarray
    B: np.ndarray
    h: np.ndarray
    C: np.ndarray
    d: np.ndarray


def build_ct_system(xi_d, xi_bar, J, simplified=False, B=None, h_extra=None):
    """Continuous-time stacked system and cost maps for one horizon step.

    ``simplified`` zeroes the -ad_{xi_d} blocks in A and C (the ablation
    baseline).  ``B`` overrides the input matrix (e.g. GRF inputs) and
    ``h_extra`` adds a constant term to h (e.g. the frozen-R gravity term).
    """
    xi_d = np.asarray(xi_d, dtype=float)
    H, b = linearize_twist_dynamics(xi_bar, J)
    ad_d = np.zeros((6, 6)) if simplified else ad_se3(xi_d)

    A = np.zeros((NX, NX))
    A[:6, :6] = -ad_d
    A[:6, 6:] = np.eye(6)
    A[6:, 6:] = H

    if B is None:
        B = np.zeros((NX, 6))
        B[6:, :] = J.J_b_inv
    else:
        B = np.asarray(B, dtype=float)

    h = np.concatenate([-xi_d, b])
    if h_extra is not None:
        h = h + np.asarray(h_extra, dtype=float)

    C = np.eye(NX)
    C[6:, :6] = -ad_d
    d = np.concatenate([np.zeros(6), xi_d])
    return CtMatrices(A=A, B=B, h=h, C=C, d=d)


def discretize(ct, dt, mode="euler"):
    """Discretize one horizon step.

    Euler (the default): A_k = I + A dt, B_k = B dt, h_k = h dt.  ZOH:
    exact matrix exponential of the augmented system [[A, B, h], [0]].
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if mode == "euler":
        return np.eye(NX) + ct.A * dt, ct.B * dt, ct.h * dt
    if mode == "zoh":
        nu = ct.B.shape[1]
        aug = np.zeros((NX + nu + 1, NX + nu + 1))
        aug[:NX, :NX] = ct.A
        aug[:NX, NX:NX + nu] = ct.B
        aug[:NX, -1] = ct.h
        E = scipy.linalg.expm(aug * dt)
        return E[:NX, :NX], E[:NX, NX:NX + nu], E[:NX, -1]
    raise ValueError(f"unknown discretization mode {mode!r}")


def riccati_terminal(A_k, B_k, Q, R, mode="full_dare", P_prev=None,
                     tol=1e-9, max_iter=10000):
    """Terminal cost from the discrete Riccati recursion
    P <- A^T P A - (A^T P B)(R + B^T P B)^{-1}(B^T P A) + Q.

    ``full_dare`` iterates to the fixed point, starting from P_prev when
    given (receding-horizon reuse) and from P_0 = Q otherwise; ``one_step``
    does a single recursion from the previous cycle's P (Q if none yet).
    """
    A_k = np.asarray(A_k, dtype=float)
    B_k = np.asarray(B_k, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)

    def recurse(P):
        APB = A_k.T @ P @ B_k
        K = np.linalg.solve(R + B_k.T @ P @ B_k, APB.T)
        P_new = A_k.T @ P @ A_k - APB @ K + Q
        return 0.5 * (P_new + P_new.T)

    if mode == "one_step":
        return recurse(Q if P_prev is None else np.asarray(P_prev, dtype=float))
    if mode != "full_dare":
        raise ValueError(f"unknown terminal mode {mode!r}")
    P = Q.copy() if P_prev is None else np.asarray(P_prev, dtype=float).copy()
    for _ in range(max_iter):
        P_new = recurse(P)
        if np.abs(P_new - P).max() < tol:
            return P_new
        P = P_new
    raise NoConvergence("Riccati recursion did not converge")


@dataclass
class MpcConfig:
    horizon: int
    dt: float
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray | None = None  # fixed terminal cost; None -> Riccati
    u_min: np.ndarray | None = None
    u_max: np.ndarray | None = None
    simplified: bool = False
    terminal_mode: str = "full_dare"  # full_dare | one_step | fixed
    discretization: str = "euler"

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        for W, name in ((self.Q, "Q"), (self.R, "R")):
            if np.abs(W - W.T).max() > 1e-9:
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(self.Q).min() < -1e-12:
            raise ValueError("Q must be PSD")
        if np.linalg.eigvalsh(self.R).min() <= 0.0:
            raise ValueError("R must be PD")


@dataclass
class MpcQp:
    """Condensed QP plus the layout metadata needed to interpret it."""

    problem: QpProblem
    nx: int
    nu: int
    horizon: int
    n_in_per_step: int
    dropped_constant: float


# COO index templates for build_qp, keyed by (N, nx, nu, n_in); the sparsity
# layout is fixed by the horizon dimensions, so only the data vector has to
# be rebuilt every control period
_QP_STRUCT_CACHE = {}


def _qp_structure(N, nx, nu, n_in):
    key = (N, nx, nu, n_in)
    hit = _QP_STRUCT_CACHE.get(key)
    if hit is not None:
        return hit
    nz = N * (nx + nu)
    rx = np.repeat(np.arange(nx), nx)
    cx = np.tile(np.arange(nx), nx)
    ru = np.repeat(np.arange(nu), nu)
    cu = np.tile(np.arange(nu), nu)
    p_rows, p_cols = [], []
    for k in range(N):
        p_rows.append(rx + k * nx)
        p_cols.append(cx + k * nx)
    for k in range(N):
        p_rows.append(ru + N * nx + k * nu)
        p_cols.append(cu + N * nx + k * nu)
    a_rows, a_cols = [], []
    rxu = np.repeat(np.arange(nx), nu)
    cxu = np.tile(np.arange(nu), nx)
    for k in range(N):
        a_rows.append(np.arange(nx) + k * nx)          # +I on x_k
        a_cols.append(np.arange(nx) + k * nx)
        if k > 0:                                       # -A_k on x_{k-1}
            a_rows.append(rx + k * nx)
            a_cols.append(cx + (k - 1) * nx)
        a_rows.append(rxu + k * nx)                     # -B_k on u_k
        a_cols.append(cxu + N * nx + k * nu)
    if n_in:
        rin = np.repeat(np.arange(n_in), nu)
        cin = np.tile(np.arange(nu), n_in)
        for k in range(N):
            a_rows.append(rin + N * nx + k * n_in)
            a_cols.append(cin + N * nx + k * nu)
    struct = (
        np.concatenate(p_rows), np.concatenate(p_cols),
        np.concatenate(a_rows), np.concatenate(a_cols), nz,
    )
    _QP_STRUCT_CACHE[key] = struct
    return struct


def build_qp(x0, ct_steps, cfg, P_term, input_rows=None):
    """Assemble the sparse receding-horizon QP.

    ``ct_steps`` holds the discretized (A_k, B_k, h_k, C_k, d_k) for
    k = 0..N-1 plus (C_N, d_N) appended as the terminal entry.  Decision
    vector z = (x_1..x_N, u_0..u_{N-1}); dynamics equalities are encoded as
    l = u rows; ``input_rows`` is an optional (A_in, l_in, u_in) block
    applied to every u_k.  The constant sum of d^T Q d terms dropped from
    the objective is reported so costs can be reconstructed exactly.
    """
    N = cfg.horizon
    x0 = np.asarray(x0, dtype=float)
    nx = NX
    nu = ct_steps[0][1].shape[1]
    if x0.shape != (nx,):
        raise ValueError("x0 must be a stacked 12-vector")
    if len(ct_steps) != N + 1:
        raise ValueError("need N discretized steps plus the terminal (C, d)")

    nz = N * (nx + nu)

    # per-step input rows: box bounds then extra rows
    in_rows = []
    in_l = []
    in_u = []
    if cfg.u_min is not None or cfg.u_max is not None:
        lo = np.full(nu, -np.inf) if cfg.u_min is None else np.asarray(cfg.u_min, dtype=float)
        hi = np.full(nu, np.inf) if cfg.u_max is None else np.asarray(cfg.u_max, dtype=float)
        in_rows.append(np.eye(nu))
        in_l.append(lo)
        in_u.append(hi)
    if input_rows is not None:
        A_in, l_in, u_in = input_rows
        in_rows.append(np.asarray(A_in, dtype=float))
        in_l.append(np.asarray(l_in, dtype=float))
        in_u.append(np.asarray(u_in, dtype=float))
    n_in = sum(r.shape[0] for r in in_rows)
    A_in_all = np.vstack(in_rows) if n_in else None

    p_rows, p_cols, a_rows, a_cols, _ = _qp_structure(N, nx, nu, n_in)

    # objective: per-stage 2 C^T W C blocks, then the 2R input blocks
    q_vec = np.zeros(nz)
    const = 0.0
    p_data = []
    for k in range(1, N + 1):
        C_k, d_k = ct_steps[k][3], ct_steps[k][4]
        W = cfg.Q if k < N else P_term
        CW = C_k.T @ W
        p_data.append((2.0 * (CW @ C_k)).ravel())
        q_vec[(k - 1) * nx: k * nx] = -2.0 * (CW @ d_k)
        const += float(d_k @ (W @ d_k))
    p_data.append(np.tile((2.0 * cfg.R).ravel(), N))
    P_qp = sp.csc_matrix((np.concatenate(p_data), (p_rows, p_cols)), shape=(nz, nz))

    # dynamics equalities x_{k+1} = A_k x_k + B_k u_k + h_k as l = u rows,
    # followed by the per-step input rows
    b_dyn = np.zeros(N * nx)
    ones_x = np.ones(nx)
    a_data = []
    for k in range(N):
        A_k, B_k, h_k = ct_steps[k][0], ct_steps[k][1], ct_steps[k][2]
        a_data.append(ones_x)
        if k == 0:
            b_dyn[:nx] = A_k @ x0 + h_k
        else:
            a_data.append((-A_k).ravel())
            b_dyn[k * nx: (k + 1) * nx] = h_k
        a_data.append((-B_k).ravel())
    l = [b_dyn]
    u = [b_dyn]
    if n_in:
        a_data.append(np.tile(A_in_all.ravel(), N))
        l.append(np.tile(np.concatenate(in_l), N))
        u.append(np.tile(np.concatenate(in_u), N))
    m_rows = N * (nx + n_in)
    A_qp = sp.csc_matrix((np.concatenate(a_data), (a_rows, a_cols)), shape=(m_rows, nz))

    problem = QpProblem(
        P=P_qp,
        q=q_vec,
        A=A_qp,
        l=np.concatenate(l),
        u=np.concatenate(u),
    )
    return MpcQp(problem=problem, nx=nx, nu=nu, horizon=N,
                 n_in_per_step=n_in, dropped_constant=const)


def horizon_steps(ref, t, xi_bar, cfg, J, B=None, h_extra=None):
    """Discretized horizon matrices with the per-step reference twist.

    One linearization (H, b) at xi_bar is shared across the horizon; the
    -ad_{xi_d,k} blocks and d_k track the reference twist at each step.
    """
    steps = []
    prev_xi = None
    ct = disc = None
    for k in range(cfg.horizon + 1):
        _, xi_dk = ref(t + k * cfg.dt)
        # constant-twist references repeat the same system at every step
        if prev_xi is None or not np.array_equal(xi_dk, prev_xi):
            ct = build_ct_system(xi_dk, xi_bar, J, simplified=cfg.simplified,
                                 B=B, h_extra=h_extra)
            disc = None
            prev_xi = xi_dk
        if k < cfg.horizon:
            if disc is None:
                disc = discretize(ct, cfg.dt, mode=cfg.discretization)
            A_k, B_k, h_k = disc
            steps.append((A_k, B_k, h_k, ct.C, ct.d))
        else:
            steps.append((None, None, None, ct.C, ct.d))
    return steps


def terminal_cost(ct_steps, cfg, P_prev=None):
    if cfg.terminal_mode == "fixed":
        if cfg.P is None:
            raise ValueError("terminal_mode='fixed' needs cfg.P")
        return cfg.P
    A_0, B_0 = ct_steps[0][0], ct_steps[0][1]
    return riccati_terminal(A_0, B_0, cfg.Q, cfg.R, mode=cfg.terminal_mode,
                            P_prev=P_prev)


def mpc_step(state, ref, cfg, J, t=0.0, P_prev=None, prev_solution=None,
             qp_settings=None, B=None, h_extra=None, input_rows=None):
    """One receding-horizon cycle: linearize at the current twist, build
    and solve the QP, return the first input.

    Returns ``(u0, predicted, info)`` where ``predicted`` is the planned
    x_1..x_N and ``info`` carries the QP solution (for warm starting), the
    terminal-cost matrix (for one_step chaining) and solver diagnostics.
    """
    X_d, _ = ref(t)
    err = tracking_error(X_d, state.pose)
    x0 = np.concatenate([err.psi, state.twist])

    steps = horizon_steps(ref, t, state.twist, cfg, J, B=B, h_extra=h_extra)
    P_term = terminal_cost(steps, cfg, P_prev=P_prev)
    mqp = build_qp(x0, steps, cfg, P_term, input_rows=input_rows)

    settings = qp_settings or QpSettings()
    if prev_solution is not None:
        try:
            settings.warm_z, settings.warm_y = warm_start(
                prev_solution, mqp.nx, mqp.nu, mqp.horizon, mqp.n_in_per_step)
        except Exception:
            settings.warm_z = settings.warm_y = None

    sol = qp_solve(mqp.problem, settings)
    if sol.status not in ("Solved", "MaxIter"):
        raise RuntimeError(f"QP solver failed: {sol.status}")

    N, nx, nu = mqp.horizon, mqp.nx, mqp.nu
    u0 = sol.z[N * nx: N * nx + nu].copy()
    predicted = [sol.z[k * nx: (k + 1) * nx].copy() for k in range(N)]
    info = {
        "solution": sol,
        "P_term": P_term,
        "qp": mqp,
        "psi": err.psi,
        "iterations": sol.iterations,
        "prim_res": sol.prim_res,
        "dual_res": sol.dual_res,
        "status": sol.status,
        "objective": sol.objective + mqp.dropped_constant,
    }
    return u0, predicted, info


def compatible_error(R, R_d):
    """Variational-baseline orientation error 0.5 (R^T R_d - R_d^T R)^vee.

    Its magnitude is |sin(theta)|, so it collapses to zero as the relative
    rotation approaches 180 degrees; kept only as a comparison metric.
    """
    R = np.asarray(R, dtype=float)
    R_d = np.asarray(R_d, dtype=float)
    return vee3(0.5 * (R.T @ R_d - R_d.T @ R))
