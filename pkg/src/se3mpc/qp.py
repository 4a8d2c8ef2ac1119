"""Self-contained convex QP solver for

    min 1/2 z^T P z + q^T z   s.t.  l <= A z <= u

using operator-splitting ADMM with a cached sparse quasi-definite KKT
factorization, in the style of OSQP.  Equalities are encoded as l = u.
Good enough for the MPC programs in this package; not a general-purpose
replacement for a production solver.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

INF = 1e30

RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQ_SCALE = 1e3


class DimensionMismatch(ValueError):
    """Inconsistent problem or warm-start dimensions."""


@dataclass
class QpProblem:
    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.P = sp.csc_matrix(self.P)
        self.A = sp.csc_matrix(self.A)
        self.q = np.asarray(self.q, dtype=float)
        self.l = np.asarray(self.l, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        n = self.P.shape[0]
        m = self.A.shape[0]
        if self.P.shape != (n, n) or self.A.shape[1] != n:
            raise DimensionMismatch("P/A shapes inconsistent")
        if self.q.shape != (n,) or self.l.shape != (m,) or self.u.shape != (m,):
            raise DimensionMismatch("vector lengths inconsistent")
        if abs(self.P - self.P.T).max() > 1e-12:
            raise ValueError("P must be symmetric")
        if np.any(self.l > self.u):
            raise ValueError("need l <= u element-wise")

    @property
    def n(self):
        return self.P.shape[0]

    @property
    def m(self):
        return self.A.shape[0]

    def objective(self, z):
        return 0.5 * float(z @ (self.P @ z)) + float(self.q @ z)


@dataclass
class QpSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    max_iter: int = 20000
    check_interval: int = 10
    adaptive_rho: bool = True
    adaptive_rho_interval: int = 50
    eps_prim_inf: float = 1e-5
    eps_dual_inf: float = 1e-5
    polish: bool = True
    polish_reg: float = 1e-9
    warm_z: np.ndarray | None = None
    warm_y: np.ndarray | None = None

    def __post_init__(self):
        if min(self.eps_abs, self.eps_rel) <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class QpSolution:
    z: np.ndarray
    y: np.ndarray
    status: str  # Solved | MaxIter | PrimalInfeasible | DualInfeasible
    prim_res: float
    dual_res: float
    iterations: int
    objective: float
    solve_time: float = 0.0
    polished: bool = False
    rho_final: float = 0.1  # adapted penalty, reusable as the next rho


def _rho_vector(p, rho):
    rho_vec = np.full(p.m, rho)
    loose = (p.l <= -INF) & (p.u >= INF)
    eq = (p.u - p.l) < 1e-12
    rho_vec[loose] = RHO_MIN
    rho_vec[eq] = min(rho * RHO_EQ_SCALE, RHO_MAX)
    return rho_vec


def _kkt_matrix(P, A, shift_n, diag_m):
    """csc of [[P + shift_n*I, A^T], [A, diag(diag_m)]] built from raw COO
    triplets in one pass; duplicate entries (the diagonal shift) are summed
    during conversion, which avoids any intermediate sparse arithmetic."""
    n = P.shape[0]
    m = A.shape[0]
    Pc = P.tocoo()
    Ac = A.tocoo()
    rn = np.arange(n)
    rm = np.arange(m)
    rows = np.concatenate([Pc.row, rn, Ac.col, Ac.row + n, rm + n])
    cols = np.concatenate([Pc.col, rn, Ac.row + n, Ac.col, rm + n])
    data = np.concatenate([Pc.data, np.full(n, shift_n), Ac.data, Ac.data, diag_m])
    return sp.csc_matrix((data, (rows, cols)), shape=(n + m, n + m))


def _factor_kkt(p, sigma, rho_vec):
    return spla.splu(_kkt_matrix(p.P, p.A, sigma, -1.0 / rho_vec))


def _residuals(p, z, zc, y):
    Az = p.A @ z
    Pz = p.P @ z
    Aty = p.A.T @ y
    r_prim = float(np.abs(Az - zc).max()) if p.m else 0.0
    r_dual = float(np.abs(Pz + p.q + Aty).max())
    s_prim = max(np.abs(Az).max() if p.m else 0.0, np.abs(zc).max() if p.m else 0.0)
    s_dual = max(np.abs(Pz).max(), np.abs(Aty).max() if p.m else 0.0, np.abs(p.q).max())
    return r_prim, r_dual, s_prim, s_dual


def _polish(p, z, y, reg):
    """Active-set refinement: solve the equality-constrained KKT system on
    the constraints the ADMM solution marks active.  If the refined point
    violates rows that the multiplier signs missed, those rows are added to
    the working set and the solve is repeated (a few passes at most)."""
    # one-sided rows can only be active at their finite bound; multiplier
    # noise must not pin anything to +/-INF
    lower = (y < 0.0) & (p.l > -INF)
    upper = (y > 0.0) & (p.u < INF)
    eq = (p.u - p.l) < 1e-12
    active = lower | upper | eq
    A_csr = p.A.tocsr()
    out = None
    for _ in range(4):
        A_red = A_csr[active].tocsc()
        b_red = np.where(upper[active], p.u[active], p.l[active])
        n_red = A_red.shape[0]
        rhs = np.concatenate([-p.q, b_red])
        # escalate the regularization if SuperLU hits a (numerically)
        # singular reduced KKT, which happens when the working set carries
        # linearly dependent rows
        sol = None
        r = reg
        for _ in range(4):
            K = _kkt_matrix(p.P, A_red, r, np.full(n_red, -r))
            try:
                lu = spla.splu(K)
            except RuntimeError:
                r *= 100.0
                continue
            cand = lu.solve(rhs)
            # one step of iterative refinement against the unregularized system
            resid = rhs.copy()
            resid[: p.n] -= p.P @ cand[: p.n] + A_red.T @ cand[p.n:]
            resid[p.n:] -= A_red @ cand[: p.n]
            cand = cand + lu.solve(resid)
            if np.all(np.isfinite(cand)):
                sol = cand
                break
            r *= 100.0
        if sol is None:
            return out
        z_pol = sol[: p.n]
        y_pol = np.zeros(p.m)
        y_pol[active] = sol[p.n:]
        out = (z_pol, y_pol)
        Az = p.A @ z_pol
        viol_lo = Az < p.l - 1e-9
        viol_hi = Az > p.u + 1e-9
        grow = (viol_lo | viol_hi) & ~active
        if not np.any(grow):
            break
        active = active | grow
        upper = upper | viol_hi
    return out


def solve(p, s=None):
    """ADMM solve; deterministic given settings and warm start."""
    if s is None:
        s = QpSettings()
    t0 = time.perf_counter()
    n, m = p.n, p.m

    z = np.zeros(n) if s.warm_z is None else np.array(s.warm_z, dtype=float)
    y = np.zeros(m) if s.warm_y is None else np.array(s.warm_y, dtype=float)
    if z.shape != (n,) or y.shape != (m,):
        raise DimensionMismatch("warm start has wrong dimensions")
    zc = np.clip(p.A @ z, p.l, p.u)  # constraint-space iterate

    rho_bar = s.rho
    rho_vec = _rho_vector(p, rho_bar)
    lu = _factor_kkt(p, s.sigma, rho_vec)

    status = "MaxIter"
    iters = 0
    r_prim = r_dual = np.inf
    z_prev = z.copy()
    y_prev = y.copy()

    for k in range(1, s.max_iter + 1):
        iters = k
        rhs = np.concatenate([s.sigma * z - p.q, zc - y / rho_vec])
        sol = lu.solve(rhs)
        z_tilde = sol[:n]
        nu = sol[n:]
        zc_tilde = zc + (nu - y) / rho_vec

        z = s.alpha * z_tilde + (1.0 - s.alpha) * z
        zc_relax = s.alpha * zc_tilde + (1.0 - s.alpha) * zc
        zc_new = np.clip(zc_relax + y / rho_vec, p.l, p.u)
        y = y + rho_vec * (zc_relax - zc_new)
        zc = zc_new

        if k % s.check_interval == 0 or k == s.max_iter:
            r_prim, r_dual, s_prim, s_dual = _residuals(p, z, zc, y)
            eps_prim = s.eps_abs + s.eps_rel * s_prim
            eps_dual = s.eps_abs + s.eps_rel * s_dual
            if r_prim <= eps_prim and r_dual <= eps_dual:
                status = "Solved"
                break

            dy = y - y_prev
            dz = z - z_prev
            if _primal_infeasible(p, dy, s.eps_prim_inf):
                status = "PrimalInfeasible"
                break
            if _dual_infeasible(p, dz, s.eps_dual_inf):
                status = "DualInfeasible"
                break
            z_prev = z.copy()
            y_prev = y.copy()

        if s.adaptive_rho and k % s.adaptive_rho_interval == 0:
            r_prim, r_dual, s_prim, s_dual = _residuals(p, z, zc, y)
            num = r_prim / max(s_prim, 1e-12)
            den = r_dual / max(s_dual, 1e-12)
            ratio = np.sqrt(num / max(den, 1e-12))
            rho_new = min(max(rho_bar * ratio, RHO_MIN), RHO_MAX)
            if rho_new > 5.0 * rho_bar or rho_new < rho_bar / 5.0:
                rho_bar = rho_new
                rho_vec = _rho_vector(p, rho_bar)
                lu = _factor_kkt(p, s.sigma, rho_vec)

    polished = False
    if status == "Solved" and s.polish:
        out = _polish(p, z, y, s.polish_reg)
        if out is not None:
            z_pol, y_pol = out
            zc_pol = np.clip(p.A @ z_pol, p.l, p.u)
            rp, rd, _, _ = _residuals(p, z_pol, zc_pol, y_pol)
            feas = float(np.abs(p.A @ z_pol - zc_pol).max()) if m else 0.0
            if max(rp, rd, feas) <= max(r_prim, r_dual):
                z, y = z_pol, y_pol
                r_prim, r_dual = max(rp, feas), rd
                polished = True

    return QpSolution(
        z=z,
        y=y,
        status=status,
        prim_res=r_prim,
        dual_res=r_dual,
        iterations=iters,
        objective=p.objective(z),
        solve_time=time.perf_counter() - t0,
        polished=polished,
        rho_final=rho_bar,
    )


def _primal_infeasible(p, dy, eps):
    nrm = np.abs(dy).max() if dy.size else 0.0
    if nrm <= 1e-12:
        return False
    dy = dy / nrm
    if np.abs(p.A.T @ dy).max() > eps:
        return False
    u = np.where(p.u >= INF, 0.0, p.u)
    l = np.where(p.l <= -INF, 0.0, p.l)
    support = float(u @ np.maximum(dy, 0.0) + l @ np.minimum(dy, 0.0))
    return support < -eps


def _dual_infeasible(p, dz, eps):
    nrm = np.abs(dz).max()
    if nrm <= 1e-12:
        return False
    dz = dz / nrm
    if np.abs(p.P @ dz).max() > eps or float(p.q @ dz) > -eps:
        return False
    Adz = p.A @ dz
    for i in range(p.m):
        if p.u[i] >= INF and p.l[i] <= -INF:
            continue
        if p.u[i] >= INF:
            if Adz[i] < -eps:
                return False
        elif p.l[i] <= -INF:
            if Adz[i] > eps:
                return False
        elif abs(Adz[i]) > eps:
            return False
    return True


def warm_start(prev, nx, nu, horizon, n_in_per_step=0):
    """Shift a receding-horizon solution by one step for reuse.

    The decision layout is (x_1..x_N, u_0..u_{N-1}); the dual layout is
    (dynamics rows, then per-step input rows).  State, input and dual blocks
    move one step earlier with the tail block repeated.
    """
    N = horizon
    if prev.z.shape != (N * (nx + nu),):
        raise DimensionMismatch("solution does not match the given horizon layout")
    xs = prev.z[: N * nx].reshape(N, nx)
    us = prev.z[N * nx:].reshape(N, nu)
    xs = np.vstack([xs[1:], xs[-1]])
    us = np.vstack([us[1:], us[-1]])
    z0 = np.concatenate([xs.ravel(), us.ravel()])

    m = N * nx + N * n_in_per_step
    if prev.y.shape != (m,):
        raise DimensionMismatch("dual does not match the given horizon layout")
    yd = prev.y[: N * nx].reshape(N, nx)
    yd = np.vstack([yd[1:], yd[-1]])
    blocks = [yd.ravel()]
    if n_in_per_step:
        yi = prev.y[N * nx:].reshape(N, n_in_per_step)
        yi = np.vstack([yi[1:], yi[-1]])
        blocks.append(yi.ravel())
    return z0, np.concatenate(blocks)


def dump(p, path):
    """Write the problem in a plain-text sparse coordinate format.

    Line 1: ``QPDUMP n m``.  Then a ``P nnz`` header followed by ``i j v``
    triplets (0-based), a ``q`` header with ``i v`` lines, the same for
    ``A``, ``l`` and ``u``.  Infinite bounds are written as +/-inf.
    """
    Pc = sp.coo_matrix(p.P)
    Ac = sp.coo_matrix(p.A)
    with open(path, "w") as f:
        f.write(f"QPDUMP {p.n} {p.m}\n")
        f.write(f"P {Pc.nnz}\n")
        for i, j, v in zip(Pc.row, Pc.col, Pc.data):
            f.write(f"{i} {j} {float(v)!r}\n")
        f.write("q\n")
        for i, v in enumerate(p.q):
            f.write(f"{i} {float(v)!r}\n")
        f.write(f"A {Ac.nnz}\n")
        for i, j, v in zip(Ac.row, Ac.col, Ac.data):
            f.write(f"{i} {j} {float(v)!r}\n")
        f.write("l\n")
        for i, v in enumerate(p.l):
            f.write(f"{i} {float(v)!r}\n")
        f.write("u\n")
        for i, v in enumerate(p.u):
            f.write(f"{i} {float(v)!r}\n")


def load(path):
    """Inverse of dump."""
    with open(path) as f:
        tokens = f.readline().split()
        if tokens[0] != "QPDUMP":
            raise ValueError("not a QPDUMP file")
        n, m = int(tokens[1]), int(tokens[2])

        def read_triplets(count):
            rows, cols, vals = [], [], []
            for _ in range(count):
                i, j, v = f.readline().split()
                rows.append(int(i))
                cols.append(int(j))
                vals.append(float(v))
            return rows, cols, vals

        header = f.readline().split()
        P = sp.csc_matrix(
            (lambda t: (t[2], (t[0], t[1])))(read_triplets(int(header[1]))), shape=(n, n)
        )
        f.readline()
        q = np.array([float(f.readline().split()[1]) for _ in range(n)])
        header = f.readline().split()
        A = sp.csc_matrix(
            (lambda t: (t[2], (t[0], t[1])))(read_triplets(int(header[1]))), shape=(m, n)
        )
        f.readline()
        l = np.array([float(f.readline().split()[1]) for _ in range(m)])
        f.readline()
        u = np.array([float(f.readline().split()[1]) for _ in range(m)])
    return QpProblem(P=P, q=q, A=A, l=l, u=u)
