"""Dense convex quadratic programming via a primal active-set method.

Solves

    min_u  1/2 u^T H u + q^T u   subject to   G u <= h

for small-to-medium dense problems (tens to low hundreds of variables).
This is the single optimization primitive shared by the condensed MPC
step, the SQP subproblems, and constrained controller training, so it
returns exact multipliers and a KKT residual that callers can certify.

Algorithm notes:
  - Each iteration solves an equality-constrained subproblem on the
    current working set by a null-space (QR) factorization, which keeps
    the method robust to linearly dependent working sets.
  - Positive semidefinite (not definite) curvature is handled by adding
    a deterministic diagonal regularization of 1e-10 * tr(H)/n when the
    reduced Cholesky factorization fails.
  - Ties between equally blocking constraints are broken toward the
    lowest constraint index, which makes the iteration deterministic.
  - If the start point is infeasible, a phase-1 problem (minimize the
    worst violation, lightly regularized) is solved with the same core
    loop; a strictly positive phase-1 optimum certifies infeasibility.

Tolerances are interpreted relative to the problem scale
max(1, |H|_inf, |q|_inf, |h|_inf) so badly scaled instances (training
problems with squared regressor matrices) behave like unit-scale ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = ["QpProblem", "QpSolution", "QpStatus", "solve_qp"]

_SYM_TOL = 1e-10


class QpStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpProblem:
    """Cost 1/2 u^T H u + q^T u with inequality rows G u <= h.

    H is symmetrized on construction; an asymmetry above 1e-10 relative
    to the largest entry is rejected as a caller bug. G and h may be
    empty (shape (0, n)) for unconstrained problems.
    """

    H: np.ndarray
    q: np.ndarray
    G: np.ndarray = field(default=None)  # type: ignore[assignment]
    h: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        n = q.size
        if H.shape != (n, n):
            raise ValueError(f"H has shape {H.shape}, expected ({n}, {n})")
        asym = np.max(np.abs(H - H.T), initial=0.0)
        if asym > _SYM_TOL * max(1.0, np.max(np.abs(H), initial=0.0)):
            raise ValueError(f"H is not symmetric (max asymmetry {asym:.3e})")
        H = 0.5 * (H + H.T)
        G = self.G
        h = self.h
        if G is None:
            G = np.zeros((0, n))
        G = np.asarray(G, dtype=float).reshape(-1, n)
        h = np.zeros(0) if h is None else np.asarray(h, dtype=float).ravel()
        if G.shape[0] != h.size:
            raise ValueError(f"G has {G.shape[0]} rows but h has {h.size} entries")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def n_constraints(self) -> int:
        return self.h.size

    def objective(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float).ravel()
        return float(0.5 * u @ self.H @ u + self.q @ u)

    def scale(self) -> float:
        return max(
            1.0,
            np.max(np.abs(self.H), initial=0.0),
            np.max(np.abs(self.q), initial=0.0),
            np.max(np.abs(self.h), initial=0.0),
        )


@dataclass(frozen=True)
class QpSolution:
    u_star: np.ndarray
    lam: np.ndarray
    status: QpStatus
    kkt_residual: float
    iterations: int
    objective: float

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def _regularized_solve(M: np.ndarray, rhs: np.ndarray, trace_scale: float):
    """Solve the SPD system M x = rhs, regularizing a PSD-singular M.

    Returns the solution; falls back to adding 1e-10 * trace_scale on the
    diagonal (escalating by 10x up to a cap) when Cholesky fails.
    """
    reg = 0.0
    base = 1e-10 * max(trace_scale, 1e-30)
    for attempt in range(6):
        try:
            L = np.linalg.cholesky(M + reg * np.eye(M.shape[0]))
        except np.linalg.LinAlgError:
            reg = base * (10.0**attempt)
            continue
        y = np.linalg.solve(L, rhs)
        return np.linalg.solve(L.T, y)
    return np.linalg.lstsq(M, rhs, rcond=None)[0]


def _equality_step(H, g, G_active, trace_scale):
    """Minimize 1/2 p^T H p + g^T p subject to G_active p = 0."""
    n = g.size
    if G_active.shape[0] == 0:
        return _regularized_solve(H, -g, trace_scale)
    Q, R = np.linalg.qr(G_active.T, mode="complete")
    diag = np.abs(np.diag(R)) if min(R.shape) else np.zeros(0)
    rank = int(np.sum(diag > 1e-12 * max(1.0, diag.max(initial=0.0))))
    if rank >= n:
        return np.zeros(n)
    Z = Q[:, rank:]
    Hz = Z.T @ H @ Z
    pz = _regularized_solve(Hz, -(Z.T @ g), trace_scale)
    return Z @ pz


def _kkt_residual(problem: QpProblem, u: np.ndarray, lam: np.ndarray) -> float:
    stationarity = problem.H @ u + problem.q
    if problem.n_constraints:
        stationarity = stationarity + problem.G.T @ lam
        slack = problem.G @ u - problem.h
        primal = float(np.max(slack, initial=0.0))
        dual = float(np.max(-lam, initial=0.0))
        comp = float(np.abs(lam @ slack))
    else:
        primal = dual = comp = 0.0
    return max(float(np.max(np.abs(stationarity), initial=0.0)), primal, dual, comp)


def _ratio_test(slack, Gp, in_working, h_scale):
    """Largest feasible step along p; lowest index breaks ties."""
    movable = ~in_working & (Gp > 1e-13 * h_scale)
    if not np.any(movable):
        return 1.0, -1
    ratios = np.full(Gp.shape, np.inf)
    ratios[movable] = np.maximum(-slack[movable], 0.0) / Gp[movable]
    best = float(ratios.min())
    if best >= 1.0 - 1e-13:
        return 1.0, -1
    blocker = int(np.flatnonzero(ratios <= best + 1e-13)[0])
    return best, blocker


def _active_set_loop(H, q, G, h, u0, tol, max_iter, trace_scale):
    """Core primal active-set iteration from a feasible start point.

    Returns (u, lam, iterations, converged).
    """
    n = q.size
    m = h.size
    u = u0.copy()
    h_scale = np.maximum(1.0, np.abs(h)) if m else np.zeros(0)
    slack0 = G @ u - h if m else np.zeros(0)
    working = list(np.flatnonzero(slack0 >= -1e-11 * h_scale)) if m else []
    lam_full = np.zeros(m)
    at_subspace_min = False

    for it in range(1, max_iter + 1):
        g = H @ u + q
        G_w = G[working] if working else np.zeros((0, n))
        p = _equality_step(H, g, G_w, trace_scale)

        # After an unblocked full step the iterate already minimizes on
        # the working set; any remaining p is roundoff refinement, so go
        # to the multiplier check regardless of its size (this is what
        # keeps ill-conditioned problems from spinning on tiny steps).
        if at_subspace_min or np.max(np.abs(p), initial=0.0) <= tol:
            # Apply the residual step so stationarity holds exactly at
            # the returned point (a negligible move, G_w p = 0 keeps the
            # working set satisfied).
            u = u + p
            g = H @ u + q
            lam_full = np.zeros(m)
            if working:
                lam_w, *_ = np.linalg.lstsq(G_w.T, -g, rcond=None)
                lam_full[working] = lam_w
            else:
                lam_w = np.zeros(0)
            if lam_w.size == 0 or np.min(lam_w) >= -tol:
                return u, np.maximum(lam_full, 0.0), it, True
            # Drop the most negative multiplier; lowest index wins ties.
            j_local = int(np.argmin(lam_w))
            del working[j_local]
            at_subspace_min = False
            continue

        alpha, blocker = 1.0, -1
        if m:
            in_working = np.zeros(m, dtype=bool)
            in_working[working] = True
            alpha, blocker = _ratio_test(G @ u - h, G @ p, in_working, h_scale)
        u = u + alpha * p
        if blocker >= 0:
            working.append(blocker)
            working.sort()
            at_subspace_min = False
        else:
            at_subspace_min = True

    return u, lam_full, max_iter, False


def _box_structure(G):
    """Recognize rows that are signed unit vectors: s * u[j] <= h.

    Returns (var_index, sign) arrays, or None when any row is general.
    """
    m, n = G.shape
    if m == 0:
        return None
    nonzero_counts = np.count_nonzero(G, axis=1)
    if not np.all(nonzero_counts == 1):
        return None
    var = np.abs(G).argmax(axis=1)
    sgn = G[np.arange(m), var]
    if not np.all(np.abs(sgn) == 1.0):
        return None
    return var, sgn.astype(float)


def _active_set_box(H, q, var, sgn, h, u0, tol, max_iter, trace_scale):
    """Active-set loop specialized to bound rows sgn * u[var] <= h.

    Fixing a variable at a bound reduces the equality subproblem to the
    free-variable block of H, and the bound multipliers come straight
    from the stationarity residual, so no QR factorization is needed.
    """
    n = q.size
    m = h.size
    u = u0.copy()
    h_scale = np.maximum(1.0, np.abs(h))
    slack0 = sgn * u[var] - h
    working = list(np.flatnonzero(slack0 >= -1e-11 * h_scale))
    # At most one bound row per variable can be active.
    seen = set()
    working = [i for i in working if not (var[i] in seen or seen.add(var[i]))]
    lam_full = np.zeros(m)
    at_subspace_min = False

    for it in range(1, max_iter + 1):
        g = H @ u + q
        free = np.ones(n, dtype=bool)
        if working:
            free[var[working]] = False
        p = np.zeros(n)
        if np.any(free):
            p[free] = _regularized_solve(
                H[np.ix_(free, free)], -g[free], trace_scale
            )

        if at_subspace_min or np.max(np.abs(p), initial=0.0) <= tol:
            u = u + p
            g = H @ u + q
            lam_full = np.zeros(m)
            if working:
                widx = np.asarray(working)
                lam_w = -sgn[widx] * g[var[widx]]
                lam_full[widx] = lam_w
            else:
                lam_w = np.zeros(0)
            if lam_w.size == 0 or np.min(lam_w) >= -tol:
                return u, np.maximum(lam_full, 0.0), it, True
            j_local = int(np.argmin(lam_w))
            del working[j_local]
            at_subspace_min = False
            continue

        in_working = np.zeros(m, dtype=bool)
        in_working[working] = True
        alpha, blocker = _ratio_test(sgn * u[var] - h, sgn * p[var], in_working, h_scale)
        u = u + alpha * p
        if blocker >= 0:
            working.append(blocker)
            working.sort()
            at_subspace_min = False
        else:
            at_subspace_min = True

    return u, lam_full, max_iter, False


def _phase1(G, h, tol, max_iter):
    """Find a feasible point of G u <= h, or report infeasibility.

    Minimizes the worst violation t with a small quadratic regularizer;
    an optimal t above tolerance certifies an empty feasible set.
    """
    m, n = G.shape
    scale = max(1.0, np.max(np.abs(G)), np.max(np.abs(h)))
    delta = 1e-8 * scale
    H1 = delta * np.eye(n + 1)
    q1 = np.zeros(n + 1)
    q1[-1] = scale
    G1 = np.hstack([G, -np.ones((m, 1))])
    u0 = np.zeros(n + 1)
    u0[-1] = max(0.0, float(np.max(-h))) + 1.0
    x, _, _, converged = _active_set_loop(
        H1, q1, G1, h, u0, tol, max_iter, trace_scale=float(np.trace(H1))
    )
    t_star = x[-1]
    feasible = converged and t_star <= tol * scale
    return x[:n], feasible


def solve_qp(
    problem: QpProblem,
    tol: float = 1e-8,
    max_iter: int | None = None,
    warm_start: np.ndarray | None = None,
) -> QpSolution:
    """Solve the QP, certifying the result through its KKT conditions.

    The returned multipliers satisfy stationarity, primal/dual
    feasibility, and complementarity within ``tol`` times the problem
    scale when the status is OPTIMAL. ``warm_start`` is used as the
    initial iterate when it is feasible (infeasible warm starts are
    ignored). Deterministic for fixed inputs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = problem.n
    m = problem.n_constraints
    if max_iter is None:
        max_iter = 50 * (n + m)
    scale = problem.scale()
    trace_scale = float(np.trace(problem.H)) / max(n, 1)

    u0 = None
    if warm_start is not None:
        cand = np.asarray(warm_start, dtype=float).ravel()
        if cand.size == n and (
            m == 0 or np.all(problem.G @ cand - problem.h <= tol * scale)
        ):
            u0 = cand
    if u0 is None:
        zero = np.zeros(n)
        if m == 0 or np.all(problem.G @ zero - problem.h <= tol * scale):
            u0 = zero
        else:
            u0, feasible = _phase1(problem.G, problem.h, tol, max_iter)
            if not feasible:
                return QpSolution(
                    u_star=u0,
                    lam=np.zeros(m),
                    status=QpStatus.INFEASIBLE,
                    kkt_residual=np.inf,
                    iterations=0,
                    objective=problem.objective(u0),
                )

    box = _box_structure(problem.G) if m else None
    if box is not None:
        u, lam, iters, converged = _active_set_box(
            problem.H, problem.q, box[0], box[1], problem.h, u0, tol, max_iter,
            trace_scale,
        )
    else:
        u, lam, iters, converged = _active_set_loop(
            problem.H, problem.q, problem.G, problem.h, u0, tol, max_iter, trace_scale
        )
    residual = _kkt_residual(problem, u, lam)
    if converged and residual <= tol * scale:
        status = QpStatus.OPTIMAL
    else:
        status = QpStatus.MAX_ITERATIONS
    return QpSolution(
        u_star=u,
        lam=lam,
        status=status,
        kkt_residual=residual,
        iterations=iters,
        objective=problem.objective(u),
    )
