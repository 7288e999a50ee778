"""Nonlinear MPC solved by Gauss-Newton SQP with defect condensing.

The finite-horizon problem is posed on the stacked decision vector
X = [u_0 .. u_{H-1}, x_1 .. x_H]: a sum of quadratic-in-residual stage,
terminal, and input costs, equality defects tying consecutive states
through the discrete dynamics, and box rows on the inputs.

Each SQP iteration linearizes the defects along the current iterate,
eliminates the state increments (condensing), and solves a dense QP in
the input increments only. The iterate moves along the combined step
X <- X + alpha * dX, globalized by a backtracking line search on the l1
merit function J + rho * |defects|_1 with rho adapted upward only.
Letting the states track the linearized (temporarily infeasible)
predictions rather than a feasible rollout is deliberate: it is what
allows the iteration to cross into a cost basin the initial guess
points at instead of sliding down the nearest feasible descent path.
If the line search stalls at an infeasible iterate, the states are
reset to the rollout under the current inputs and the iteration
continues. On termination the states are re-rolled once more, so the
returned iterate satisfies the dynamics to integration accuracy.

Cold starts roll the horizon out under the configured seed input
sequence (zero by default, box-clipped). If the zero rollout is a
stationary point with nonzero cost, which happens when the plant rests
at an unstable equilibrium of the cost landscape (a pendulum hanging
straight down, say), a small deterministic input perturbation is
applied once and the iteration continues; at a true optimum the cost is
zero and no perturbation is triggered. Problems with several cost
basins (swing-up) need a basin-selecting seed; see
``NmpcConfig.cold_start_inputs``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from farma.discretize import DiscreteDynamics
from farma.plants import SaturationLimits
from farma.qp import QpProblem, QpStatus, solve_qp

__all__ = [
    "QuadraticStateCost",
    "QuadraticInputCost",
    "tracking_state_cost",
    "pendulum_swing_up_cost",
    "SqpSettings",
    "NmpcConfig",
    "NlpEvaluation",
    "NmpcSolution",
    "SqpNonConvergence",
    "eval_nlp",
    "sqp_solve",
    "nmpc_step",
    "NmpcController",
    "nmpc_config_from_linear",
]


@dataclass(frozen=True)
class QuadraticStateCost:
    """State cost residual(x_ref, x)^T W residual(x_ref, x).

    jacobian returns d(residual)/dx; the Gauss-Newton model uses
    2 J^T W J as curvature, which is positive semidefinite by
    construction.
    """

    weights: np.ndarray
    residual: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def value(self, x_ref, x) -> float:
        r = self.residual(x_ref, x)
        return float(r @ self.weights @ r)

    def gradient(self, x_ref, x) -> np.ndarray:
        r = self.residual(x_ref, x)
        return 2.0 * self.jacobian(x_ref, x).T @ (self.weights @ r)

    def gauss_newton(self, x_ref, x) -> np.ndarray:
        J = self.jacobian(x_ref, x)
        return 2.0 * J.T @ self.weights @ J


@dataclass(frozen=True)
class QuadraticInputCost:
    """Input cost u^T W u."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.atleast_2d(np.asarray(self.weights, float)))

    def value(self, u) -> float:
        return float(u @ self.weights @ u)

    def gradient(self, u) -> np.ndarray:
        return 2.0 * self.weights @ u

    def gauss_newton(self) -> np.ndarray:
        return 2.0 * self.weights


def tracking_state_cost(weights) -> QuadraticStateCost:
    """(x_ref - x)^T W (x_ref - x): plain quadratic state tracking."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    n = W.shape[0]
    eye = np.eye(n)
    return QuadraticStateCost(
        weights=W,
        residual=lambda x_ref, x: x - x_ref,
        jacobian=lambda x_ref, x: eye,
    )


def pendulum_swing_up_cost(weights=(30.0, 20.0, 60.0, 20.0)) -> QuadraticStateCost:
    """Upright-pendulum cost on [p, p_dot, 1 - cos(phi), phi_dot].

    The angle enters only through 1 - cos, so the cost is 2*pi-periodic
    and encodes "reach any upright orientation". The reference argument
    is ignored (the target is the origin by construction).
    """
    W = np.diag(np.asarray(weights, dtype=float))

    def residual(x_ref, x):
        return np.array([x[0], x[1], 1.0 - np.cos(x[2]), x[3]])

    def jacobian(x_ref, x):
        J = np.eye(4)
        J[2, 2] = np.sin(x[2])
        return J

    return QuadraticStateCost(weights=W, residual=residual, jacobian=jacobian)


@dataclass(frozen=True)
class SqpSettings:
    max_iter: int = 50
    step_tol: float = 1e-6
    constraint_tol: float = 1e-6
    armijo: float = 1e-4
    max_backtracks: int = 10
    qp_tol: float = 1e-9


@dataclass(frozen=True)
class NmpcConfig:
    """Horizon problem definition plus solver settings.

    cold_start_inputs, when given, maps (x_k, x_ref) to a (horizon,
    n_u) seed input sequence used when no warm start is available; it
    selects the cost basin on multimodal problems.
    """

    dynamics: DiscreteDynamics
    horizon: int
    terminal_cost: QuadraticStateCost
    stage_cost: QuadraticStateCost
    input_cost: QuadraticInputCost
    limits: SaturationLimits
    sqp: SqpSettings = field(default_factory=SqpSettings)
    cold_start_inputs: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.limits.dim != self.dynamics.dims[1]:
            raise ValueError("saturation limits must match the input dimension")

    @property
    def dims(self) -> tuple[int, int]:
        return self.dynamics.dims


@dataclass(frozen=True)
class NlpEvaluation:
    J: float
    g_eq: np.ndarray
    g_ineq: np.ndarray


@dataclass(frozen=True)
class NmpcSolution:
    """Converged (or best) stacked iterate plus diagnostics.

    X layout: all inputs u_0..u_{H-1} first, then states x_1..x_H.
    merit_history records (rho, merit_before, merit_after) per accepted
    line-search step.
    """

    X: np.ndarray
    iterations: int
    eq_residual: float
    converged: bool
    objective: float
    merit_history: tuple = ()


class SqpNonConvergence(RuntimeError):
    """SQP failed to converge; carries the best iterate found."""

    def __init__(self, message: str, solution: NmpcSolution):
        super().__init__(message)
        self.solution = solution


def _split(config: NmpcConfig, X: np.ndarray):
    n_x, n_u = config.dims
    lh = config.horizon
    U = X[: lh * n_u].reshape(lh, n_u)
    Xs = X[lh * n_u:].reshape(lh, n_x)
    return U, Xs


def _join(U: np.ndarray, Xs: np.ndarray) -> np.ndarray:
    return np.concatenate([U.ravel(), Xs.ravel()])


def _rollout(config: NmpcConfig, x_k: np.ndarray, U: np.ndarray) -> np.ndarray:
    states = np.empty((config.horizon, config.dims[0]))
    x = x_k
    for i in range(config.horizon):
        x = config.dynamics.f(x, U[i])
        states[i] = x
    return states


def _defects(config: NmpcConfig, x_k, U, Xs) -> np.ndarray:
    lh = config.horizon
    c = np.empty_like(Xs)
    prev = x_k
    for i in range(lh):
        c[i] = Xs[i] - config.dynamics.f(prev, U[i])
        prev = Xs[i]
    return c.ravel()


def _objective(config: NmpcConfig, x_ref, U, Xs) -> float:
    lh = config.horizon
    J = config.terminal_cost.value(x_ref, Xs[lh - 1])
    for i in range(lh - 1):
        J += config.stage_cost.value(x_ref, Xs[i])
    for i in range(lh):
        J += config.input_cost.value(U[i])
    return J


def eval_nlp(config: NmpcConfig, x_k, x_ref, X) -> NlpEvaluation:
    """Evaluate cost, defects, and input-box rows at a decision vector."""
    x_k = np.asarray(x_k, dtype=float).ravel()
    x_ref = np.asarray(x_ref, dtype=float).ravel()
    X = np.asarray(X, dtype=float).ravel()
    n_x, n_u = config.dims
    lh = config.horizon
    if X.size != lh * (n_x + n_u):
        raise ValueError(f"X has {X.size} entries, expected {lh * (n_x + n_u)}")
    U, Xs = _split(config, X)
    g_ineq = np.concatenate([
        (U - config.limits.u_max).ravel(),
        (config.limits.u_min - U).ravel(),
    ])
    return NlpEvaluation(
        J=_objective(config, x_ref, U, Xs),
        g_eq=_defects(config, x_k, U, Xs),
        g_ineq=g_ineq,
    )


def _condense(config: NmpcConfig, x_k, U, Xs):
    """Linearize defects along (U, Xs) and eliminate state increments.

    Returns (T, d) with dx_stack = T @ du_stack + d, where d propagates
    the current defect residuals through the linearized dynamics.
    """
    n_x, n_u = config.dims
    lh = config.horizon
    T = np.zeros((lh * n_x, lh * n_u))
    d = np.zeros((lh, n_x))
    prev = x_k
    prev_rows = None
    for i in range(lh):
        A_i, B_i = config.dynamics.jac(prev, U[i])
        c_i = Xs[i] - config.dynamics.f(prev, U[i])
        rows = slice(i * n_x, (i + 1) * n_x)
        if i == 0:
            d[0] = -c_i
        else:
            T[rows] = A_i @ T[prev_rows]
            d[i] = A_i @ d[i - 1] - c_i
        T[rows, i * n_u:(i + 1) * n_u] = B_i
        prev = Xs[i]
        prev_rows = rows
    return T, d.ravel()


def _gauss_newton_terms(config: NmpcConfig, x_ref, U, Xs):
    n_x, n_u = config.dims
    lh = config.horizon
    Hx = np.zeros((lh, n_x, n_x))
    gx = np.zeros((lh, n_x))
    for i in range(lh - 1):
        Hx[i] = config.stage_cost.gauss_newton(x_ref, Xs[i])
        gx[i] = config.stage_cost.gradient(x_ref, Xs[i])
    Hx[lh - 1] = config.terminal_cost.gauss_newton(x_ref, Xs[lh - 1])
    gx[lh - 1] = config.terminal_cost.gradient(x_ref, Xs[lh - 1])
    Hu = config.input_cost.gauss_newton()
    gu = np.stack([config.input_cost.gradient(U[i]) for i in range(lh)])
    return Hx, gx, Hu, gu


def _cold_start(config: NmpcConfig, x_k, x_ref) -> np.ndarray:
    n_u = config.dims[1]
    if config.cold_start_inputs is not None:
        U = np.asarray(config.cold_start_inputs(x_k, x_ref), dtype=float)
        U = U.reshape(config.horizon, n_u)
    else:
        U = np.zeros((config.horizon, n_u))
    return np.clip(U, config.limits.u_min, config.limits.u_max)


def sqp_solve(config: NmpcConfig, x_k, x_ref, warm: np.ndarray | None = None) -> NmpcSolution:
    """Solve the horizon problem from a warm or cold start.

    Raises SqpNonConvergence (carrying the best iterate) if the step
    tolerance is not reached within the iteration budget or the line
    search stalls.
    """
    x_k = np.asarray(x_k, dtype=float).ravel()
    x_ref = np.asarray(x_ref, dtype=float).ravel()
    n_x, n_u = config.dims
    lh = config.horizon
    settings = config.sqp

    cold = warm is None
    if cold:
        U = _cold_start(config, x_k, x_ref)
        Xs = _rollout(config, x_k, U)
    else:
        warm = np.asarray(warm, dtype=float).ravel()
        if warm.size != lh * (n_x + n_u):
            raise ValueError("warm start has the wrong length")
        U, Xs = _split(config, warm.copy())
        U = np.clip(U, config.limits.u_min, config.limits.u_max)
        Xs = Xs.copy()

    u_max_stack = np.tile(config.limits.u_max, lh)
    u_min_stack = np.tile(config.limits.u_min, lh)
    G_box = np.vstack([np.eye(lh * n_u), -np.eye(lh * n_u)])

    rho = 1.0
    merit_history = []
    perturbed = False
    reset_done = False
    converged = False
    iterations = 0
    qp_warm = None

    for it in range(1, settings.max_iter + 1):
        iterations = it
        T, d = _condense(config, x_k, U, Xs)
        Hx, gx, Hu, gu = _gauss_newton_terms(config, x_ref, U, Xs)

        # Reduced quadratic model in the input increments.
        Tb = T.reshape(lh, n_x, lh * n_u)
        HxT = np.einsum("ixy,iyk->ixk", Hx, Tb)
        H_red = np.einsum("ixk,ixl->kl", Tb, HxT)
        H_red += np.kron(np.eye(lh), Hu)
        db = d.reshape(lh, n_x)
        q_red = np.einsum("ixk,ix->k", Tb, np.einsum("ixy,iy->ix", Hx, db) + gx)
        q_red += gu.ravel()

        u_flat = U.ravel()
        h_box = np.concatenate([u_max_stack - u_flat, u_flat - u_min_stack])
        qp = solve_qp(
            QpProblem(H=H_red, q=q_red, G=G_box, h=h_box),
            tol=settings.qp_tol,
            warm_start=qp_warm,
        )
        if qp.status is QpStatus.INFEASIBLE:
            raise SqpNonConvergence(
                "SQP subproblem infeasible",
                _finish(config, x_k, x_ref, U, it, False, merit_history),
            )
        dU = qp.u_star.reshape(lh, n_u)
        dX = (T @ qp.u_star + d).reshape(lh, n_x)
        step_inf = max(np.abs(dU).max(initial=0.0), np.abs(dX).max(initial=0.0))

        c_now = _defects(config, x_k, U, Xs)
        c_inf = float(np.abs(c_now).max(initial=0.0))

        if step_inf <= settings.step_tol and c_inf <= settings.constraint_tol:
            J_here = _objective(config, x_ref, U, Xs)
            if cold and not perturbed and it == 1 and J_here > 1e-9:
                # Stationary cold start with nonzero cost: a saddle of
                # the landscape (e.g. pendulum at rest straight down).
                # Nudge the inputs deterministically and continue.
                perturbed = True
                bound = max(
                    1.0,
                    np.abs(config.limits.u_max).max(),
                    np.abs(config.limits.u_min).max(),
                )
                U = np.clip(
                    U + 0.01 * bound, config.limits.u_min, config.limits.u_max
                )
                Xs = _rollout(config, x_k, U)
                continue
            converged = True
            break

        # Merit line search on J + rho * |defects|_1, rho raised only.
        c_l1 = float(np.abs(c_now).sum())
        grad_dot = float(np.sum(gx * dX) + np.sum(gu * dU))
        if c_l1 > 1e-14 and grad_dot > 0.0:
            rho = max(rho, grad_dot / (0.9 * c_l1) + 1.0)
        merit0 = _objective(config, x_ref, U, Xs) + rho * c_l1
        predicted = -grad_dot + rho * c_l1
        if predicted <= 0.0:
            predicted = max(
                0.5 * float(qp.u_star @ H_red @ qp.u_star), settings.step_tol
            )

        accepted = False
        alpha = 1.0
        for _ in range(settings.max_backtracks + 1):
            U_t = U + alpha * dU
            Xs_t = Xs + alpha * dX
            c_t = float(np.abs(_defects(config, x_k, U_t, Xs_t)).sum())
            merit_t = _objective(config, x_ref, U_t, Xs_t) + rho * c_t
            if merit_t <= merit0 - settings.armijo * alpha * predicted + 1e-12:
                accepted = True
                break
            alpha *= 0.5
        if accepted:
            merit_history.append((rho, merit0, merit_t))
            U, Xs = U_t, Xs_t
            qp_warm = (1.0 - alpha) * qp.u_star
            reset_done = False
            continue
        if c_inf > settings.constraint_tol and not reset_done:
            # Stalled at an infeasible iterate: reset the states to the
            # rollout under the current inputs and re-linearize there.
            Xs = _rollout(config, x_k, U)
            qp_warm = None
            reset_done = True
            continue
        break

    solution = _finish(config, x_k, x_ref, U, iterations, converged, merit_history)
    if not solution.converged:
        raise SqpNonConvergence(
            f"SQP did not converge in {iterations} iterations", solution
        )
    return solution


def _finish(config, x_k, x_ref, U, iterations, converged, merit_history) -> NmpcSolution:
    # Terminal feasibility rollout: the returned iterate satisfies the
    # dynamics exactly by construction.
    Xs = _rollout(config, x_k, U)
    eq_res = float(np.abs(_defects(config, x_k, U, Xs)).max(initial=0.0))
    return NmpcSolution(
        X=_join(U, Xs),
        iterations=iterations,
        eq_residual=eq_res,
        converged=converged and eq_res <= config.sqp.constraint_tol,
        objective=_objective(config, x_ref, U, Xs),
        merit_history=tuple(merit_history),
    )


def nmpc_step(
    config: NmpcConfig,
    x_k,
    x_ref,
    warm: np.ndarray | None = None,
) -> tuple[np.ndarray, NmpcSolution, float]:
    """One receding-horizon step: solve, apply the first input."""
    t0 = time.perf_counter()
    solution = sqp_solve(config, x_k, x_ref, warm=warm)
    elapsed = time.perf_counter() - t0
    n_u = config.dims[1]
    return solution.X[:n_u].copy(), solution, elapsed


def shift_solution(config: NmpcConfig, solution: NmpcSolution) -> np.ndarray:
    """Warm start for the next step: shift one stage, repeat the last."""
    U, Xs = _split(config, solution.X)
    U_next = np.vstack([U[1:], U[-1:]])
    Xs_next = np.vstack([Xs[1:], Xs[-1:]])
    return _join(U_next, Xs_next)


class NmpcController:
    """Stateful closed-loop adapter carrying the shifted warm start."""

    def __init__(self, config: NmpcConfig):
        self.config = config
        self._warm: np.ndarray | None = None

    def reset(self):
        self._warm = None

    def __call__(self, k, r_k, y_k, x_k, x_ref_k):
        u0, solution, _ = nmpc_step(self.config, x_k, x_ref_k, warm=self._warm)
        self._warm = shift_solution(self.config, solution)
        return u0


def nmpc_config_from_linear(lin_config, sqp: SqpSettings | None = None) -> NmpcConfig:
    """NmpcConfig whose optimum matches the condensed linear MPC step.

    The condensed QP weighs the inputs at half the nominal Rbar (its
    curvature is 2 Su^T Q Su + R), so the equivalent horizon problem
    uses an input cost of Rbar / 2.
    """
    A = lin_config.A
    B = lin_config.B
    n_x, n_u = B.shape

    def f(x, u):
        return A @ x + B @ u

    def jac(x, u):
        return A, B

    dynamics = DiscreteDynamics(f=f, jac=jac, dims=(n_x, n_u), ts=0.0)
    return NmpcConfig(
        dynamics=dynamics,
        horizon=lin_config.horizon,
        terminal_cost=tracking_state_cost(lin_config.Qbar_f),
        stage_cost=tracking_state_cost(lin_config.Qbar),
        input_cost=QuadraticInputCost(0.5 * lin_config.Rbar),
        limits=lin_config.limits,
        sqp=sqp or SqpSettings(),
    )
