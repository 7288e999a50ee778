"""Linear MPC by condensing the finite-horizon problem onto the inputs.

The predicted states are eliminated through the stacked linear dynamics,
leaving a dense QP in the input sequence with box rows only. The
receding-horizon step solves that QP and applies the first input.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from farma.plants import SaturationLimits
from farma.qp import QpProblem, QpSolution, QpStatus, solve_qp

__all__ = [
    "LinearMpcConfig",
    "PredictionMatrices",
    "build_prediction_matrices",
    "build_condensed_qp",
    "lmpc_step",
    "shift_warm_start",
    "LinearMpcController",
]


def _check_symmetric_psd(M: np.ndarray, name: str, definite: bool = False):
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * max(1.0, np.abs(M).max()):
        raise ValueError(f"{name} must be symmetric")
    if definite:
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise ValueError(f"{name} must be positive definite") from None
    else:
        if np.min(np.linalg.eigvalsh(M)) < -1e-10 * max(1.0, np.abs(M).max()):
            raise ValueError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class LinearMpcConfig:
    """Discrete model (A, B, C), horizon, and quadratic weights.

    Qbar weighs the tracking error at intermediate predicted states,
    Qbar_f at the final one (both PSD); Rbar > 0 weighs the inputs.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    horizon: int
    Qbar: np.ndarray
    Qbar_f: np.ndarray
    Rbar: np.ndarray
    limits: SaturationLimits

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(A.shape[0], -1)
        C = np.asarray(self.C, dtype=float).reshape(-1, A.shape[0])
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        Qbar = np.atleast_2d(np.asarray(self.Qbar, dtype=float))
        Qbar_f = np.atleast_2d(np.asarray(self.Qbar_f, dtype=float))
        Rbar = np.atleast_2d(np.asarray(self.Rbar, dtype=float))
        _check_symmetric_psd(Qbar, "Qbar")
        _check_symmetric_psd(Qbar_f, "Qbar_f")
        _check_symmetric_psd(Rbar, "Rbar", definite=True)
        if self.limits.dim != B.shape[1]:
            raise ValueError("saturation limits must match the input dimension")
        for name, val in (("A", A), ("B", B), ("C", C), ("Qbar", Qbar),
                          ("Qbar_f", Qbar_f), ("Rbar", Rbar)):
            object.__setattr__(self, name, val)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.A.shape[0], self.B.shape[1], self.C.shape[0]


@dataclass(frozen=True)
class PredictionMatrices:
    """Stacked prediction x_stack = Su @ u_stack + Sx @ x_k.

    Su is block lower-triangular with block (i, j) = A^(i-j) B for
    i >= j; block i of Sx is A^(i+1).
    """

    Su: np.ndarray
    Sx: np.ndarray


def build_prediction_matrices(A, B, horizon: int) -> PredictionMatrices:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n_x, n_u = B.shape
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    powers = [np.eye(n_x)]
    for _ in range(horizon):
        powers.append(A @ powers[-1])
    Sx = np.vstack(powers[1:])
    Su = np.zeros((horizon * n_x, horizon * n_u))
    for i in range(horizon):
        for j in range(i + 1):
            Su[i * n_x:(i + 1) * n_x, j * n_u:(j + 1) * n_u] = powers[i - j] @ B
    return PredictionMatrices(Su=Su, Sx=Sx)


def build_condensed_qp(config: LinearMpcConfig, x_k, x_ref) -> QpProblem:
    """Condense the tracking problem at state x_k into a box-constrained QP."""
    n_x, n_u, _ = config.dims
    lh = config.horizon
    x_k = np.asarray(x_k, dtype=float).ravel()
    x_ref = np.asarray(x_ref, dtype=float).ravel()
    pred = build_prediction_matrices(config.A, config.B, lh)

    Q_blocks = [config.Qbar] * (lh - 1) + [config.Qbar_f]
    Q_full = np.zeros((lh * n_x, lh * n_x))
    for i, blk in enumerate(Q_blocks):
        Q_full[i * n_x:(i + 1) * n_x, i * n_x:(i + 1) * n_x] = blk
    R_full = np.kron(np.eye(lh), config.Rbar)

    H = 2.0 * pred.Su.T @ Q_full @ pred.Su + R_full
    target = np.tile(x_ref, lh) - pred.Sx @ x_k
    q = -2.0 * pred.Su.T @ (Q_full @ target)
    n = lh * n_u
    G = np.vstack([np.eye(n), -np.eye(n)])
    h = np.concatenate([
        np.tile(config.limits.u_max, lh),
        -np.tile(config.limits.u_min, lh),
    ])
    return QpProblem(H=H, q=q, G=G, h=h)


def shift_warm_start(u_sequence: np.ndarray, n_u: int) -> np.ndarray:
    """Receding-horizon warm start: drop the first input, repeat the last."""
    return np.concatenate([u_sequence[n_u:], u_sequence[-n_u:]])


def lmpc_step(
    config: LinearMpcConfig,
    x_k,
    x_ref,
    warm: np.ndarray | None = None,
) -> tuple[np.ndarray, QpSolution, float]:
    """One receding-horizon step: solve the condensed QP, apply u_0.

    Returns (first input, full QP solution, solve wall time). Raises
    RuntimeError if the QP does not reach optimality.
    """
    t0 = time.perf_counter()
    problem = build_condensed_qp(config, x_k, x_ref)
    solution = solve_qp(problem, warm_start=warm)
    elapsed = time.perf_counter() - t0
    if solution.status is not QpStatus.OPTIMAL:
        raise RuntimeError(f"MPC subproblem failed: {solution.status.value}")
    n_u = config.dims[1]
    return solution.u_star[:n_u].copy(), solution, elapsed


class LinearMpcController:
    """Stateful closed-loop adapter carrying the shifted warm start."""

    def __init__(self, config: LinearMpcConfig):
        self.config = config
        self._warm: np.ndarray | None = None

    def reset(self):
        self._warm = None

    def __call__(self, k, r_k, y_k, x_k, x_ref_k):
        u0, solution, _ = lmpc_step(self.config, x_k, x_ref_k, warm=self._warm)
        self._warm = shift_warm_start(solution.u_star, self.config.dims[1])
        return u0
