"""Least-squares fitting of ARMA coefficients from closed-loop MPC logs.

Regressor rows are assembled from the logged (already saturated) inputs
and the performance variables derived from the logged references and
outputs; the fit minimizes |Phi theta - U|^2 + theta^T R theta, either
through the regularized normal equations or, when saturation limits are
supplied, as a QP whose rows force every training-row prediction inside
the limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from farma.arma import PerformanceMap, build_regressor
from farma.plants import SaturationLimits
from farma.qp import QpProblem, QpStatus, solve_qp

__all__ = [
    "DatasetTooShortError",
    "RankDeficiencyError",
    "TrainingError",
    "TrainingDataset",
    "TrainingMatrices",
    "build_training_matrices",
    "train_arma",
]


class TrainingError(RuntimeError):
    pass


class DatasetTooShortError(TrainingError):
    pass


class RankDeficiencyError(TrainingError):
    pass


@dataclass(frozen=True)
class TrainingDataset:
    """Aligned input/output/reference sequences plus the fit window."""

    u: np.ndarray
    y: np.ndarray
    r: np.ndarray
    performance_map: PerformanceMap
    window: int

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        if u.shape[0] == 1 and u.shape[1] > 1 and np.asarray(self.u).ndim == 1:
            u = u.T
        if y.shape[0] == 1 and y.shape[1] > 1 and np.asarray(self.y).ndim == 1:
            y = y.T
        if r.shape[0] == 1 and r.shape[1] > 1 and np.asarray(self.r).ndim == 1:
            r = r.T
        if not (u.shape[0] == y.shape[0] == r.shape[0]):
            raise ValueError("u, y, r must have the same number of samples")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if u.shape[0] <= self.window:
            raise DatasetTooShortError(
                f"{u.shape[0]} samples cannot support a window of {self.window}"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "r", r)

    @property
    def n_samples(self) -> int:
        return self.u.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.u.shape[1], self.y.shape[1]


@dataclass(frozen=True)
class TrainingMatrices:
    """Stacked regressors Phi, targets U, and the ridge matrix."""

    Phi: np.ndarray
    U: np.ndarray
    R_theta: np.ndarray


def build_training_matrices(data: TrainingDataset, ridge=0.0) -> TrainingMatrices:
    """Assemble the regression for rows k = window .. n_samples - 1.

    The logged inputs are used as recorded (they were saturated when the
    loop ran; no re-saturation happens here). `ridge` is either a scalar
    lambda for lambda * I or a full matrix.
    """
    n_u, n_y = data.dims
    window = data.window
    z = np.stack(
        [data.performance_map(data.r[k], data.y[k]) for k in range(data.n_samples)]
    )
    n_theta = window * n_u * (n_y + n_u)
    ks = range(window, data.n_samples)
    Phi = np.empty((len(ks) * n_u, n_theta))
    U = np.empty(len(ks) * n_u)
    for row, k in enumerate(ks):
        u_hist = data.u[k - 1::-1][:window]
        z_hist = z[k - 1::-1][:window]
        Phi[row * n_u:(row + 1) * n_u] = build_regressor(u_hist, z_hist, n_u)
        U[row * n_u:(row + 1) * n_u] = data.u[k]
    ridge_mat = np.asarray(ridge, dtype=float)
    if ridge_mat.ndim == 0:
        ridge_mat = float(ridge_mat) * np.eye(n_theta)
    if ridge_mat.shape != (n_theta, n_theta):
        raise ValueError("ridge matrix has the wrong shape")
    return TrainingMatrices(Phi=Phi, U=U, R_theta=ridge_mat)


def train_arma(
    mats: TrainingMatrices,
    limits: SaturationLimits | None = None,
    tol: float = 1e-8,
) -> np.ndarray:
    """Fit theta, optionally forcing training-row predictions in bounds.

    Without limits, solves the regularized normal equations
    (Phi^T Phi + R) theta = Phi^T U; a singular system with zero ridge
    raises RankDeficiencyError naming the deficient dimension. With
    limits, the same objective is minimized subject to
    u_min <= Phi theta <= u_max row by row via the QP solver.
    """
    Phi, U, R = mats.Phi, mats.U, mats.R_theta
    n_theta = Phi.shape[1]
    if not np.any(Phi):
        raise TrainingError("regressor matrix is identically zero")
    H = 2.0 * Phi.T @ Phi + 2.0 * R
    q = -2.0 * Phi.T @ U

    if limits is None:
        if not np.any(R):
            rank = np.linalg.matrix_rank(Phi)
            if rank < n_theta:
                raise RankDeficiencyError(
                    f"regressor matrix rank {rank} < {n_theta}; "
                    "add ridge regularization or richer data"
                )
        return np.linalg.solve(0.5 * H, -0.5 * q)

    n_rows = Phi.shape[0]
    n_u = limits.dim
    reps = n_rows // n_u
    G = np.vstack([Phi, -Phi])
    h = np.concatenate([np.tile(limits.u_max, reps), -np.tile(limits.u_min, reps)])
    solution = solve_qp(QpProblem(H=H, q=q, G=G, h=h), tol=tol)
    if solution.status is QpStatus.INFEASIBLE:
        raise TrainingError("constrained fit is infeasible")
    if solution.status is not QpStatus.OPTIMAL:
        raise TrainingError(
            f"constrained fit did not reach optimality ({solution.status.value}, "
            f"kkt residual {solution.kkt_residual:.3e})"
        )
    return solution.u_star
