"""Discretizations bridging continuous plants and discrete predictive models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from farma.plants import PlantModel

__all__ = ["DiscreteDynamics", "euler_discretize", "exact_discretize_double_integrator"]


@dataclass(frozen=True)
class DiscreteDynamics:
    """Discrete update x+ = f(x, u) with Jacobians (df/dx, df/du)."""

    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    dims: tuple[int, int]
    ts: float

    def __call__(self, x, u) -> np.ndarray:
        return self.f(x, u)


def euler_discretize(model: PlantModel, ts: float) -> DiscreteDynamics:
    """Forward-Euler discretization f(x, u) = x + ts * f_c(x, u)."""
    if ts <= 0:
        raise ValueError("ts must be positive")
    if model.f_c_jac is None:
        raise ValueError("euler_discretize needs a model with analytic Jacobians")
    n_x = model.dims[0]
    eye = np.eye(n_x)

    def f(x, u):
        x = np.asarray(x, dtype=float)
        return x + ts * model.f_c(x, np.atleast_1d(np.asarray(u, dtype=float)))

    def jac(x, u):
        dfdx, dfdu = model.f_c_jac(
            np.asarray(x, dtype=float), np.atleast_1d(np.asarray(u, dtype=float))
        )
        return eye + ts * dfdx, ts * dfdu

    return DiscreteDynamics(f=f, jac=jac, dims=model.dims[:2], ts=ts)


def exact_discretize_double_integrator(
    ts: float, paper_compat: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of the double integrator.

    Returns (A, B, C) with A = [[1, ts], [0, 1]] and C = [1, 0]. The
    default B = [ts^2/2, ts] is the matrix-exponential result;
    paper_compat selects the legacy variant B = [ts^2, ts] so published
    trajectories based on it can be reproduced.
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    A = np.array([[1.0, ts], [0.0, 1.0]])
    b0 = ts**2 if paper_compat else 0.5 * ts**2
    B = np.array([[b0], [ts]])
    C = np.array([[1.0, 0.0]])
    return A, B, C
