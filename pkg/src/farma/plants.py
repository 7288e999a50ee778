"""Continuous-time plant models, input saturation, and RK4 integration.

Ships the two benchmark plants: a double integrator (point mass under
force control) and a pendulum on a cart. Both carry analytic Jacobians
of their vector fields so predictive controllers can linearize without
finite differencing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "SaturationLimits",
    "saturate",
    "wrap_pi",
    "PlantModel",
    "rk4_step",
    "double_integrator_model",
    "CartPendulumParams",
    "cart_pendulum_model",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SaturationLimits:
    """Componentwise actuator magnitude bounds, u_min < u_max."""

    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.u_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.u_max, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("u_min and u_max must have the same shape")
        if not np.all(lo < hi):
            raise ValueError("u_min must be strictly below u_max componentwise")
        object.__setattr__(self, "u_min", lo)
        object.__setattr__(self, "u_max", hi)

    @classmethod
    def symmetric(cls, bound: float, dim: int = 1) -> "SaturationLimits":
        b = abs(float(bound)) * np.ones(dim)
        return cls(-b, b)

    @property
    def dim(self) -> int:
        return self.u_min.size


def saturate(u, limits: SaturationLimits) -> np.ndarray:
    """Clamp u into [u_min, u_max] componentwise (idempotent)."""
    return np.clip(np.atleast_1d(np.asarray(u, dtype=float)), limits.u_min, limits.u_max)


def wrap_pi(angle):
    """Wrap an angle (or array of angles) into (-pi, pi]."""
    a = np.asarray(angle, dtype=float)
    wrapped = np.mod(a, TWO_PI)
    wrapped = np.where(wrapped > np.pi, wrapped - TWO_PI, wrapped)
    if np.ndim(angle) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class PlantModel:
    """Continuous-time dynamics x' = f_c(x, u) with output map y = h(x).

    dims is (state, input, output) dimension. f_c_jac, when present,
    returns (df_c/dx, df_c/du) evaluated at (x, u).
    """

    f_c: Callable[[np.ndarray, np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    dims: tuple[int, int, int]
    f_c_jac: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None


def rk4_step(model: PlantModel, x, u, dt: float) -> np.ndarray:
    """Classical 4th-order Runge-Kutta update with u held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    k1 = model.f_c(x, u)
    k2 = model.f_c(x + 0.5 * dt * k1, u)
    k3 = model.f_c(x + 0.5 * dt * k2, u)
    k4 = model.f_c(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def double_integrator_model() -> PlantModel:
    """Point mass: x = [position, velocity], x' = [x2, u], y = position."""

    def f_c(x, u):
        return np.array([x[1], float(u[0])])

    def h(x):
        return np.array([x[0]])

    def f_c_jac(x, u):
        dfdx = np.array([[0.0, 1.0], [0.0, 0.0]])
        dfdu = np.array([[0.0], [1.0]])
        return dfdx, dfdu

    return PlantModel(f_c=f_c, h=h, dims=(2, 1, 1), f_c_jac=f_c_jac)


@dataclass(frozen=True)
class CartPendulumParams:
    """Cart mass M [kg], pendulum mass m [kg], length ell [m], gravity g [m/s^2]."""

    M: float = 1.0
    m: float = 0.2
    ell: float = 0.4
    g: float = 9.81

    def __post_init__(self):
        for name in ("M", "m", "ell", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def cart_pendulum_model(params: CartPendulumParams | None = None) -> PlantModel:
    """Pendulum on a cart driven by a horizontal force.

    State is [p, p_dot, phi, phi_dot] with phi measured from the upright
    position, input is the force on the cart, output is [p, phi]. The
    denominator (1/3) m ell^2 (m + M) - (1/4) (m ell cos phi)^2 is
    strictly positive for M > 0, so the dynamics are total.
    """
    if params is None:
        params = CartPendulumParams()
    M, m, ell, g = params.M, params.m, params.ell, params.g
    ml = m * ell
    a_den = (m * ell**2 / 3.0) * (m + M)

    def f_c(x, u):
        _, p_dot, phi, phi_dot = x
        F = float(u[0])
        s, c = np.sin(phi), np.cos(phi)
        s2 = np.sin(2.0 * phi)
        den = a_den - 0.25 * (ml * c) ** 2
        p_dd = (
            (m * ml * ell**2 / 6.0) * phi_dot**2 * s
            - 0.125 * ml**2 * g * s2
            + (m * ell**2 / 3.0) * F
        ) / den
        phi_dd = (
            0.5 * m * g * ell * (m + M) * s
            - 0.125 * ml**2 * phi_dot**2 * s2
            - 0.5 * ml * c * F
        ) / den
        return np.array([p_dot, p_dd, phi_dot, phi_dd])

    def f_c_jac(x, u):
        _, p_dot, phi, phi_dot = x
        F = float(u[0])
        s, c = np.sin(phi), np.cos(phi)
        s2, c2 = np.sin(2.0 * phi), np.cos(2.0 * phi)
        den = a_den - 0.25 * (ml * c) ** 2
        dden = 0.25 * ml**2 * s2

        n2 = (
            (m * ml * ell**2 / 6.0) * phi_dot**2 * s
            - 0.125 * ml**2 * g * s2
            + (m * ell**2 / 3.0) * F
        )
        dn2_dphi = (m * ml * ell**2 / 6.0) * phi_dot**2 * c - 0.25 * ml**2 * g * c2
        dn2_dphidot = (m * ml * ell**2 / 3.0) * phi_dot * s

        n4 = (
            0.5 * m * g * ell * (m + M) * s
            - 0.125 * ml**2 * phi_dot**2 * s2
            - 0.5 * ml * c * F
        )
        dn4_dphi = (
            0.5 * m * g * ell * (m + M) * c
            - 0.25 * ml**2 * phi_dot**2 * c2
            + 0.5 * ml * s * F
        )
        dn4_dphidot = -0.25 * ml**2 * phi_dot * s2

        dfdx = np.zeros((4, 4))
        dfdx[0, 1] = 1.0
        dfdx[2, 3] = 1.0
        dfdx[1, 2] = (dn2_dphi * den - n2 * dden) / den**2
        dfdx[1, 3] = dn2_dphidot / den
        dfdx[3, 2] = (dn4_dphi * den - n4 * dden) / den**2
        dfdx[3, 3] = dn4_dphidot / den

        dfdu = np.zeros((4, 1))
        dfdu[1, 0] = (m * ell**2 / 3.0) / den
        dfdu[3, 0] = -0.5 * ml * c / den
        return dfdx, dfdu

    def h(x):
        return np.array([x[0], x[2]])

    return PlantModel(f_c=f_c, h=h, dims=(4, 1, 2), f_c_jac=f_c_jac)
