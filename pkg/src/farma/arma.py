"""Fixed-window ARMA control law fed by its own saturated output history.

The controller output is a linear map of the last `window` saturated
outputs and the last `window` performance variables (a tracking-error
like signal derived from reference and measurement). Until the history
windows fill, the output is gated to zero, so the zero initialization of
the buffers never leaks into the response.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from farma.plants import SaturationLimits, wrap_pi

__all__ = [
    "build_regressor",
    "ArmaController",
    "tracking_error",
    "cart_swing_up_error",
    "cart_balance_error",
    "PERFORMANCE_MAPS",
]

# performance map signature: (r, y) -> performance variable, shape (l_y,)
PerformanceMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


def tracking_error(r, y) -> np.ndarray:
    """Plain tracking error r - y."""
    return np.atleast_1d(np.asarray(r, dtype=float) - np.asarray(y, dtype=float))


def cart_swing_up_error(r, y) -> np.ndarray:
    """[-p, wrapped(pi - phi)] for an output y = [p, phi].

    Measures the angle error from the hanging orientation, which is the
    signal an upswing controller regresses on.
    """
    return np.array([-y[0], wrap_pi(np.pi - y[1])])


def cart_balance_error(r, y) -> np.ndarray:
    """[-p, wrapped(-phi)]: error from the upright orientation."""
    return np.array([-y[0], wrap_pi(-y[1])])


PERFORMANCE_MAPS: dict[str, PerformanceMap] = {
    "tracking_error": tracking_error,
    "cart_swing_up_error": cart_swing_up_error,
    "cart_balance_error": cart_balance_error,
}


def build_regressor(u_hist: np.ndarray, z_hist: np.ndarray, n_u: int) -> np.ndarray:
    """Regressor row block from newest-first histories.

    u_hist is (window, n_u) and z_hist (window, n_y), both newest first;
    the result is the (n_u, window*n_u*(n_y+n_u)/..) matrix
    I_{n_u} (x) [u_{k-1}, ..., u_{k-w}, z_{k-1}, ..., z_{k-w}].
    """
    row = np.concatenate([np.ravel(u_hist), np.ravel(z_hist)])
    if n_u == 1:
        return row[np.newaxis, :]
    return np.kron(np.eye(n_u), row)


class ArmaController:
    """Stateful ARMA law u_r = phi(history) @ theta.

    Each instance stores the saturated version of its *own* requested
    output, never the input actually applied to the plant; that
    distinction matters when several controllers run side by side in a
    fuzzy blend and only one of them drives the plant.

    startup selects the behavior while the history windows fill:
    "gate" (default) emits exactly zero until `window` samples have
    passed, so the zero-initialized buffers never leak into the output;
    "ramp_in" evaluates the law from the first sample over the
    zero-padded buffers, which treats the controller as having been at
    rest before the run and lets it react to the first measurements
    immediately. gate follows the published control law literally;
    ramp_in is what makes a distilled controller reproduce its teacher
    from a cold start, since the teacher was never gated.
    """

    def __init__(
        self,
        theta: np.ndarray,
        window: int,
        dims: tuple[int, int],
        limits: SaturationLimits,
        performance_map: PerformanceMap,
        startup: str = "gate",
    ):
        n_u, n_y = dims
        theta = np.asarray(theta, dtype=float).ravel()
        expected = window * n_u * (n_y + n_u)
        if theta.size != expected:
            raise ValueError(
                f"theta has {theta.size} coefficients, expected {expected} "
                f"(window {window}, dims {dims})"
            )
        if window < 1:
            raise ValueError("window must be at least 1")
        if startup not in ("gate", "ramp_in"):
            raise ValueError(f"unknown startup mode {startup!r}")
        self.theta = theta
        self.window = window
        self.dims = (n_u, n_y)
        self.limits = limits
        self.performance_map = performance_map
        self.startup = startup
        self._u_hist = np.zeros((window, n_u))
        self._z_hist = np.zeros((window, n_y))
        self._k = 0
        # Split theta once; the per-sample step is on the controller's
        # hot path and avoids rebuilding the Kronecker regressor.
        self._theta_u = theta[: window * n_u * n_u]
        self._theta_z = theta[window * n_u * n_u:]

    @property
    def k(self) -> int:
        return self._k

    @property
    def n_theta(self) -> int:
        return self.theta.size

    def reset(self):
        self._u_hist[:] = 0.0
        self._z_hist[:] = 0.0
        self._k = 0

    def regressor(self) -> np.ndarray:
        """Current regressor block (valid once the gate has opened)."""
        return build_regressor(self._u_hist, self._z_hist, self.dims[0])

    def step(self, r, y) -> np.ndarray:
        """Advance one sample: emit u_r, then push sigma(u_r) and z.

        In gate mode the output is exactly zero for the first `window`
        calls. One call per plant sample; the histories index strictly
        past values.
        """
        n_u = self.dims[0]
        if self._k >= self.window or self.startup == "ramp_in":
            if n_u == 1:
                u_r = np.array([
                    self._u_hist.ravel() @ self._theta_u
                    + self._z_hist.ravel() @ self._theta_z
                ])
            else:
                u_r = self.regressor() @ self.theta
        else:
            u_r = np.zeros(n_u)
        z = self.performance_map(r, y)
        u_sat = np.clip(u_r, self.limits.u_min, self.limits.u_max)
        self._u_hist[1:] = self._u_hist[:-1]
        self._u_hist[0] = u_sat
        self._z_hist[1:] = self._z_hist[:-1]
        self._z_hist[0] = z
        self._k += 1
        return u_r

    def __call__(self, k, r_k, y_k, x_k, x_ref_k):
        # Closed-loop adapter; the plant state arguments are ignored by
        # construction (the law is output feedback only).
        return self.step(r_k, y_k)
