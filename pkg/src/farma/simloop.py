"""Sampled-data closed loop: sample, control, saturate, hold, integrate.

At every sample instant the plant output is measured, the controller is
called (and timed with a monotonic clock), its request is saturated,
and the saturated input is held constant while the plant is integrated
over one sample interval by fixed-step RK4.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from farma.plants import PlantModel, SaturationLimits, rk4_step, saturate

__all__ = [
    "ClosedLoopTrajectory",
    "ClosedLoopAborted",
    "simulate_closed_loop",
    "constant_reference",
]

# controller signature: (k, r_k, y_k, x_k, x_ref_k) -> requested input u_r
Controller = Callable[[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
# reference signature: k -> (r_k, x_ref_k)
Reference = Callable[[int], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ClosedLoopTrajectory:
    """Uniformly sampled log of one closed-loop run.

    Row k holds the sample at t = k * ts: reference r, measured output
    y, plant state x, requested input u_r, applied (saturated) input u,
    and the wall time of the controller call alone.
    """

    ts: float
    t: np.ndarray
    r: np.ndarray
    y: np.ndarray
    x: np.ndarray
    u_r: np.ndarray
    u: np.ndarray
    ctrl_time: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.t.size

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.x.shape[1], self.u.shape[1], self.y.shape[1]


class ClosedLoopAborted(RuntimeError):
    """Controller failure mid-run; carries the partial trajectory."""

    def __init__(self, step: int, trajectory: ClosedLoopTrajectory, cause: BaseException):
        super().__init__(f"controller failed at step {step}: {cause}")
        self.step = step
        self.trajectory = trajectory
        self.cause = cause


def constant_reference(r, x_ref) -> Reference:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x_ref = np.atleast_1d(np.asarray(x_ref, dtype=float))

    def reference(k: int):
        return r, x_ref

    return reference


def _assemble(ts, records) -> ClosedLoopTrajectory:
    cols = list(zip(*records)) if records else [[]] * 7
    stack = lambda seq: np.asarray(seq, dtype=float)
    return ClosedLoopTrajectory(
        ts=ts,
        t=stack(cols[0]),
        r=np.atleast_2d(stack(cols[1])),
        y=np.atleast_2d(stack(cols[2])),
        x=np.atleast_2d(stack(cols[3])),
        u_r=np.atleast_2d(stack(cols[4])),
        u=np.atleast_2d(stack(cols[5])),
        ctrl_time=stack(cols[6]),
    )


def simulate_closed_loop(
    model: PlantModel,
    controller: Controller,
    limits: SaturationLimits,
    x0,
    ts: float,
    duration: float,
    reference: Reference,
    substeps: int = 10,
) -> ClosedLoopTrajectory:
    """Run the sampled-data loop for duration seconds (endpoints included).

    The returned trajectory has round(duration/ts) + 1 records; the
    plant state is advanced between samples by `substeps` RK4 steps with
    the saturated input held (zero-order hold). A controller exception
    aborts the run and raises ClosedLoopAborted with the partial log.
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    n_steps = int(round(duration / ts))
    x = np.asarray(x0, dtype=float).copy()
    records = []
    dt = ts / substeps

    for k in range(n_steps + 1):
        y = np.atleast_1d(np.asarray(model.h(x), dtype=float))
        r_k, x_ref_k = reference(k)
        t_start = time.perf_counter()
        try:
            u_r = controller(k, r_k, y, x.copy(), x_ref_k)
        except Exception as exc:
            raise ClosedLoopAborted(k, _assemble(ts, records), exc) from exc
        elapsed = time.perf_counter() - t_start
        u_r = np.atleast_1d(np.asarray(u_r, dtype=float))
        u = saturate(u_r, limits)
        records.append((k * ts, r_k.copy(), y, x.copy(), u_r.copy(), u, elapsed))
        if k < n_steps:
            for _ in range(substeps):
                x = rk4_step(model, x, u, dt)

    return _assemble(ts, records)
