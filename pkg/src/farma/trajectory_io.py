"""File formats: trajectory CSV logs and controller coefficient bundles.

CSV layout: header row
    t,r_1..r_ly,y_1..y_ly,x_1..x_lx,ur_1..ur_lu,u_1..u_lu,ctrl_time_s
then one row per sample. Values are printed with shortest round-trip
precision (repr), so a written file reparses to bit-identical floats
and identical runs produce identical bytes apart from the timing
column.

Coefficient bundles are plain text: a "lw,lu,ly" header line, the three
values, then one coefficient per line at full precision.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from farma.simloop import ClosedLoopTrajectory

__all__ = [
    "export_csv",
    "load_csv",
    "save_coefficients",
    "load_coefficients",
]


def _header(dims: tuple[int, int, int]) -> list[str]:
    n_x, n_u, n_y = dims
    cols = ["t"]
    cols += [f"r_{i+1}" for i in range(n_y)]
    cols += [f"y_{i+1}" for i in range(n_y)]
    cols += [f"x_{i+1}" for i in range(n_x)]
    cols += [f"ur_{i+1}" for i in range(n_u)]
    cols += [f"u_{i+1}" for i in range(n_u)]
    cols.append("ctrl_time_s")
    return cols


def export_csv(trajectory: ClosedLoopTrajectory, path) -> Path:
    """Write the trajectory; returns the path written."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if trajectory.n_samples == 0:
            writer.writerow(["t", "ctrl_time_s"])
            return path
        writer.writerow(_header(trajectory.dims))
        for k in range(trajectory.n_samples):
            row = [trajectory.t[k]]
            row += list(trajectory.r[k])
            row += list(trajectory.y[k])
            row += list(trajectory.x[k])
            row += list(trajectory.u_r[k])
            row += list(trajectory.u[k])
            row.append(trajectory.ctrl_time[k])
            writer.writerow([repr(float(v)) for v in row])
    return path


def load_csv(path) -> ClosedLoopTrajectory:
    """Read a trajectory written by export_csv."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path} contains no samples")
    data = np.asarray(rows)
    counts = {"r": 0, "y": 0, "x": 0, "ur": 0, "u": 0}
    for name in header:
        stem = name.split("_")[0]
        if stem in counts:
            counts[stem] += 1
    n_y, n_x, n_u = counts["y"], counts["x"], counts["u"]
    if counts["r"] != n_y or counts["ur"] != n_u:
        raise ValueError(f"{path} has an inconsistent column layout: {header}")
    t = data[:, 0]
    off = 1
    r = data[:, off:off + n_y]; off += n_y
    y = data[:, off:off + n_y]; off += n_y
    x = data[:, off:off + n_x]; off += n_x
    u_r = data[:, off:off + n_u]; off += n_u
    u = data[:, off:off + n_u]; off += n_u
    ctrl_time = data[:, off]
    ts = float(t[1] - t[0]) if t.size > 1 else 0.0
    return ClosedLoopTrajectory(ts=ts, t=t, r=r, y=y, x=x, u_r=u_r, u=u, ctrl_time=ctrl_time)


def save_coefficients(path, theta, window: int, n_u: int, n_y: int) -> Path:
    """Write a coefficient bundle (header 'lw,lu,ly', values, coefficients)."""
    theta = np.asarray(theta, dtype=float).ravel()
    expected = window * n_u * (n_y + n_u)
    if theta.size != expected:
        raise ValueError(f"theta has {theta.size} entries, expected {expected}")
    path = Path(path)
    lines = ["lw,lu,ly", f"{window},{n_u},{n_y}"]
    lines += [repr(float(v)) for v in theta]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_coefficients(path) -> tuple[np.ndarray, int, int, int]:
    """Read a coefficient bundle; returns (theta, window, n_u, n_y)."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 3 or lines[0].replace(" ", "") != "lw,lu,ly":
        raise ValueError(f"{path} is not a coefficient bundle")
    window, n_u, n_y = (int(v) for v in lines[1].split(","))
    theta = np.array([float(v) for v in lines[2:]])
    expected = window * n_u * (n_y + n_u)
    if theta.size != expected:
        raise ValueError(
            f"{path} holds {theta.size} coefficients, header implies {expected}"
        )
    return theta, window, n_u, n_y
