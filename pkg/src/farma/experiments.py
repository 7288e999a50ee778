"""End-to-end scenario pipelines: simulate, train, blend, compare, time.

A scenario run writes, under the output directory:
  - one trajectory CSV per data-generation run (mpc.csv / swing_up.csv ...)
  - theta<N>.txt coefficient bundles
  - arma<N>.csv and farma.csv comparison trajectories
  - figures/*.csv plot data
  - summary.txt and the resolved config.ini

Training deliberately reads the exported CSVs back from disk, so the
trainer sees exactly what the simulator logged.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from farma.arma import PERFORMANCE_MAPS, ArmaController
from farma.configs import ScenarioConfig, builtin_config, save_config
from farma.discretize import euler_discretize, exact_discretize_double_integrator
from farma.fuzzy import (
    DECISION_VARIABLES,
    FarmaController,
    FuzzyRule,
    ramp_down,
    ramp_up,
)
from farma.linear_mpc import LinearMpcConfig, LinearMpcController
from farma.nmpc import (
    NmpcConfig,
    NmpcController,
    QuadraticInputCost,
    SqpSettings,
    pendulum_swing_up_cost,
)
from farma.plants import cart_pendulum_model, double_integrator_model
from farma.simloop import ClosedLoopTrajectory, constant_reference, simulate_closed_loop
from farma.trajectory_io import export_csv, load_csv, save_coefficients
from farma.training import TrainingDataset, build_training_matrices, train_arma

__all__ = [
    "StageError",
    "ExampleReport",
    "BenchReport",
    "run_scenario",
    "run_example1",
    "run_example2",
    "bench_timing",
    "median_of_means",
    "sim_mpc_stage",
    "train_stage",
    "sim_farma_stage",
]


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class ExampleReport:
    config: ScenarioConfig
    out_dir: Path
    trajectories: dict
    thetas: dict
    stage_seconds: dict
    step_seconds: dict
    csv_paths: dict
    summary_path: Path


@dataclass(frozen=True)
class BenchReport:
    mpc_step_seconds: float
    farma_step_seconds: float
    ratio: float


def median_of_means(samples: np.ndarray, blocks: int = 10) -> float:
    """Median of block means; the warm-up sample is the caller's cut."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return float("nan")
    blocks = max(1, min(blocks, samples.size))
    return float(np.median([chunk.mean() for chunk in np.array_split(samples, blocks)]))


def _build_plant(config: ScenarioConfig):
    if config.plant == "double_integrator":
        return double_integrator_model()
    return cart_pendulum_model(config.pendulum)


def _seed_function(config: ScenarioConfig, run):
    if run.seed_kind == "none":
        return None
    lh = config.horizon
    if run.seed_kind == "sine":
        t = np.arange(lh) * config.ts
        seq = (run.seed_amplitude * np.sin(run.seed_frequency * t)).reshape(-1, 1)
    else:
        seq = np.zeros((lh, 1))
        seq[: run.seed_steps, 0] = run.seed_amplitude
    return lambda x_k, x_ref: seq


def _build_mpc_controller(config: ScenarioConfig, run, paper_compat: bool):
    limits = config.limits
    if config.mpc_kind == "linear":
        compat = paper_compat or config.discretization == "paper_compat"
        A, B, C = exact_discretize_double_integrator(config.ts, paper_compat=compat)
        lin = LinearMpcConfig(
            A=A, B=B, C=C,
            horizon=config.horizon,
            Qbar=config.state_weight * np.eye(2),
            Qbar_f=config.terminal_weight * np.eye(2),
            Rbar=[[config.input_weight]],
            limits=limits,
        )
        return LinearMpcController(lin)
    model = _build_plant(config)
    dynamics = euler_discretize(model, config.ts)
    cost = pendulum_swing_up_cost(config.state_weights)
    ncfg = NmpcConfig(
        dynamics=dynamics,
        horizon=config.horizon,
        terminal_cost=cost,
        stage_cost=cost,
        input_cost=QuadraticInputCost([[config.input_weight]]),
        limits=limits,
        sqp=SqpSettings(
            max_iter=config.sqp_max_iter,
            step_tol=config.sqp_step_tol,
            constraint_tol=config.sqp_constraint_tol,
        ),
        cold_start_inputs=_seed_function(config, run),
    )
    return NmpcController(ncfg)


def _simulate(config: ScenarioConfig, controller, x0, duration) -> ClosedLoopTrajectory:
    return simulate_closed_loop(
        model=_build_plant(config),
        controller=controller,
        limits=config.limits,
        x0=np.asarray(x0, dtype=float),
        ts=config.ts,
        duration=duration,
        reference=constant_reference(config.reference, config.state_reference),
        substeps=config.substeps,
    )


def _slice_indices(config: ScenarioConfig, spec) -> tuple[int, int]:
    lo = int(round(spec.slice_start / config.ts))
    hi = int(round(spec.slice_end / config.ts))
    return lo, hi


def _dataset_from_csv(config: ScenarioConfig, spec, csv_path) -> TrainingDataset:
    traj = load_csv(csv_path)
    lo, hi = _slice_indices(config, spec)
    if hi >= traj.n_samples:
        raise StageError("train", f"slice end {spec.slice_end} s is outside {csv_path}")
    return TrainingDataset(
        u=traj.u[lo:hi + 1],
        y=traj.y[lo:hi + 1],
        r=traj.r[lo:hi + 1],
        performance_map=PERFORMANCE_MAPS[spec.performance],
        window=spec.window,
    )


def _train_one(config: ScenarioConfig, spec, csv_path) -> np.ndarray:
    dataset = _dataset_from_csv(config, spec, csv_path)
    mats = build_training_matrices(dataset, ridge=spec.ridge)
    limits = config.limits if spec.constrained else None
    theta = train_arma(mats, limits=limits)
    if not np.all(np.isfinite(theta)):
        raise StageError("train", "fit produced non-finite coefficients")
    return theta


def _build_members(config: ScenarioConfig, thetas: dict) -> list[ArmaController]:
    model = _build_plant(config)
    n_u, n_y = model.dims[1], model.dims[2]
    members = []
    for i, spec in enumerate(config.controllers, start=1):
        members.append(ArmaController(
            theta=thetas[i],
            window=spec.window,
            dims=(n_u, n_y),
            limits=config.limits,
            performance_map=PERFORMANCE_MAPS[spec.performance],
            startup=spec.startup,
        ))
    return members


def build_farma(config: ScenarioConfig, thetas: dict) -> FarmaController:
    """Assemble the blended controller from trained coefficients.

    Rule 1 ramps up over [lower, upper] (fires when the decision
    variable is large), rule 2 ramps down; with more controllers the
    pattern alternates starting from ramp_up.
    """
    members = _build_members(config, thetas)
    rules = []
    for i in range(len(members)):
        mf = ramp_up(config.fuzzy.lower, config.fuzzy.upper) if i % 2 == 0 \
            else ramp_down(config.fuzzy.lower, config.fuzzy.upper)
        rules.append(FuzzyRule((mf,), i))
    gamma = DECISION_VARIABLES[config.fuzzy.decision]
    return FarmaController(members, rules, gamma, config.limits)


def _membership_sweep(config: ScenarioConfig, n: int = 512) -> np.ndarray:
    lo, hi = config.fuzzy.lower, config.fuzzy.upper
    span = hi - lo
    gammas = np.linspace(max(0.0, lo - span), hi + span, n)
    up = ramp_up(lo, hi)
    down = ramp_down(lo, hi)
    return np.column_stack([gammas, [up(g) for g in gammas], [down(g) for g in gammas]])


def _write_figure_data(out_dir: Path, config, trajectories):
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    sweep = _membership_sweep(config)
    np.savetxt(fig_dir / "memberships.csv", sweep, delimiter=",",
               header="gamma,mu_1,mu_2", comments="")
    for name, traj in trajectories.items():
        cols = [traj.t] + [traj.y[:, j] for j in range(traj.y.shape[1])] + [traj.u[:, 0]]
        heads = ["t"] + [f"y_{j+1}" for j in range(traj.y.shape[1])] + ["u"]
        np.savetxt(fig_dir / f"{name}.csv", np.column_stack(cols), delimiter=",",
                   header=",".join(heads), comments="")
    labels = [n for n in ("mpc", "swing_up", "arma1", "arma2", "farma")
              if n in trajectories]
    if labels:
        base = trajectories[labels[0]]
        cols = [base.t] + [trajectories[n].y[:, 0][: base.n_samples] for n in labels
                           if trajectories[n].n_samples >= base.n_samples]
        used = [n for n in labels if trajectories[n].n_samples >= base.n_samples]
        np.savetxt(fig_dir / "comparison_y1.csv", np.column_stack(cols), delimiter=",",
                   header=",".join(["t"] + [f"y1_{n}" for n in used]), comments="")


def run_scenario(config: ScenarioConfig, out_dir, paper_compat: bool = False) -> ExampleReport:
    """Execute the full pipeline for one scenario."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, out_dir / "config.ini")

    stage_seconds = {}
    trajectories = {}
    csv_paths = {}

    # Data-generation runs.
    t0 = time.perf_counter()
    for run in config.runs:
        controller = _build_mpc_controller(config, run, paper_compat)
        try:
            traj = _simulate(config, controller, run.x0, run.duration)
        except Exception as exc:
            raise StageError("sim-mpc", f"run {run.name!r} failed: {exc}") from exc
        trajectories[run.name] = traj
        csv_paths[run.name] = export_csv(traj, out_dir / f"{run.name}.csv")
    stage_seconds["sim-mpc"] = time.perf_counter() - t0

    # Training (reads the CSVs back so the trainer sees the exported log).
    t0 = time.perf_counter()
    thetas = {}
    model = _build_plant(config)
    for i, spec in enumerate(config.controllers, start=1):
        thetas[i] = _train_one(config, spec, csv_paths[spec.source])
        save_coefficients(out_dir / f"theta{i}.txt", thetas[i], spec.window,
                          model.dims[1], model.dims[2])
    stage_seconds["train"] = time.perf_counter() - t0

    # Comparison runs: each member alone, then the blend.
    t0 = time.perf_counter()
    for i, spec in enumerate(config.controllers, start=1):
        member = _build_members(config, thetas)[i - 1]
        name = f"arma{i}"
        try:
            traj = _simulate(config, member, config.farma_x0, config.farma_duration)
        except Exception as exc:
            raise StageError("sim-arma", f"run {name} failed: {exc}") from exc
        trajectories[name] = traj
        csv_paths[name] = export_csv(traj, out_dir / f"{name}.csv")
    farma = build_farma(config, thetas)
    try:
        traj = _simulate(config, farma, config.farma_x0, config.farma_duration)
    except Exception as exc:
        raise StageError("sim-farma", f"blended run failed: {exc}") from exc
    trajectories["farma"] = traj
    csv_paths["farma"] = export_csv(traj, out_dir / "farma.csv")
    stage_seconds["sim-farma"] = time.perf_counter() - t0

    _write_figure_data(out_dir, config, trajectories)

    step_seconds = {
        name: median_of_means(traj.ctrl_time[1:])
        for name, traj in trajectories.items()
    }
    report = ExampleReport(
        config=config,
        out_dir=out_dir,
        trajectories=trajectories,
        thetas=thetas,
        stage_seconds=stage_seconds,
        step_seconds=step_seconds,
        csv_paths=csv_paths,
        summary_path=out_dir / "summary.txt",
    )
    _write_summary(report)
    return report


def _write_summary(report: ExampleReport):
    config = report.config
    lines = [f"scenario: {config.name}"]
    for name, traj in report.trajectories.items():
        y_final = np.array2string(traj.y[-1], precision=6)
        lines.append(
            f"{name}: samples={traj.n_samples} final_y={y_final} "
            f"max_abs_u={np.abs(traj.u).max():.6f} "
            f"mean_step_s={report.step_seconds[name]:.3e}"
        )
    primary = config.runs[0].name
    if primary in report.step_seconds and "farma" in report.step_seconds:
        ratio = report.step_seconds[primary] / report.step_seconds["farma"]
        lines.append(f"timing ratio ({primary} / farma): {ratio:.1f}")
    for stage, seconds in report.stage_seconds.items():
        lines.append(f"stage {stage}: {seconds:.2f} s")
    report.summary_path.write_text("\n".join(lines) + "\n")


def run_example1(out_dir, config: ScenarioConfig | None = None,
                 paper_compat: bool = False) -> ExampleReport:
    return run_scenario(config or builtin_config("example1"), out_dir, paper_compat)


def run_example2(out_dir, config: ScenarioConfig | None = None,
                 paper_compat: bool = False) -> ExampleReport:
    return run_scenario(config or builtin_config("example2"), out_dir, paper_compat)


def bench_timing(config: ScenarioConfig, out_dir) -> BenchReport:
    """Timing report from a completed scenario directory.

    Compares the mean per-step controller time of the first
    data-generation run against the blended controller over its run;
    the warm-up step is excluded and block means are medianized.
    """
    out_dir = Path(out_dir)
    primary = config.runs[0].name
    mpc_csv = out_dir / f"{primary}.csv"
    farma_csv = out_dir / "farma.csv"
    for p in (mpc_csv, farma_csv):
        if not p.exists():
            raise StageError("bench", f"{p} missing; run the scenario first")
    mpc_mean = median_of_means(load_csv(mpc_csv).ctrl_time[1:])
    farma_mean = median_of_means(load_csv(farma_csv).ctrl_time[1:])
    report = BenchReport(
        mpc_step_seconds=mpc_mean,
        farma_step_seconds=farma_mean,
        ratio=mpc_mean / farma_mean,
    )
    (out_dir / "timing.txt").write_text(
        f"mpc_step_seconds: {mpc_mean:.6e}\n"
        f"farma_step_seconds: {farma_mean:.6e}\n"
        f"ratio: {report.ratio:.2f}\n"
    )
    return report


def sim_mpc_stage(config: ScenarioConfig, out_dir, paper_compat: bool = False) -> dict:
    """Run only the data-generation simulations and export their CSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for run in config.runs:
        controller = _build_mpc_controller(config, run, paper_compat)
        try:
            traj = _simulate(config, controller, run.x0, run.duration)
        except Exception as exc:
            raise StageError("sim-mpc", f"run {run.name!r} failed: {exc}") from exc
        paths[run.name] = export_csv(traj, out_dir / f"{run.name}.csv")
    return paths


def train_stage(config: ScenarioConfig, out_dir) -> dict:
    """Train coefficient bundles from previously exported CSVs."""
    out_dir = Path(out_dir)
    model = _build_plant(config)
    thetas = {}
    for i, spec in enumerate(config.controllers, start=1):
        csv_path = out_dir / f"{spec.source}.csv"
        if not csv_path.exists():
            raise StageError("train", f"{csv_path} missing; run sim-mpc first")
        thetas[i] = _train_one(config, spec, csv_path)
        save_coefficients(out_dir / f"theta{i}.txt", thetas[i], spec.window,
                          model.dims[1], model.dims[2])
    return thetas


def sim_farma_stage(config: ScenarioConfig, out_dir) -> Path:
    """Run the blended controller from stored coefficient bundles."""
    from farma.trajectory_io import load_coefficients

    out_dir = Path(out_dir)
    thetas = {}
    for i, _spec in enumerate(config.controllers, start=1):
        bundle = out_dir / f"theta{i}.txt"
        if not bundle.exists():
            raise StageError("sim-farma", f"{bundle} missing; run train first")
        thetas[i], *_ = load_coefficients(bundle)
    farma = build_farma(config, thetas)
    try:
        traj = _simulate(config, farma, config.farma_x0, config.farma_duration)
    except Exception as exc:
        raise StageError("sim-farma", f"blended run failed: {exc}") from exc
    return export_csv(traj, out_dir / "farma.csv")
