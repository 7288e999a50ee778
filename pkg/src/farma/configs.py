"""Scenario configuration: dataclasses plus a flat INI file round trip.

A scenario bundles the plant, the MPC used to generate training data,
the closed-loop runs to record, the per-controller training recipes,
the fuzzy blending spec, and the final blended-controller evaluation.
The two shipped scenarios reproduce the benchmark studies end to end.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from farma.arma import PERFORMANCE_MAPS
from farma.fuzzy import DECISION_VARIABLES
from farma.plants import CartPendulumParams, SaturationLimits

__all__ = [
    "RunSpec",
    "ControllerSpec",
    "FuzzySpec",
    "ScenarioConfig",
    "example1_config",
    "example2_config",
    "load_config",
    "save_config",
    "builtin_config",
]


@dataclass(frozen=True)
class RunSpec:
    """One data-generation closed-loop run.

    The seed fields describe the solver's cold-start input sequence for
    nonlinear MPC (basin selection on multimodal problems): kind "none"
    (zeros), "sine" (amplitude, frequency rad/s), or "pulse"
    (amplitude over the first `steps` stages).
    """

    name: str
    x0: tuple
    duration: float
    seed_kind: str = "none"
    seed_amplitude: float = 0.0
    seed_frequency: float = 0.0
    seed_steps: int = 0

    def __post_init__(self):
        if self.seed_kind not in ("none", "sine", "pulse"):
            raise ValueError(f"unknown seed kind {self.seed_kind!r}")


@dataclass(frozen=True)
class ControllerSpec:
    """Training recipe for one blended controller."""

    window: int
    ridge: float
    source: str
    slice_start: float
    slice_end: float
    performance: str
    constrained: bool = True
    startup: str = "gate"

    def __post_init__(self):
        if self.performance not in PERFORMANCE_MAPS:
            raise ValueError(f"unknown performance map {self.performance!r}")
        if self.startup not in ("gate", "ramp_in"):
            raise ValueError(f"unknown startup mode {self.startup!r}")
        if not self.slice_end > self.slice_start:
            raise ValueError("slice must have positive length")


@dataclass(frozen=True)
class FuzzySpec:
    """Decision variable selector plus the shared ramp breakpoints."""

    decision: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.decision not in DECISION_VARIABLES:
            raise ValueError(f"unknown decision variable {self.decision!r}")
        if not self.lower < self.upper:
            raise ValueError("breakpoints must satisfy lower < upper")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    plant: str                      # double_integrator | cart_pendulum
    mpc_kind: str                   # linear | nonlinear
    ts: float
    substeps: int
    u_bound: float                  # symmetric input limits
    reference: tuple                # output reference r
    state_reference: tuple          # state reference
    horizon: int
    runs: tuple = ()
    controllers: tuple = ()
    fuzzy: FuzzySpec = None  # type: ignore[assignment]
    farma_x0: tuple = ()
    farma_duration: float = 0.0
    # linear MPC weights (scalar multiples of identity)
    state_weight: float = 0.0
    terminal_weight: float = 0.0
    input_weight: float = 0.0
    discretization: str = "exact"   # exact | paper_compat
    # nonlinear MPC fields
    state_weights: tuple = ()
    pendulum: CartPendulumParams | None = None
    sqp_max_iter: int = 3000
    sqp_step_tol: float = 1e-6
    sqp_constraint_tol: float = 1e-6

    def __post_init__(self):
        if self.plant not in ("double_integrator", "cart_pendulum"):
            raise ValueError(f"unknown plant {self.plant!r}")
        if self.mpc_kind not in ("linear", "nonlinear"):
            raise ValueError(f"unknown MPC kind {self.mpc_kind!r}")
        if self.discretization not in ("exact", "paper_compat"):
            raise ValueError(f"unknown discretization {self.discretization!r}")
        run_names = {run.name for run in self.runs}
        if len(run_names) != len(self.runs):
            raise ValueError("run names must be unique")
        durations = {run.name: run.duration for run in self.runs}
        for spec in self.controllers:
            if spec.source not in durations:
                raise ValueError(f"controller source {spec.source!r} is not a run")
            if spec.slice_end > durations[spec.source] + 1e-9:
                raise ValueError(
                    f"slice [{spec.slice_start}, {spec.slice_end}] exceeds the "
                    f"{spec.source!r} run duration {durations[spec.source]}"
                )

    @property
    def limits(self) -> SaturationLimits:
        return SaturationLimits.symmetric(self.u_bound)


def example1_config() -> ScenarioConfig:
    """Setpoint tracking of a double integrator under linear MPC."""
    return ScenarioConfig(
        name="example1",
        plant="double_integrator",
        mpc_kind="linear",
        ts=0.01,
        substeps=10,
        u_bound=10.0,
        reference=(2.0,),
        state_reference=(2.0, 0.0),
        horizon=10,
        state_weight=10.0,
        terminal_weight=1e5,
        input_weight=1e-2,
        discretization="exact",
        runs=(RunSpec(name="mpc", x0=(0.0, 0.0), duration=6.0),),
        controllers=(
            ControllerSpec(window=10, ridge=0.0, source="mpc",
                           slice_start=0.0, slice_end=6.0,
                           performance="tracking_error", startup="ramp_in"),
            ControllerSpec(window=10, ridge=0.0, source="mpc",
                           slice_start=1.5, slice_end=6.0,
                           performance="tracking_error", startup="ramp_in"),
        ),
        fuzzy=FuzzySpec(decision="abs_tracking_error", lower=0.4, upper=0.6),
        farma_x0=(0.0, 0.0),
        farma_duration=6.0,
    )


def example2_config() -> ScenarioConfig:
    """Swing-up of a pendulum on a cart under nonlinear MPC."""
    return ScenarioConfig(
        name="example2",
        plant="cart_pendulum",
        mpc_kind="nonlinear",
        ts=0.02,
        substeps=10,
        u_bound=30.0,
        reference=(0.0, 0.0),
        state_reference=(0.0, 0.0, 0.0, 0.0),
        horizon=100,
        state_weights=(30.0, 20.0, 60.0, 20.0),
        input_weight=50.0,
        pendulum=CartPendulumParams(M=1.0, m=0.2, ell=0.4, g=9.81),
        runs=(
            RunSpec(name="swing_up", x0=(0.0, 0.0, np.pi, 0.0), duration=15.0,
                    seed_kind="sine", seed_amplitude=15.0, seed_frequency=6.5),
            RunSpec(name="stabilization", x0=(1.0, 0.0, np.pi / 5.0, 0.0),
                    duration=15.0,
                    seed_kind="pulse", seed_amplitude=20.0, seed_steps=10),
        ),
        controllers=(
            ControllerSpec(window=30, ridge=1e-3, source="swing_up",
                           slice_start=0.0, slice_end=2.5,
                           performance="cart_swing_up_error", startup="ramp_in"),
            ControllerSpec(window=10, ridge=1e-8, source="stabilization",
                           slice_start=0.0, slice_end=15.0,
                           performance="cart_balance_error", startup="ramp_in"),
        ),
        fuzzy=FuzzySpec(decision="abs_wrapped_angle",
                        lower=np.pi / 3 - np.pi / 30,
                        upper=np.pi / 3 + np.pi / 30),
        farma_x0=(0.0, 0.0, 0.95 * np.pi, 0.0),
        farma_duration=15.0,
    )


def builtin_config(name: str) -> ScenarioConfig:
    builders = {"example1": example1_config, "example2": example2_config}
    if name not in builders:
        raise ValueError(f"unknown built-in scenario {name!r}")
    return builders[name]()


def _fmt_seq(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _parse_seq(text: str) -> tuple:
    return tuple(float(v) for v in text.split())


def save_config(config: ScenarioConfig, path) -> Path:
    """Write the scenario as a flat INI file."""
    cp = configparser.ConfigParser()
    cp["scenario"] = {
        "name": config.name,
        "plant": config.plant,
        "mpc": config.mpc_kind,
        "ts": repr(config.ts),
        "substeps": str(config.substeps),
        "u_bound": repr(config.u_bound),
        "reference": _fmt_seq(config.reference),
        "state_reference": _fmt_seq(config.state_reference),
    }
    if config.mpc_kind == "linear":
        cp["linear_mpc"] = {
            "horizon": str(config.horizon),
            "state_weight": repr(config.state_weight),
            "terminal_weight": repr(config.terminal_weight),
            "input_weight": repr(config.input_weight),
            "discretization": config.discretization,
        }
    else:
        cp["nonlinear_mpc"] = {
            "horizon": str(config.horizon),
            "state_weights": _fmt_seq(config.state_weights),
            "input_weight": repr(config.input_weight),
            "sqp_max_iter": str(config.sqp_max_iter),
            "sqp_step_tol": repr(config.sqp_step_tol),
            "sqp_constraint_tol": repr(config.sqp_constraint_tol),
        }
    if config.pendulum is not None:
        p = config.pendulum
        cp["pendulum"] = {
            "cart_mass": repr(p.M),
            "pendulum_mass": repr(p.m),
            "length": repr(p.ell),
            "gravity": repr(p.g),
        }
    for run in config.runs:
        section = {
            "x0": _fmt_seq(run.x0),
            "duration": repr(run.duration),
            "seed_kind": run.seed_kind,
        }
        if run.seed_kind == "sine":
            section["seed_amplitude"] = repr(run.seed_amplitude)
            section["seed_frequency"] = repr(run.seed_frequency)
        elif run.seed_kind == "pulse":
            section["seed_amplitude"] = repr(run.seed_amplitude)
            section["seed_steps"] = str(run.seed_steps)
        cp[f"run.{run.name}"] = section
    for i, spec in enumerate(config.controllers, start=1):
        cp[f"controller.{i}"] = {
            "window": str(spec.window),
            "ridge": repr(spec.ridge),
            "source": spec.source,
            "slice": f"{spec.slice_start!r} {spec.slice_end!r}",
            "performance": spec.performance,
            "constrained": str(spec.constrained).lower(),
            "startup": spec.startup,
        }
    cp["fuzzy"] = {
        "decision": config.fuzzy.decision,
        "lower": repr(config.fuzzy.lower),
        "upper": repr(config.fuzzy.upper),
    }
    cp["farma"] = {
        "x0": _fmt_seq(config.farma_x0),
        "duration": repr(config.farma_duration),
    }
    path = Path(path)
    with open(path, "w") as fh:
        cp.write(fh)
    return path


def load_config(path) -> ScenarioConfig:
    """Parse an INI file written by save_config (or hand-edited)."""
    cp = configparser.ConfigParser()
    read = cp.read(Path(path))
    if not read:
        raise FileNotFoundError(path)
    sc = cp["scenario"]
    kind = sc["mpc"]
    kwargs = dict(
        name=sc["name"],
        plant=sc["plant"],
        mpc_kind=kind,
        ts=sc.getfloat("ts"),
        substeps=sc.getint("substeps"),
        u_bound=sc.getfloat("u_bound"),
        reference=_parse_seq(sc["reference"]),
        state_reference=_parse_seq(sc["state_reference"]),
    )
    if kind == "linear":
        lm = cp["linear_mpc"]
        kwargs.update(
            horizon=lm.getint("horizon"),
            state_weight=lm.getfloat("state_weight"),
            terminal_weight=lm.getfloat("terminal_weight"),
            input_weight=lm.getfloat("input_weight"),
            discretization=lm.get("discretization", "exact"),
        )
    else:
        nm = cp["nonlinear_mpc"]
        kwargs.update(
            horizon=nm.getint("horizon"),
            state_weights=_parse_seq(nm["state_weights"]),
            input_weight=nm.getfloat("input_weight"),
            sqp_max_iter=nm.getint("sqp_max_iter", fallback=3000),
            sqp_step_tol=nm.getfloat("sqp_step_tol", fallback=1e-6),
            sqp_constraint_tol=nm.getfloat("sqp_constraint_tol", fallback=1e-6),
        )
    if cp.has_section("pendulum"):
        pd = cp["pendulum"]
        kwargs["pendulum"] = CartPendulumParams(
            M=pd.getfloat("cart_mass"),
            m=pd.getfloat("pendulum_mass"),
            ell=pd.getfloat("length"),
            g=pd.getfloat("gravity"),
        )
    runs = []
    for section in cp.sections():
        if not section.startswith("run."):
            continue
        rs = cp[section]
        runs.append(RunSpec(
            name=section[len("run."):],
            x0=_parse_seq(rs["x0"]),
            duration=rs.getfloat("duration"),
            seed_kind=rs.get("seed_kind", "none"),
            seed_amplitude=rs.getfloat("seed_amplitude", fallback=0.0),
            seed_frequency=rs.getfloat("seed_frequency", fallback=0.0),
            seed_steps=rs.getint("seed_steps", fallback=0),
        ))
    controllers = []
    index = 1
    while cp.has_section(f"controller.{index}"):
        cs = cp[f"controller.{index}"]
        lo, hi = _parse_seq(cs["slice"])
        controllers.append(ControllerSpec(
            window=cs.getint("window"),
            ridge=cs.getfloat("ridge"),
            source=cs["source"],
            slice_start=lo,
            slice_end=hi,
            performance=cs["performance"],
            constrained=cs.getboolean("constrained", fallback=True),
            startup=cs.get("startup", "gate"),
        ))
        index += 1
    fz = cp["fuzzy"]
    fa = cp["farma"]
    return ScenarioConfig(
        runs=tuple(runs),
        controllers=tuple(controllers),
        fuzzy=FuzzySpec(decision=fz["decision"], lower=fz.getfloat("lower"),
                        upper=fz.getfloat("upper")),
        farma_x0=_parse_seq(fa["x0"]),
        farma_duration=fa.getfloat("duration"),
        **kwargs,
    )
