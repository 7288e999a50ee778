"""MPC-guided synthesis of fuzzy-blended ARMA controllers.

The package covers the full pipeline: simulate linear or nonlinear MPC
in closed loop on a continuous-time plant, harvest the logs, fit ARMA
controllers by constrained least squares, and blend them with a
Takagi-Sugeno fuzzy system into a cheap controller that emulates the
original MPC.
"""

from farma.qp import QpProblem, QpSolution, QpStatus, solve_qp
from farma.plants import (
    CartPendulumParams,
    PlantModel,
    SaturationLimits,
    cart_pendulum_model,
    double_integrator_model,
    rk4_step,
    saturate,
    wrap_pi,
)
from farma.simloop import (
    ClosedLoopAborted,
    ClosedLoopTrajectory,
    constant_reference,
    simulate_closed_loop,
)
from farma.discretize import (
    DiscreteDynamics,
    euler_discretize,
    exact_discretize_double_integrator,
)
from farma.linear_mpc import (
    LinearMpcConfig,
    LinearMpcController,
    PredictionMatrices,
    build_condensed_qp,
    build_prediction_matrices,
    lmpc_step,
)
from farma.nmpc import (
    NmpcConfig,
    NmpcController,
    NmpcSolution,
    QuadraticInputCost,
    QuadraticStateCost,
    SqpNonConvergence,
    SqpSettings,
    eval_nlp,
    nmpc_step,
    pendulum_swing_up_cost,
    sqp_solve,
    tracking_state_cost,
)
from farma.arma import ArmaController, build_regressor
from farma.fuzzy import (
    FarmaController,
    FuzzyRule,
    MembershipFunction,
    blend_outputs,
    ramp_down,
    ramp_up,
    rule_weights,
)
from farma.training import (
    TrainingDataset,
    TrainingMatrices,
    build_training_matrices,
    train_arma,
)
from farma.configs import ScenarioConfig, example1_config, example2_config
from farma.experiments import bench_timing, run_example1, run_example2, run_scenario

__all__ = [
    "QpProblem", "QpSolution", "QpStatus", "solve_qp",
    "CartPendulumParams", "PlantModel", "SaturationLimits",
    "cart_pendulum_model", "double_integrator_model", "rk4_step",
    "saturate", "wrap_pi",
    "ClosedLoopAborted", "ClosedLoopTrajectory", "constant_reference",
    "simulate_closed_loop",
    "DiscreteDynamics", "euler_discretize", "exact_discretize_double_integrator",
    "LinearMpcConfig", "LinearMpcController", "PredictionMatrices",
    "build_condensed_qp", "build_prediction_matrices", "lmpc_step",
    "NmpcConfig", "NmpcController", "NmpcSolution", "QuadraticInputCost",
    "QuadraticStateCost", "SqpNonConvergence", "SqpSettings", "eval_nlp",
    "nmpc_step", "pendulum_swing_up_cost", "sqp_solve", "tracking_state_cost",
    "ArmaController", "build_regressor",
    "FarmaController", "FuzzyRule", "MembershipFunction", "blend_outputs",
    "ramp_down", "ramp_up", "rule_weights",
    "TrainingDataset", "TrainingMatrices", "build_training_matrices", "train_arma",
    "ScenarioConfig", "example1_config", "example2_config",
    "bench_timing", "run_example1", "run_example2", "run_scenario",
]
