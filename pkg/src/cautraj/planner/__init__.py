"""Potential-field reference generation and linear time-varying MPC."""
from .mpc import (MODES, MpcConfig, PlannedTrajectory, StepResult, mpc_cost, plan_reference,
                  plan_trajectory, prediction_matrices, resolve_weights, solve_step)
from .potential import ATTRACTIVE_GAIN, attractive_potential, repulsive_potential, total_potential
from .qp import QPResult, solve_qp
from .reference import lateral_grid, spline_reference, valley_search
from .scenario import SV_ROLES, Scenario, SvTrack

__all__ = [
    "ATTRACTIVE_GAIN", "MODES", "MpcConfig", "PlannedTrajectory", "QPResult", "SV_ROLES",
    "Scenario", "StepResult", "SvTrack", "attractive_potential", "lateral_grid", "mpc_cost",
    "plan_reference", "plan_trajectory", "prediction_matrices", "repulsive_potential",
    "resolve_weights", "solve_qp", "solve_step", "spline_reference", "total_potential",
    "valley_search",
]
