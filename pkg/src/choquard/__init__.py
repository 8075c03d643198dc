"""Radial ground states of the Choquard equation -Delta u + eps u = (I_alpha * F(u)) F'(u) at large eps."""

from .problem import (InadmissibleError, PowerTerm, ProblemParams, HypothesisReport, exponent_bounds,
                      load_config, nonlinearity_eval, validate_hypotheses)
from .radial import RadialField, RadialGrid, build_grid
from .riesz import RieszKernel, build_kernel
from .solver import GroundState, SolverConfig, make_workspace, solve_ground_state
from .asymptotics import fit_rate, predict_rates, scaling_schedule
from .harness import SweepConfig, default_report, report, run_sweep

__all__ = [
    "InadmissibleError", "PowerTerm", "ProblemParams", "HypothesisReport", "exponent_bounds",
    "load_config", "nonlinearity_eval", "validate_hypotheses", "RadialField", "RadialGrid",
    "build_grid", "RieszKernel", "build_kernel", "GroundState", "SolverConfig", "make_workspace",
    "solve_ground_state", "fit_rate", "predict_rates", "scaling_schedule", "SweepConfig", "report",
    "run_sweep", "default_report",
]
