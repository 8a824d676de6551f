"""Exclusion processes with lattice-spreading insertions.

Simulation of the right-shift and centered-spread processes, their
hydrodynamic equations, the coupling between them, and the ensemble
measurements that compare the two.
"""

__version__ = "0.1.0"

from .coupling import CoupledResult, CoupledState, build_auxiliary, simulate_coupled
from .dynamics import SimParams, TrajectoryRecord, WindowPlan, plan_window, simulate_epcs, simulate_eprs
from .kernels import JumpKernel, RateField, TimeModulation, b_from_h, sigma_sq
from .lattice import ExclusionConfig, SpreadConfig
from .measure import EnsembleStats, TestFunction, dynkin_replay, hydro_error
from .pde import GridFunction, GridSpec, solve_convdiff, solve_epcs_pde, solve_eprs_pde, transform_solution

__all__ = [
    "CoupledResult", "CoupledState", "build_auxiliary", "simulate_coupled",
    "SimParams", "TrajectoryRecord", "WindowPlan", "plan_window", "simulate_epcs", "simulate_eprs",
    "JumpKernel", "RateField", "TimeModulation", "b_from_h", "sigma_sq",
    "ExclusionConfig", "SpreadConfig",
    "EnsembleStats", "TestFunction", "dynkin_replay", "hydro_error",
    "GridFunction", "GridSpec", "solve_convdiff", "solve_epcs_pde", "solve_eprs_pde",
    "transform_solution",
]
