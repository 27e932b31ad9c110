"""Finite-volume simulation and property probes for nonlocal aggregation-diffusion equations."""

from .domain import BoundaryLayout, Grid, build_grid, dual_norm, field_reduce, neumann_poisson
from .evolution import Problem, StepControls, Trajectory, initial_density, run
from .kernels import KernelSpec, build_operator, convolve, direct_convolve
from .laws import DiffusionLaw, critical_exponent
from .steady import solve_stationary

__version__ = "0.1.0"

__all__ = [
    "BoundaryLayout", "Grid", "build_grid", "dual_norm", "field_reduce", "neumann_poisson",
    "Problem", "StepControls", "Trajectory", "initial_density", "run",
    "KernelSpec", "build_operator", "convolve", "direct_convolve",
    "DiffusionLaw", "critical_exponent", "solve_stationary",
]
