"""Numerical laboratory for the mass-conserving pseudo-parabolic p-Laplacian equation."""
from .grid import Grid, Params, ParameterError
from .solver import SolverConfig, Trajectory, run
from .wells import OptimizerSettings, WellConstants, compute_wells

__all__ = [
    "Grid", "Params", "ParameterError", "SolverConfig", "Trajectory", "run",
    "OptimizerSettings", "WellConstants", "compute_wells",
]
