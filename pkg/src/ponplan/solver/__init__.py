"""Exact solvers for the planning ILP."""

from ..plan import DeploymentPlan
from .bnb import PartialAssignment, diagnose_infeasibility, lower_bound, solve
from .brute import OracleSizeError, brute_force, configuration_count
from .types import Mode, SolveOptions, SolveResult, SolveStats, Status

__all__ = [
    "DeploymentPlan", "Mode", "OracleSizeError", "PartialAssignment", "SolveOptions",
    "SolveResult", "SolveStats", "Status", "brute_force", "configuration_count",
    "diagnose_infeasibility", "lower_bound", "solve",
]
