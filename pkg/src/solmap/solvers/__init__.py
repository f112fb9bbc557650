"""Desk-scale dense solvers producing high-accuracy primal-dual pairs."""

from .admm import solve_conic
from .ipm import solve_qp
from .status import SolverError, SolverSettings, SolveStatus, Status

__all__ = ["SolverError", "SolverSettings", "SolveStatus", "Status", "solve_conic", "solve_qp"]
