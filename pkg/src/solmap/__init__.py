"""Differentiable convex optimization: solve a QP or conic program and
differentiate its solution with respect to the problem data."""

from .api import (
    DiffEngine,
    DiffStateError,
    ForwardConstraintFunction,
    ForwardObjectiveFunction,
    ForwardVariablePrimal,
    ReverseConstraintFunction,
    ReverseObjectiveFunction,
    ReverseVariablePrimal,
)
from .functions import (
    EqualTo,
    GreaterThan,
    LessThan,
    Nonnegative,
    Nonpositive,
    PSDTriangle,
    ScalarAffineFunction,
    ScalarQuadraticFunction,
    SecondOrder,
    VectorAffineFunction,
    Zero,
    inner_product,
)
from .model import ModelBuilder, ModelError, ProblemClass, ProblemModel, build_problem
from .solvers import SolverError, SolverSettings, SolveStatus, Status

__version__ = "0.1.0"

__all__ = [
    "DiffEngine", "DiffStateError", "ForwardConstraintFunction", "ForwardObjectiveFunction",
    "ForwardVariablePrimal", "ReverseConstraintFunction", "ReverseObjectiveFunction",
    "ReverseVariablePrimal", "EqualTo", "GreaterThan", "LessThan", "Nonnegative", "Nonpositive",
    "PSDTriangle", "ScalarAffineFunction", "ScalarQuadraticFunction", "SecondOrder",
    "VectorAffineFunction", "Zero", "inner_product", "ModelBuilder", "ModelError",
    "ProblemClass", "ProblemModel", "build_problem", "SolverError", "SolverSettings",
    "SolveStatus", "Status",
]
