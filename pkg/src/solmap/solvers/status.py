from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_ERROR = "NumericalError"


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-9
    max_iter: int = 10_000
    verbose: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolveStatus:
    tag: Status
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    polished: bool = False

    @property
    def optimal(self) -> bool:
        return self.tag is Status.OPTIMAL

    def __str__(self):
        return self.tag.value


class SolverError(RuntimeError):
    """Raised when a solution is required but the solve did not succeed."""

    def __init__(self, status: SolveStatus):
        super().__init__(f"solver finished with status {status.tag.value}")
        self.status = status
