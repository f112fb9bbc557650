import dataclasses

import numpy as np
import pytest

from solmap.model import build_problem
from solmap.solvers import SolverSettings, solve_conic, solve_qp

FD_STEP = 1e-6

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def golden_model():
    """min 2x s.t. x >= 3."""
    return build_problem({
        "variables": ["x"],
        "objective": {"linear": [["x", 2.0]]},
        "constraints": [
            {"id": "cons", "rows": [[0, "x", 1.0]], "set": {"type": "GreaterThan", "value": 3.0}},
        ],
    })


def perturbed(form, t, eps):
    """Copy of a compiled form with every matrix moved by ``eps * t``."""
    changes = {name: getattr(form, name) + eps * getattr(t, "d" + name)
               for name in ("Q", "c", "G", "h", "A", "b") if hasattr(t, "d" + name)}
    return dataclasses.replace(form, **changes)


def qp_fd(form, t, eps=FD_STEP, tol=1e-10):
    settings = SolverSettings(tol=tol)
    xp = solve_qp(perturbed(form, t, eps), settings)[0].x
    xm = solve_qp(perturbed(form, t, -eps), settings)[0].x
    return (xp - xm) / (2 * eps)


def conic_fd(form, dA, db, dc, eps=FD_STEP):
    def solve(sign):
        f = dataclasses.replace(form, A=form.A + sign * eps * dA, b=form.b + sign * eps * db,
                                c=form.c + sign * eps * dc)
        sol, status = solve_conic(f)
        assert status.optimal
        return sol.x
    return (solve(1) - solve(-1)) / (2 * eps)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)
