"""Differentiable solve of a user model, with attribute-style tangent I/O.

:class:`DiffEngine` lowers the user model through bridges, compiles it to a
QP or conic standard form, solves it with the matching internal solver and
differentiates the solution map in forward or reverse mode.

Tangent conventions:

* Objective tangents/gradients are quadratic functions in the same triplet
  convention as the objective (``(i, j, v)`` sets ``dQ[i, j] = dQ[j, i] = v``).
* Constraint tangents/gradients mirror the constraint function. For scalar
  sets (``EqualTo``, ``LessThan``, ``GreaterThan``) the constant term refers
  to the set's right-hand side: a tangent ``a'x + k`` on ``f(x) >= r``
  perturbs the constraint to ``f(x) + t a'x >= r + t k``, and the gradient
  constant is ``dl/dr``. For vector sets the constant is the function's own
  constant.
* Forward tangents and reverse gradients are adjoint under
  :func:`solmap.functions.inner_product`.

Example::

    engine = DiffEngine(model)
    engine.optimize()
    engine.set_input_tangent(ReverseVariablePrimal("x"), 1.0)
    engine.reverse_differentiate()
    grad = engine.get_output_tangent(ReverseConstraintFunction("cons"))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bridges
from .conic_diff import (
    ConicSolution,
    forward_differentiate_conic,
    prepare,
    reverse_differentiate_conic,
)
from .functions import (
    ScalarAffineFunction,
    ScalarQuadraticFunction,
    VectorAffineFunction,
    as_vector,
)
from .model import (
    ModelError,
    ProblemClass,
    ProblemModel,
    classify_problem,
    compile_conic_form,
    compile_qp_form,
)
from .qp_diff import (
    QPSolution,
    QPTangentIn,
    factor_kkt,
    forward_differentiate_qp,
    reverse_differentiate_qp,
)
from .solvers import SolverError, SolverSettings, SolveStatus, Status, solve_conic, solve_qp


class DiffStateError(RuntimeError):
    """Differentiation requested in an invalid engine state."""


# ---------------------------------------------------------------------------
# attributes


@dataclass(frozen=True)
class ForwardObjectiveFunction:
    pass


@dataclass(frozen=True)
class ForwardConstraintFunction:
    id: str


@dataclass(frozen=True)
class ReverseVariablePrimal:
    var: int | str


@dataclass(frozen=True)
class ForwardVariablePrimal:
    var: int | str


@dataclass(frozen=True)
class ReverseObjectiveFunction:
    pass


@dataclass(frozen=True)
class ReverseConstraintFunction:
    id: str


# ---------------------------------------------------------------------------


def _flip_rhs(fn: VectorAffineFunction) -> VectorAffineFunction:
    return VectorAffineFunction(tuple(ScalarAffineFunction(r.terms, -r.constant) for r in fn.rows))


def _quadratic_from_gradient(gQ: np.ndarray, gc: np.ndarray) -> ScalarQuadraticFunction:
    n = len(gc)
    quad = tuple((i, j, gQ[i, i] if i == j else gQ[i, j] + gQ[j, i])
                 for i in range(n) for j in range(i, n))
    return ScalarQuadraticFunction(quad, ScalarAffineFunction.from_dense(gc))


class DiffEngine:
    """Solve a :class:`ProblemModel` and differentiate its solution map.

    ``solver`` is ``"auto"`` (class picked by :func:`classify_problem`),
    ``"ipm"`` (force the QP path) or ``"admm"`` (force the conic path; the
    objective must then be affine).
    """

    def __init__(self, model: ProblemModel, solver: str = "auto",
                 settings: SolverSettings | None = None):
        if solver not in ("auto", "ipm", "admm"):
            raise ValueError(f"unknown solver {solver!r}")
        self.model = model
        self.settings = settings or SolverSettings()
        cls = classify_problem(model)
        if solver == "ipm":
            if cls is ProblemClass.CONIC:
                raise ModelError("model has conic sets; the QP path cannot handle it")
            cls = ProblemClass.QP
        elif solver == "admm":
            cls = ProblemClass.CONIC
        self.problem_class = cls
        if cls is ProblemClass.QP:
            self.form = compile_qp_form(model)
        else:
            self.form = compile_conic_form(model)
        self._lowered = {lc.id: lc for lc in self.form.lowered}
        self.solution = None
        self.status: SolveStatus | None = None
        self._diff_cache = None
        self.reset_tangents()

    # -- solving -------------------------------------------------------------

    def optimize(self) -> SolveStatus:
        self._diff_cache = None
        self.reset_tangents()
        if self.problem_class is ProblemClass.QP:
            self.solution, self.status = solve_qp(self.form, self.settings)
        else:
            self.solution, self.status = solve_conic(self.form, self.settings)
        return self.status

    def load_solution(self, primal, duals: dict | None = None) -> None:
        """Use an externally computed solution instead of calling :meth:`optimize`.

        ``duals`` maps constraint ids to user-model duals (the convention of
        :meth:`dual`); missing ids are taken as zero.
        """
        x = np.asarray(primal, dtype=float)
        if x.shape != (self.model.n_vars,):
            raise ValueError(f"expected {self.model.n_vars} primal values")
        duals = duals or {}
        unknown = set(duals) - set(self._lowered)
        if unknown:
            raise ModelError(f"unknown constraint ids {sorted(unknown)}")
        target = {}
        for cid, lc in self._lowered.items():
            y = np.atleast_1d(np.asarray(duals.get(cid, np.zeros(lc.set.dim)), dtype=float))
            if lc.bridge is not None:
                y = np.linalg.solve(lc.bridge.adjoint, y)
            target[cid] = y
        f = self.form
        if self.problem_class is ProblemClass.QP:
            lam, mu = np.zeros(f.p), np.zeros(f.m)
            for cid, (block, sl) in f.row_map.items():
                if block == "eq":
                    mu[sl] = -target[cid]
                else:
                    lam[sl] = target[cid]
            self.solution = QPSolution.from_arrays(f, x, lam, mu)
            res = {"kkt": self.solution.kkt_residual}
        else:
            y = np.zeros(f.m)
            for cid, sl in f.row_map.items():
                y[sl] = target[cid]
            self.solution = ConicSolution.from_arrays(f, x, y)
            res = dict(self.solution.residuals)
        self.status = SolveStatus(Status.OPTIMAL, 0, res)
        self._diff_cache = None
        self.reset_tangents()

    @property
    def solved(self) -> bool:
        return self.status is not None and self.status.optimal

    def _require_solved(self):
        if self.status is None:
            raise DiffStateError("call optimize() first")
        if not self.status.optimal:
            raise SolverError(self.status)

    @property
    def primal(self) -> np.ndarray:
        self._require_solved()
        return self.solution.x.copy()

    def value(self, var) -> float:
        return float(self.primal[self.model.variable(var)])

    def objective_value(self) -> float:
        return self.model.objective.evaluate(self.primal)

    def dual(self, cid: str):
        """Dual of a user constraint, with ``grad objective = sum_i J_i' y_i``."""
        self._require_solved()
        lc = self._lowered[cid]
        y = self._target_dual(cid)
        if lc.bridge is not None:
            y = lc.bridge.adjoint @ y
        return float(y[0]) if self.model.constraint(cid).set.is_scalar else y

    def _target_dual(self, cid: str) -> np.ndarray:
        f, sol = self.form, self.solution
        if self.problem_class is ProblemClass.QP:
            block, sl = f.row_map[cid]
            return -sol.mu[sl] if block == "eq" else sol.lam[sl].copy()
        return sol.y[f.row_map[cid]].copy()

    # -- tangent state -------------------------------------------------------

    def reset_tangents(self) -> None:
        self._fwd_objective: ScalarQuadraticFunction | None = None
        self._fwd_constraints: dict[str, VectorAffineFunction] = {}
        self._rev_seeds: dict[int, float] = {}
        self._fwd_out: np.ndarray | None = None
        self._rev_objective: ScalarQuadraticFunction | None = None
        self._rev_constraints: dict | None = None
        self.approximate = False

    def set_input_tangent(self, attr, value) -> None:
        if isinstance(attr, ForwardObjectiveFunction):
            if isinstance(value, (int, float)):
                value = ScalarAffineFunction((), value)
            if isinstance(value, ScalarAffineFunction):
                value = ScalarQuadraticFunction((), value)
            if not isinstance(value, ScalarQuadraticFunction):
                raise TypeError("objective tangent must be an affine or quadratic function")
            bad = [v for v in value.variables() if v >= self.model.n_vars]
            if bad:
                raise ModelError(f"objective tangent references unknown variables {bad}")
            self._fwd_objective = value
        elif isinstance(attr, ForwardConstraintFunction):
            con = self._constraint(attr.id)
            if isinstance(value, (int, float)):
                value = ScalarAffineFunction((), value)
            fn = as_vector(value)
            if fn.dim != con.set.dim:
                raise ValueError(f"tangent for {attr.id!r} has {fn.dim} rows, expected {con.set.dim}")
            bad = [v for v in fn.variables() if v >= self.model.n_vars]
            if bad:
                raise ModelError(f"tangent references unknown variables {bad}")
            self._fwd_constraints[attr.id] = fn
        elif isinstance(attr, ReverseVariablePrimal):
            self._rev_seeds[self.model.variable(attr.var)] = float(value)
        else:
            raise TypeError(f"{attr!r} is not an input attribute")

    def get_input_tangent(self, attr):
        if isinstance(attr, ForwardObjectiveFunction):
            return self._fwd_objective or ScalarQuadraticFunction()
        if isinstance(attr, ForwardConstraintFunction):
            con = self._constraint(attr.id)
            fn = self._fwd_constraints.get(attr.id)
            if fn is None:
                fn = VectorAffineFunction(tuple(ScalarAffineFunction() for _ in range(con.set.dim)))
            return fn.rows[0] if isinstance(con.function, ScalarAffineFunction) else fn
        if isinstance(attr, ReverseVariablePrimal):
            return self._rev_seeds.get(self.model.variable(attr.var), 0.0)
        raise TypeError(f"{attr!r} is not an input attribute")

    def _constraint(self, cid):
        try:
            return self.model.constraint(cid)
        except KeyError:
            raise ModelError(f"unknown constraint id {cid!r}") from None

    def get_output_tangent(self, attr):
        if isinstance(attr, ForwardVariablePrimal):
            if self._fwd_out is None:
                raise DiffStateError("call forward_differentiate() first")
            return float(self._fwd_out[self.model.variable(attr.var)])
        if isinstance(attr, ReverseObjectiveFunction):
            if self._rev_objective is None:
                raise DiffStateError("call reverse_differentiate() first")
            return self._rev_objective
        if isinstance(attr, ReverseConstraintFunction):
            if self._rev_constraints is None:
                raise DiffStateError("call reverse_differentiate() first")
            self._constraint(attr.id)
            return self._rev_constraints[attr.id]
        raise TypeError(f"{attr!r} is not an output attribute")

    set = set_input_tangent
    get = get_output_tangent

    # -- differentiation -----------------------------------------------------

    def _cache(self):
        self._require_solved()
        if self._diff_cache is None:
            if self.problem_class is ProblemClass.QP:
                self._diff_cache = factor_kkt(self.form, self.solution)
            else:
                self._diff_cache = prepare(self.form, self.solution)
        return self._diff_cache

    def _target_tangent(self, cid: str, fn: VectorAffineFunction):
        """User constraint tangent -> (L, k) of the lowered constraint function."""
        lc = self._lowered[cid]
        if lc.source_set.is_scalar:
            fn = _flip_rhs(fn)
        if lc.bridge is not None:
            fn = as_vector(bridges.map_forward_tangent(lc.bridge, fn))
        return fn.dense(self.model.n_vars)

    def _user_gradient(self, cid: str, L: np.ndarray, k: np.ndarray):
        lc = self._lowered[cid]
        fn = VectorAffineFunction.from_dense(L, k)
        if lc.bridge is not None:
            fn = as_vector(bridges.map_reverse_tangent(lc.bridge, fn))
        if lc.source_set.is_scalar:
            fn = _flip_rhs(fn)
        if isinstance(self.model.constraint(cid).function, ScalarAffineFunction):
            return fn.rows[0]
        return fn

    def forward_differentiate(self) -> None:
        cache = self._cache()
        n = self.model.n_vars
        obj = self._fwd_objective or ScalarQuadraticFunction()
        f = self.form
        if self.problem_class is ProblemClass.QP:
            t = QPTangentIn.zeros(f)
            t.dQ[:] = obj.q_matrix(n)
            t.dc[:] = obj.affine.dense(n)
            for cid, fn in self._fwd_constraints.items():
                L, k = self._target_tangent(cid, fn)
                block, sl = f.row_map[cid]
                if block == "eq":
                    t.dA[sl] = L
                    t.db[sl] = -k
                else:
                    t.dG[sl] = -L
                    t.dh[sl] = k
            out = forward_differentiate_qp(f, self.solution, t, cache)
            dx = out.dx
        else:
            if not obj.is_affine():
                raise ModelError("conic path accepts affine objective tangents only")
            dA, db = np.zeros_like(f.A), np.zeros_like(f.b)
            for cid, fn in self._fwd_constraints.items():
                L, k = self._target_tangent(cid, fn)
                sl = f.row_map[cid]
                dA[sl] = -L
                db[sl] = k
            out = forward_differentiate_conic(f, self.solution, dA, db, obj.affine.dense(n),
                                              state=cache)
            dx = out.dx
        self._fwd_out = dx
        self.approximate = self.approximate or out.approximate

    def reverse_differentiate(self) -> None:
        cache = self._cache()
        n = self.model.n_vars
        seed = np.zeros(n)
        for v, val in self._rev_seeds.items():
            seed[v] = val
        f = self.form
        grads = {}
        if self.problem_class is ProblemClass.QP:
            r = reverse_differentiate_qp(f, self.solution, seed, cache)
            self._rev_objective = _quadratic_from_gradient(r.gQ, r.gc)
            for cid, (block, sl) in f.row_map.items():
                if block == "eq":
                    L, k = r.gA[sl], -r.gb[sl]
                else:
                    L, k = -r.gG[sl], r.gh[sl]
                grads[cid] = self._user_gradient(cid, L, k)
        else:
            r = reverse_differentiate_conic(f, self.solution, seed, state=cache)
            self._rev_objective = ScalarQuadraticFunction((), ScalarAffineFunction.from_dense(r.gc))
            for cid, sl in f.row_map.items():
                grads[cid] = self._user_gradient(cid, -r.gA[sl], r.gb[sl])
        self._rev_constraints = grads
        self.approximate = self.approximate or r.approximate
