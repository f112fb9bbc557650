"""Problem representation and compilation to matrix standard forms.

A :class:`ProblemModel` is a list of function-in-set constraints plus a
quadratic objective (always minimized). It compiles to one of

* :class:`QPForm`: ``min 1/2 x'Qx + c'x  s.t.  Gx <= h, Ax = b``
* :class:`ConicForm`: ``min c'x  s.t.  Ax + s = b, s in K``

after scalar and nonpositive sets are lowered by :mod:`solmap.bridges`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import bridges
from .functions import (
    ConeSet,
    Nonnegative,
    PSDTriangle,
    ScalarAffineFunction,
    ScalarQuadraticFunction,
    SecondOrder,
    VectorAffineFunction,
    Zero,
    set_from_dict,
)


class ModelError(ValueError):
    """Malformed or unsupported model."""


class ProblemClass(enum.Enum):
    QP = "QP"
    CONIC = "Conic"


@dataclass(frozen=True)
class Constraint:
    id: str
    function: ScalarAffineFunction | VectorAffineFunction
    set: ConeSet


@dataclass(frozen=True)
class ProblemModel:
    n_vars: int
    objective: ScalarQuadraticFunction = field(default_factory=ScalarQuadraticFunction)
    constraints: tuple[Constraint, ...] = ()
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        names = tuple(self.var_names) or tuple(f"x{i}" for i in range(self.n_vars))
        if len(names) != self.n_vars:
            raise ModelError(f"{len(names)} variable names for {self.n_vars} variables")
        object.__setattr__(self, "var_names", names)
        _validate(self)

    def constraint(self, cid: str) -> Constraint:
        for c in self.constraints:
            if c.id == cid:
                return c
        raise KeyError(cid)

    @property
    def constraint_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.constraints)

    def variable(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < self.n_vars:
                raise ModelError(f"variable index {name_or_index} out of range")
            return int(name_or_index)
        try:
            return self.var_names.index(name_or_index)
        except ValueError:
            raise ModelError(f"unknown variable {name_or_index!r}") from None


def _validate(model: ProblemModel) -> None:
    seen = set()
    for v in model.objective.variables():
        if v >= model.n_vars:
            raise ModelError(f"objective references variable {v} >= n_vars={model.n_vars}")
    for c in model.constraints:
        if c.id in seen:
            raise ModelError(f"duplicate constraint id {c.id!r}")
        seen.add(c.id)
        if not isinstance(c.set, ConeSet):
            raise ModelError(f"constraint {c.id!r}: {c.set!r} is not a set")
        if isinstance(c.function, ScalarAffineFunction):
            dim = 1
        elif isinstance(c.function, VectorAffineFunction):
            dim = c.function.dim
            if c.set.is_scalar:
                raise ModelError(f"constraint {c.id!r}: scalar set needs a scalar function")
        else:
            raise ModelError(f"constraint {c.id!r}: unsupported function {type(c.function).__name__}")
        if dim != c.set.dim:
            raise ModelError(f"constraint {c.id!r}: function has {dim} rows, set has dim {c.set.dim}")
        for v in c.function.variables():
            if v >= model.n_vars:
                raise ModelError(f"constraint {c.id!r} references variable {v} >= n_vars={model.n_vars}")


class ModelBuilder:
    """Incremental construction of a :class:`ProblemModel`."""

    def __init__(self):
        self._names: list[str] = []
        self._constraints: list[Constraint] = []
        self._objective = ScalarQuadraticFunction()

    def add_variable(self, name: str | None = None) -> int:
        self._names.append(name if name is not None else f"x{len(self._names)}")
        return len(self._names) - 1

    def add_variables(self, count: int, prefix: str = "x") -> list[int]:
        return [self.add_variable(f"{prefix}[{k}]") for k in range(count)]

    def add_constraint(self, cid: str, function, s: ConeSet) -> str:
        self._constraints.append(Constraint(cid, function, s))
        return cid

    def set_objective(self, objective) -> None:
        if isinstance(objective, ScalarAffineFunction):
            objective = ScalarQuadraticFunction((), objective)
        self._objective = objective

    def build(self) -> ProblemModel:
        return ProblemModel(len(self._names), self._objective, tuple(self._constraints),
                            tuple(self._names))


# ---------------------------------------------------------------------------
# declarative construction


def _affine_from_rows(rows, constants, n_rows: int) -> list[ScalarAffineFunction]:
    terms: list[list] = [[] for _ in range(n_rows)]
    for row, var, coef in rows:
        if not 0 <= int(row) < n_rows:
            raise ModelError(f"row index {row} out of range")
        terms[int(row)].append((var, coef))
    constants = list(constants) if constants is not None else [0.0] * n_rows
    if len(constants) != n_rows:
        raise ModelError(f"expected {n_rows} constants, got {len(constants)}")
    return [ScalarAffineFunction(tuple(t), k) for t, k in zip(terms, constants)]


def objective_from_dict(d: Mapping, resolve=lambda v: v) -> ScalarQuadraticFunction:
    quad = tuple((resolve(i), resolve(j), v) for i, j, v in d.get("quadratic", ()))
    lin = tuple((resolve(i), v) for i, v in d.get("linear", ()))
    return ScalarQuadraticFunction(quad, ScalarAffineFunction(lin, d.get("constant", 0.0)))


def function_from_dict(d: Mapping, dim: int, scalar: bool, resolve=lambda v: v):
    rows = [(r, resolve(v), c) for r, v, c in d.get("rows", ())]
    fns = _affine_from_rows(rows, d.get("constants"), dim)
    return fns[0] if scalar else VectorAffineFunction(tuple(fns))


def build_problem(data: Mapping) -> ProblemModel:
    """Model from a declarative description.

    ``data`` has keys ``variables`` (list of names, or a count),
    ``objective`` (``quadratic`` ``[[i, j, v], ...]``, ``linear``
    ``[[i, v], ...]``, ``constant``), ``constraints`` (each with ``id``,
    ``rows`` ``[[row, var, coef], ...]``, ``constants`` and ``set``) and
    an optional ``sense`` which must be ``"min"``.
    """
    if data.get("sense", "min") != "min":
        raise ModelError("only minimization is supported")
    variables = data.get("variables", [])
    names = [f"x{i}" for i in range(variables)] if isinstance(variables, int) else list(variables)
    if len(set(names)) != len(names):
        raise ModelError("duplicate variable names")

    def resolve(v):
        if isinstance(v, str):
            try:
                return names.index(v)
            except ValueError:
                raise ModelError(f"unknown variable {v!r}") from None
        if not 0 <= int(v) < len(names):
            raise ModelError(f"variable index {v} out of range")
        return int(v)

    objective = objective_from_dict(data.get("objective", {}), resolve)
    constraints = []
    for k, cd in enumerate(data.get("constraints", [])):
        s = set_from_dict(cd["set"])
        fn = function_from_dict(cd, s.dim, s.is_scalar, resolve)
        constraints.append(Constraint(str(cd.get("id", f"c{k}")), fn, s))
    return ProblemModel(len(names), objective, tuple(constraints), tuple(names))


# ---------------------------------------------------------------------------
# classification


def classify_problem(model: ProblemModel) -> ProblemClass:
    """QP unless second-order or PSD sets appear.

    Purely linear programs are treated as QPs; a quadratic objective together
    with a conic set is rejected.
    """
    conic = any(isinstance(c.set, (SecondOrder, PSDTriangle)) for c in model.constraints)
    if conic and not model.objective.is_affine():
        raise ModelError("quadratic objective with second-order/PSD constraints is not supported")
    return ProblemClass.CONIC if conic else ProblemClass.QP


# ---------------------------------------------------------------------------
# standard forms


@dataclass(frozen=True, eq=False)
class QPForm:
    Q: np.ndarray
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    row_map: dict  # constraint id -> ("ineq" | "eq", slice)
    col_map: tuple[int, ...]
    lowered: tuple = ()
    objective_constant: float = 0.0

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def p(self) -> int:
        return self.G.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def constraint_at(self, block: str, row: int) -> str:
        for cid, (blk, sl) in self.row_map.items():
            if blk == block and sl.start <= row < sl.stop:
                return cid
        raise KeyError((block, row))


@dataclass(frozen=True, eq=False)
class ConicForm:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    cones: tuple[ConeSet, ...]
    row_map: dict  # constraint id -> slice
    col_map: tuple[int, ...]
    lowered: tuple = ()
    objective_constant: float = 0.0

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def constraint_at(self, row: int) -> str:
        for cid, sl in self.row_map.items():
            if sl.start <= row < sl.stop:
                return cid
        raise KeyError(row)


def compile_qp_form(model: ProblemModel) -> QPForm:
    classify_problem(model)
    n = model.n_vars
    Q = model.objective.q_matrix(n)
    c = model.objective.affine.dense(n)
    lowered = bridges.lower_model(model)
    G_rows, h_rows, A_rows, b_rows = [], [], [], []
    row_map = {}
    for lc in lowered:
        L, k = lc.function.dense(n)
        if isinstance(lc.set, Zero):
            row_map[lc.id] = ("eq", slice(len(A_rows), len(A_rows) + len(k)))
            A_rows.extend(L)
            b_rows.extend(-k)
        elif isinstance(lc.set, Nonnegative):
            row_map[lc.id] = ("ineq", slice(len(G_rows), len(G_rows) + len(k)))
            G_rows.extend(-L)
            h_rows.extend(k)
        else:
            raise ModelError(f"constraint {lc.id!r}: {lc.set!r} cannot appear in a QP")
    G = np.array(G_rows, dtype=float).reshape(len(G_rows), n)
    A = np.array(A_rows, dtype=float).reshape(len(A_rows), n)
    return QPForm(Q, c, G, np.array(h_rows, dtype=float), A, np.array(b_rows, dtype=float),
                  row_map, tuple(range(n)), tuple(lowered), model.objective.constant)


_CONE_ORDER = (Zero, Nonnegative, SecondOrder, PSDTriangle)


def compile_conic_form(model: ProblemModel) -> ConicForm:
    if not model.objective.is_affine():
        raise ModelError("conic form needs an affine objective")
    n = model.n_vars
    lowered = bridges.lower_model(model)
    A_rows, b_rows, cones = [], [], []
    row_map = {}
    for kind in _CONE_ORDER:
        group = [lc for lc in lowered if type(lc.set) is kind]
        if not group:
            continue
        merge = kind in (Zero, Nonnegative)
        start_group = len(b_rows)
        for lc in group:
            L, k = lc.function.dense(n)
            row_map[lc.id] = slice(len(b_rows), len(b_rows) + len(k))
            A_rows.extend(-L)
            b_rows.extend(k)
            if not merge:
                cones.append(lc.set)
        if merge:
            cones.append(kind(len(b_rows) - start_group))
    for lc in lowered:
        if lc.id not in row_map:
            raise ModelError(f"constraint {lc.id!r}: unsupported set {lc.set!r}")
    A = np.array(A_rows, dtype=float).reshape(len(A_rows), n)
    return ConicForm(A, np.array(b_rows, dtype=float), model.objective.affine.dense(n),
                     tuple(cones), row_map, tuple(range(n)), tuple(lowered),
                     model.objective.constant)


def lowered_by_id(form) -> dict:
    return {lc.id: lc for lc in form.lowered}


def constraint_ids(form) -> Sequence[str]:
    return tuple(form.row_map)
