"""JSON problem and tangent files.

Problem file::

    {"variables": ["x", "y"],
     "objective": {"quadratic": [[i, j, v], ...], "linear": [[i, v], ...], "constant": v},
     "constraints": [{"id": "c1", "rows": [[row, var, coef], ...],
                      "constants": [k, ...], "set": {"type": "GreaterThan", "value": 3}}]}

The objective is ``1/2 x'Qx + c'x + constant`` with ``Q[i, j] = Q[j, i] = v``
for each upper-triangle triplet. Variables may be referenced by index or name.

Tangent files reuse the same shapes: forward tangents carry ``objective``
and/or ``constraints`` (without ``set``), reverse seeds are
``{"seeds": [[var, value], ...]}``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .functions import (
    ScalarAffineFunction,
    ScalarQuadraticFunction,
    VectorAffineFunction,
    as_vector,
    set_to_dict,
)
from .model import ModelError, ProblemModel, build_problem, function_from_dict, objective_from_dict


class FileFormatError(ValueError):
    """A problem or tangent file does not parse."""


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise FileFormatError(f"{path}: expected a JSON object")
    return data


def write_json(path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


# -- functions ----------------------------------------------------------------


def affine_to_dict(f: ScalarAffineFunction) -> dict:
    return {"linear": [[v, c] for v, c in f.terms], "constant": f.constant}


def vector_to_dict(f: VectorAffineFunction) -> dict:
    rows = [[r, v, c] for r, row in enumerate(f.rows) for v, c in row.terms]
    return {"rows": rows, "constants": [row.constant for row in f.rows]}


def quadratic_to_dict(f: ScalarQuadraticFunction) -> dict:
    return {"quadratic": [[i, j, v] for i, j, v in f.quadratic_terms], **affine_to_dict(f.affine)}


def function_to_dict(f) -> dict:
    if isinstance(f, ScalarQuadraticFunction):
        return quadratic_to_dict(f)
    if isinstance(f, ScalarAffineFunction):
        return affine_to_dict(f)
    return vector_to_dict(f)


# -- problems -----------------------------------------------------------------


def problem_to_dict(model: ProblemModel) -> dict:
    constraints = []
    for con in model.constraints:
        d = {"id": con.id, **vector_to_dict(as_vector(con.function)), "set": set_to_dict(con.set)}
        constraints.append(d)
    return {
        "variables": list(model.var_names),
        "objective": quadratic_to_dict(model.objective),
        "constraints": constraints,
    }


def problem_from_dict(data: dict) -> ProblemModel:
    try:
        return build_problem(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise FileFormatError(str(exc)) from exc
        raise FileFormatError(f"malformed problem: {exc!r}") from exc


def read_problem(path) -> ProblemModel:
    return problem_from_dict(read_json(path))


def write_problem(path, model: ProblemModel) -> None:
    write_json(path, problem_to_dict(model))


# -- tangents -----------------------------------------------------------------


def forward_tangent_from_dict(data: dict, model: ProblemModel):
    """``(objective tangent or None, {constraint id: tangent function})``."""
    try:
        obj = None
        if "objective" in data:
            obj = objective_from_dict(data["objective"], model.variable)
        cons = {}
        for cd in data.get("constraints", []):
            con = model.constraint(cd["id"])
            scalar = isinstance(con.function, ScalarAffineFunction)
            cons[con.id] = function_from_dict(cd, con.set.dim, scalar, model.variable)
        return obj, cons
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed tangent: {exc!r}") from exc


def reverse_seeds_from_dict(data: dict, model: ProblemModel) -> dict[int, float]:
    try:
        return {model.variable(v): float(val) for v, val in data.get("seeds", [])}
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed seeds: {exc!r}") from exc
