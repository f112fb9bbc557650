"""Affine set reformulations and transport of solutions and tangents.

A bridge rewrites ``f(x) in S1`` as ``A f(x) + c in S2``. Forward tangents
of ``f`` map through ``A``; reverse gradients map back through ``A.T``.
Only the invertible, variable-free case (no auxiliary ``u``) is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functions import (
    ConeSet,
    EqualTo,
    GreaterThan,
    LessThan,
    Nonnegative,
    Nonpositive,
    ScalarAffineFunction,
    VectorAffineFunction,
    Zero,
    as_vector,
)


@dataclass(frozen=True, eq=False)
class AffineBridge:
    source_set: ConeSet
    target_set: ConeSet
    A: np.ndarray
    c_shift: np.ndarray
    B: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def adjoint(self) -> np.ndarray:
        return self.A.T


def make_bridge(source_set: ConeSet) -> AffineBridge:
    """Lowering of a set the standard forms do not accept directly.

    ============== ===================== ====== ======
    source         target                A      c
    ============== ===================== ====== ======
    GreaterThan(a) Nonnegative(1)        1      -a
    LessThan(a)    Nonnegative(1)        -1     a
    EqualTo(a)     Zero(1)               1      -a
    Nonpositive(d) Nonnegative(d)        -I     0
    ============== ===================== ====== ======
    """
    if isinstance(source_set, GreaterThan):
        return AffineBridge(source_set, Nonnegative(1), np.eye(1), np.array([-source_set.value]))
    if isinstance(source_set, LessThan):
        return AffineBridge(source_set, Nonnegative(1), -np.eye(1), np.array([source_set.value]))
    if isinstance(source_set, EqualTo):
        return AffineBridge(source_set, Zero(1), np.eye(1), np.array([-source_set.value]))
    if isinstance(source_set, Nonpositive):
        d = source_set.dim
        return AffineBridge(source_set, Nonnegative(d), -np.eye(d), np.zeros(d))
    raise TypeError(f"no bridge for {source_set!r}")


def needs_bridge(s: ConeSet) -> bool:
    return isinstance(s, (GreaterThan, LessThan, EqualTo, Nonpositive))


def _rows(f) -> tuple[ScalarAffineFunction, ...]:
    return as_vector(f).rows


def _combine(M: np.ndarray, rows, shift=None) -> VectorAffineFunction:
    out = []
    for r in range(M.shape[0]):
        acc = ScalarAffineFunction()
        for k, row in enumerate(rows):
            if M[r, k] != 0.0:
                acc = acc + row.scaled(M[r, k])
        if shift is not None:
            acc = acc + ScalarAffineFunction((), shift[r])
        out.append(acc)
    return VectorAffineFunction(tuple(out))


def apply_bridge(bridge: AffineBridge, f) -> VectorAffineFunction:
    """The bridged constraint function ``A f + c``."""
    rows = _rows(f)
    if len(rows) != bridge.A.shape[1]:
        raise ValueError(f"function has {len(rows)} rows, bridge expects {bridge.A.shape[1]}")
    return _combine(bridge.A, rows, bridge.c_shift)


def map_forward_tangent(bridge: AffineBridge, delta_f1):
    """``A @ delta_f1``; coefficients and constants alike."""
    rows = _rows(delta_f1)
    if len(rows) != bridge.A.shape[1]:
        raise ValueError(f"tangent has {len(rows)} rows, bridge expects {bridge.A.shape[1]}")
    out = _combine(bridge.A, rows)
    return out.rows[0] if isinstance(delta_f1, ScalarAffineFunction) and out.dim == 1 else out


def map_reverse_tangent(bridge: AffineBridge, delta_f2):
    """``A.T @ delta_f2``: gradient on the target mapped to the source."""
    rows = _rows(delta_f2)
    if len(rows) != bridge.A.shape[0]:
        raise ValueError(f"gradient has {len(rows)} rows, bridge expects {bridge.A.shape[0]}")
    out = _combine(bridge.adjoint, rows)
    return out.rows[0] if isinstance(delta_f2, ScalarAffineFunction) and out.dim == 1 else out


def unbridge_solution(bridge: AffineBridge, primal, dual):
    """Target-side (function value, dual) back to the source constraint.

    The source function value solves ``A f + c = target``; the dual maps by
    ``A.T`` so the user model's stationarity ``grad obj = sum J_i' y_i``
    keeps holding.
    """
    primal = np.atleast_1d(np.asarray(primal, dtype=float))
    dual = np.atleast_1d(np.asarray(dual, dtype=float))
    src_primal = np.linalg.solve(bridge.A, primal - bridge.c_shift)
    src_dual = bridge.adjoint @ dual
    return src_primal, src_dual


# ---------------------------------------------------------------------------
# whole-model lowering


@dataclass(frozen=True)
class LoweredConstraint:
    id: str
    function: VectorAffineFunction
    set: ConeSet
    bridge: AffineBridge | None
    source_set: ConeSet


def lower_constraint(cid: str, function, s: ConeSet) -> LoweredConstraint:
    if needs_bridge(s):
        bridge = make_bridge(s)
        return LoweredConstraint(cid, apply_bridge(bridge, function), bridge.target_set, bridge, s)
    return LoweredConstraint(cid, as_vector(function), s, None, s)


def lower_model(model) -> list[LoweredConstraint]:
    """Lower every constraint of ``model`` to Zero/Nonnegative/SOC/PSD form."""
    return [lower_constraint(c.id, c.function, c.set) for c in model.constraints]
