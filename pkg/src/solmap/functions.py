"""Affine/quadratic functions of decision variables and the sets they live in.

Variables are plain 0-based integer indices into a model. Quadratic terms use
the matrix-entry convention: a triplet ``(i, j, v)`` with ``i <= j`` sets
``Q[i, j] = Q[j, i] = v`` and the function reads ``1/2 x'Qx + c'x + k``. So
``x_0**2`` is written ``(0, 0, 2.0)`` while ``x_0 * x_1`` is ``(0, 1, 1.0)``.
:meth:`ScalarQuadraticFunction.from_natural` accepts plain polynomial
coefficients instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


# ---------------------------------------------------------------------------
# sets


@dataclass(frozen=True)
class ConeSet:
    """Base class of all constraint sets."""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def is_scalar(self) -> bool:
        return False


@dataclass(frozen=True)
class _VectorCone(ConeSet):
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"{type(self).__name__} needs dim >= 1, got {self.size}")

    @property
    def dim(self) -> int:
        return self.size


class Zero(_VectorCone):
    """``{0}^d``."""


class Nonnegative(_VectorCone):
    """``R_+^d``."""


class Nonpositive(_VectorCone):
    """``R_-^d``."""


class SecondOrder(_VectorCone):
    """``{(t, x) : ||x||_2 <= t}`` of total dimension ``d``."""


@dataclass(frozen=True)
class PSDTriangle(ConeSet):
    """Positive semidefinite matrices of order ``side``.

    Vectorized as the upper triangle, column by column, with off-diagonal
    entries scaled by sqrt(2) so the vector dot product equals the Frobenius
    product of the matrices.
    """

    side: int

    def __post_init__(self):
        if int(self.side) != self.side or self.side < 1:
            raise ValueError(f"PSDTriangle needs side >= 1, got {self.side}")

    @property
    def dim(self) -> int:
        return self.side * (self.side + 1) // 2


@dataclass(frozen=True)
class _ScalarSet(ConeSet):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("set value must be finite")

    @property
    def dim(self) -> int:
        return 1

    @property
    def is_scalar(self) -> bool:
        return True


class EqualTo(_ScalarSet):
    """``{value}``."""


class LessThan(_ScalarSet):
    """``(-inf, value]``."""


class GreaterThan(_ScalarSet):
    """``[value, inf)``."""


SET_TYPES = {
    cls.__name__: cls
    for cls in (Zero, Nonnegative, Nonpositive, SecondOrder, PSDTriangle,
                EqualTo, LessThan, GreaterThan)
}


def set_to_dict(s: ConeSet) -> dict:
    if isinstance(s, _ScalarSet):
        return {"type": type(s).__name__, "value": s.value}
    if isinstance(s, PSDTriangle):
        return {"type": "PSDTriangle", "side": s.side}
    return {"type": type(s).__name__, "dim": s.dim}


def set_from_dict(d: Mapping) -> ConeSet:
    try:
        cls = SET_TYPES[d["type"]]
    except KeyError:
        raise ValueError(f"unknown set type {d.get('type')!r}") from None
    if issubclass(cls, _ScalarSet):
        return cls(float(d["value"]))
    if cls is PSDTriangle:
        if "side" in d:
            return PSDTriangle(int(d["side"]))
        side = (math.isqrt(8 * int(d["dim"]) + 1) - 1) // 2
        if side * (side + 1) // 2 != int(d["dim"]):
            raise ValueError(f"{d['dim']} is not a triangular number")
        return PSDTriangle(side)
    return cls(int(d["dim"]))


# ---------------------------------------------------------------------------
# functions


def _merge_terms(terms: Iterable[tuple[int, float]]) -> tuple[tuple[int, float], ...]:
    acc: dict[int, float] = {}
    for var, coef in terms:
        var = int(var)
        if var < 0:
            raise ValueError(f"negative variable index {var}")
        coef = float(coef)
        if not math.isfinite(coef):
            raise ValueError("coefficients must be finite")
        acc[var] = acc.get(var, 0.0) + coef
    return tuple((v, c) for v, c in sorted(acc.items()) if c != 0.0)


@dataclass(frozen=True)
class ScalarAffineFunction:
    """``sum(coef * x[var]) + constant``; terms are merged and sorted."""

    terms: tuple[tuple[int, float], ...] = ()
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", _merge_terms(self.terms))
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def from_dense(cls, coefs, constant=0.0) -> ScalarAffineFunction:
        coefs = np.asarray(coefs, dtype=float)
        return cls(tuple((i, c) for i, c in enumerate(coefs) if c != 0.0), constant)

    def coefficient(self, var: int) -> float:
        for v, c in self.terms:
            if v == var:
                return c
        return 0.0

    def variables(self) -> set[int]:
        return {v for v, _ in self.terms}

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for v, c in self.terms:
            if v >= n:
                raise IndexError(f"variable {v} out of range for {n} variables")
            out[v] = c
        return out

    def evaluate(self, x) -> float:
        return sum(c * x[v] for v, c in self.terms) + self.constant

    def scaled(self, alpha: float) -> ScalarAffineFunction:
        return ScalarAffineFunction(tuple((v, alpha * c) for v, c in self.terms),
                                    alpha * self.constant)

    def __add__(self, other: ScalarAffineFunction) -> ScalarAffineFunction:
        return ScalarAffineFunction(self.terms + other.terms, self.constant + other.constant)

    def __neg__(self) -> ScalarAffineFunction:
        return self.scaled(-1.0)


@dataclass(frozen=True)
class VectorAffineFunction:
    """Stack of scalar affine rows."""

    rows: tuple[ScalarAffineFunction, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        if not rows:
            raise ValueError("a vector function needs at least one row")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_dense(cls, L, k) -> VectorAffineFunction:
        L = np.atleast_2d(np.asarray(L, dtype=float))
        k = np.asarray(k, dtype=float).reshape(-1)
        return cls(tuple(ScalarAffineFunction.from_dense(L[r], k[r]) for r in range(L.shape[0])))

    @property
    def dim(self) -> int:
        return len(self.rows)

    def variables(self) -> set[int]:
        return set().union(*(r.variables() for r in self.rows))

    def dense(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        L = np.vstack([r.dense(n) for r in self.rows]) if n else np.zeros((self.dim, 0))
        k = np.array([r.constant for r in self.rows])
        return L, k

    def evaluate(self, x) -> np.ndarray:
        return np.array([r.evaluate(x) for r in self.rows])


def as_vector(f) -> VectorAffineFunction:
    if isinstance(f, VectorAffineFunction):
        return f
    return VectorAffineFunction((f,))


def _merge_quadratic(terms) -> tuple[tuple[int, int, float], ...]:
    acc: dict[tuple[int, int], float] = {}
    for i, j, coef in terms:
        i, j = int(i), int(j)
        if i < 0 or j < 0:
            raise ValueError("negative variable index")
        coef = float(coef)
        if not math.isfinite(coef):
            raise ValueError("coefficients must be finite")
        key = (min(i, j), max(i, j))
        acc[key] = acc.get(key, 0.0) + coef
    return tuple((i, j, c) for (i, j), c in sorted(acc.items()) if c != 0.0)


@dataclass(frozen=True)
class ScalarQuadraticFunction:
    """``1/2 x'Qx + affine(x)`` with ``Q`` given by upper-triangle triplets."""

    quadratic_terms: tuple[tuple[int, int, float], ...] = ()
    affine: ScalarAffineFunction = field(default_factory=ScalarAffineFunction)

    def __post_init__(self):
        object.__setattr__(self, "quadratic_terms", _merge_quadratic(self.quadratic_terms))
        if not isinstance(self.affine, ScalarAffineFunction):
            object.__setattr__(self, "affine", ScalarAffineFunction(*self.affine))

    @classmethod
    def from_natural(cls, quadratic: Mapping[tuple[int, int], float] | None = None,
                     linear: Mapping[int, float] | None = None,
                     constant: float = 0.0) -> ScalarQuadraticFunction:
        """Build from polynomial coefficients: ``{(i, j): a}`` means ``a * x_i * x_j``."""
        quad = []
        for (i, j), a in (quadratic or {}).items():
            quad.append((i, j, 2.0 * a if i == j else a))
        return cls(tuple(quad), ScalarAffineFunction(tuple((linear or {}).items()), constant))

    @classmethod
    def from_matrix(cls, Q, c=None, constant=0.0) -> ScalarQuadraticFunction:
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        Qs = 0.5 * (Q + Q.T)
        quad = tuple((i, j, Qs[i, j]) for i in range(n) for j in range(i, n) if Qs[i, j] != 0.0)
        aff = ScalarAffineFunction.from_dense(np.zeros(n) if c is None else c, constant)
        return cls(quad, aff)

    @property
    def constant(self) -> float:
        return self.affine.constant

    def is_affine(self) -> bool:
        return not self.quadratic_terms

    def variables(self) -> set[int]:
        return self.affine.variables() | {i for i, _, _ in self.quadratic_terms} | {
            j for _, j, _ in self.quadratic_terms}

    def quadratic_coefficient(self, i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        for a, b, c in self.quadratic_terms:
            if (a, b) == key:
                return c
        return 0.0

    def coefficient(self, var: int) -> float:
        return self.affine.coefficient(var)

    def q_matrix(self, n: int) -> np.ndarray:
        Q = np.zeros((n, n))
        for i, j, c in self.quadratic_terms:
            if max(i, j) >= n:
                raise IndexError(f"variable {max(i, j)} out of range for {n} variables")
            Q[i, j] = c
            Q[j, i] = c
        return Q

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        Q = self.q_matrix(len(x))
        return 0.5 * x @ Q @ x + self.affine.evaluate(x)


def inner_product(a, b) -> float:
    """Coefficient-wise dot product of two functions of the same kind.

    This is the pairing under which forward tangents and reverse gradients
    are adjoint to each other.
    """
    if isinstance(a, ScalarQuadraticFunction):
        qa = dict(((i, j), c) for i, j, c in a.quadratic_terms)
        total = sum(c * qa.get((i, j), 0.0) for i, j, c in b.quadratic_terms)
        return total + inner_product(a.affine, b.affine)
    if isinstance(a, VectorAffineFunction):
        return sum(inner_product(r, s) for r, s in zip(a.rows, b.rows, strict=True))
    da = dict(a.terms)
    return sum(c * da.get(v, 0.0) for v, c in b.terms) + a.constant * b.constant
