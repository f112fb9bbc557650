"""Euclidean projections onto cones and their derivatives.

All cones here are closed and convex, so every projection Jacobian is
symmetric with spectrum in [0, 1]. At points where the projection is not
differentiable a fixed element of the generalized Jacobian is returned and
``ProjectionResult.degenerate`` is raised:

* Nonnegative: derivative 0 for zero components.
* SecondOrder: on ``||x|| = |t|`` (x nonzero) the boundary-region formula is
  used; at the origin the derivative is 0.
* PSD: divided differences with ``(l_i+ - l_j+)/(l_i - l_j)`` replaced by
  ``1[l_i > 0]`` when the eigenvalues coincide (``1[l_i + l_j > 0]`` for
  eigenvalues equal only up to rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import (
    ConeSet,
    Nonnegative,
    Nonpositive,
    PSDTriangle,
    SecondOrder,
    Zero,
)

KINK_TOL = 1e-9
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Free(ConeSet):
    """The whole space; dual of :class:`Zero`."""

    size: int

    @property
    def dim(self) -> int:
        return self.size


@dataclass
class ProjectionResult:
    value: np.ndarray
    jacobian: np.ndarray
    degenerate: bool = False


def dual_cone(cone: ConeSet) -> ConeSet:
    if isinstance(cone, Zero):
        return Free(cone.dim)
    if isinstance(cone, Free):
        return Zero(cone.dim)
    if isinstance(cone, (Nonnegative, Nonpositive, SecondOrder, PSDTriangle)):
        return cone
    raise TypeError(f"no projection available for {cone!r}")


def _check(cone: ConeSet, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != cone.dim:
        raise ValueError(f"expected vector of length {cone.dim} for {cone!r}, got shape {v.shape}")
    return v


# ---------------------------------------------------------------------------
# PSD helpers


def _triangle_indices(side: int):
    rows, cols = [], []
    for j in range(side):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def vec_to_mat(v, side: int) -> np.ndarray:
    """Scaled upper-triangle vector to symmetric matrix."""
    r, c = _triangle_indices(side)
    vals = np.where(r == c, v, v / SQRT2)
    X = np.zeros((side, side))
    X[r, c] = vals
    X[c, r] = vals
    return X


def mat_to_vec(X) -> np.ndarray:
    """Symmetric matrix to scaled upper-triangle vector."""
    X = np.asarray(X, dtype=float)
    r, c = _triangle_indices(X.shape[0])
    return np.where(r == c, X[r, c], SQRT2 * X[r, c])


def _psd_divided_differences(lam: np.ndarray) -> np.ndarray:
    lp = np.maximum(lam, 0.0)
    diff = lam[:, None] - lam[None, :]
    same = np.abs(diff) <= KINK_TOL * max(1.0, np.abs(lam).max(initial=0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        B = (lp[:, None] - lp[None, :]) / np.where(same, 1.0, diff)
    # coincident eigenvalues: one-sided limit, taken at the pair midpoint so
    # that B stays symmetric for clusters straddling zero
    B = np.where(same, (lam[:, None] + lam[None, :] > 0).astype(float), B)
    return B


def _psd_jacobian(v: np.ndarray, side: int) -> tuple[np.ndarray, bool]:
    X = vec_to_mat(v, side)
    lam, U = np.linalg.eigh(X)
    B = _psd_divided_differences(lam)
    d = side * (side + 1) // 2
    J = np.empty((d, d))
    basis = np.eye(d)
    for k in range(d):
        E = vec_to_mat(basis[k], side)
        dX = U @ (B * (U.T @ E @ U)) @ U.T
        J[:, k] = mat_to_vec(dX)
    J = 0.5 * (J + J.T)
    scale = max(1.0, np.abs(lam).max(initial=0.0))
    return J, bool(np.any(np.abs(lam) <= KINK_TOL * scale))


# ---------------------------------------------------------------------------
# public API


def project(cone: ConeSet, v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``cone``."""
    v = _check(cone, v)
    if isinstance(cone, Zero):
        return np.zeros_like(v)
    if isinstance(cone, Free):
        return v.copy()
    if isinstance(cone, Nonnegative):
        return np.maximum(v, 0.0)
    if isinstance(cone, Nonpositive):
        return np.minimum(v, 0.0)
    if isinstance(cone, SecondOrder):
        t, x = v[0], v[1:]
        r = np.linalg.norm(x)
        if r <= t:
            return v.copy()
        if r <= -t:
            return np.zeros_like(v)
        a = 0.5 * (t + r)
        return np.concatenate(([a], (a / r) * x))
    if isinstance(cone, PSDTriangle):
        lam, U = np.linalg.eigh(vec_to_mat(v, cone.side))
        return mat_to_vec((U * np.maximum(lam, 0.0)) @ U.T)
    raise TypeError(f"no projection available for {cone!r}")


def project_with_jacobian(cone: ConeSet, v) -> ProjectionResult:
    v = _check(cone, v)
    d = cone.dim
    value = project(cone, v)
    if isinstance(cone, Zero):
        return ProjectionResult(value, np.zeros((d, d)))
    if isinstance(cone, Free):
        return ProjectionResult(value, np.eye(d))
    if isinstance(cone, (Nonnegative, Nonpositive)):
        active = v > 0 if isinstance(cone, Nonnegative) else v < 0
        return ProjectionResult(value, np.diag(active.astype(float)),
                                bool(np.any(np.abs(v) <= KINK_TOL)))
    if isinstance(cone, SecondOrder):
        return ProjectionResult(value, *_soc_jacobian(v))
    if isinstance(cone, PSDTriangle):
        return ProjectionResult(value, *_psd_jacobian(v, cone.side))
    raise TypeError(f"no projection available for {cone!r}")


def _soc_jacobian(v: np.ndarray) -> tuple[np.ndarray, bool]:
    d = v.shape[0]
    t, x = v[0], v[1:]
    r = np.linalg.norm(x)
    scale = max(1.0, abs(t), r)
    degenerate = abs(r - abs(t)) <= KINK_TOL * scale
    if r == 0.0:
        J = np.eye(d) if t > 0 else np.zeros((d, d))
        return J, degenerate
    if r < t:
        return np.eye(d), degenerate
    if r < -t:
        return np.zeros((d, d)), degenerate
    xb = x / r
    J = np.empty((d, d))
    J[0, 0] = 1.0
    J[0, 1:] = xb
    J[1:, 0] = xb
    J[1:, 1:] = (1.0 + t / r) * np.eye(d - 1) - (t / r) * np.outer(xb, xb)
    return 0.5 * J, degenerate


def project_jacobian(cone: ConeSet, v) -> np.ndarray:
    """Derivative of :func:`project` at ``v`` (a fixed selection at kinks)."""
    return project_with_jacobian(cone, v).jacobian


def is_degenerate(cone: ConeSet, v) -> bool:
    return project_with_jacobian(cone, v).degenerate


# ---------------------------------------------------------------------------
# products of cones


class ConeProduct:
    """Ordered product of cones occupying consecutive slices of a vector."""

    def __init__(self, blocks):
        self.blocks = tuple(blocks)
        offsets = np.cumsum([0] + [b.dim for b in self.blocks])
        self.offsets = tuple(int(o) for o in offsets)

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    def slices(self):
        for k, cone in enumerate(self.blocks):
            yield cone, slice(self.offsets[k], self.offsets[k + 1])

    def dual(self) -> ConeProduct:
        return ConeProduct(dual_cone(c) for c in self.blocks)

    def project(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        for cone, sl in self.slices():
            out[sl] = project(cone, v[sl])
        return out

    def project_with_jacobian(self, v) -> ProjectionResult:
        v = np.asarray(v, dtype=float)
        m = self.dim
        value = np.empty(m)
        J = np.zeros((m, m))
        degenerate = False
        for cone, sl in self.slices():
            res = project_with_jacobian(cone, v[sl])
            value[sl] = res.value
            J[sl, sl] = res.jacobian
            degenerate |= res.degenerate
        return ProjectionResult(value, J, degenerate)

    def __repr__(self):
        return f"ConeProduct({list(self.blocks)!r})"


def as_product(cones) -> ConeProduct:
    return cones if isinstance(cones, ConeProduct) else ConeProduct(cones)


def pi_hsde(z, cones, n: int) -> ProjectionResult:
    """Projection onto ``R^n x K* x R_+`` with its block-diagonal Jacobian."""
    cones = as_product(cones)
    z = np.asarray(z, dtype=float)
    m = cones.dim
    if z.shape != (n + m + 1,):
        raise ValueError(f"expected vector of length {n + m + 1}, got shape {z.shape}")
    inner = cones.dual().project_with_jacobian(z[n:n + m])
    value = np.concatenate((z[:n], inner.value, [max(z[-1], 0.0)]))
    J = np.zeros((n + m + 1, n + m + 1))
    J[:n, :n] = np.eye(n)
    J[n:n + m, n:n + m] = inner.jacobian
    J[-1, -1] = 1.0 if z[-1] > 0 else 0.0
    degenerate = inner.degenerate or abs(z[-1]) <= KINK_TOL
    return ProjectionResult(value, J, degenerate)
