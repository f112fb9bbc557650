"""Differentiation of conic programs through the homogeneous self-dual embedding.

Primal ``min c'x s.t. Ax + s = b, s in K``; dual ``A'y + c = 0, y in K*``.
The solution map factors as data -> skew matrix Q -> embedding root z ->
``(x, y, s)``. The root ``z = (u, v, w)`` solves the normalized residual
equation ``((Q - I) Pi + I)(z / |w|) = 0`` where ``Pi`` projects onto
``R^n x K* x R_+``, and ``(x, y, s) = (u, Pi_K*(v), Pi_K*(v) - v) / w``.

The residual map is positively homogeneous of degree 0 in ``z``, so its
Jacobian always annihilates ``z`` itself. Tangents therefore fix the gauge
``dw = 0`` and solve the leading ``(n + m)``-square block, which is
nonsingular at strictly complementary, nondegenerate solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cones import ConeProduct, as_product, pi_hsde
from .qp_diff import KKTFactorization

RESIDUAL_TOL = 1e-5


class EmbeddingError(ValueError):
    """The point is not a usable embedded solution."""


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    residuals: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, form, x, y, s=None) -> ConicSolution:
        """Solution supplied from outside; ``s`` defaults to ``b - Ax``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = form.b - form.A @ x if s is None else np.asarray(s, dtype=float)
        return cls(x, y, s, conic_residuals(form.A, form.b, form.c, x, y, s))


def conic_residuals(A, b, c, x, y, s) -> dict:
    def inf(v):
        return float(np.abs(v).max()) if v.size else 0.0

    return {
        "primal": inf(A @ x + s - b),
        "dual": inf(A.T @ y + c),
        "gap": abs(float(c @ x + b @ y)),
        "complementarity": abs(float(s @ y)),
    }


@dataclass
class HSDEPoint:
    z: np.ndarray
    n: int
    m: int

    @property
    def u(self) -> np.ndarray:
        return self.z[:self.n]

    @property
    def v(self) -> np.ndarray:
        return self.z[self.n:self.n + self.m]

    @property
    def w(self) -> float:
        return float(self.z[-1])


@dataclass
class ConicTangentOut:
    dx: np.ndarray
    dy: np.ndarray
    ds: np.ndarray
    approximate: bool = False


@dataclass
class ConicReverseOut:
    gA: np.ndarray
    gb: np.ndarray
    gc: np.ndarray
    approximate: bool = False


def assemble_skew_q(A, b, c) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    m, n = A.shape
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError(f"inconsistent shapes A{A.shape}, b{b.shape}, c{c.shape}")
    N = n + m + 1
    Q = np.zeros((N, N))
    Q[:n, n:n + m] = A.T
    Q[:n, -1] = c
    Q[n:n + m, :n] = -A
    Q[n:n + m, -1] = b
    Q[-1, :n] = -c
    Q[-1, n:n + m] = -b
    return Q


def _cones_of(form_or_cones) -> ConeProduct:
    cones = getattr(form_or_cones, "cones", form_or_cones)
    return as_product(cones)


def phi(z, cones, n: int):
    """``(x, y, s)`` encoded by an embedding point with ``w > 0``."""
    cones = as_product(cones)
    z = np.asarray(z, dtype=float)
    m = cones.dim
    w = z[-1]
    v = z[n:n + m]
    pv = cones.dual().project(v)
    return z[:n] / w, pv / w, (pv - v) / w


def d_phi(z, cones, n: int) -> np.ndarray:
    """Jacobian of :func:`phi`, rows ordered ``(x, y, s)``."""
    cones = as_product(cones)
    z = np.asarray(z, dtype=float)
    m = cones.dim
    w = z[-1]
    x, y, s = phi(z, cones, n)
    DP = cones.dual().project_with_jacobian(z[n:n + m]).jacobian
    J = np.zeros((n + 2 * m, n + m + 1))
    J[:n, :n] = np.eye(n)
    J[n:n + m, n:n + m] = DP
    J[n + m:, n:n + m] = DP - np.eye(m)
    J[:, :-1] /= w
    J[:n, -1] = -x / w
    J[n:n + m, -1] = -y / w
    J[n + m:, -1] = -s / w
    return J


def embed_solution(sol: ConicSolution, cones=None, tol: float = RESIDUAL_TOL) -> HSDEPoint:
    """``z = (x, y - s, 1)``; with ``cones`` given, checks that ``phi`` recovers ``sol``."""
    z = np.concatenate((sol.x, sol.y - sol.s, [1.0]))
    point = HSDEPoint(z, len(sol.x), len(sol.y))
    if cones is not None:
        x, y, s = phi(z, cones, point.n)
        err = max(np.abs(y - sol.y).max(initial=0.0), np.abs(s - sol.s).max(initial=0.0))
        if err > tol:
            raise EmbeddingError(f"complementarity violated: phi round trip error {err:.3g}")
    return point


def _z(z) -> np.ndarray:
    return z.z if isinstance(z, HSDEPoint) else np.asarray(z, dtype=float)


def normalized_residual(z, Q, cones) -> np.ndarray:
    z = _z(z)
    cones = as_product(cones)
    w = z[-1]
    if abs(w) <= 1e-12:
        raise EmbeddingError("normalized residual undefined for w = 0")
    n = z.shape[0] - cones.dim - 1
    zh = z / abs(w)
    p = pi_hsde(zh, cones, n).value
    return Q @ p - p + zh


def d_z_residual(z, Q, cones, check: bool = True) -> np.ndarray:
    """``((Q - I) DPi(z) + I) / w``, valid at roots of the residual map."""
    z = _z(z)
    cones = as_product(cones)
    n = z.shape[0] - cones.dim - 1
    if check:
        r = normalized_residual(z, Q, cones)
        scale = 1.0 + np.abs(Q).max(initial=0.0)
        if np.abs(r).max() > RESIDUAL_TOL * scale:
            raise EmbeddingError(
                f"residual {np.abs(r).max():.3g} too large to treat z as an embedded solution")
    DP = pi_hsde(z, cones, n).jacobian
    N = z.shape[0]
    return ((Q - np.eye(N)) @ DP + np.eye(N)) / z[-1]


@dataclass
class _ConicState:
    n: int
    m: int
    z: np.ndarray
    pi: np.ndarray
    dphi: np.ndarray
    fac: KKTFactorization


def _prepare(form, sol: ConicSolution) -> _ConicState:
    cones = _cones_of(form)
    n, m = form.n, form.m
    point = embed_solution(sol, cones)
    Q = assemble_skew_q(form.A, form.b, form.c)
    M = d_z_residual(point.z, Q, cones)
    fac = KKTFactorization.factor(M[:n + m, :n + m])
    pi = pi_hsde(point.z / point.w, cones, n).value
    return _ConicState(n, m, point.z, pi, d_phi(point.z, cones, n), fac)


def forward_differentiate_conic(form, sol: ConicSolution, dA, db, dc,
                                state: _ConicState | None = None) -> ConicTangentOut:
    st = state or _prepare(form, sol)
    n, m = st.n, st.m
    rhs = assemble_skew_q(dA, db, dc) @ st.pi
    dz = np.zeros(n + m + 1)
    dz[:n + m] = -st.fac.solve(rhs[:n + m])
    d = st.dphi @ dz
    return ConicTangentOut(d[:n], d[n:n + m], d[n + m:], st.fac.approximate)


def reverse_differentiate_conic(form, sol: ConicSolution, dl_dx, dl_dy=None, dl_ds=None,
                                state: _ConicState | None = None) -> ConicReverseOut:
    st = state or _prepare(form, sol)
    n, m = st.n, st.m
    seed = np.concatenate((
        np.asarray(dl_dx, dtype=float),
        np.zeros(m) if dl_dy is None else np.asarray(dl_dy, dtype=float),
        np.zeros(m) if dl_ds is None else np.asarray(dl_ds, dtype=float),
    ))
    gz = st.dphi.T @ seed
    g_rhs = np.zeros(n + m + 1)
    g_rhs[:n + m] = -st.fac.solve(gz[:n + m], transpose=True)
    GQ = np.outer(g_rhs, st.pi)
    xs, ys, last = slice(0, n), slice(n, n + m), n + m
    gA = GQ[xs, ys].T - GQ[ys, xs]
    gb = GQ[ys, last] - GQ[last, ys]
    gc = GQ[xs, last] - GQ[last, xs]
    return ConicReverseOut(gA, gb, gc, st.fac.approximate)


def prepare(form, sol: ConicSolution) -> _ConicState:
    """Factor once for repeated forward/reverse calls at the same solution."""
    return _prepare(form, sol)
