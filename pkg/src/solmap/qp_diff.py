"""Implicit differentiation of convex QP solutions through the KKT system.

For ``min 1/2 x'Qx + c'x  s.t.  Gx <= h : lam,  Ax = b : mu`` the optimality
conditions ``Qx + c + G'lam + A'mu = 0``, ``Ax = b`` and
``lam_i (h - Gx)_i = 0`` are differentiated at a primal-dual solution. The
linearized system matrix is::

    [[ Q,          G',        A'],
     [-D(lam) G,   D(h - Gx), 0 ],
     [ A,          0,         0 ]]

and the right-hand side for a parameter tangent is::

    [dQ x + dc + dG' lam + dA' mu,
     D(lam) (dh - dG x),
     dA x - db]
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

PIVOT_TOL = 1e-11


@dataclass
class QPSolution:
    x: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    kkt_residual: float = 0.0

    @classmethod
    def from_arrays(cls, form, x, lam=None, mu=None) -> QPSolution:
        """Solution supplied from outside (e.g. another solver)."""
        x = np.asarray(x, dtype=float)
        lam = np.zeros(form.p) if lam is None else np.asarray(lam, dtype=float)
        mu = np.zeros(form.m) if mu is None else np.asarray(mu, dtype=float)
        return cls(x, lam, mu, kkt_residual(form, x, lam, mu))


def kkt_residual(form, x, lam, mu) -> float:
    stat = form.Q @ x + form.c + form.G.T @ lam + form.A.T @ mu
    slack = form.h - form.G @ x
    parts = [np.abs(stat), np.abs(form.A @ x - form.b), np.maximum(-slack, 0.0),
             np.abs(lam * slack), np.maximum(-lam, 0.0)]
    return float(max((p.max() for p in parts if p.size), default=0.0))


@dataclass
class QPTangentIn:
    dQ: np.ndarray
    dc: np.ndarray
    dG: np.ndarray
    dh: np.ndarray
    dA: np.ndarray
    db: np.ndarray

    @classmethod
    def zeros(cls, form) -> QPTangentIn:
        n, p, m = form.n, form.p, form.m
        return cls(np.zeros((n, n)), np.zeros(n), np.zeros((p, n)), np.zeros(p),
                   np.zeros((m, n)), np.zeros(m))

    def params(self):
        return (self.dQ, self.dc, self.dG, self.dh, self.dA, self.db)


@dataclass
class QPTangentOut:
    dx: np.ndarray
    dlam: np.ndarray
    dmu: np.ndarray
    approximate: bool = False


@dataclass
class QPReverseOut:
    gQ: np.ndarray
    gc: np.ndarray
    gG: np.ndarray
    gh: np.ndarray
    gA: np.ndarray
    gb: np.ndarray
    approximate: bool = False

    def params(self):
        return (self.gQ, self.gc, self.gG, self.gh, self.gA, self.gb)


@dataclass
class KKTFactorization:
    """LU of a square system with a least-squares fallback when near singular."""

    matrix: np.ndarray
    lu: tuple | None = field(default=None, repr=False)
    approximate: bool = False

    @classmethod
    def factor(cls, M: np.ndarray) -> KKTFactorization:
        if M.size == 0:
            return cls(M)
        scale = max(np.abs(M).sum(axis=1).max(), 1e-300)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
        except (ValueError, np.linalg.LinAlgError):
            return cls(M, None, True)
        if np.abs(np.diag(lu)).min() < PIVOT_TOL * scale:
            return cls(M, None, True)
        return cls(M, (lu, piv), False)

    def solve(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        if self.matrix.size == 0:
            return np.zeros(0)
        if self.lu is not None:
            return scipy.linalg.lu_solve(self.lu, rhs, trans=1 if transpose else 0)
        M = self.matrix.T if transpose else self.matrix
        return np.linalg.lstsq(M, rhs, rcond=None)[0]


def build_kkt_jacobian(form, sol: QPSolution) -> np.ndarray:
    n, p, m = form.n, form.p, form.m
    x, lam = sol.x, sol.lam
    M = np.zeros((n + p + m, n + p + m))
    M[:n, :n] = form.Q
    M[:n, n:n + p] = form.G.T
    M[:n, n + p:] = form.A.T
    M[n:n + p, :n] = -lam[:, None] * form.G
    M[n:n + p, n:n + p] = np.diag(form.h - form.G @ x)
    M[n + p:, :n] = form.A
    return M


def factor_kkt(form, sol: QPSolution) -> KKTFactorization:
    return KKTFactorization.factor(build_kkt_jacobian(form, sol))


def _rhs(form, sol: QPSolution, t: QPTangentIn) -> np.ndarray:
    x, lam, mu = sol.x, sol.lam, sol.mu
    return np.concatenate((
        t.dQ @ x + t.dc + t.dG.T @ lam + t.dA.T @ mu,
        lam * (t.dh - t.dG @ x),
        t.dA @ x - t.db,
    ))


def forward_differentiate_qp(form, sol: QPSolution, t: QPTangentIn,
                             factorization: KKTFactorization | None = None) -> QPTangentOut:
    """Directional derivative of ``(x, lam, mu)`` along the tangent ``t``."""
    fac = factorization or factor_kkt(form, sol)
    d = -fac.solve(_rhs(form, sol, t))
    n, p = form.n, form.p
    return QPTangentOut(d[:n], d[n:n + p], d[n + p:], fac.approximate)


def reverse_differentiate_qp(form, sol: QPSolution, dl_dx,
                             factorization: KKTFactorization | None = None) -> QPReverseOut:
    """Gradient of ``<dl_dx, x*>`` with respect to every problem matrix."""
    fac = factorization or factor_kkt(form, sol)
    n, p, m = form.n, form.p, form.m
    seed = np.zeros(n + p + m)
    seed[:n] = dl_dx
    g = fac.solve(-seed, transpose=True)
    gx, glam, gmu = g[:n], g[n:n + p], g[n + p:]
    x, lam, mu = sol.x, sol.lam, sol.mu
    lg = lam * glam
    return QPReverseOut(
        gQ=0.5 * (np.outer(gx, x) + np.outer(x, gx)),
        gc=gx.copy(),
        gG=np.outer(lam, gx) - np.outer(lg, x),
        gh=lg,
        gA=np.outer(mu, gx) + np.outer(gmu, x),
        gb=-gmu,
        approximate=fac.approximate,
    )
