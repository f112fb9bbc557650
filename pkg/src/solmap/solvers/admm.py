"""Operator splitting on the homogeneous self-dual embedding.

Iterates (over-relaxation ``alpha``, no acceleration)::

    u~ = (I + Q)^-1 (u + v)
    u  = Pi(alpha u~ + (1 - alpha) u - v)
    v  = v - alpha u~ - (1 - alpha) u_old + u

with ``u = (x, y, tau)``, ``v = (r, s, kappa)`` and ``Pi`` the projection
onto ``R^n x K* x R_+``. Once the iterates are close, a semismooth Newton
polish on the embedding residual with ``tau = 1`` finishes the solve::

    F(x, v) = [A' Pi_K*(v) + c,  b - Ax - Pi_K*(v) + v]
"""

from __future__ import annotations

import logging

import numpy as np

from ..cones import ConeProduct
from ..conic_diff import ConicSolution, assemble_skew_q, conic_residuals
from .status import SolverSettings, SolveStatus, Status

logger = logging.getLogger(__name__)

ALPHA = 1.5
CHECK_EVERY = 25
POLISH_START = 1e-1
POLISH_EVERY = 200
INFEAS_TOL = 1e-7


def _relative(res: dict, b, c, x, y) -> dict:
    return {
        "primal": res["primal"] / (1.0 + np.abs(b).max(initial=0.0)),
        "dual": res["dual"] / (1.0 + np.abs(c).max(initial=0.0)),
        "gap": res["gap"] / (1.0 + abs(c @ x) + abs(b @ y)),
    }


def newton_polish(A, b, c, cones: ConeProduct, x, v, max_iter: int = 40):
    """Semismooth Newton on the embedding residual; returns ``(x, v, |F|_inf)``."""
    m, n = A.shape
    dual = cones.dual()

    def F(x, v):
        pv = dual.project(v)
        return np.concatenate((A.T @ pv + c, b - A @ x - pv + v))

    r = F(x, v)
    nr = np.abs(r).max(initial=0.0)
    for _ in range(max_iter):
        if nr <= 1e-15 * (1.0 + np.abs(b).max(initial=0.0) + np.abs(c).max(initial=0.0)):
            break
        DP = dual.project_with_jacobian(v).jacobian
        J = np.zeros((n + m, n + m))
        J[:n, n:] = A.T @ DP
        J[n:, :n] = -A
        J[n:, n:] = np.eye(m) - DP
        try:
            d = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(J, -r, rcond=None)[0]
        t = 1.0
        for _ in range(30):
            xn, vn = x + t * d[:n], v + t * d[n:]
            rn = F(xn, vn)
            nrn = np.abs(rn).max(initial=0.0)
            if nrn < (1.0 - 1e-4 * t) * nr:
                break
            t *= 0.5
        else:
            break
        x, v, r, nr = xn, vn, rn, nrn
    return x, v, nr


def _unconstrained(form, settings):
    x = np.zeros(form.n)
    tag = Status.OPTIMAL if np.abs(form.c).max(initial=0.0) <= settings.tol else Status.UNBOUNDED
    sol = ConicSolution(x, np.zeros(0), np.zeros(0),
                        conic_residuals(form.A, form.b, form.c, x, np.zeros(0), np.zeros(0)))
    return sol, SolveStatus(tag, 0, sol.residuals)


def solve_conic(form, settings: SolverSettings | None = None):
    """Solve a :class:`~solmap.model.ConicForm`; returns ``(ConicSolution, SolveStatus)``."""
    settings = settings or SolverSettings()
    A, b, c = form.A, form.b, form.c
    m, n = A.shape
    if m == 0:
        return _unconstrained(form, settings)
    cones = ConeProduct(form.cones)
    dual = cones.dual()
    N = n + m + 1
    Kinv = np.linalg.inv(np.eye(N) + assemble_skew_q(A, b, c))
    tol = settings.tol

    u = np.zeros(N)
    u[-1] = 1.0
    v = np.zeros(N)
    v[-1] = 1.0
    polish_at = POLISH_START
    status = Status.MAX_ITER
    x = np.zeros(n)
    y = np.zeros(m)
    s = np.zeros(m)
    rel = {}
    polished = False
    it = 0
    for it in range(1, settings.max_iter + 1):
        ut = Kinv @ (u + v)
        ur = ALPHA * ut + (1.0 - ALPHA) * u
        w = ur - v
        u_new = np.empty(N)
        u_new[:n] = w[:n]
        u_new[n:n + m] = dual.project(w[n:n + m])
        u_new[-1] = max(w[-1], 0.0)
        v = v - ur + u_new
        u = u_new
        if it % CHECK_EVERY and it != settings.max_iter:
            continue

        tau, kappa = u[-1], v[-1]
        if tau > 1e-12 * max(1.0, kappa):
            x, y, s = u[:n] / tau, u[n:n + m] / tau, v[n:n + m] / tau
            rel = _relative(conic_residuals(A, b, c, x, y, s), b, c, x, y)
            worst = max(rel.values())
            if settings.verbose:
                logger.info("admm %5d  primal %.2e  dual %.2e  gap %.2e",
                            it, rel["primal"], rel["dual"], rel["gap"])
            if worst <= tol:
                status = Status.OPTIMAL
                break
            if worst <= polish_at or it % POLISH_EVERY == 0:
                xp, vp, _ = newton_polish(A, b, c, cones, x.copy(), y - s)
                pv = dual.project(vp)
                rp = _relative(conic_residuals(A, b, c, xp, pv, pv - vp), b, c, xp, pv)
                if max(rp.values()) <= tol:
                    x, y, s, rel = xp, pv, pv - vp, rp
                    status = Status.OPTIMAL
                    polished = True
                    break
                polish_at = min(polish_at, worst * 0.5)
        else:
            cert = _certificate(A, b, c, u, v, n, m)
            if cert is not None:
                status = cert
                break

    if status is Status.MAX_ITER:
        cert = _certificate(A, b, c, u, v, n, m)
        if cert is not None:
            status = cert
    res = conic_residuals(A, b, c, x, y, s)
    res.update({f"rel_{k}": val for k, val in rel.items()})
    return ConicSolution(x, y, s, res), SolveStatus(status, it, res, polished)


def _certificate(A, b, c, u, v, n, m):
    xc, yc, sc = u[:n], u[n:n + m], v[n:n + m]
    by = b @ yc
    if by < 0 and np.abs(A.T @ yc).max(initial=0.0) <= INFEAS_TOL * abs(by) * 1e3:
        return Status.INFEASIBLE
    cx = c @ xc
    if cx < 0 and np.abs(A @ xc + sc).max(initial=0.0) <= INFEAS_TOL * abs(cx) * 1e3:
        return Status.UNBOUNDED
    return None
