"""Primal-dual path-following interior point method for dense convex QPs.

Mehrotra predictor-corrector on::

    min 1/2 x'Qx + c'x   s.t.  Gx + s = h, s >= 0,  Ax = b

followed by an active-set polish that re-solves the equality-constrained
KKT system on the identified active set, which brings residuals down to
rounding level whenever strict complementarity holds.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.linalg

from ..qp_diff import QPSolution, kkt_residual
from .status import SolverSettings, SolveStatus, Status

logger = logging.getLogger(__name__)

MAX_IPM_ITER = 200
STEP_FRACTION = 0.99
DIVERGENCE = 1e10


def _solve(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if K.size == 0:
        return np.zeros(0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(K)
    scale = max(np.abs(K).max(), 1e-300)
    if np.abs(np.diag(lu)).min() > 1e-13 * scale:
        return scipy.linalg.lu_solve((lu, piv), rhs)
    return np.linalg.lstsq(K, rhs, rcond=None)[0]


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _residuals(form, x, s, lam, mu) -> dict:
    def inf(v):
        return float(np.abs(v).max()) if v.size else 0.0

    return {
        "dual": inf(form.Q @ x + form.c + form.G.T @ lam + form.A.T @ mu),
        "eq": inf(form.A @ x - form.b),
        "ineq": inf(form.G @ x + s - form.h),
        "gap": float(s @ lam / max(len(s), 1)),
    }


def _converged(res: dict, scale_p: float, scale_d: float, tol: float) -> bool:
    return (res["dual"] <= tol * scale_d and res["eq"] <= tol * scale_p
            and res["ineq"] <= tol * scale_p and res["gap"] <= tol)


def _check_psd(Q: np.ndarray) -> None:
    if Q.size == 0:
        return
    if not np.allclose(Q, Q.T, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    if np.linalg.eigvalsh(Q).min() < -1e-8 * max(1.0, np.abs(Q).max()):
        raise ValueError("Q must be positive semidefinite")


def _equality_only(form, settings: SolverSettings):
    n, m = form.n, form.m
    K = np.block([[form.Q, form.A.T], [form.A, np.zeros((m, m))]])
    rhs = np.concatenate((-form.c, form.b))
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0] if K.size else np.zeros(0)
    x, mu = sol[:n], sol[n:]
    lam = np.zeros(0)
    res = _residuals(form, x, np.zeros(0), lam, mu)
    scale_p = 1.0 + np.abs(form.b).max(initial=0.0)
    scale_d = 1.0 + np.abs(form.c).max(initial=0.0)
    if res["eq"] > 1e3 * settings.tol * scale_p:
        tag = Status.INFEASIBLE
    elif res["dual"] > 1e3 * settings.tol * scale_d:
        tag = Status.UNBOUNDED
    else:
        tag = Status.OPTIMAL
    return QPSolution(x, lam, mu, kkt_residual(form, x, lam, mu)), SolveStatus(tag, 1, res)


def polish(form, x, s, lam, mu):
    """Re-solve KKT on the active set ``lam > s``; None if the result is not better."""
    n, m = form.n, form.m
    active = lam > s
    Ga, ha = form.G[active], form.h[active]
    k = Ga.shape[0]
    K = np.zeros((n + k + m, n + k + m))
    K[:n, :n] = form.Q
    K[:n, n:n + k] = Ga.T
    K[:n, n + k:] = form.A.T
    K[n:n + k, :n] = Ga
    K[n + k:, :n] = form.A
    rhs = np.concatenate((-form.c, ha, form.b))
    sol = _solve(K, rhs)
    # one step of iterative refinement
    sol = sol + _solve(K, rhs - K @ sol)
    xp = sol[:n]
    lam_p = np.zeros_like(lam)
    lam_p[active] = sol[n:n + k]
    mu_p = sol[n + k:]
    slack = form.h - form.G @ xp
    lscale = 1.0 + np.abs(lam).max(initial=0.0)
    sscale = 1.0 + np.abs(form.h).max(initial=0.0) + np.abs(form.G).max(initial=0.0) * np.abs(xp).max(initial=0.0)
    if lam_p.size and lam_p.min() < -1e-10 * lscale:
        return None
    if slack.size and slack.min() < -1e-10 * sscale:
        return None
    lam_p = np.maximum(lam_p, 0.0)
    before = kkt_residual(form, x, lam, mu)
    after = kkt_residual(form, xp, lam_p, mu_p)
    if not np.isfinite(after) or after > max(before, 1e-14):
        return None
    return xp, np.maximum(slack, 0.0), lam_p, mu_p


def solve_qp(form, settings: SolverSettings | None = None):
    """Solve a :class:`~solmap.model.QPForm`; returns ``(QPSolution, SolveStatus)``."""
    settings = settings or SolverSettings()
    _check_psd(form.Q)
    n, p, m = form.n, form.p, form.m
    if p == 0:
        return _equality_only(form, settings)

    Q, c, G, h, A, b = form.Q, form.c, form.G, form.h, form.A, form.b
    tol = settings.tol
    scale_p = 1.0 + max(np.abs(h).max(initial=0.0), np.abs(b).max(initial=0.0))
    scale_d = 1.0 + np.abs(c).max(initial=0.0)

    # start: least-squares fit of the constraints, then shift into the interior
    K0 = np.block([[Q + G.T @ G + 1e-8 * np.eye(n), A.T], [A, -1e-8 * np.eye(m)]])
    x0 = _solve(K0, np.concatenate((-c + G.T @ h, b)))
    x, mu = x0[:n], x0[n:]
    s = np.maximum(h - G @ x, 1.0)
    lam = np.ones(p)

    status = Status.MAX_ITER
    res = _residuals(form, x, s, lam, mu)
    it = 0
    for it in range(1, min(settings.max_iter, MAX_IPM_ITER) + 1):
        res = _residuals(form, x, s, lam, mu)
        if settings.verbose:
            logger.info("ipm %3d  dual %.2e  eq %.2e  ineq %.2e  gap %.2e",
                        it, res["dual"], res["eq"], res["ineq"], res["gap"])
        if _converged(res, scale_p, scale_d, tol):
            status = Status.OPTIMAL
            break
        if max(np.abs(lam).max(), np.abs(mu).max(initial=0.0)) > DIVERGENCE * scale_d:
            status = Status.INFEASIBLE
            break
        if np.abs(x).max(initial=0.0) > DIVERGENCE * scale_p:
            status = Status.UNBOUNDED
            break

        rd = Q @ x + c + G.T @ lam + A.T @ mu
        re = A @ x - b
        ri = G @ x + s - h
        mu_gap = s @ lam / p
        W = lam / s
        K = np.zeros((n + m, n + m))
        K[:n, :n] = Q + G.T @ (W[:, None] * G)
        K[:n, n:] = A.T
        K[n:, :n] = A
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(K + np.diag(np.r_[np.full(n, 1e-13), np.full(m, -1e-13)]))

            def newton(rc, lu=lu):
                top = -rd - G.T @ ((-rc + lam * ri) / s)
                d = scipy.linalg.lu_solve(lu, np.concatenate((top, -re)))
                dx, dmu = d[:n], d[n:]
                dlam = (-rc + lam * ri + lam * (G @ dx)) / s
                ds = -ri - G @ dx
                return dx, ds, dlam, dmu

            # predictor
            dx, ds, dlam, dmu = newton(s * lam)
            a_aff = min(_max_step(s, ds), _max_step(lam, dlam))
            mu_aff = (s + a_aff * ds) @ (lam + a_aff * dlam) / p
            sigma = (mu_aff / mu_gap) ** 3
            # corrector
            dx, ds, dlam, dmu = newton(s * lam + ds * dlam - sigma * mu_gap)
        except (np.linalg.LinAlgError, ValueError):
            status = Status.NUMERICAL_ERROR
            break
        if not all(np.all(np.isfinite(v)) for v in (dx, ds, dlam, dmu)):
            status = Status.NUMERICAL_ERROR
            break
        alpha = min(1.0, STEP_FRACTION * min(_max_step(s, ds), _max_step(lam, dlam)))
        x = x + alpha * dx
        s = s + alpha * ds
        lam = lam + alpha * dlam
        mu = mu + alpha * dmu
        s = np.maximum(s, 1e-300)
        lam = np.maximum(lam, 1e-300)
    else:
        res = _residuals(form, x, s, lam, mu)
        if _converged(res, scale_p, scale_d, tol):
            status = Status.OPTIMAL

    if status is Status.MAX_ITER:
        status = _classify_failure(form, x, s, lam, mu, res, scale_p, scale_d, tol)

    polished = False
    if status is Status.OPTIMAL:
        out = polish(form, x, s, lam, mu)
        if out is not None:
            x, s, lam, mu = out
            polished = True
        res = _residuals(form, x, s, lam, mu)
        res["gap"] = float(np.abs(s * lam).max(initial=0.0))

    sol = QPSolution(x, lam, mu, kkt_residual(form, x, lam, mu))
    return sol, SolveStatus(status, it, res, polished)


def _classify_failure(form, x, s, lam, mu, res, scale_p, scale_d, tol) -> Status:
    # Farkas-type certificate from the normalized multipliers
    y = np.concatenate((lam, mu))
    ny = np.abs(y).max()
    if ny > 0:
        lh, mh = lam / ny, mu / ny
        ray = np.abs(form.G.T @ lh + form.A.T @ mh).max(initial=0.0)
        val = form.h @ lh + form.b @ mh
        if val < -1e-6 and ray < 1e-6 * abs(val) * 1e3:
            return Status.INFEASIBLE
    if max(res["eq"], res["ineq"]) > 1e3 * tol * scale_p:
        return Status.INFEASIBLE
    if res["dual"] > 1e3 * tol * scale_d:
        return Status.UNBOUNDED
    return Status.MAX_ITER
