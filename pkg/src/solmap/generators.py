"""Random problem instances with a planted, strictly complementary solution.

Solutions are chosen first and the data is built around them, so the
instances are feasible, bounded and differentiable by construction. Used by
the test suites and the demo scripts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import (
    EqualTo,
    GreaterThan,
    LessThan,
    Nonnegative,
    ScalarAffineFunction,
    ScalarQuadraticFunction,
    SecondOrder,
    VectorAffineFunction,
    Zero,
)
from .model import ModelBuilder, ProblemModel


def _magnitude(rng, size=None):
    return rng.uniform(0.5, 2.0, size)


@dataclass
class PlantedQP:
    model: ProblemModel
    x: np.ndarray
    lam: np.ndarray
    mu: np.ndarray


def random_qp(rng, n: int, p: int, m: int, n_active: int | None = None) -> PlantedQP:
    """Strongly convex QP with ``p`` inequalities and ``m`` equalities.

    Inequalities are stored as one ``Nonnegative`` block ``h - Gx >= 0`` and
    equalities as one ``Zero`` block ``Ax - b``, so the compiled form
    reproduces ``G, h, A, b`` exactly.
    """
    if m > n:
        raise ValueError("need m <= n for independent equalities")
    if n_active is None:
        n_active = int(rng.integers(0, min(p, n - m) + 1))
    L = rng.standard_normal((n, n))
    Q = L @ L.T / n + 0.5 * np.eye(n)
    G = rng.standard_normal((p, n))
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n)
    active = np.zeros(p, dtype=bool)
    active[rng.choice(p, n_active, replace=False)] = True
    lam = np.where(active, _magnitude(rng, p), 0.0)
    slack = np.where(active, 0.0, _magnitude(rng, p))
    mu = rng.standard_normal(m)
    h = G @ x + slack
    b = A @ x
    c = -(Q @ x + G.T @ lam + A.T @ mu)

    mb = ModelBuilder()
    mb.add_variables(n)
    mb.set_objective(ScalarQuadraticFunction.from_matrix(Q, c))
    if p:
        mb.add_constraint("ineq", VectorAffineFunction.from_dense(-G, h), Nonnegative(p))
    if m:
        mb.add_constraint("eq", VectorAffineFunction.from_dense(A, -b), Zero(m))
    return PlantedQP(mb.build(), x, lam, mu)


@dataclass
class PlantedConic:
    model: ProblemModel
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray


def _soc_pair(rng, q: int, kind: str):
    """``(y, s)`` in a second-order cone of dimension ``q``, complementary."""
    u = rng.standard_normal(q - 1)
    u /= np.linalg.norm(u)
    r = rng.uniform(0.0, 0.8)
    if kind == "dual_interior":
        t = _magnitude(rng)
        return np.r_[t, r * t * u], np.zeros(q)
    if kind == "slack_interior":
        t = _magnitude(rng)
        return np.zeros(q), np.r_[t, r * t * u]
    a, b = _magnitude(rng, 2)
    return a * np.r_[1.0, u], b * np.r_[1.0, -u]


def random_conic(rng, n_zero: int = 1, n_nonneg: int = 4, soc_dims=(3,)) -> PlantedConic:
    """LP/SOC instance ``min c'x  s.t.  b - Ax in K`` with a unique solution.

    The number of variables equals the number of constraint rows the planted
    solution holds active, which makes primal and dual solutions unique.
    """
    while True:
        y_parts, s_parts, active = [], [], 0
        y_parts.append(rng.standard_normal(n_zero))
        s_parts.append(np.zeros(n_zero))
        active += n_zero
        sign = rng.random(n_nonneg) < 0.5
        mag = _magnitude(rng, n_nonneg)
        y_parts.append(np.where(sign, mag, 0.0))
        s_parts.append(np.where(sign, 0.0, mag))
        active += int(sign.sum())
        for q in soc_dims:
            kind = rng.choice(["dual_interior", "slack_interior", "boundary"])
            y, s = _soc_pair(rng, q, kind)
            y_parts.append(y)
            s_parts.append(s)
            active += {"dual_interior": q, "slack_interior": 0, "boundary": 1}[kind]
        if active >= 1:
            break
    n = active
    y = np.concatenate(y_parts)
    s = np.concatenate(s_parts)
    m = len(y)
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n)
    b = A @ x + s
    c = -A.T @ y

    mb = ModelBuilder()
    mb.add_variables(n)
    mb.set_objective(ScalarQuadraticFunction((), ScalarAffineFunction.from_dense(c)))
    row = 0
    blocks = []
    if n_zero:
        blocks.append(("zero", Zero(n_zero)))
    if n_nonneg:
        blocks.append(("nonneg", Nonnegative(n_nonneg)))
    blocks += [(f"soc{k}", SecondOrder(q)) for k, q in enumerate(soc_dims)]
    for cid, cone in blocks:
        sl = slice(row, row + cone.dim)
        mb.add_constraint(cid, VectorAffineFunction.from_dense(-A[sl], b[sl]), cone)
        row += cone.dim
    return PlantedConic(mb.build(), x, y, s)


@dataclass
class PlantedLP:
    model: ProblemModel
    lowered: ProblemModel
    x: np.ndarray
    rhs_sign: dict  # constraint id -> sign mapping a user tangent to the lowered one


def random_scalar_lp(rng, n: int, n_extra: int = 3) -> PlantedLP:
    """LP written with a mix of ``>=``, ``<=`` and ``==`` scalar constraints.

    Also returns the same LP lowered by hand to ``Nonnegative(1)``/``Zero(1)``
    rows, for comparing differentiation through bridges against it.
    ``rhs_sign[cid]`` is the factor that maps user coefficient tangents to
    lowered ones (constants map with the opposite sign).
    """
    n_rows = n + n_extra
    a = rng.standard_normal((n_rows, n))
    x = rng.standard_normal(n)
    # first n rows active, the rest slack
    dual = np.r_[_magnitude(rng, n), np.zeros(n_extra)]
    slack = np.r_[np.zeros(n), _magnitude(rng, n_extra)]
    beta = a @ x - slack
    kinds = rng.choice(["ge", "le", "eq"], n_rows, p=[0.4, 0.4, 0.2])
    kinds[n:][kinds[n:] == "eq"] = "ge"
    c = a.T @ dual

    user, hand = ModelBuilder(), ModelBuilder()
    for mb in (user, hand):
        mb.add_variables(n)
        mb.set_objective(ScalarQuadraticFunction((), ScalarAffineFunction.from_dense(c)))
    signs = {}
    for i in range(n_rows):
        cid = f"r{i}"
        f = ScalarAffineFunction.from_dense(a[i])
        lowered = ScalarAffineFunction.from_dense(a[i], -beta[i])
        if kinds[i] == "ge":
            user.add_constraint(cid, f, GreaterThan(beta[i]))
            hand.add_constraint(cid, VectorAffineFunction((lowered,)), Nonnegative(1))
            signs[cid] = 1.0
        elif kinds[i] == "le":
            user.add_constraint(cid, -f, LessThan(-beta[i]))
            hand.add_constraint(cid, VectorAffineFunction((lowered,)), Nonnegative(1))
            signs[cid] = -1.0
        else:
            user.add_constraint(cid, f, EqualTo(beta[i]))
            hand.add_constraint(cid, VectorAffineFunction((lowered,)), Zero(1))
            signs[cid] = 1.0
    return PlantedLP(user.build(), hand.build(), x, signs)
