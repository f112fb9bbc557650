"""
Sensitivity of a quadratic program
==================================

A random strongly convex QP with a planted solution. We check the forward
derivative against re-solving, and the reverse pass against the forward one.
"""

import dataclasses

import numpy as np

from solmap.generators import random_qp
from solmap.model import compile_qp_form
from solmap.qp_diff import QPTangentIn, factor_kkt, forward_differentiate_qp, reverse_differentiate_qp
from solmap.solvers import SolverSettings, solve_qp

rng = np.random.default_rng(0)
planted = random_qp(rng, n=5, p=4, m=1, n_active=2)
form = compile_qp_form(planted.model)
sol, status = solve_qp(form, SolverSettings(tol=1e-10))
print(status, "after", status.iterations, "iterations")
print("recovered the planted point:", np.allclose(sol.x, planted.x, atol=1e-8))

# %%
# A tangent moves every problem matrix at once. The KKT system is factored
# a single time and reused by both modes.
t = QPTangentIn(*(rng.standard_normal(a.shape) for a in QPTangentIn.zeros(form).params()))
t.dQ = 0.5 * (t.dQ + t.dQ.T)
fac = factor_kkt(form, sol)
dx = forward_differentiate_qp(form, sol, t, fac).dx

eps = 1e-6


def moved(sign):
    changes = {k: getattr(form, k) + sign * eps * getattr(t, "d" + k) for k in ("Q", "c", "G", "h", "A", "b")}
    return solve_qp(dataclasses.replace(form, **changes), SolverSettings(tol=1e-10))[0].x


fd = (moved(1) - moved(-1)) / (2 * eps)
print("forward vs finite differences:", np.abs(dx - fd).max())

# %%
# Reverse mode gives the gradient of ``<seed, x>`` with respect to every
# matrix. Pairing it with the tangent reproduces the forward result.
seed = rng.standard_normal(form.n)
r = reverse_differentiate_qp(form, sol, seed, fac)
pairing = sum(np.sum(a * b) for a, b in zip(t.params(), r.params()))
print("<seed, dx> =", seed @ dx, " <gradient, tangent> =", pairing)
