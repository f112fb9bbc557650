"""
Second-order cone programs through the self-dual embedding
==========================================================

Conic problems are solved by operator splitting on the homogeneous
self-dual embedding and differentiated through the same embedding.
"""

import dataclasses

import numpy as np

from solmap.conic_diff import (
    assemble_skew_q,
    embed_solution,
    forward_differentiate_conic,
    normalized_residual,
)
from solmap.generators import random_conic
from solmap.model import compile_conic_form
from solmap.solvers import solve_conic

rng = np.random.default_rng(3)
planted = random_conic(rng, n_zero=1, n_nonneg=3, soc_dims=(3, 4))
form = compile_conic_form(planted.model)
sol, status = solve_conic(form)
print(status, "in", status.iterations, "iterations; polished:", status.polished)
print("cones:", form.cones)

# %%
# The embedding matrix is skew-symmetric and the solution is a root of the
# normalized residual map.
Q = assemble_skew_q(form.A, form.b, form.c)
point = embed_solution(sol, form.cones)
print("max |Q + Q'|:", np.abs(Q + Q.T).max())
print("max residual at the solution:", np.abs(normalized_residual(point.z, Q, form.cones)).max())

# %%
# Perturb the cost vector and compare with a re-solve.
dc = rng.standard_normal(form.n)
dx = forward_differentiate_conic(form, sol, np.zeros_like(form.A), np.zeros(form.m), dc).dx
eps = 1e-6
xp = solve_conic(dataclasses.replace(form, c=form.c + eps * dc))[0].x
xm = solve_conic(dataclasses.replace(form, c=form.c - eps * dc))[0].x
print("forward vs finite differences:", np.abs(dx - (xp - xm) / (2 * eps)).max())
