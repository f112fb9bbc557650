"""
Projections as network layers
=============================

A layer that returns ``argmin |x - y|^2`` over a convex set passes gradients
back to its input ``y`` and to the set's parameters.
"""

import numpy as np

from solmap.applications import polytope_feasible, polytope_layer, relu_layer

rng = np.random.default_rng(1)

# %%
# Projecting onto the nonnegative orthant is a ReLU; its pullback is the
# familiar mask.
Y = rng.standard_normal((4, 5))
g = rng.standard_normal((4, 5))
out = relu_layer(Y, g)
print("matches max(y, 0):", np.allclose(out.x, np.maximum(Y, 0)))
print("matches g * 1[y > 0]:", np.allclose(out.dl_dy, g * (Y > 0)))

# %%
# A polytope ``W x >= b`` shared across the batch. Offsets are drawn so the
# origin is cut off and most samples land on a face.
W = rng.standard_normal((3, 2))
b = rng.uniform(0.2, 1.0, 3) * np.linalg.norm(W, axis=1)
assert polytope_feasible(W, b)
Y = rng.standard_normal((6, 2))
g = rng.standard_normal((6, 2))
out = polytope_layer(Y, W, b, g)
print("active faces per sample:", (np.abs(out.x @ W.T - b) < 1e-7).sum(axis=1))
print("dl/dW =\n", np.round(out.dl_dw, 4))
print("dl/db =", np.round(out.dl_db, 4))
