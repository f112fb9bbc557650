"""
Tuning a regularization weight by gradient descent
==================================================

The fitted weights are a function of the penalty ``alpha``. One forward
pass gives ``dw/dalpha`` and the chain rule gives the held-out loss
gradient, which drives plain gradient descent on ``alpha``.
"""

import numpy as np

from solmap.applications import (
    alpha_gradient,
    fit_ridge,
    holdout_loss,
    hyperparameter_descent,
    regression_dataset,
)

data = regression_dataset(seed=0)
loss, grad = alpha_gradient(data, 0.1)
h = 1e-6
fd = (holdout_loss(data, fit_ridge(data, 0.1 + h)) - holdout_loss(data, fit_ridge(data, 0.1 - h))) / (2 * h)
print(f"at alpha = 0.1: loss {loss:.5f}, dloss/dalpha {grad:.6f} (finite differences {fd:.6f})")

# %%
history = hyperparameter_descent(data, alpha0=0.1, step=10.0, max_iters=200)
for step in history:
    print(f"{step.iteration:3d}  alpha {step.alpha:.5f}  grad {step.grad:+.2e}  loss {step.loss:.5f} {step.note}")

# %%
# A coarse scan confirms that descent stopped near the best penalty.
grid = np.geomspace(1e-2, 1e2, 41)
best = grid[np.argmin([holdout_loss(data, fit_ridge(data, a)) for a in grid])]
print("grid minimizer:", round(best, 4), " descent result:", round(history[-1].alpha, 4))
