"""
Data sensitivity of a ridge fit
===============================

For ``min sum (y_i - w x_i - b)^2 + alpha w^2`` the data enter the
objective, so a data perturbation is an objective tangent.
"""

import numpy as np

from solmap.applications import ridge_closed_form, ridge_dataset, ridge_sensitivity

x, y = ridge_dataset(n=12, seed=0)
for alpha in (0.1, 10.0, 1000.0):
    res = ridge_sensitivity(x, y, alpha)
    print(f"alpha {alpha:7.1f}: w = {res.w:.4f}, max |dw/dx| = {np.abs(res.dw_dx).max():.4f}, "
          f"max |dw/dy| = {np.abs(res.dw_dy).max():.4f}")

# %%
# Points far from the mean of ``x`` have the most leverage on the slope.
res = ridge_sensitivity(x, y, 0.1)
i = int(np.argmax(np.abs(res.dw_dy)))
print("most influential y:", i, "at x =", round(x[i], 3), "mean x =", round(x.mean(), 3))

# %%
# Check one entry against the closed form.
h = 1e-6
yp, ym = y.copy(), y.copy()
yp[i] += h
ym[i] -= h
fd = (ridge_closed_form(x, yp, 0.1)[0] - ridge_closed_form(x, ym, 0.1)[0]) / (2 * h)
print("dw/dy_i:", res.dw_dy[i], " finite differences:", fd)
