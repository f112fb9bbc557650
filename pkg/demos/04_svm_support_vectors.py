"""
Which training points move a support vector machine?
====================================================

The soft-margin SVM hyperplane depends only on its support vectors. Moving
any other point leaves ``(w, b)`` unchanged, and the derivative shows it.
"""

import numpy as np

from solmap.applications import svm_dataset, svm_sensitivity, svm_square_instance

X, y = svm_square_instance()
res = svm_sensitivity(X, y, lam=0.05)
print("w =", res.w, " b =", round(res.b, 12))
for i in range(len(y)):
    print(f"  point {X[i]}  label {y[i]:+.0f}  dual {res.duals[i]:.3f}  sensitivity {res.sensitivity[i]:.4f}")

# %%
# The same holds on random blobs: sort points by sensitivity and the
# support vectors come first.
X, y = svm_dataset(n=30, d=2, seed=4)
res = svm_sensitivity(X, y, lam=0.05)
order = np.argsort(-res.sensitivity)
print("support vectors:", np.flatnonzero(res.support))
print("largest sensitivities:", np.round(res.sensitivity[order[:5]], 4))
print("largest among the rest:", res.sensitivity[~res.support].max())
