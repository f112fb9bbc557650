"""
Constraints written the natural way
===================================

Models may use ``>=``, ``<=`` and ``==`` constraints. They are rewritten to
the standard cones internally, and tangents, gradients and duals are carried
back so that everything reads in terms of the model as written.
"""

import numpy as np

from solmap import DiffEngine, ReverseConstraintFunction, ReverseVariablePrimal
from solmap.generators import random_scalar_lp

rng = np.random.default_rng(2)
planted = random_scalar_lp(rng, n=3)
for con in planted.model.constraints:
    print(f"  {con.id}: {type(con.set).__name__}({con.set.value:+.3f})")

# %%
# Duals follow the sign of the constraint as written: ``>=`` rows get
# nonnegative duals, ``<=`` rows nonpositive ones.
engine = DiffEngine(planted.model)
engine.optimize()
print("x =", np.round(engine.primal, 6))
print("duals:", {cid: round(engine.dual(cid), 4) for cid in planted.model.constraint_ids})

# %%
# The gradient of ``x_0`` with respect to each right-hand side is the
# constant of the constraint gradient.
engine.set(ReverseVariablePrimal(0), 1.0)
engine.reverse_differentiate()
for cid in planted.model.constraint_ids:
    print(f"  dx0/d rhs of {cid}: {engine.get(ReverseConstraintFunction(cid)).constant:+.4f}")
