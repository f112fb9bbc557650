"""
Differentiating a one-line linear program
=========================================

The smallest useful example: minimize ``2x`` subject to ``x >= 3``. The
solution sits on the constraint, so moving the constraint moves ``x``.
"""

# %%
# Build the model from plain Python data, the same layout the command-line
# problem files use.
from solmap import (
    DiffEngine,
    ForwardConstraintFunction,
    ForwardVariablePrimal,
    ReverseConstraintFunction,
    ReverseVariablePrimal,
    ScalarAffineFunction,
    build_problem,
)

model = build_problem({
    "variables": ["x"],
    "objective": {"linear": [["x", 2.0]]},
    "constraints": [
        {"id": "cons", "rows": [[0, "x", 1.0]], "set": {"type": "GreaterThan", "value": 3.0}},
    ],
})
engine = DiffEngine(model)
print("status:", engine.optimize())
print("x =", engine.value("x"), " dual =", engine.dual("cons"))

# %%
# Reverse mode: seed ``dl/dx = 1`` and read the gradient with respect to the
# constraint function. The constraint ``a x >= r`` gets a gradient
# ``g_a x + g_r``; here ``x = r / a`` so ``dx/da = -3`` and ``dx/dr = 1``.
engine.set(ReverseVariablePrimal("x"), 1.0)
engine.reverse_differentiate()
grad = engine.get(ReverseConstraintFunction("cons"))
print("gradient: coefficient", grad.coefficient(0), " constant", grad.constant)

# %%
# Forward mode answers the same question one direction at a time. Push the
# coefficient of ``x`` up by one unit:
engine.set(ForwardConstraintFunction("cons"), ScalarAffineFunction.from_dense([1.0]))
engine.forward_differentiate()
print("dx along the coefficient:", engine.get(ForwardVariablePrimal("x")))
