"""Sensitivity analyses and optimization layers built on :class:`DiffEngine`.

Each application builds a small model, solves it, and pushes tangents
through the engine. The functions return plain arrays/dataclasses so the CLI
and the demo scripts can print or serialize them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .api import (
    DiffEngine,
    ForwardConstraintFunction,
    ForwardObjectiveFunction,
    ForwardVariablePrimal,
    ReverseConstraintFunction,
    ReverseObjectiveFunction,
    ReverseVariablePrimal,
)
from .functions import (
    GreaterThan,
    Nonnegative,
    ScalarAffineFunction,
    ScalarQuadraticFunction,
    VectorAffineFunction,
)
from .model import ModelBuilder, ProblemModel
from .solvers import SolverError, SolverSettings, Status

SUPPORT_TOL = 1e-6


# ---------------------------------------------------------------------------
# soft-margin SVM


def svm_model(X: np.ndarray, y: np.ndarray, lam: float) -> ProblemModel:
    """``min lam |w|^2 + sum xi  s.t.  y_i (X_i w + b) + xi_i >= 1, xi >= 0``.

    Variables are ordered ``w_0..w_{D-1}, b, xi_0..xi_{N-1}``; margin
    constraints are named ``margin_i`` and slack bounds ``slack_i``.
    """
    X = np.asarray(X, dtype=float)
    N, D = X.shape
    mb = ModelBuilder()
    w = mb.add_variables(D, "w")
    b = mb.add_variable("b")
    xi = mb.add_variables(N, "xi")
    quad = tuple((j, j, 2.0 * lam) for j in w)
    mb.set_objective(ScalarQuadraticFunction(quad, ScalarAffineFunction(tuple((k, 1.0) for k in xi))))
    for i in range(N):
        terms = [(w[j], y[i] * X[i, j]) for j in range(D)] + [(b, y[i]), (xi[i], 1.0)]
        mb.add_constraint(f"margin_{i}", ScalarAffineFunction(tuple(terms)), GreaterThan(1.0))
    for i in range(N):
        mb.add_constraint(f"slack_{i}", ScalarAffineFunction(((xi[i], 1.0),)), GreaterThan(0.0))
    return mb.build()


@dataclass
class SVMSensitivity:
    w: np.ndarray
    b: float
    duals: np.ndarray
    sensitivity: np.ndarray
    support: np.ndarray = field(init=False)
    on_margin: np.ndarray = field(init=False)

    def __post_init__(self):
        # dual at the upper bound 1 means the point violates the margin
        self.support = self.duals > SUPPORT_TOL
        self.on_margin = self.support & (self.duals < 1.0 - SUPPORT_TOL)


def svm_sensitivity(X, y, lam: float, settings: SolverSettings | None = None) -> SVMSensitivity:
    """Per-point ``|dw| + |db|`` when every feature of point ``i`` moves together.

    Shifting all of ``X_i`` by ``t`` adds ``t y_i sum(w)`` to margin
    constraint ``i``, which is the tangent pushed forward here.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N, D = X.shape
    engine = DiffEngine(svm_model(X, y, lam), settings=settings)
    status = engine.optimize()
    if not status.optimal:
        raise SolverError(status)
    x = engine.primal
    sens = np.zeros(N)
    for i in range(N):
        engine.reset_tangents()
        tangent = ScalarAffineFunction(tuple((j, y[i]) for j in range(D)))
        engine.set_input_tangent(ForwardConstraintFunction(f"margin_{i}"), tangent)
        engine.forward_differentiate()
        dw = np.array([engine.get_output_tangent(ForwardVariablePrimal(j)) for j in range(D)])
        db = engine.get_output_tangent(ForwardVariablePrimal(D))
        sens[i] = np.linalg.norm(dw) + abs(db)
    duals = np.array([engine.dual(f"margin_{i}") for i in range(N)])
    return SVMSensitivity(x[:D], float(x[D]), duals, sens)


def svm_dataset(n: int, d: int, seed: int, spread: float = 0.5):
    """Two Gaussian blobs centered at ``+-1.5`` along every axis."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X = 1.5 * y[:, None] * np.ones(d) / np.sqrt(d) + spread * rng.standard_normal((n, d))
    return X, y


def svm_square_instance():
    """Four points where only ``(-1, 0)`` and ``(1, 0)`` sit on the margin."""
    X = np.array([[-1.0, 0.0], [-2.0, 1.5], [1.0, 0.0], [2.0, -1.5]])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    return X, y


# ---------------------------------------------------------------------------
# univariate ridge regression


def ridge_model(x, y, alpha: float) -> ProblemModel:
    """``min sum (y_i - w x_i - b)^2 + alpha w^2`` over ``(w, b)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    N = len(x)
    quad = {(0, 0): x @ x + alpha, (0, 1): 2.0 * x.sum(), (1, 1): float(N)}
    lin = {0: -2.0 * (x @ y), 1: -2.0 * y.sum()}
    mb = ModelBuilder()
    mb.add_variable("w")
    mb.add_variable("b")
    mb.set_objective(ScalarQuadraticFunction.from_natural(quad, lin, float(y @ y)))
    return mb.build()


def ridge_closed_form(x, y, alpha: float) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    K = np.array([[x @ x + alpha, x.sum()], [x.sum(), len(x)]])
    w, b = np.linalg.solve(K, [x @ y, y.sum()])
    return float(w), float(b)


def ridge_tangent_x(xi: float, yi: float) -> ScalarQuadraticFunction:
    """Objective derivative in ``x_i``: ``2 w^2 x_i + 2 b w - 2 w y_i``."""
    return ScalarQuadraticFunction.from_natural({(0, 0): 2.0 * xi, (0, 1): 2.0}, {0: -2.0 * yi})


def ridge_tangent_y(xi: float, yi: float) -> ScalarQuadraticFunction:
    """Objective derivative in ``y_i``: ``2 y_i - 2 b - 2 w x_i``."""
    return ScalarQuadraticFunction.from_natural(None, {0: -2.0 * xi, 1: -2.0}, 2.0 * yi)


@dataclass
class RidgeSensitivity:
    w: float
    b: float
    dw_dx: np.ndarray
    dw_dy: np.ndarray


def ridge_sensitivity(x, y, alpha: float, settings: SolverSettings | None = None) -> RidgeSensitivity:
    """``dw/dx_i`` and ``dw/dy_i`` for every data point.

    The tangents are the parameter derivatives of the objective; ``x_i``
    enters quadratically (``x_i^2 w^2``), so its tangent is the first-order
    Taylor term ``2 x_i w^2 + ...`` rather than a plain coefficient.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    engine = DiffEngine(ridge_model(x, y, alpha), settings=settings)
    status = engine.optimize()
    if not status.optimal:
        raise SolverError(status)
    w, b = engine.primal
    out = np.zeros((2, len(x)))
    for k, make in enumerate((ridge_tangent_x, ridge_tangent_y)):
        for i in range(len(x)):
            engine.reset_tangents()
            engine.set_input_tangent(ForwardObjectiveFunction(), make(x[i], y[i]))
            engine.forward_differentiate()
            out[k, i] = engine.get_output_tangent(ForwardVariablePrimal("w"))
    return RidgeSensitivity(float(w), float(b), out[0], out[1])


def ridge_dataset(n: int, seed: int):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, n)
    y = 1.5 * x - 0.5 + 0.3 * rng.standard_normal(n)
    return x, y


# ---------------------------------------------------------------------------
# regularization hyperparameter by gradient descent


@dataclass
class RegressionData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray

    @property
    def n_features(self) -> int:
        return self.X_train.shape[1]


def regression_dataset(seed: int, n_train: int = 40, n_test: int = 200, n_features: int = 20,
                       noise: float = 1.0) -> RegressionData:
    """Noisy linear data with few training points, so shrinkage pays off."""
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(n_features) / np.sqrt(n_features)
    X = rng.standard_normal((n_train + n_test, n_features))
    y = X @ w_true + noise * rng.standard_normal(n_train + n_test)
    return RegressionData(X[:n_train], y[:n_train], X[n_train:], y[n_train:])


def regularized_model(X, y, alpha: float) -> ProblemModel:
    """``min 1/(2 n D) |Xw - y|^2 + alpha/(2 D) |w|^2``."""
    n, D = X.shape
    Q = (X.T @ X / n + alpha * np.eye(D)) / D
    c = -(X.T @ y) / (n * D)
    mb = ModelBuilder()
    mb.add_variables(D, "w")
    mb.set_objective(ScalarQuadraticFunction.from_matrix(Q, c, float(y @ y) / (2 * n * D)))
    return mb.build()


def holdout_loss(data: RegressionData, w: np.ndarray) -> float:
    r = data.X_test @ w - data.y_test
    return float(r @ r) / (2 * len(r) * data.n_features)


def fit_ridge(data: RegressionData, alpha: float) -> np.ndarray:
    """Direct linear-algebra fit, used as an oracle for the engine."""
    X, y = data.X_train, data.y_train
    n, D = X.shape
    return np.linalg.solve(X.T @ X / n + alpha * np.eye(D), X.T @ y / n)


def alpha_gradient(data: RegressionData, alpha: float,
                   settings: SolverSettings | None = None) -> tuple[float, float]:
    """``(test loss, d test loss / d alpha)`` at the fitted weights.

    ``dw/dalpha`` comes from one forward pass with the objective tangent
    ``<w, w>/(2D)``; the chain rule then contracts it with the loss gradient.
    """
    D = data.n_features
    engine = DiffEngine(regularized_model(data.X_train, data.y_train, alpha), settings=settings)
    status = engine.optimize()
    if not status.optimal:
        raise SolverError(status)
    w = engine.primal
    tangent = ScalarQuadraticFunction(tuple((j, j, 1.0 / D) for j in range(D)))
    engine.set_input_tangent(ForwardObjectiveFunction(), tangent)
    engine.forward_differentiate()
    dw = np.array([engine.get_output_tangent(ForwardVariablePrimal(j)) for j in range(D)])
    r = data.X_test @ w - data.y_test
    dl_dw = data.X_test.T @ r / (len(r) * D)
    return holdout_loss(data, w), float(dl_dw @ dw)


ALPHA_FLOOR = 1e-8


@dataclass
class DescentStep:
    iteration: int
    alpha: float
    grad: float
    loss: float
    note: str = ""


def hyperparameter_descent(data: RegressionData, alpha0: float, step: float,
                           max_iters: int = 500, grad_tol: float = 1e-3,
                           settings: SolverSettings | None = None) -> list[DescentStep]:
    """Fixed-step gradient descent on the test loss in ``alpha``."""
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    alpha = alpha0
    history = []
    for it in range(max_iters + 1):
        loss, grad = alpha_gradient(data, alpha, settings)
        history.append(DescentStep(it, alpha, grad, loss))
        if abs(grad) <= grad_tol or it == max_iters:
            break
        alpha = alpha - step * grad
        if alpha <= 0:
            warnings.warn(f"alpha stepped to {alpha:.3g}; clamped to {ALPHA_FLOOR}", RuntimeWarning)
            history[-1].note = "clamped"
            alpha = ALPHA_FLOOR
    return history


# ---------------------------------------------------------------------------
# projection layers


def relu_model(Y: np.ndarray) -> ProblemModel:
    """Batched ``min x'x - 2y'x  s.t.  x >= 0``, one block per row of ``Y``."""
    B, S = Y.shape
    mb = ModelBuilder()
    mb.add_variables(B * S, "x")
    quad = tuple((k, k, 2.0) for k in range(B * S))
    mb.set_objective(ScalarQuadraticFunction(quad, ScalarAffineFunction.from_dense(-2.0 * Y.ravel())))
    for k in range(B):
        rows = tuple(ScalarAffineFunction(((k * S + j, 1.0),)) for j in range(S))
        mb.add_constraint(f"nonneg_{k}", VectorAffineFunction(rows), Nonnegative(S))
    return mb.build()


def polytope_model(Y: np.ndarray, W: np.ndarray, bvec: np.ndarray) -> ProblemModel:
    """Batched ``min x'x - 2y'x  s.t.  W_i x >= b_i`` with shared halfspaces."""
    B, S = Y.shape
    mb = ModelBuilder()
    mb.add_variables(B * S, "x")
    quad = tuple((k, k, 2.0) for k in range(B * S))
    mb.set_objective(ScalarQuadraticFunction(quad, ScalarAffineFunction.from_dense(-2.0 * Y.ravel())))
    for k in range(B):
        for i in range(W.shape[0]):
            fn = ScalarAffineFunction(tuple((k * S + j, W[i, j]) for j in range(S)))
            mb.add_constraint(f"half_{i}_{k}", fn, GreaterThan(float(bvec[i])))
    return mb.build()


@dataclass
class LayerPullback:
    x: np.ndarray
    dl_dx: np.ndarray
    dl_dy: np.ndarray
    dl_dw: np.ndarray | None = None
    dl_db: np.ndarray | None = None
    approximate: bool = False


def _pullback(engine: DiffEngine, B: int, S: int, dl_dx: np.ndarray):
    status = engine.optimize()
    if not status.optimal:
        raise SolverError(status)
    for k, g in enumerate(dl_dx.ravel()):
        engine.set_input_tangent(ReverseVariablePrimal(k), g)
    engine.reverse_differentiate()
    obj = engine.get_output_tangent(ReverseObjectiveFunction())
    dc = obj.affine.dense(B * S)
    # c = -2y, so dl/dy = -2 dl/dc
    return engine.primal.reshape(B, S), (-2.0 * dc).reshape(B, S)


def relu_layer(Y: np.ndarray, dl_dx: np.ndarray, settings: SolverSettings | None = None) -> LayerPullback:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    B, S = Y.shape
    engine = DiffEngine(relu_model(Y), settings=settings)
    x, dl_dy = _pullback(engine, B, S, dl_dx)
    return LayerPullback(x, dl_dx, dl_dy, approximate=engine.approximate)


def polytope_layer(Y: np.ndarray, W: np.ndarray, bvec: np.ndarray, dl_dx: np.ndarray,
                   settings: SolverSettings | None = None) -> LayerPullback:
    """Projection onto ``{x : W x >= b}`` with pullbacks to ``y``, ``W``, ``b``.

    The loss is ``mean_k <dl_dx[k], x_k>``; ``dl_dy`` is reported per sample
    for ``<dl_dx[k], x_k>``, ``dl_dw`` and ``dl_db`` for the batch mean.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    B, S = Y.shape
    engine = DiffEngine(polytope_model(Y, W, bvec), settings=settings)
    x, dl_dy = _pullback(engine, B, S, dl_dx)
    dW = np.zeros_like(W, dtype=float)
    db = np.zeros(W.shape[0])
    for k in range(B):
        for i in range(W.shape[0]):
            g = engine.get_output_tangent(ReverseConstraintFunction(f"half_{i}_{k}"))
            # entries outside sample k's block belong to structurally zero coefficients
            for v, coef in g.terms:
                if k * S <= v < (k + 1) * S:
                    dW[i, v - k * S] += coef
            db[i] += g.constant
    return LayerPullback(x, dl_dx, dl_dy, dW / B, db / B, engine.approximate)


def polytope_feasible(W: np.ndarray, bvec: np.ndarray) -> bool:
    """Whether ``{x : W x >= b}`` is nonempty, by the QP solver on a projection."""
    S = W.shape[1]
    engine = DiffEngine(polytope_model(np.zeros((1, S)), W, bvec))
    return engine.optimize().tag is Status.OPTIMAL
