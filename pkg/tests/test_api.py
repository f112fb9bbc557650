import numpy as np
import pytest
from numpy.testing import assert_allclose

from solmap import (
    DiffEngine,
    DiffStateError,
    ForwardConstraintFunction,
    ForwardObjectiveFunction,
    ForwardVariablePrimal,
    ModelError,
    ProblemClass,
    ReverseConstraintFunction,
    ReverseObjectiveFunction,
    ReverseVariablePrimal,
    build_problem,
)
from solmap.applications import relu_layer
from solmap.functions import (
    ScalarAffineFunction,
    ScalarQuadraticFunction,
    VectorAffineFunction,
    inner_product,
)
from solmap.generators import random_conic, random_qp, random_scalar_lp
from solmap.solvers import SolverError


def saf(coefs, const=0.0):
    return ScalarAffineFunction.from_dense(np.asarray(coefs, dtype=float), const)


@pytest.fixture
def golden(golden_model):
    engine = DiffEngine(golden_model)
    assert engine.optimize().optimal
    return engine


def _infeasible():
    return build_problem({
        "variables": 1, "objective": {"linear": [[0, 1.0]]},
        "constraints": [
            {"id": "lo", "rows": [[0, 0, 1.0]], "set": {"type": "GreaterThan", "value": 1}},
            {"id": "hi", "rows": [[0, 0, 1.0]], "set": {"type": "LessThan", "value": 0}},
        ]})


class TestSolve:
    def test_golden_solution(self, golden):
        assert golden.problem_class is ProblemClass.QP
        assert golden.value("x") == pytest.approx(3.0, abs=1e-9)
        assert golden.dual("cons") == pytest.approx(2.0, abs=1e-9)
        assert golden.objective_value() == pytest.approx(6.0, abs=1e-8)

    def test_empty_model(self):
        engine = DiffEngine(build_problem({"variables": 2, "constraints": []}))
        assert engine.optimize().optimal
        engine.set(ReverseVariablePrimal(0), 1.0)
        engine.reverse_differentiate()
        assert inner_product(engine.get(ReverseObjectiveFunction()),
                             engine.get(ReverseObjectiveFunction())) == 0.0

    def test_infeasible_raises_on_differentiate(self):
        engine = DiffEngine(_infeasible())
        assert not engine.optimize().optimal
        with pytest.raises(SolverError):
            engine.forward_differentiate()
        with pytest.raises(SolverError):
            engine.reverse_differentiate()

    def test_unsolved_state(self, golden_model):
        engine = DiffEngine(golden_model)
        with pytest.raises(DiffStateError):
            engine.forward_differentiate()

    def test_solver_choice(self, golden_model):
        assert DiffEngine(golden_model, solver="admm").problem_class is ProblemClass.CONIC
        with pytest.raises(ValueError):
            DiffEngine(golden_model, solver="simplex")
        conic = random_conic(np.random.default_rng(0)).model
        with pytest.raises(ModelError):
            DiffEngine(conic, solver="ipm")


class TestGolden:
    @pytest.mark.parametrize("solver", ["auto", "admm"])
    def test_reverse(self, golden_model, solver):
        engine = DiffEngine(golden_model, solver=solver)
        engine.optimize()
        engine.set(ReverseVariablePrimal("x"), 1.0)
        engine.reverse_differentiate()
        g = engine.get(ReverseConstraintFunction("cons"))
        assert isinstance(g, ScalarAffineFunction)
        assert g.coefficient(0) == pytest.approx(-3.0, abs=1e-6)
        assert g.constant == pytest.approx(1.0, abs=1e-6)

    def test_forward_rhs(self, golden):
        golden.set(ForwardConstraintFunction("cons"), 1.0)
        golden.forward_differentiate()
        assert golden.get(ForwardVariablePrimal("x")) == pytest.approx(1.0, abs=1e-9)

    def test_forward_coefficient(self, golden):
        # (1 + t) x >= 3  gives  x = 3 / (1 + t)
        golden.set(ForwardConstraintFunction("cons"), saf([1.0]))
        golden.forward_differentiate()
        assert golden.get(ForwardVariablePrimal("x")) == pytest.approx(-3.0, abs=1e-9)


class TestTangentState:
    def test_unknown_ids(self, golden):
        with pytest.raises(ModelError):
            golden.set(ForwardConstraintFunction("nope"), 1.0)
        with pytest.raises(ModelError):
            golden.set(ReverseVariablePrimal("nope"), 1.0)
        with pytest.raises(ModelError):
            golden.set(ForwardObjectiveFunction(), saf([0.0, 1.0]))

    def test_get_before_compute(self, golden):
        with pytest.raises(DiffStateError):
            golden.get(ForwardVariablePrimal("x"))
        with pytest.raises(DiffStateError):
            golden.get(ReverseConstraintFunction("cons"))

    def test_round_trip(self, golden):
        f = saf([2.0], 0.5)
        golden.set(ForwardConstraintFunction("cons"), f)
        golden.set(ReverseVariablePrimal(0), 3.0)
        assert golden.get_input_tangent(ForwardConstraintFunction("cons")) == f
        assert golden.get_input_tangent(ReverseVariablePrimal("x")) == 3.0
        assert golden.get_input_tangent(ForwardObjectiveFunction()) == ScalarQuadraticFunction()

    def test_wrong_dimension(self, rng):
        engine = DiffEngine(random_qp(rng, 3, 2, 1).model)
        with pytest.raises(ValueError):
            engine.set(ForwardConstraintFunction("ineq"), saf([1.0, 0.0, 0.0]))

    def test_zero_inputs(self, rng):
        planted = random_qp(rng, 4, 3, 1)
        engine = DiffEngine(planted.model)
        engine.optimize()
        engine.forward_differentiate()
        assert all(engine.get(ForwardVariablePrimal(j)) == 0.0 for j in range(4))
        engine.reverse_differentiate()
        g = engine.get(ReverseConstraintFunction("ineq"))
        assert not np.any(g.dense(4)[0]) and not np.any(g.dense(4)[1])

    def test_reset(self, golden):
        golden.set(ForwardConstraintFunction("cons"), 1.0)
        golden.forward_differentiate()
        golden.reset_tangents()
        golden.reset_tangents()
        assert golden.get_input_tangent(ForwardConstraintFunction("cons")).constant == 0.0
        with pytest.raises(DiffStateError):
            golden.get(ForwardVariablePrimal("x"))

    def test_modes_coexist(self, golden):
        golden.set(ForwardConstraintFunction("cons"), 1.0)
        golden.set(ReverseVariablePrimal("x"), 1.0)
        golden.forward_differentiate()
        golden.reverse_differentiate()
        assert golden.get(ForwardVariablePrimal("x")) == pytest.approx(1.0, abs=1e-9)
        assert golden.get(ReverseConstraintFunction("cons")).constant == pytest.approx(1.0, abs=1e-9)


def _random_tangents(rng, engine):
    n = engine.model.n_vars
    obj = None
    if engine.problem_class is ProblemClass.QP:
        L = rng.standard_normal((n, n))
        quad = tuple((i, j, (L + L.T)[i, j]) for i in range(n) for j in range(i, n))
        obj = ScalarQuadraticFunction(quad, saf(rng.standard_normal(n)))
    else:
        obj = ScalarQuadraticFunction((), saf(rng.standard_normal(n)))
    cons = {}
    for con in engine.model.constraints:
        d = con.set.dim
        fn = VectorAffineFunction.from_dense(rng.standard_normal((d, n)), rng.standard_normal(d))
        cons[con.id] = fn.rows[0] if isinstance(con.function, ScalarAffineFunction) else fn
    return obj, cons


def _adjoint_gap(rng, engine):
    n = engine.model.n_vars
    obj, cons = _random_tangents(rng, engine)
    engine.set(ForwardObjectiveFunction(), obj)
    for cid, fn in cons.items():
        engine.set(ForwardConstraintFunction(cid), fn)
    seed = rng.standard_normal(n)
    for j in range(n):
        engine.set(ReverseVariablePrimal(j), seed[j])
    engine.forward_differentiate()
    engine.reverse_differentiate()
    lhs = sum(seed[j] * engine.get(ForwardVariablePrimal(j)) for j in range(n))
    rhs = inner_product(obj, engine.get(ReverseObjectiveFunction()))
    rhs += sum(inner_product(fn, engine.get(ReverseConstraintFunction(cid))) for cid, fn in cons.items())
    return abs(lhs - rhs) / max(1.0, abs(lhs))


class TestAdjoint:
    def test_qp(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 7))
            engine = DiffEngine(random_qp(rng, n, int(rng.integers(1, 5)), int(rng.integers(0, 2))).model)
            assert engine.optimize().optimal
            assert _adjoint_gap(rng, engine) <= 1e-8

    def test_scalar_lp(self, rng):
        for _ in range(10):
            engine = DiffEngine(random_scalar_lp(rng, int(rng.integers(2, 5))).model)
            assert engine.optimize().optimal
            assert _adjoint_gap(rng, engine) <= 1e-8

    def test_conic(self, rng):
        for _ in range(10):
            engine = DiffEngine(random_conic(rng, soc_dims=(3, 4)).model)
            assert engine.problem_class is ProblemClass.CONIC
            assert engine.optimize().optimal
            assert _adjoint_gap(rng, engine) <= 1e-8


class TestPathAgreement:
    def test_lp_on_both_paths(self, rng):
        for _ in range(10):
            planted = random_scalar_lp(rng, int(rng.integers(2, 5)))
            n = planted.model.n_vars
            qp, cone = DiffEngine(planted.model), DiffEngine(planted.model, solver="admm")
            assert qp.optimize().optimal and cone.optimize().optimal
            assert_allclose(cone.primal, qp.primal, atol=1e-6)
            _, cons = _random_tangents(rng, cone)
            seed = rng.standard_normal(n)
            for e in (qp, cone):
                for cid, fn in cons.items():
                    e.set(ForwardConstraintFunction(cid), fn)
                for j in range(n):
                    e.set(ReverseVariablePrimal(j), seed[j])
                e.forward_differentiate()
                e.reverse_differentiate()
            for j in range(n):
                assert abs(qp.get(ForwardVariablePrimal(j)) - cone.get(ForwardVariablePrimal(j))) <= 1e-6
            for cid in planted.model.constraint_ids:
                a, b = qp.get(ReverseConstraintFunction(cid)), cone.get(ReverseConstraintFunction(cid))
                assert_allclose(a.dense(n), b.dense(n), atol=1e-6)
                assert abs(a.constant - b.constant) <= 1e-6


class TestLoadSolution:
    def test_golden(self, golden_model):
        engine = DiffEngine(golden_model)
        engine.load_solution([3.0], {"cons": 2.0})
        assert engine.dual("cons") == 2.0
        engine.set(ReverseVariablePrimal("x"), 1.0)
        engine.reverse_differentiate()
        g = engine.get(ReverseConstraintFunction("cons"))
        assert g.coefficient(0) == pytest.approx(-3.0) and g.constant == pytest.approx(1.0)

    def test_matches_optimize(self, rng):
        planted = random_scalar_lp(rng, 3)
        ref = DiffEngine(planted.model)
        ref.optimize()
        engine = DiffEngine(planted.model)
        engine.load_solution(ref.primal, {cid: ref.dual(cid) for cid in planted.model.constraint_ids})
        for e in (ref, engine):
            e.set(ReverseVariablePrimal(0), 1.0)
            e.reverse_differentiate()
        for cid in planted.model.constraint_ids:
            assert_allclose(engine.get(ReverseConstraintFunction(cid)).dense(3),
                            ref.get(ReverseConstraintFunction(cid)).dense(3), atol=1e-12)

    def test_validation(self, golden_model):
        engine = DiffEngine(golden_model)
        with pytest.raises(ValueError):
            engine.load_solution([1.0, 2.0])
        with pytest.raises(ModelError):
            engine.load_solution([3.0], {"other": 1.0})


class TestDegenerate:
    def test_flagged(self):
        # both constraints active at x = 1, one of them redundant
        engine = DiffEngine(build_problem({
            "variables": 1, "objective": {"linear": [[0, 1.0]]},
            "constraints": [
                {"id": "a", "rows": [[0, 0, 1.0]], "set": {"type": "GreaterThan", "value": 1}},
                {"id": "b", "rows": [[0, 0, 2.0]], "set": {"type": "GreaterThan", "value": 2}},
            ]}))
        engine.optimize()
        engine.set(ReverseVariablePrimal(0), 1.0)
        engine.reverse_differentiate()
        assert engine.approximate


def test_relu_reverse_mask(rng):
    Y = rng.standard_normal((4, 6))
    g = rng.standard_normal((4, 6))
    out = relu_layer(Y, g)
    assert_allclose(out.x, np.maximum(Y, 0.0), atol=1e-9)
    assert_allclose(out.dl_dy, g * (Y > 0), atol=1e-9)
