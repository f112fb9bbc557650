import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from solmap.api import (
    DiffEngine,
    ForwardConstraintFunction,
    ForwardVariablePrimal,
    ReverseConstraintFunction,
    ReverseVariablePrimal,
)
from solmap.bridges import (
    apply_bridge,
    lower_model,
    make_bridge,
    map_forward_tangent,
    map_reverse_tangent,
    needs_bridge,
    unbridge_solution,
)
from solmap.functions import (
    EqualTo,
    GreaterThan,
    LessThan,
    Nonnegative,
    Nonpositive,
    ScalarAffineFunction,
    SecondOrder,
    VectorAffineFunction,
    Zero,
    inner_product,
)
from solmap.generators import random_scalar_lp


def saf(coefs, const=0.0):
    return ScalarAffineFunction.from_dense(np.asarray(coefs, dtype=float), const)


class TestTable:
    @pytest.mark.parametrize("source, target, A, c", [
        (GreaterThan(2.0), Nonnegative(1), [[1.0]], [-2.0]),
        (LessThan(2.0), Nonnegative(1), [[-1.0]], [2.0]),
        (EqualTo(2.0), Zero(1), [[1.0]], [-2.0]),
        (Nonpositive(2), Nonnegative(2), -np.eye(2), [0.0, 0.0]),
    ])
    def test_entries(self, source, target, A, c):
        b = make_bridge(source)
        assert b.target_set == target
        assert_array_equal(b.A, A)
        assert_array_equal(b.c_shift, c)

    def test_native_sets_pass_through(self):
        for s in (Zero(2), Nonnegative(3), SecondOrder(3)):
            assert not needs_bridge(s)
            with pytest.raises(TypeError):
                make_bridge(s)

    def test_apply(self):
        out = apply_bridge(make_bridge(LessThan(4.0)), saf([1.0, 2.0]))
        assert_allclose(out.dense(2)[0], [[-1.0, -2.0]])
        assert_allclose(out.dense(2)[1], [4.0])

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            apply_bridge(make_bridge(Nonpositive(2)), saf([1.0]))


class TestTangents:
    def test_forward_negation(self):
        out = map_forward_tangent(make_bridge(LessThan(0.0)), saf([2.0], 0.5))
        assert isinstance(out, ScalarAffineFunction)
        assert_allclose(out.dense(1), [-2.0])
        assert out.constant == -0.5

    def test_reverse_negation(self):
        out = map_reverse_tangent(make_bridge(LessThan(0.0)), saf([3.0], -1.0))
        assert_allclose(out.dense(1), [-3.0])
        assert out.constant == 1.0

    def test_vector(self):
        b = make_bridge(Nonpositive(2))
        fn = VectorAffineFunction.from_dense(np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([1.0, -1.0]))
        L, k = map_forward_tangent(b, fn).dense(2)
        assert_array_equal(L, -np.diag([1.0, 2.0]))
        assert_array_equal(k, [-1.0, 1.0])

    @pytest.mark.parametrize("source", [GreaterThan(1.0), LessThan(-2.0), EqualTo(0.5), Nonpositive(3)])
    def test_adjoint(self, source, rng):
        b = make_bridge(source)
        d = b.A.shape[0]
        for _ in range(10):
            u = VectorAffineFunction.from_dense(rng.standard_normal((d, 4)), rng.standard_normal(d))
            w = VectorAffineFunction.from_dense(rng.standard_normal((d, 4)), rng.standard_normal(d))
            lhs = inner_product(map_forward_tangent(b, u), w)
            rhs = inner_product(u, map_reverse_tangent(b, w))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestUnbridge:
    def test_greater_than(self):
        primal, dual = unbridge_solution(make_bridge(GreaterThan(3.0)), 0.0, 2.0)
        assert_array_equal(primal, [3.0])
        assert_array_equal(dual, [2.0])

    def test_less_than(self):
        primal, dual = unbridge_solution(make_bridge(LessThan(3.0)), 1.0, 2.0)
        assert_array_equal(primal, [2.0])
        assert_array_equal(dual, [-2.0])

    def test_lower_model_keeps_ids(self, golden_model):
        lowered = lower_model(golden_model)
        assert [lc.id for lc in lowered] == list(golden_model.constraint_ids)
        assert lowered[0].set == Nonnegative(1)
        assert lowered[0].source_set == GreaterThan(3.0)


def _solved_pair(rng):
    planted = random_scalar_lp(rng, n=int(rng.integers(2, 5)))
    user, hand = DiffEngine(planted.model), DiffEngine(planted.lowered)
    assert user.optimize().optimal and hand.optimize().optimal
    return planted, user, hand


class TestTransparency:
    def test_original_model_kkt(self, rng):
        for _ in range(10):
            planted, user, _ = _solved_pair(rng)
            model, x = planted.model, user.primal
            grad = model.objective.affine.dense(model.n_vars)
            acc = np.zeros_like(grad)
            for con in model.constraints:
                y = user.dual(con.id)
                a = con.function.dense(model.n_vars)
                acc += y * a
                value = con.function.evaluate(x)
                if isinstance(con.set, GreaterThan):
                    assert value >= con.set.value - 1e-6 and y >= -1e-6
                    assert abs(y * (value - con.set.value)) <= 1e-6
                elif isinstance(con.set, LessThan):
                    assert value <= con.set.value + 1e-6 and y <= 1e-6
                    assert abs(y * (value - con.set.value)) <= 1e-6
                else:
                    assert abs(value - con.set.value) <= 1e-6
            assert_allclose(acc, grad, atol=1e-6)

    def test_matches_hand_lowered(self, rng):
        for _ in range(10):
            planted, user, hand = _solved_pair(rng)
            n = planted.model.n_vars
            assert_allclose(user.primal, hand.primal, atol=1e-12)
            for cid, sign in planted.rhs_sign.items():
                assert abs(user.dual(cid) - sign * hand.dual(cid)) <= 1e-10

            coef, const = rng.standard_normal(n), rng.standard_normal()
            for cid, sign in planted.rhs_sign.items():
                user.set(ForwardConstraintFunction(cid), saf(coef, const))
                hand.set(ForwardConstraintFunction(cid), saf(sign * coef, -sign * const))
            user.forward_differentiate()
            hand.forward_differentiate()
            for j in range(n):
                assert abs(user.get(ForwardVariablePrimal(j)) - hand.get(ForwardVariablePrimal(j))) <= 1e-10

            seed = rng.standard_normal(n)
            for j in range(n):
                user.set(ReverseVariablePrimal(j), seed[j])
                hand.set(ReverseVariablePrimal(j), seed[j])
            user.reverse_differentiate()
            hand.reverse_differentiate()
            for cid, sign in planted.rhs_sign.items():
                gu = user.get(ReverseConstraintFunction(cid))
                gh = hand.get(ReverseConstraintFunction(cid))
                assert_allclose(gu.dense(n), sign * gh.rows[0].dense(n), atol=1e-10)
                assert abs(gu.constant + sign * gh.rows[0].constant) <= 1e-10
