import random
from math import comb

import pytest
from hypothesis import given, strategies as st

from cohen import words as W
from cohen.collect import Integers, ModPrimePower, collect, commutator, make_context, random_expr
from cohen.identities import (FALSIFIED, VERIFIED, binomial_valuation_failures, compositions,
                              find_q1_counterexample, lhs_engel, lhs_pr, lhs_q1, lhs_q2, p_valuation,
                              power_recursion_pr, rhs_engel_decomposition, rhs_q1, rhs_q2,
                              rhs_shuffle_form, verify_identity)
from cohen.perm import count_divisions

from strategies import exprs

Z4 = make_context(4, Integers())
M4 = make_context(4, ModPrimePower(3, 2))
X, G = W.Gen(1), W.parse("x2 x3")


def test_rhs_shapes():
    assert W.to_string(rhs_q1(1, G, 1)) == "[x1,x2 x3]"
    assert W.unfold(rhs_q1(1, G, 2)) == W.parse("[x1,x2 x3]^2 [[x1,x2 x3],x2 x3]")
    assert W.to_string(rhs_q1(1, G, 2)) == "[x1,x2 x3]^2 [x1,_2 x2 x3]"
    assert W.to_string(rhs_q2(G, 1, 1)) == "(x2 x3) x1"
    assert W.to_string(rhs_q2(G, 1, 2)) == "(x2 x3)^2 x1^2 [x1,x2 x3]"
    assert W.to_string(rhs_engel_decomposition(2, 1)) == "[x3,x1] [x3,x2] [x3,x1,x2]"
    with pytest.raises(ValueError):
        rhs_q1(1, G, 0)
    with pytest.raises(ValueError):
        rhs_engel_decomposition(2, 3)


def test_q_examples():
    z3 = make_context(3, Integers())
    g = W.parse("x1 x2")
    assert verify_identity(lhs_q1(3, g, 3), rhs_q1(3, g, 3), z3).ok
    g = W.parse("x1 x2 x3")
    assert verify_identity(lhs_q2(g, 4, 4), rhs_q2(g, 4, 4), Z4).ok


@pytest.mark.parametrize("ctx", [Z4, M4], ids=["Z", "Z/9"])
@given(g=exprs(n=4, max_leaves=5, max_exp=3), x=st.integers(1, 4), k=st.integers(1, 12))
def test_q1_q2_any_g(ctx, g, x, k):
    assert verify_identity(lhs_q1(x, g, k), rhs_q1(x, g, k), ctx).ok
    assert verify_identity(lhs_q2(g, x, k), rhs_q2(g, x, k), ctx).ok


def test_factor_order_immaterial():
    rng = random.Random(0)
    for n in (2, 3, 4):
        ctx = make_context(n + 1, ModPrimePower(3, 2))
        for l in range(1, n + 1):
            rhs = rhs_engel_decomposition(n, l)
            ref = collect(rhs, ctx)
            for _ in range(3):
                factors = list(rhs.factors)
                rng.shuffle(factors)
                assert collect(W.Product(tuple(factors)), ctx) == ref
    g = W.parse("x2 x3 x4")
    rhs = rhs_q1(1, g, 5)
    factors = list(rhs.factors)
    rng.shuffle(factors)
    assert collect(W.Product(tuple(factors)), Z4) == collect(rhs, Z4)


def test_engel_l_equals_n_is_all_permutations():
    rhs = rhs_engel_decomposition(3, 3)
    assert len(rhs.factors) == 6 and all(isinstance(f, W.Bracket) for f in rhs.factors)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_engel_decomposition(n):
    ctx = make_context(n + 1, ModPrimePower(3, 2))
    for l in range(1, n + 1):
        assert verify_identity(lhs_engel(n, l), rhs_engel_decomposition(n, l), ctx).ok
        assert verify_identity(rhs_shuffle_form(n, l), rhs_engel_decomposition(n, l), ctx).ok
    assert collect(lhs_engel(n, n + 1), ctx).is_identity()


def test_engel_decomposition_integral():
    ctx = make_context(4, Integers())
    for l in range(1, 4):
        assert verify_identity(lhs_engel(3, l), rhs_engel_decomposition(3, l), ctx).ok


def test_shuffle_form_factor_multiset():
    for n in (2, 3, 4):
        for l in range(1, n + 1):
            tally = {}
            for f in rhs_shuffle_form(n, l).factors:
                tally[f] = tally.get(f, 0) + 1
            expected = {}
            for f in rhs_engel_decomposition(n, l).factors:
                base, d = (f.base, f.exponent) if isinstance(f, W.Power) else (f, 1)
                expected[base] = d
            assert tally == expected
    # l=2, n=2: the two arrangements of {1,2} each split once into two singletons
    assert sorted(W.to_string(f) for f in rhs_shuffle_form(2, 2).factors) == ["[x3,x1,x2]", "[x3,x2,x1]"]
    assert count_divisions((1, 2), 2) == count_divisions((2, 1), 2) == 1


def test_compositions():
    assert list(compositions(4, 2)) == [(1, 3), (2, 2), (3, 1)]
    assert list(compositions(3, 3)) == [(1, 1, 1)]
    assert len(list(compositions(7, 3))) == comb(6, 2)


def test_pr_small_example():
    rhs = power_recursion_pr(1, 3, 1)
    assert W.to_string(rhs) == "x1^3 [x2,_2 x1]"
    ctx = make_context(2, ModPrimePower(3, 1))
    assert verify_identity(lhs_pr(1, 3, 1), rhs, ctx).ok


@pytest.mark.parametrize("p, r", [(3, 2), (5, 2), (3, 1)])
def test_pr(p, r):
    for n in (1, 2, 3):
        ctx = make_context(n + 1, ModPrimePower(p, r))
        assert verify_identity(lhs_pr(n, p, r), power_recursion_pr(n, p, r), ctx).ok


@pytest.mark.parametrize("p, r", [(3, 1), (3, 2), (3, 3), (3, 4), (5, 1), (5, 2), (5, 3), (7, 2), (11, 2)])
def test_binomial_valuation(p, r):
    assert binomial_valuation_failures(p, r) == []
    q = p ** r
    for i in range(1, q):
        if i % p:
            assert comb(q, i) % q == 0


def test_p_valuation():
    assert p_valuation(54, 3) == 3
    assert p_valuation(7, 3) == 0
    with pytest.raises(ValueError):
        p_valuation(0, 3)


def test_perturbed_rhs_is_falsified():
    rhs = rhs_engel_decomposition(3, 2)
    factors = list(rhs.factors)
    f = factors[0]
    factors[0] = W.Power(f.base, f.exponent + 1) if isinstance(f, W.Power) else W.Power(f, 2)
    ctx = make_context(4, ModPrimePower(3, 2))
    rep = verify_identity(lhs_engel(3, 2), W.Product(tuple(factors)), ctx, "engel", {"n": 3, "l": 2})
    assert rep.status == FALSIFIED
    doc = rep.to_json()
    assert doc["lhs_nf"] != doc["rhs_nf"]
    assert verify_identity(lhs_engel(3, 2), rhs, ctx).status == VERIFIED
    assert "lhs_nf" not in verify_identity(lhs_engel(3, 2), rhs, ctx).to_json()


def test_q1_holds_for_non_generator_below_weight_five():
    assert find_q1_counterexample(make_context(4, Integers()), budget=30) is None


def test_q1_fails_for_non_generator_x():
    ctx = make_context(5, Integers())
    x, g = W.parse("x1 x2"), W.parse("x3 x4 x5")
    rep = verify_identity(lhs_q1(x, g, 3), rhs_q1(x, g, 3), ctx)
    assert rep.status == FALSIFIED
    # the discrepancy lives in weight 5
    diff = set(rep.lhs_nf.coeffs) ^ set(rep.rhs_nf.coeffs)
    assert {ctx.weights[i] for i, _ in diff} == {5}


def test_x_commutators_commute():
    """Elements ``[x_{n+1}, h]`` pairwise commute."""
    rng = random.Random(2)
    for n, mode in ((3, Integers()), (4, ModPrimePower(3, 2))):
        ctx = make_context(n + 1, mode)
        xs = W.Gen(n + 1)
        for _ in range(40):
            h1, h2 = random_expr(n, rng), random_expr(n, rng)
            a = collect(W.Bracket(xs, h1), ctx)
            b = collect(W.Bracket(xs, h2), ctx)
            assert commutator(a, b, ctx).is_identity()
