import itertools
import random

import pytest

from cohen import words as W
from cohen.collect import Integers, ModPrimePower, collect, commutator, make_context, multiply, power
from cohen.subgroups import (INCONCLUSIVE, MEMBER, NON_MEMBER, ClaimRangeError, SubgroupHandle,
                             bn_subgroup, derived_pair, gamma, membership, normal_closure,
                             power_subgroup, product_span, span, trivial, verify_claims, whole_group)

K3 = make_context(3, ModPrimePower(3, 2))
K4 = make_context(4, ModPrimePower(3, 2))
K4_25 = make_context(4, ModPrimePower(5, 2))


def c(text, ctx):
    return collect(W.parse(text, ctx.n), ctx)


def random_word(S: SubgroupHandle, rng, length=6):
    ctx = S.ctx
    g = ctx.identity
    gens = S.sequence
    for _ in range(length):
        if gens:
            g = multiply(g, power(rng.choice(gens), rng.randrange(-4, 5), ctx), ctx)
    return g


def same_members(A, B):
    return all(B.contains(h) for h in A.sequence) and all(A.contains(h) for h in B.sequence)


def test_integral_mode_rejected():
    with pytest.raises(ValueError):
        span([], make_context(2, Integers()))


def test_span_examples():
    t = span([K3.identity], K3)
    assert t.is_trivial() and membership(K3.identity, t).status == MEMBER
    assert membership(K3.generator(1), t).status == NON_MEMBER
    k1 = make_context(1, ModPrimePower(3, 2))
    s = span([k1.generator(1)], k1)
    assert membership(c("x1^5", k1), s).status == MEMBER and s.order() == 9
    s = span([c("[x1,x2]", K3), c("[x1,x3]", K3)], K3)
    assert membership(c("[x1,x2] [x1,x3]", K3), s).status == MEMBER
    assert membership(K3.generator(1), s).status == NON_MEMBER


def test_echelon_shape():
    s = span([c("x1 x2", K4), c("[x1,x3] x4^3", K4), c("x2^3", K4)], K4)
    leads = [h.coeffs[0][0] for h in s.sequence]
    assert leads == sorted(set(leads))
    for h in s.sequence:
        e = h.coeffs[0][1]
        assert e in (1, 3)


def test_normal_closure_examples():
    k2 = make_context(2, ModPrimePower(3, 2))
    n = normal_closure([k2.generator(1)], k2)
    assert n.contains(k2.generator(1)) and n.contains(c("[x1,x2]", k2))
    assert not n.contains(k2.generator(2))
    assert normal_closure([], K3).is_trivial()
    assert n.is_normal()


def test_gamma_series():
    sizes = [len(gamma(k, K4)) for k in range(1, 6)]
    assert sizes == [24, 20, 14, 6, 0]
    g2 = gamma(2, K4)
    weight2 = span([K4.basis_element(i) for i, b in enumerate(K4.basis) if b.weight >= 2], K4)
    assert same_members(g2, weight2)
    gens = [commutator(K4.generator(i), K4.generator(j), K4) for i, j in itertools.combinations(range(1, 5), 2)]
    assert same_members(normal_closure(gens, K4), weight2)
    k2 = make_context(2, ModPrimePower(3, 2))
    assert same_members(gamma(2, k2), span([c("[x1,x2]", k2)], k2))
    for k in range(2, 5):
        assert all(gamma(k, K4).contains(h) for h in gamma(k + 1, K4).sequence)
    for seq in itertools.permutations(range(1, 5), 3):
        assert g2.contains(c("[" + ",".join(f"x{i}" for i in seq) + "]", K4))
    assert gamma(4, K3).is_trivial()


def test_commutator_of_series_terms():
    for j, k in ((1, 2), (2, 2), (1, 3)):
        A, B, target = gamma(j, K4), gamma(k, K4), gamma(j + k, K4)
        for a in A.sequence:
            for b in B.sequence:
                assert target.contains(commutator(a, b, K4))


def test_derived_pair_examples():
    g2 = gamma(2, K3)
    assert derived_pair(g2, g2).is_trivial()
    g22 = derived_pair(gamma(2, K4), gamma(2, K4))
    assert not g22.is_trivial() and g22.provenance == "Exact"
    assert g22.contains(c("[[x1,x2],[x3,x4]]", K4))
    assert all(gamma(4, K4).contains(h) for h in g22.sequence)
    assert derived_pair(trivial(K4), gamma(2, K4)).is_trivial()


def test_derived_pair_non_normal_is_exact_subgroup():
    B = bn_subgroup(K4, 3)
    assert not B.is_normal()
    D = derived_pair(B, gamma(2, K4))
    assert D.provenance == "Exact"
    for a in B.sequence:
        for b in gamma(2, K4).sequence:
            assert D.contains(commutator(a, b, K4))


def test_power_subgroup_examples():
    g2 = gamma(2, K4)
    assert same_members(power_subgroup(g2, 1), g2)
    assert power_subgroup(g2, 9).is_trivial()
    g4 = gamma(4, K4_25)
    p5 = power_subgroup(g4, 5)
    assert p5.provenance == "Exact"
    expected = span([power(K4_25.basis_element(i), 5, K4_25) for i, b in enumerate(K4_25.basis) if b.weight == 4],
                    K4_25)
    assert same_members(p5, expected)
    assert power_subgroup(g2, 3).provenance == "UnderApprox"


def test_bn_subgroup():
    b5 = bn_subgroup(K4_25, 5)
    assert all(b5.contains(K4_25.basis_element(i)) for i, b in enumerate(K4_25.basis) if b.weight >= 2)
    b3 = bn_subgroup(K4, 3)
    assert len(b3) == 12
    for i, b in enumerate(K4.basis):
        if b.weight in (2, 4):
            assert b3.contains(K4.basis_element(i))
    assert not b3.contains(c("[x1,x2,x3]", K4))
    k2 = make_context(2, ModPrimePower(3, 2))
    assert same_members(bn_subgroup(k2, 3), span([c("[x1,x2]", k2)], k2))
    with pytest.raises(ValueError):
        bn_subgroup(K4, 5)


def test_membership_basics():
    for S in (gamma(2, K4), bn_subgroup(K4, 3), whole_group(K4)):
        assert membership(K4.identity, S).status == MEMBER
    v = membership(K4.generator(1), gamma(2, K4))
    assert v.status == NON_MEMBER and v.to_json()["status"] == "NonMember"


def test_under_approximation_gives_inconclusive():
    S = power_subgroup(gamma(2, K4), 3)
    v = membership(c("[x1,x2]", K4), S)
    assert v.status == INCONCLUSIVE and v.provenance == "UnderApprox"


def test_sifting_soundness():
    rng = random.Random(0)
    subs = [gamma(2, K4), gamma(3, K4), bn_subgroup(K4, 3), derived_pair(gamma(2, K4), gamma(2, K4)),
            span([c("x1 x2^2", K4), c("[x3,x4]", K4)], K4)]
    for S in subs:
        for _ in range(200):
            assert membership(random_word(S, rng), S).status == MEMBER


def test_generator_order_does_not_matter():
    rng = random.Random(1)
    gens = [c(t, K4) for t in ("x1 x2", "[x1,x3] x4", "x2^3 [x2,x4]", "[x1,x2,x3]")]
    ref = span(gens, K4)
    for _ in range(5):
        shuffled = gens[:]
        rng.shuffle(shuffled)
        other = span(shuffled, K4)
        assert same_members(ref, other) and ref.order() == other.order()


def test_product_span_normal_factors_exact():
    g2 = gamma(2, K4)
    prod = product_span([power_subgroup(g2, 3), derived_pair(g2, g2)])
    assert not prod.over
    assert product_span([trivial(K4), trivial(K4)]).is_trivial()


def test_product_span_non_normal_flags_over():
    k2 = make_context(2, ModPrimePower(3, 2))
    A, B = span([k2.generator(1)], k2, "<x1>"), span([k2.generator(2)], k2, "<x2>")
    P = product_span([A, B])
    assert P.over and P.provenance == "OverApprox"
    assert membership(c("x1^2 x2^4", k2), P).status == MEMBER
    v = membership(c("x2 x1", k2), P)
    assert P.contains(c("x2 x1", k2)) and v.status == NON_MEMBER
    g2 = gamma(2, K4)
    B = bn_subgroup(K4, 3)
    assert membership(K4.identity, product_span([B, derived_pair(B, g2)])).status == MEMBER


@pytest.mark.parametrize("claim, n, p, r, l, identity", [
    ("lemma25", 2, 3, 2, 2, False),
    ("lemma25", 3, 3, 2, 2, False),
    ("lemma25", 3, 3, 2, 3, False),
    ("lemma26", 2, 3, 2, None, True),
    ("lemma26", 2, 5, 2, None, True),
    ("lemma26", 3, 3, 2, None, False),
    ("lemma26", 3, 5, 2, None, True),
    ("cor28", 3, 3, 2, None, True),
    ("cor28", 3, 5, 2, None, True),
    ("cor28", 4, 3, 2, None, True),
    ("prop27_np2", 2, 3, 2, None, True),
    ("prop27_np1", 2, 3, 2, None, True),
    ("remark_r1", 4, 3, 1, None, True),
])
def test_claims_member(claim, n, p, r, l, identity):
    (v,) = verify_claims(claim, {"n": n, "p": p, "r": r, "l": l})
    assert v.status == MEMBER
    assert v.element.is_identity() == identity
    doc = v.to_json()
    assert doc["claim"] == claim and doc["element"]["expr"]


@pytest.mark.parametrize("claim, params", [
    ("lemma26", {"n": 5, "p": 3, "r": 2}),
    ("lemma26", {"n": 3, "p": 3, "r": 1}),
    ("cor28", {"n": 3, "p": 7, "r": 2}),
    ("remark_r1", {"n": 4, "p": 3, "r": 2}),
    ("lemma25", {"n": 4, "p": 3, "r": 2, "l": 2}),
    ("lemma25", {"n": 3, "p": 3, "r": 2, "l": 1}),
    ("bogus", {"n": 3, "p": 3, "r": 2}),
])
def test_claim_ranges(claim, params):
    with pytest.raises(ClaimRangeError):
        verify_claims(claim, params)
