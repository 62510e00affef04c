"""Subgroups of ``K_n^{Z/p^r}`` as induced polycyclic sequences.

The basis order gives a central series ``G_{>=d} = <b_d, ..., b_N>`` with
cyclic factors of order ``p^r``.  A subgroup is stored as an echelon table:
at most one element per leading index, leading exponent a power of ``p``.
Membership is decided by sifting, i.e. dividing out leading terms from the
left.

Handles carry two flags.  ``under`` means the computed subgroup may be
smaller than the one it stands for (a Member verdict is still sound);
``over`` means it may be larger (a NonMember verdict is still sound).
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from math import gcd
from typing import Iterable, Optional, Sequence

from . import words as W
from .collect import (GroupContext, ModPrimePower, NormalForm, collect, commutator,
                      format_nf, inverse, make_context, multiply, power)

__all__ = [
    "SubgroupHandle", "MembershipVerdict", "MEMBER", "NON_MEMBER", "INCONCLUSIVE",
    "span", "normal_closure", "whole_group", "trivial", "gamma", "derived_pair",
    "power_subgroup", "bn_subgroup", "membership", "product_span", "verify_claims",
    "CLAIMS", "ClaimRangeError", "check_claim_params",
]

MEMBER, NON_MEMBER, INCONCLUSIVE = "Member", "NonMember", "Inconclusive"


class ClaimRangeError(ValueError):
    """Claim parameters outside the supported range."""


def _unit_inverse(u: int, m: int) -> int:
    return pow(u, -1, m)


def _split(e: int, p: int) -> tuple:
    """``e = p^v * u`` with ``p`` not dividing ``u``."""
    v = 0
    while e % p == 0:
        e //= p
        v += 1
    return v, e


class SubgroupHandle:
    """Echelonized generating sequence plus provenance."""

    def __init__(self, ctx: GroupContext, description: str = "", *, normal: Optional[bool] = None,
                 under: bool = False, over: bool = False, reason: str = ""):
        if not isinstance(ctx.mode, ModPrimePower):
            raise ValueError("subgroup machinery needs a ModPrimePower context")
        self.ctx = ctx
        self.p = ctx.mode.p
        self.r = ctx.mode.r
        self.table: dict = {}  # leading index -> (element, valuation of leading exponent)
        self.description = description
        self._normal = normal
        self.under = under
        self.over = over
        self.reason = reason
        self.factors: list = []  # for product sets

    # -- views -------------------------------------------------------------------
    @property
    def sequence(self) -> list:
        return [self.table[i][0] for i in sorted(self.table)]

    @property
    def provenance(self) -> str:
        if self.under and self.over:
            return "Approx"
        if self.under:
            return "UnderApprox"
        if self.over:
            return "OverApprox"
        return "Exact"

    def order(self) -> int:
        return self.p ** sum(self.r - v for _, v in self.table.values())

    def is_trivial(self) -> bool:
        return not self.table

    def __len__(self):
        return len(self.table)

    def __repr__(self):
        return f"SubgroupHandle({self.description!r}, size={len(self.table)}, {self.provenance})"

    # -- sifting -------------------------------------------------------------------
    def sift(self, g: NormalForm) -> NormalForm:
        ctx = self.ctx
        pr = ctx.modulus
        while g.coeffs:
            i, e = g.coeffs[0]
            entry = self.table.get(i)
            if entry is None:
                return g
            h, v = entry
            if e % (self.p ** v):
                return g
            t = e // (self.p ** v)
            g = multiply(power(h, pr - t, ctx), g, ctx)
        return g

    def contains(self, g: NormalForm) -> bool:
        return self.sift(g).is_identity()

    def _insert(self, g: NormalForm, queue: list) -> Optional[NormalForm]:
        g = self.sift(g)
        if g.is_identity():
            return None
        ctx = self.ctx
        i, e = g.coeffs[0]
        v, u = _split(e, self.p)
        if u != 1:
            g = power(g, _unit_inverse(u, ctx.modulus), ctx)
        old = self.table.get(i)
        self.table[i] = (g, v)
        if old is not None:
            queue.append(old[0])
        return g

    def close(self, gens: Iterable[NormalForm], conjugators: Sequence[NormalForm] = ()) -> "SubgroupHandle":
        """Extend the table to the subgroup generated by ``gens`` and the current
        table, closed under conjugation by ``conjugators``."""
        ctx = self.ctx
        queue = list(gens)
        conj_inv = [(c, inverse(c, ctx)) for c in conjugators]
        while True:
            while queue:
                g = self._insert(queue.pop(), queue)
                if g is None:
                    continue
                v = self.table[g.coeffs[0][0]][1]
                queue.append(power(g, self.p ** (self.r - v), ctx))
                for h, _ in list(self.table.values()):
                    if h is not g:
                        queue.append(commutator(g, h, ctx))
                for c, ci in conj_inv:
                    queue.append(multiply(multiply(ci, g, ctx), c, ctx))
            # final pass: closure conditions must hold for the final table
            for h, v in list(self.table.values()):
                queue.append(power(h, self.p ** (self.r - v), ctx))
                for c, ci in conj_inv:
                    queue.append(multiply(multiply(ci, h, ctx), c, ctx))
            seq = self.sequence
            for a, b in itertools.combinations(seq, 2):
                queue.append(commutator(b, a, ctx))
            queue = [x for x in queue if not self.contains(x)]
            if not queue:
                return self

    # -- structure --------------------------------------------------------------------
    def generators_of_group(self) -> list:
        return [self.ctx.generator(i) for i in range(1, self.ctx.n + 1)]

    def is_normal(self) -> bool:
        if self._normal is None:
            ctx = self.ctx
            self._normal = all(
                self.contains(multiply(multiply(inverse(x, ctx), h, ctx), x, ctx))
                for x in self.generators_of_group() for h in self.sequence
            )
        return self._normal

    def normalizes(self, other: "SubgroupHandle") -> bool:
        ctx = self.ctx
        return all(
            other.contains(multiply(multiply(inverse(x, ctx), h, ctx), x, ctx))
            for x in self.sequence for h in other.sequence
        )

    def is_abelian(self) -> bool:
        seq = self.sequence
        return all(commutator(a, b, self.ctx).is_identity() for a, b in itertools.combinations(seq, 2))

    def elements(self) -> Iterable[NormalForm]:
        """Every element, as normal words in the sequence."""
        ctx = self.ctx
        items = [self.table[i] for i in sorted(self.table)]
        ranges = [range(self.p ** (self.r - v)) for _, v in items]
        pows = [[power(h, a, ctx) for a in rg] for (h, _), rg in zip(items, ranges)]
        for combo in itertools.product(*(range(len(rg)) for rg in ranges)):
            g = ctx.identity
            for j, a in enumerate(combo):
                if a:
                    g = multiply(g, pows[j][a], ctx)
            yield g


@dataclass
class MembershipVerdict:
    element: NormalForm
    subgroup: str
    status: str
    note: str = ""
    provenance: str = "Exact"
    claim: str = ""
    params: dict = field(default_factory=dict)
    element_expr: str = ""

    @property
    def ok(self) -> bool:
        return self.status == MEMBER

    def to_json(self) -> dict:
        return {
            "kind": "membership",
            "claim": self.claim,
            "params": self.params,
            "element": {"expr": self.element_expr, "nf": self.element.to_json()},
            "subgroup": {"description": self.subgroup, "provenance": self.provenance},
            "status": self.status,
            "note": self.note,
        }


# -- constructors ----------------------------------------------------------------------

def _check_ctx(ctx: GroupContext):
    if not isinstance(ctx.mode, ModPrimePower):
        raise ValueError("membership is only decidable in ModPrimePower mode")


def span(gens: Iterable[NormalForm], ctx: GroupContext, description: str = "span") -> SubgroupHandle:
    _check_ctx(ctx)
    return SubgroupHandle(ctx, description).close(gens)


def normal_closure(gens: Iterable[NormalForm], ctx: GroupContext, description: str = "normal closure") -> SubgroupHandle:
    _check_ctx(ctx)
    h = SubgroupHandle(ctx, description, normal=True)
    return h.close(gens, [ctx.generator(i) for i in range(1, ctx.n + 1)])


def trivial(ctx: GroupContext) -> SubgroupHandle:
    _check_ctx(ctx)
    return SubgroupHandle(ctx, "1", normal=True)


def whole_group(ctx: GroupContext) -> SubgroupHandle:
    _check_ctx(ctx)
    h = SubgroupHandle(ctx, "K", normal=True)
    for i in range(len(ctx.basis)):
        h.table[i] = (ctx.basis_element(i), 0)
    return h


def gamma(k: int, ctx: GroupContext) -> SubgroupHandle:
    """``k``-th term of the lower central series."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    g = whole_group(ctx)
    gens = [ctx.generator(i) for i in range(1, ctx.n + 1)]
    for j in range(2, k + 1):
        comms = [commutator(b, x, ctx) for b in g.sequence for x in gens]
        g = normal_closure(comms, ctx, f"gamma{j}")
        if g.is_trivial():
            g.description = f"gamma{k}"
            break
    g.description = "K" if k == 1 else f"gamma{k}"
    return g


def derived_pair(A: SubgroupHandle, B: SubgroupHandle, description: Optional[str] = None) -> SubgroupHandle:
    """``[A, B]``: closure of ``[a, b]`` (sequence elements) under conjugation
    by ``G`` when both are normal, otherwise by ``<A, B>``."""
    if A.ctx is not B.ctx:
        raise ValueError("subgroups belong to different contexts")
    ctx = A.ctx
    desc = description or f"[{A.description},{B.description}]"
    gens = [commutator(a, b, ctx) for a in A.sequence for b in B.sequence]
    both_normal = A.is_normal() and B.is_normal()
    if both_normal:
        out = normal_closure(gens, ctx, desc)
    else:
        out = SubgroupHandle(ctx, desc).close(gens, A.sequence + B.sequence)
    out.under = A.under or B.under
    out.over = A.over or B.over
    out.reason = "; ".join(x for x in (A.reason, B.reason) if x)
    return out


def power_subgroup(A: SubgroupHandle, m: int, description: Optional[str] = None) -> SubgroupHandle:
    """The subgroup generated by ``m``-th powers of elements of ``A``.

    Computed from powers of sequence elements, which is exact when ``A`` is
    abelian or ``m`` is prime to ``p`` and an under-approximation otherwise.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    ctx = A.ctx
    desc = description or f"({A.description})^{m}"
    if gcd(m, A.p) == 1:
        out = SubgroupHandle(ctx, desc, normal=A._normal, under=A.under, over=A.over, reason=A.reason)
        out.table = dict(A.table)
        return out
    gens = [power(a, m, ctx) for a in A.sequence]
    if A.is_normal():
        out = normal_closure(gens, ctx, desc)
    else:
        out = span(gens, ctx, desc)
    out.over = A.over
    out.under = A.under
    out.reason = A.reason
    if not A.is_abelian():
        out.under = True
        out.reason = "; ".join(x for x in (A.reason, f"{desc} built from powers of generators only") if x)
    return out


def bn_subgroup(ctx: GroupContext, p: int) -> SubgroupHandle:
    """Subgroup generated by distinct-entry brackets whose length is not a power of ``p``."""
    _check_ctx(ctx)
    if ctx.mode.p != p:
        raise ValueError(f"context prime {ctx.mode.p} does not match p={p}")
    powers = {p ** t for t in range(ctx.n + 1)}
    gens = [ctx.basis_element(i) for i, b in enumerate(ctx.basis) if b.weight >= 2 and b.weight not in powers]
    return span(gens, ctx, f"B{ctx.n}")


def product_span(subs: Sequence[SubgroupHandle], description: Optional[str] = None) -> SubgroupHandle:
    """Subgroup generated by the factors.

    Equals the product set when every factor after the first is normalized by
    all factors; otherwise it over-approximates the set and membership
    verdicts fall back to a factorization search.
    """
    if not subs:
        raise ValueError("need at least one factor")
    ctx = subs[0].ctx
    desc = description or "".join(s.description for s in subs)
    out = SubgroupHandle(ctx, desc)
    for s in subs:
        out.close(s.sequence)
    out.under = any(s.under for s in subs)
    out.over = any(s.over for s in subs)
    out.reason = "; ".join(s.reason for s in subs if s.reason)
    if all(s.is_normal() for s in subs):
        out._normal = True
    exact_set = all(a.normalizes(b) for j, b in enumerate(subs) for a in subs if j > 0 and a is not b)
    if not exact_set:
        out.over = True
        out.factors = list(subs)
    return out


# -- membership ------------------------------------------------------------------------

def _factor_search(g: NormalForm, factors: Sequence[SubgroupHandle], budget: int, seed: int = 0) -> Optional[bool]:
    """Decide ``g in H1 H2 ... Hk``; ``None`` when the budget runs out."""
    ctx = g_ctx = factors[0].ctx
    head, tail = factors[0], factors[1:]
    size = 1
    for t in tail:
        size *= t.order()
    if size <= budget:
        pools = [list(t.elements()) for t in tail]
        for combo in itertools.product(*pools):
            c = ctx.identity
            for x in combo:
                c = multiply(c, x, ctx)
            if head.contains(multiply(g, inverse(c, ctx), ctx)):
                return True
        return False
    rng = random.Random(seed)
    for _ in range(budget):
        c = ctx.identity
        for t in tail:
            x = ctx.identity
            for h, v in (t.table[i] for i in sorted(t.table)):
                x = multiply(x, power(h, rng.randrange(t.p ** (t.r - v)), ctx), ctx)
            c = multiply(c, x, ctx)
        if head.contains(multiply(g, inverse(c, ctx), g_ctx)):
            return True
    return None


def membership(g: NormalForm, S: SubgroupHandle, budget: int = 20000) -> MembershipVerdict:
    S.ctx._own(g)
    residue = S.sift(g)
    prov = S.provenance
    if residue.is_identity():
        if not S.over:
            return MembershipVerdict(g, S.description, MEMBER, "sifts to the identity", prov)
        found = _factor_search(g, S.factors, budget) if S.factors else None
        if found:
            return MembershipVerdict(g, S.description, MEMBER,
                                     "factorization through the product set found", prov)
        if found is False and not S.under and not any(f.over for f in S.factors):
            return MembershipVerdict(g, S.description, NON_MEMBER,
                                     "member of the generated subgroup, but exhaustive factor search failed", prov)
        return MembershipVerdict(g, S.description, INCONCLUSIVE,
                                 "member of the generated subgroup only; product set not confirmed", prov)
    lead = residue.coeffs[0][0]
    if not S.under:
        return MembershipVerdict(g, S.description, NON_MEMBER,
                                 f"residue leads at basis index {lead}", prov)
    return MembershipVerdict(g, S.description, INCONCLUSIVE,
                             f"residue leads at basis index {lead}; subgroup is an under-approximation ({S.reason})",
                             prov)


# -- claims --------------------------------------------------------------------------------

CLAIMS = ("lemma25", "lemma26", "prop27_np2", "prop27_np1", "cor28", "remark_r1")


def _product_power(n: int, k: int, ctx: GroupContext) -> NormalForm:
    return power(collect(W.full_product(range(1, n + 1)), ctx), k, ctx)


def _np2_target(ctx: GroupContext, p: int) -> SubgroupHandle:
    g2 = gamma(2, ctx)
    g22 = derived_pair(g2, g2, "g2g2")
    g222 = derived_pair(g22, g22, "g2g2g2")
    g2p = power_subgroup(g2, p, f"g2^{p}")
    return product_span([g222, derived_pair(g2p, g22), power_subgroup(g22, p, f"(g2g2)^{p}")])


def _np1_target(ctx: GroupContext, p: int) -> SubgroupHandle:
    g2 = gamma(2, ctx)
    g22 = derived_pair(g2, g2, "g2g2")
    bn = bn_subgroup(ctx, p)
    g2p = power_subgroup(g2, p, f"g2^{p}")
    return product_span([bn, derived_pair(bn, g2p), derived_pair(bn, g22)])


def check_claim_params(claim: str, n: int, p: int, r: int, l: Optional[int]):
    if claim not in CLAIMS:
        raise ClaimRangeError(f"unknown claim {claim!r}")
    if n < 1 or n > 4:
        raise ClaimRangeError(f"n must lie in 1..4, got {n}")
    if claim == "remark_r1":
        if r != 1:
            raise ClaimRangeError("remark_r1 is the r = 1 case")
    elif r < 2 and claim != "lemma25":
        raise ClaimRangeError(f"{claim} needs r > 1")
    if p ** r > 25:
        raise ClaimRangeError(f"p^r = {p ** r} exceeds 25")
    if claim in ("prop27_np2", "prop27_np1", "cor28") and p ** (r + 1) > 125:
        raise ClaimRangeError(f"p^(r+1) = {p ** (r + 1)} exceeds 125")
    if claim == "lemma25":
        if l is None or l < 2:
            raise ClaimRangeError("lemma25 needs l >= 2")
        if n + 1 > 4:
            raise ClaimRangeError("lemma25 is supported for n + 1 <= 4")


def verify_claims(claim: str, params: dict, ctx: Optional[GroupContext] = None) -> list:
    """Membership verdicts for one claim at the given parameters.

    ``params`` holds ``n``, ``p``, ``r`` and (for ``lemma25``) ``l``.  Claims
    stated in ``K_{n+1}`` (``lemma25``, ``prop27_*``) build that context.
    """
    n, p, r, l = params["n"], params["p"], params["r"], params.get("l")
    check_claim_params(claim, n, p, r, l)
    size = n + 1 if claim in ("lemma25", "prop27_np2", "prop27_np1") else n
    if ctx is None:
        ctx = make_context(size, ModPrimePower(p, r))
    elif ctx.n != size or ctx.mode != ModPrimePower(p, r) or ctx.class_bound != size:
        raise ValueError(f"{claim} needs K_{size}^(Z/{p}^{r}), got {ctx}")

    if claim == "lemma25":
        from math import factorial
        e = W.Engel(W.Gen(n + 1), W.full_product(range(1, n + 1)), l)
        g = collect(e, ctx)
        g2 = gamma(2, ctx)
        m = factorial(l - 1)
        target = product_span([power_subgroup(g2, m, f"g2^{m}"), derived_pair(g2, g2, "g2g2")])
        expr = W.to_string(e)
    elif claim == "lemma26":
        q = p ** r
        g = _product_power(n, q, ctx)
        g2 = gamma(2, ctx)
        m = p ** (r - 1)
        target = product_span([power_subgroup(g2, m, f"g2^{m}"), derived_pair(g2, g2, "g2g2")])
        expr = W.to_string(W.Power(W.full_product(range(1, n + 1)), q))
    elif claim in ("prop27_np2", "prop27_np1"):
        q = p ** (r + 1)
        big = _product_power(n + 1, q, ctx)
        small = _product_power(n, q, ctx)
        g = multiply(inverse(small, ctx), big, ctx)
        target = _np2_target(ctx, p) if claim == "prop27_np2" else _np1_target(ctx, p)
        expr = W.to_string(W.Product((W.Inverse(W.Power(W.full_product(range(1, n + 1)), q)),
                                      W.Power(W.full_product(range(1, n + 2)), q))))
    elif claim == "cor28":
        q = p ** (r + 1)
        g = _product_power(n, q, ctx)
        target = _np2_target(ctx, p)
        expr = W.to_string(W.Power(W.full_product(range(1, n + 1)), q))
    else:  # remark_r1
        q = p ** 3
        g = _product_power(n, q, ctx)
        g2 = gamma(2, ctx)
        g22 = derived_pair(g2, g2, "g2g2")
        target = derived_pair(g22, g22, "g2g2g2")
        expr = W.to_string(W.Power(W.full_product(range(1, n + 1)), q))

    verdict = membership(g, target)
    verdict.claim = claim
    verdict.params = {k: v for k, v in params.items() if v is not None}
    verdict.element_expr = expr
    if g.is_identity():
        verdict.note += "; element collects to the identity"
    else:
        verdict.note += f"; element = {format_nf(g, ctx)}"
    return [verdict]
