"""Right-hand sides of the commutator identities, and an equality checker.

Every builder returns a plain :mod:`cohen.words` expression with exact
integer exponents; reduction modulo ``p^r`` happens only inside
:func:`cohen.collect.collect`.  Products over commuting factors are emitted
in a fixed order (ascending weight, then subset, then arrangement).
"""
from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass
from math import comb
from typing import Optional, Union

from . import words as W
from .collect import GroupContext, NormalForm, collect, random_expr
from .perm import arrangements, count_divisions, shuffles

__all__ = [
    "IdentityReport", "VERIFIED", "FALSIFIED", "SKIPPED",
    "lhs_q1", "rhs_q1", "lhs_q2", "rhs_q2",
    "lhs_engel", "rhs_engel_decomposition", "rhs_shuffle_form",
    "lhs_pr", "power_recursion_pr", "p_valuation", "binomial_valuation_failures",
    "compositions", "verify_identity", "find_q1_counterexample",
]

VERIFIED, FALSIFIED, SKIPPED = "Verified", "Falsified", "Skipped"


@dataclass
class IdentityReport:
    claim_id: str
    parameters: dict
    status: str
    lhs_nf: Optional[NormalForm] = None
    rhs_nf: Optional[NormalForm] = None
    elapsed_ms: int = 0
    note: str = ""
    witness: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.status == VERIFIED

    def to_json(self) -> dict:
        out = {
            "kind": "identity",
            "claim_id": self.claim_id,
            "parameters": self.parameters,
            "status": self.status,
            "elapsed_ms": self.elapsed_ms,
        }
        if self.note:
            out["note"] = self.note
        if self.status == FALSIFIED and self.lhs_nf is not None:
            out["lhs_nf"] = self.lhs_nf.to_json()
            out["rhs_nf"] = self.rhs_nf.to_json()
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _gen(x: Union[int, W.Expr]) -> W.Expr:
    return W.Gen(x) if isinstance(x, int) else x


def _pow(e: W.Expr, k: int) -> W.Expr:
    return e if k == 1 else W.Power(e, k)


def _engel(x: W.Expr, g: W.Expr, i: int) -> W.Expr:
    return W.Bracket(x, g) if i == 1 else W.Engel(x, g, i)


# -- [x, g^k] and (gx)^k -----------------------------------------------------

def lhs_q1(x, g: W.Expr, k: int) -> W.Expr:
    return W.Bracket(_gen(x), W.Power(g, k))


def rhs_q1(x, g: W.Expr, k: int) -> W.Expr:
    """``prod_{i=1..k} [x,_i g]^C(k,i)``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = _gen(x)
    return W.product(*(_pow(_engel(x, g, i), comb(k, i)) for i in range(1, k + 1)))


def lhs_q2(g: W.Expr, x, k: int) -> W.Expr:
    return W.Power(W.Product((g, _gen(x))), k)


def rhs_q2(g: W.Expr, x, k: int) -> W.Expr:
    """``g^k x^k prod_{i=1..k-1} [x,_i g]^C(k,i+1)``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = _gen(x)
    factors = [_pow(g, k), _pow(x, k)]
    factors += [_pow(_engel(x, g, i), comb(k, i + 1)) for i in range(1, k)]
    return W.Product(tuple(factors))


# -- Engel decomposition ---------------------------------------------------------

def lhs_engel(n: int, l: int) -> W.Expr:
    """``[x_{n+1},_l x_1 ... x_n]``."""
    return W.Engel(W.Gen(n + 1), W.full_product(range(1, n + 1)), l)


def _outer(n: int, sigma) -> W.Expr:
    return W.bracket(W.Gen(n + 1), *(W.Gen(s) for s in sigma))


def rhs_engel_decomposition(n: int, l: int) -> W.Expr:
    """Product of ``[x_{n+1}, x_sigma(1), ..., x_sigma(i)]^d_l(sigma)``.

    ``i`` runs over ``l..n``, ``sigma`` over arrangements of ``i``-subsets of
    ``{1..n}`` that cut into ``l`` increasing blocks.
    """
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    factors = []
    for i in range(l, n + 1):
        for subset in itertools.combinations(range(1, n + 1), i):
            for sigma in arrangements(subset):
                d = count_divisions(sigma, l)
                if d:
                    factors.append(_pow(_outer(n, sigma), d))
    return W.Product(tuple(factors))


def compositions(total: int, parts: int):
    """Compositions of ``total`` into ``parts`` positive parts, lexicographic."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def rhs_shuffle_form(n: int, l: int) -> W.Expr:
    """Same product indexed by compositions ``i_1 + ... + i_l = i`` and shuffles."""
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    factors = []
    for i in range(l, n + 1):
        for subset in itertools.combinations(range(1, n + 1), i):
            for sizes in compositions(i, l):
                for sigma in shuffles(sizes, subset):
                    factors.append(_outer(n, sigma))
    return W.Product(tuple(factors))


# -- power recursion ----------------------------------------------------------------

def p_valuation(x: int, p: int) -> int:
    if x == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def binomial_valuation_failures(p: int, r: int) -> list:
    """``i`` in ``1..p^r`` where ``v_p(C(p^r, i)) != r - v_p(i)``."""
    q = p ** r
    return [i for i in range(1, q + 1) if p_valuation(comb(q, i), p) != r - p_valuation(i, p)]


def lhs_pr(n: int, p: int, r: int) -> W.Expr:
    return W.Power(W.full_product(range(1, n + 2)), p ** r)


def power_recursion_pr(n: int, p: int, r: int) -> W.Expr:
    """``(x_1..x_n)^{p^r} prod_{p|i} [x_{n+1},_{i-1}(x_1..x_n)]^C(p^r,i)``.

    ``i`` runs over multiples of ``p`` up to ``p^r``; exponents are reduced
    mod ``p^r`` and zero factors dropped.
    """
    if n < 1 or r < 1:
        raise ValueError("need n >= 1 and r >= 1")
    q = p ** r
    g = W.full_product(range(1, n + 1))
    factors = [W.Power(g, q)]
    for i in range(p, q + 1, p):
        e = comb(q, i) % q
        if e:
            factors.append(_pow(_engel(W.Gen(n + 1), g, i - 1), e))
    return W.Product(tuple(factors))


# -- checking ---------------------------------------------------------------------------

def verify_identity(lhs: W.Expr, rhs: W.Expr, ctx: GroupContext,
                    claim_id: str = "identity", parameters: Optional[dict] = None) -> IdentityReport:
    """Collect both sides; ``Verified`` iff the normal forms coincide."""
    t0 = time.perf_counter()
    a = collect(lhs, ctx)
    b = collect(rhs, ctx)
    ms = int(1000 * (time.perf_counter() - t0))
    status = VERIFIED if a == b else FALSIFIED
    return IdentityReport(claim_id, dict(parameters or {}), status, a, b, ms)


def find_q1_counterexample(ctx: GroupContext, kmax: int = 3, seed: int = 0, budget: int = 400) -> Optional[dict]:
    """Search for a non-generator ``x`` breaking ``[x,g^k] = prod [x,_i g]^C(k,i)``.

    The identity can only fail through ``[[x,g],[x,g,g]]``, of weight at
    least 5, so contexts with ``n < 5`` never yield a witness.
    """
    n = ctx.n
    candidates = []
    for a, b in itertools.permutations(range(1, n + 1), 2):
        candidates.append(W.Product((W.Gen(a), W.Gen(b))))
    rng = random.Random(seed)
    candidates += [random_expr(n, rng, depth=2) for _ in range(budget)]
    gs = [W.full_product(c) for k in (1, 2, 3) for c in itertools.combinations(range(1, n + 1), k)]
    for x in candidates:
        if isinstance(x, W.Gen):
            continue
        for g in gs:
            for k in range(2, kmax + 1):
                rep = verify_identity(lhs_q1(x, g, k), rhs_q1(x, g, k), ctx)
                if rep.status == FALSIFIED:
                    return {"x": W.to_string(x), "g": W.to_string(g), "k": k,
                            "lhs_nf": rep.lhs_nf.to_json(), "rhs_nf": rep.rhs_nf.to_json()}
    return None
