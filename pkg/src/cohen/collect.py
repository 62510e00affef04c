"""Normal forms in Cohen groups by commutator collection.

The group ``K_n`` is the free group on ``x_1..x_n`` modulo every
left-normalized generator bracket with a repeated entry; ``K_n^{Z/p^r}``
further kills ``x_i^{p^r}``.  Both are nilpotent of class ``n``.

Basis.  For each ``k``-subset ``S`` of ``{1..n}`` the basis holds the
``(k-1)!`` left-normalized brackets whose first entry is ``min(S)`` and whose
remaining entries are an arbitrary arrangement of ``S - {min(S)}``.  Basis
order is (weight, subset, arrangement), all ascending, and an element's
normal form is the ordered product ``prod b_i^{e_i}`` in that order.

Two facts carry the whole calculus.  A generator bracket on the letter set
``S`` collects to a product of basis elements on exactly ``S``; and any
bracket of two such elements with overlapping letter sets is trivial.  So
``[b_k, b_i]`` is supported on ``S_k | S_i`` and commutes with both ``b_k``
and ``b_i``, which gives the conjugation rule
``b_k^(b_i^s) = b_k [b_k, b_i]^s`` for every integer ``s``.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import os
import random
import threading
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Optional, Union

from . import words as W

__all__ = [
    "Integers", "ModPrimePower", "CoeffMode", "BasisCommutator", "NormalForm",
    "GroupContext", "ContextError", "CacheMismatch", "make_context",
    "collect", "multiply", "inverse", "power", "commutator",
    "structure_constant", "consistency_check", "ConsistencyReport",
    "parse_mode", "basis_size",
]


class ContextError(ValueError):
    """Input does not belong to the context (index range, foreign normal form)."""


class CacheMismatch(ValueError):
    """A structure-constant cache file was written for a different context."""


# -- coefficient modes ------------------------------------------------------

@dataclass(frozen=True)
class Integers:
    modulus = None

    def reduce(self, e: int) -> int:
        return e

    def to_json(self):
        return "Z"

    def __str__(self):
        return "Z"


@dataclass(frozen=True)
class ModPrimePower:
    p: int
    r: int

    def __post_init__(self):
        if self.p < 3 or self.p % 2 == 0 or any(self.p % q == 0 for q in range(3, int(self.p ** 0.5) + 1, 2)):
            raise ValueError(f"p must be an odd prime, got {self.p}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")

    @property
    def modulus(self) -> int:
        return self.p ** self.r

    def reduce(self, e: int) -> int:
        return e % self.modulus

    def to_json(self):
        return {"p": self.p, "r": self.r}

    def __str__(self):
        return f"Z/{self.p}^{self.r}"


CoeffMode = Union[Integers, ModPrimePower]


def parse_mode(mode: str, p: Optional[int] = None, r: Optional[int] = None) -> CoeffMode:
    if mode in ("z", "Z"):
        return Integers()
    if mode == "mod":
        if p is None or r is None:
            raise ValueError("mode 'mod' needs p and r")
        return ModPrimePower(p, r)
    raise ValueError(f"unknown mode {mode!r}")


# -- basis ------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class BasisCommutator:
    entries: tuple

    @property
    def weight(self) -> int:
        return len(self.entries)

    @property
    def letters(self) -> frozenset:
        return frozenset(self.entries)

    def to_expr(self) -> W.Expr:
        if len(self.entries) == 1:
            return W.Gen(self.entries[0])
        return W.bracket(*(W.Gen(i) for i in self.entries))

    def __str__(self):
        return W.to_string(self.to_expr())


def basis_size(n: int, class_bound: Optional[int] = None) -> int:
    c = n if class_bound is None else class_bound
    total = 0
    for k in range(1, c + 1):
        f = 1
        for j in range(2, k):
            f *= j
        total += comb(n, k) * f
    return total


def _enumerate_basis(n: int, class_bound: int) -> list:
    out = []
    for k in range(1, class_bound + 1):
        for subset in itertools.combinations(range(1, n + 1), k):
            head, rest = subset[0], subset[1:]
            for tail in itertools.permutations(rest):
                out.append(BasisCommutator((head,) + tail))
    return out


# -- normal forms -----------------------------------------------------------

@dataclass(frozen=True)
class NormalForm:
    """Exponent vector over the ordered basis, stored sparsely.

    ``coeffs`` is a tuple of ``(basis_index, exponent)`` pairs sorted by
    index with zero exponents dropped.  ``key`` identifies the context.
    """
    coeffs: tuple
    key: tuple = field(repr=False)

    def is_identity(self) -> bool:
        return not self.coeffs

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    def leading(self) -> Optional[tuple]:
        return self.coeffs[0] if self.coeffs else None

    def to_json(self) -> list:
        return [[i, e] for i, e in self.coeffs]


# -- context ----------------------------------------------------------------

class GroupContext:
    """Parameters, ordered basis and the structure-constant memo table."""

    def __init__(self, n: int, mode: CoeffMode = Integers(), class_bound: Optional[int] = None):
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if class_bound is None:
            class_bound = n
        if not 1 <= class_bound <= n:
            raise ValueError(f"class_bound must lie in 1..{n}, got {class_bound}")
        self.n = n
        self.mode = mode
        self.class_bound = class_bound
        self.basis = _enumerate_basis(n, class_bound)
        self.index = {b.entries: i for i, b in enumerate(self.basis)}
        self.weights = [b.weight for b in self.basis]
        self.letter_masks = [sum(1 << (e - 1) for e in b.entries) for b in self.basis]
        self.key = (n, mode.to_json() if isinstance(mode, Integers) else (mode.p, mode.r), class_bound)
        self.identity = NormalForm((), self.key)
        self.sc_cache: dict = {}
        self._raw: dict = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"GroupContext(n={self.n}, mode={self.mode}, class_bound={self.class_bound})"

    @property
    def modulus(self) -> Optional[int]:
        return self.mode.modulus

    def __len__(self):
        return len(self.basis)

    # -- element constructors -----------------------------------------------
    def nf(self, coeffs: Union[dict, Iterable]) -> NormalForm:
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        acc: dict = {}
        for i, e in items:
            if not 0 <= i < len(self.basis):
                raise ContextError(f"basis index {i} out of range")
            acc[i] = acc.get(i, 0) + e
        red = self.mode.reduce
        return NormalForm(tuple((i, red(e)) for i, e in sorted(acc.items()) if red(e)), self.key)

    def basis_element(self, i: int, exponent: int = 1) -> NormalForm:
        return self.nf({i: exponent})

    def generator(self, i: int) -> NormalForm:
        if not 1 <= i <= self.n:
            raise ContextError(f"generator index {i} out of range 1..{self.n}")
        return self.basis_element(self.index[(i,)])

    def bracket_index(self, entries: tuple) -> Optional[int]:
        return self.index.get(tuple(entries))

    def _dense(self, a: NormalForm) -> list:
        self._own(a)
        v = [0] * len(self.basis)
        for i, e in a.coeffs:
            v[i] = e
        return v

    def _sparse(self, v: list) -> NormalForm:
        return NormalForm(tuple((i, e) for i, e in enumerate(v) if e), self.key)

    def _own(self, a: NormalForm):
        if a.key != self.key:
            raise ContextError(f"normal form belongs to context {a.key}, not {self.key}")

    # -- structure constants --------------------------------------------------
    def _sc_raw(self, k: int, i: int) -> dict:
        """Integer exponents of ``[b_k, b_i]`` on the basis of ``S_k | S_i``.

        Built from generator-bracket definitions by the commutator identities
        ``[ab,c] = [a,c][a,c,b][b,c]`` and ``[a,bc] = [a,c][a,b][a,b,c]`` plus
        Hall-Witt.  Every triple term and every conjugation correction
        repeats a letter here and vanishes, so on letter-disjoint arguments the
        identities reduce to bilinearity, antisymmetry and
        ``[u,[c,y]] = [[u,c],y] [[u,y],c]^-1``,
        ``[[d,z],y] = [[d,y],z] [[y,z],d]``.
        """
        memo = self._raw.get((k, i))
        if memo is not None:
            return memo
        out = self._sc_raw_compute(k, i)
        self._raw.setdefault((k, i), out)
        return out

    def _sc_raw_compute(self, k: int, i: int) -> dict:
        if k == i or self.letter_masks[k] & self.letter_masks[i]:
            return {}
        if self.weights[k] + self.weights[i] > self.class_bound:
            return {}
        bk, bi = self.basis[k], self.basis[i]
        if bi.weight == 1:
            y = bi.entries[0]
            if bk.weight == 1:
                x = bk.entries[0]
                return {self.index[(x, y)]: 1} if x < y else {self.index[(y, x)]: -1}
            if y > bk.entries[0]:
                return {self.index[bk.entries + (y,)]: 1}
            # y is the smallest letter: [[d,z],y] = [[d,y],z] [[y,z],d]
            d = self.index[bk.entries[:-1]]
            z = self.index[(bk.entries[-1],)]
            yz = self.index[(y, bk.entries[-1])]
            first = self._bracket_lin(self._bracket_lin({d: 1}, {i: 1}), {z: 1})
            second = self._bracket_lin({yz: 1}, {d: 1})
            return _add(first, second, 1)
        # b_i = [c, y]: [u,[c,y]] = [[u,c],y] [[u,y],c]^-1
        c = self.index[bi.entries[:-1]]
        y = self.index[(bi.entries[-1],)]
        first = self._bracket_lin(self._bracket_lin({k: 1}, {c: 1}), {y: 1})
        second = self._bracket_lin(self._bracket_lin({k: 1}, {y: 1}), {c: 1})
        return _add(first, second, -1)

    def _bracket_lin(self, u: dict, v: dict) -> dict:
        out: dict = {}
        for a, ea in u.items():
            for b, eb in v.items():
                for m, f in self._sc_raw(a, b).items():
                    out[m] = out.get(m, 0) + ea * eb * f
        return {m: f for m, f in out.items() if f}

    def sc(self, k: int, i: int) -> tuple:
        """Reduced ``[b_k, b_i]`` as sorted ``(index, exponent)`` pairs (memoized)."""
        got = self.sc_cache.get((k, i))
        if got is not None:
            return got
        red = self.mode.reduce
        raw = self._sc_raw(k, i)
        val = tuple((m, red(f)) for m, f in sorted(raw.items()) if red(f))
        with self._lock:
            return self.sc_cache.setdefault((k, i), val)

    # -- collection -------------------------------------------------------------
    def _mul_letter(self, v: list, i: int, s: int):
        """Right-multiply the dense normal form ``v`` by ``b_i^s`` in place."""
        red = self.mode.reduce
        s = red(s)
        if not s:
            return
        N = len(v)
        mask_i = self.letter_masks[i]
        room = self.class_bound - self.weights[i]
        # first position after i whose letter conjugates nontrivially
        start = None
        for k in range(i + 1, N):
            if v[k] and self.weights[k] <= room and not (self.letter_masks[k] & mask_i):
                if self.sc(k, i):
                    start = k
                    break
        if start is None:
            v[i] = red(v[i] + s)
            return
        tail = [(k, v[k]) for k in range(start, N) if v[k]]
        for k, _ in tail:
            v[k] = 0
        v[i] = red(v[i] + s)
        for k, e in tail:
            self._mul_letter(v, k, e)
            for m, f in self.sc(k, i):
                self._mul_letter(v, m, f * s * e)

    def _mul_into(self, v: list, b: NormalForm):
        for k, e in b.coeffs:
            self._mul_letter(v, k, e)


def _add(a: dict, b: dict, sign: int) -> dict:
    out = dict(a)
    for m, f in b.items():
        out[m] = out.get(m, 0) + sign * f
    return {m: f for m, f in out.items() if f}


def make_context(n: int, mode: CoeffMode = Integers(), class_bound: Optional[int] = None) -> GroupContext:
    return GroupContext(n, mode, class_bound)


# -- group operations ---------------------------------------------------------

def multiply(a: NormalForm, b: NormalForm, ctx: GroupContext) -> NormalForm:
    ctx._own(b)
    v = ctx._dense(a)
    ctx._mul_into(v, b)
    return ctx._sparse(v)


def inverse(a: NormalForm, ctx: GroupContext) -> NormalForm:
    ctx._own(a)
    v = [0] * len(ctx.basis)
    for k, e in reversed(a.coeffs):
        ctx._mul_letter(v, k, -e)
    return ctx._sparse(v)


def power(a: NormalForm, k: int, ctx: GroupContext) -> NormalForm:
    ctx._own(a)
    if k < 0:
        a, k = inverse(a, ctx), -k
    result = ctx.identity
    base = a
    while k:
        if k & 1:
            result = multiply(result, base, ctx)
        k >>= 1
        if k:
            base = multiply(base, base, ctx)
    return result


def commutator(a: NormalForm, b: NormalForm, ctx: GroupContext) -> NormalForm:
    """``[a, b] = a^-1 b^-1 a b``."""
    return multiply(inverse(multiply(b, a, ctx), ctx), multiply(a, b, ctx), ctx)


def structure_constant(i: int, j: int, ctx: GroupContext) -> NormalForm:
    """Normal form of ``[b_i, b_j]``."""
    for x in (i, j):
        if not 0 <= x < len(ctx.basis):
            raise ContextError(f"basis index {x} out of range")
    return NormalForm(ctx.sc(i, j), ctx.key)


def collect(e: W.Expr, ctx: GroupContext) -> NormalForm:
    """Normal form of the element denoted by ``e``."""
    top = W.max_index(e)
    if top > ctx.n:
        raise ContextError(f"generator x{top} out of range 1..{ctx.n}")
    memo: dict = {}

    def ev(x: W.Expr) -> NormalForm:
        got = memo.get(x)
        if got is not None:
            return got
        if isinstance(x, W.Gen):
            out = ctx.generator(x.index)
        elif isinstance(x, W.Product):
            v = [0] * len(ctx.basis)
            for f in x.factors:
                ctx._mul_into(v, ev(f))
            out = ctx._sparse(v)
        elif isinstance(x, W.Inverse):
            out = inverse(ev(x.arg), ctx)
        elif isinstance(x, W.Power):
            out = power(ev(x.base), x.exponent, ctx)
        elif isinstance(x, W.Bracket):
            out = commutator(ev(x.left), ev(x.right), ctx)
        elif isinstance(x, W.Engel):
            out = ev(x.left)
            g = ev(x.right)
            for _ in range(x.depth):
                if out.is_identity():
                    break
                out = commutator(out, g, ctx)
        else:
            raise TypeError(f"not an expression: {x!r}")
        memo[x] = out
        return out

    return ev(e)


def to_expr(a: NormalForm, ctx: GroupContext) -> W.Expr:
    """The ordered product of basis powers as an expression."""
    ctx._own(a)
    factors = []
    for i, e in a.coeffs:
        b = ctx.basis[i].to_expr()
        factors.append(b if e == 1 else W.Power(b, e))
    return W.product(*factors) if factors else W.IDENTITY


def format_nf(a: NormalForm, ctx: GroupContext) -> str:
    return W.to_string(to_expr(a, ctx))


# -- structure-constant cache file ---------------------------------------------

def basis_order_hash(ctx: GroupContext) -> str:
    payload = json.dumps({"class_bound": ctx.class_bound, "basis": [list(b.entries) for b in ctx.basis]})
    return hashlib.sha256(payload.encode()).hexdigest()


def cache_header(ctx: GroupContext) -> dict:
    return {"schema": 1, "n": ctx.n, "mode": ctx.mode.to_json(), "basis_order_hash": basis_order_hash(ctx)}


def cache_filename(ctx: GroupContext) -> str:
    mode = "Z" if isinstance(ctx.mode, Integers) else f"p{ctx.mode.p}r{ctx.mode.r}"
    return f"sc_n{ctx.n}_c{ctx.class_bound}_{mode}.json"


def save_cache(ctx: GroupContext, path: str):
    entries = [
        {"i": i, "j": j, "nf": [[m, f] for m, f in nf]}
        for (i, j), nf in sorted(ctx.sc_cache.items())
    ]
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump({"header": cache_header(ctx), "entries": entries}, fh, sort_keys=True)
    os.replace(tmp, path)


def load_cache(ctx: GroupContext, path: str) -> int:
    """Merge a cache file into ``ctx``; returns the number of entries read."""
    with open(path) as fh:
        data = json.load(fh)
    header = data.get("header")
    if header != cache_header(ctx):
        raise CacheMismatch(f"cache header {header} does not match context {cache_header(ctx)}")
    count = 0
    for entry in data["entries"]:
        val = tuple((int(m), int(f)) for m, f in entry["nf"])
        with ctx._lock:
            ctx.sc_cache.setdefault((int(entry["i"]), int(entry["j"])), val)
        count += 1
    return count


def warm_cache(ctx: GroupContext):
    """Compute every structure constant with ``k > i``."""
    for k in range(len(ctx.basis)):
        for i in range(k):
            ctx.sc(k, i)


# -- presentation self-check ----------------------------------------------------

@dataclass
class ConsistencyReport:
    passed: bool
    checks: dict
    witness: Optional[dict] = None

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": self.checks, "witness": self.witness}


def random_nf(ctx: GroupContext, rng: random.Random, density: float = 0.5, spread: int = 5) -> NormalForm:
    m = ctx.modulus
    coeffs = {}
    for i in range(len(ctx.basis)):
        if rng.random() < density:
            coeffs[i] = rng.randrange(m) if m else rng.randint(-spread, spread)
    return ctx.nf(coeffs)


def random_expr(n: int, rng: random.Random, depth: int = 3, max_exp: int = 3) -> W.Expr:
    """Random word over ``x_1..x_n`` built from every node type."""
    if depth <= 0 or rng.random() < 0.3:
        return W.Gen(rng.randint(1, n))
    kind = rng.randrange(6)
    sub = lambda: random_expr(n, rng, depth - 1, max_exp)
    if kind == 0:
        return W.Product(tuple(sub() for _ in range(rng.randint(0, 3))))
    if kind == 1:
        return W.Inverse(sub())
    if kind == 2:
        return W.Power(sub(), rng.randint(-max_exp, max_exp))
    if kind == 3:
        return W.Bracket(sub(), sub())
    if kind == 4:
        return W.Engel(sub(), sub(), rng.randint(1, 3))
    return W.Product((sub(), sub()))


def _repeated_brackets(n: int, max_weight: int) -> Iterable[tuple]:
    for k in range(2, max_weight + 1):
        for seq in itertools.product(range(1, n + 1), repeat=k):
            if len(set(seq)) < k:
                yield seq


def consistency_check(ctx: GroupContext, trials: int = 500, seed: int = 0) -> ConsistencyReport:
    """Validate the presentation the collector uses.

    Checks associativity on letter triples and on ``trials`` random triples,
    that each basis bracket collects to its own basis element, torsion of all
    basis elements (modular mode), that repeated-entry and over-weight
    brackets vanish, and that multiplying by sampled relators changes nothing.
    The first failure is returned as a witness.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = random.Random(seed)
    checks: dict = {}
    N = len(ctx.basis)

    def fail(name, **witness):
        checks[name] = "fail"
        return ConsistencyReport(False, checks, {"check": name, **witness})

    # letter-level associativity (b_k b_j) b_i == b_k (b_j b_i)
    letters = [(k, j, i) for k in range(N) for j in range(N) for i in range(N)]
    if len(letters) > 4 * trials:
        letters = rng.sample(letters, 4 * trials)
    for k, j, i in letters:
        a, b, c = (ctx.basis_element(x) for x in (k, j, i))
        lhs = multiply(multiply(a, b, ctx), c, ctx)
        rhs = multiply(a, multiply(b, c, ctx), ctx)
        if lhs != rhs:
            return fail("letter_associativity", triple=[k, j, i], lhs=lhs.to_json(), rhs=rhs.to_json())
    checks["letter_associativity"] = len(letters)

    for _ in range(trials):
        a, b, c = (random_nf(ctx, rng) for _ in range(3))
        lhs = multiply(multiply(a, b, ctx), c, ctx)
        rhs = multiply(a, multiply(b, c, ctx), ctx)
        if lhs != rhs:
            return fail("associativity", a=a.to_json(), b=b.to_json(), c=c.to_json(),
                        lhs=lhs.to_json(), rhs=rhs.to_json())
        if not multiply(a, inverse(a, ctx), ctx).is_identity():
            return fail("inverse", a=a.to_json())
    checks["associativity"] = trials

    for i, b in enumerate(ctx.basis):
        got = collect(b.to_expr(), ctx)
        if got != ctx.basis_element(i):
            return fail("definitions", basis=str(b), got=got.to_json())
    checks["definitions"] = N

    if ctx.modulus:
        for i in range(N):
            got = power(ctx.basis_element(i), ctx.modulus, ctx)
            if not got.is_identity():
                return fail("torsion", basis=str(ctx.basis[i]), got=got.to_json())
        checks["torsion"] = N

    relators = []
    for seq in _repeated_brackets(ctx.n, min(ctx.n + 1, 5)):
        e = W.bracket(*(W.Gen(x) for x in seq))
        got = collect(e, ctx)
        if not got.is_identity():
            return fail("repeated_entry", expr=W.to_string(e), got=got.to_json())
        relators.append(e)
    if ctx.class_bound < ctx.n:
        for seq in itertools.islice(itertools.permutations(range(1, ctx.n + 1), ctx.class_bound + 1), 200):
            e = W.bracket(*(W.Gen(x) for x in seq))
            got = collect(e, ctx)
            if not got.is_identity():
                return fail("nilpotency", expr=W.to_string(e), got=got.to_json())
    checks["repeated_entry"] = len(relators)
    if ctx.modulus:
        relators += [W.Power(W.Gen(i), ctx.modulus) for i in range(1, ctx.n + 1)]

    if relators:
        for _ in range(trials):
            e = random_expr(ctx.n, rng)
            rel = rng.choice(relators)
            pos = rng.randrange(3)
            base = collect(e, ctx)
            word = [W.Product((e, rel)), W.Product((rel, e)), W.Product((e, rel, W.Inverse(e), e))][pos]
            got = collect(word, ctx)
            if got != base:
                return fail("relators", expr=W.to_string(word), got=got.to_json(), expected=base.to_json())
        checks["relators"] = trials
    return ConsistencyReport(True, checks)
