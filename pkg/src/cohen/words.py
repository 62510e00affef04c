"""Group-word expressions: AST, parser and printer.

Concrete syntax (whitespace-insensitive)::

    expr   := factor+
    factor := atom ("^" signed-int)?
    atom   := "x" int | "e" | "(" expr ")" | "inv(" expr ")"
            | "[" expr ("," expr)+ "]"          left-normalized bracket
            | "[" expr ",_" int expr "]"        Engel bracket

``[a,b,c]`` is shorthand for ``[[a,b],c]``.  Nothing here knows about
relations; semantics live in :mod:`cohen.collect`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

__all__ = [
    "Gen", "Product", "Inverse", "Power", "Bracket", "Engel", "Expr",
    "IDENTITY", "ParseError", "parse", "to_string", "engel", "bracket",
    "product", "full_product", "generators_of", "max_index", "unfold",
]


@dataclass(frozen=True)
class Gen:
    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"generator index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Product:
    factors: tuple = ()


@dataclass(frozen=True)
class Inverse:
    arg: "Expr"


@dataclass(frozen=True)
class Power:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Bracket:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Engel:
    left: "Expr"
    right: "Expr"
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"Engel depth must be >= 1, got {self.depth}")


Expr = Union[Gen, Product, Inverse, Power, Bracket, Engel]

IDENTITY = Product(())


class ParseError(ValueError):
    """Raised on malformed input or an out-of-range generator index."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


# -- constructors ---------------------------------------------------------

def product(*factors: Expr) -> Expr:
    """Product that collapses a single factor to the factor itself."""
    if len(factors) == 1:
        return factors[0]
    return Product(tuple(factors))


def bracket(*args: Expr) -> Expr:
    """Left-normalized bracket ``[g1, ..., gk] = [[g1, ..., g(k-1)], gk]``."""
    if len(args) < 2:
        raise ValueError("a bracket needs at least two entries")
    out = args[0]
    for a in args[1:]:
        out = Bracket(out, a)
    return out


def engel(x: Expr, y: Expr, depth: int) -> Expr:
    """Unfold ``[x,_depth y]`` into nested :class:`Bracket` nodes."""
    if depth < 1:
        raise ValueError(f"Engel depth must be >= 1, got {depth}")
    out = x
    for _ in range(depth):
        out = Bracket(out, y)
    return out


def full_product(indices) -> Expr:
    """``x_{i1} x_{i2} ...`` for the given generator indices."""
    return product(*(Gen(i) for i in indices))


def unfold(e: Expr) -> Expr:
    """Replace every Engel node by its nested-bracket expansion."""
    if isinstance(e, Gen):
        return e
    if isinstance(e, Product):
        return Product(tuple(unfold(f) for f in e.factors))
    if isinstance(e, Inverse):
        return Inverse(unfold(e.arg))
    if isinstance(e, Power):
        return Power(unfold(e.base), e.exponent)
    if isinstance(e, Bracket):
        return Bracket(unfold(e.left), unfold(e.right))
    if isinstance(e, Engel):
        return engel(unfold(e.left), unfold(e.right), e.depth)
    raise TypeError(f"not an expression: {e!r}")


def generators_of(e: Expr) -> Iterator[int]:
    if isinstance(e, Gen):
        yield e.index
    elif isinstance(e, Product):
        for f in e.factors:
            yield from generators_of(f)
    elif isinstance(e, Inverse):
        yield from generators_of(e.arg)
    elif isinstance(e, Power):
        yield from generators_of(e.base)
    elif isinstance(e, (Bracket, Engel)):
        yield from generators_of(e.left)
        yield from generators_of(e.right)
    else:
        raise TypeError(f"not an expression: {e!r}")


def max_index(e: Expr) -> int:
    return max(generators_of(e), default=0)


# -- printer --------------------------------------------------------------

def _bracket_entries(e: Bracket) -> list:
    entries = []
    while isinstance(e, Bracket):
        entries.append(e.right)
        e = e.left
    entries.append(e)
    return entries[::-1]


def _atom(e: Expr) -> str:
    """Render ``e`` so it can stand as an atom (before ``^`` or in a product)."""
    if isinstance(e, (Power,)) or (isinstance(e, Product) and len(e.factors) > 1):
        return f"({to_string(e)})"
    if isinstance(e, Product) and len(e.factors) == 1:
        return _atom(e.factors[0])
    return to_string(e)


def _factor(e: Expr) -> str:
    """Render ``e`` as one factor of a product."""
    if isinstance(e, Power):
        return to_string(e)
    return _atom(e)


def to_string(e: Expr) -> str:
    """Canonical concrete syntax; ``parse(to_string(e)) == e``."""
    if isinstance(e, Gen):
        return f"x{e.index}"
    if isinstance(e, Product):
        if not e.factors:
            return "e"
        if len(e.factors) == 1:
            return to_string(e.factors[0])
        return " ".join(_factor(f) for f in e.factors)
    if isinstance(e, Inverse):
        return f"inv({to_string(e.arg)})"
    if isinstance(e, Power):
        return f"{_atom(e.base)}^{e.exponent}"
    if isinstance(e, Bracket):
        return "[" + ",".join(to_string(a) for a in _bracket_entries(e)) + "]"
    if isinstance(e, Engel):
        return f"[{to_string(e.left)},_{e.depth} {to_string(e.right)}]"
    raise TypeError(f"not an expression: {e!r}")


# -- parser ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<int>[+-]?\d+)|(?P<inv>inv\()|(?P<engel>,_)|(?P<sym>[x()\[\],^e]))")


class _Parser:
    def __init__(self, text: str, n: Optional[int]):
        self.text = text
        self.n = n
        self.tokens: list = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value: Optional[str] = None, kind: Optional[str] = None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2], self.text)
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind}, found {tok[1] or 'end of input'!r}", tok[2], self.text)
        self.i += 1
        return tok

    def unsigned(self) -> int:
        kind, val, pos = self.take(kind="int")
        if val[0] in "+-":
            raise ParseError("expected an unsigned integer", pos, self.text)
        return int(val)

    def starts_atom(self) -> bool:
        kind, val, _ = self.peek()
        return kind == "inv" or val in ("x", "e", "(", "[")

    def expr(self) -> Expr:
        if not self.starts_atom():
            kind, val, pos = self.peek()
            raise ParseError(f"expected an expression, found {val or 'end of input'!r}", pos, self.text)
        factors = []
        while self.starts_atom():
            factors.append(self.factor())
        return product(*factors)

    def factor(self) -> Expr:
        a = self.atom()
        if self.peek()[1] == "^":
            self.take("^")
            kind, val, pos = self.take(kind="int")
            a = Power(a, int(val))
        return a

    def atom(self) -> Expr:
        kind, val, pos = self.peek()
        if kind == "inv":
            self.take()
            inner = self.expr()
            self.take(")")
            return Inverse(inner)
        if val == "x":
            self.take()
            ipos = self.peek()[2]
            idx = self.unsigned()
            if idx < 1 or (self.n is not None and idx > self.n):
                bound = f"1..{self.n}" if self.n is not None else ">= 1"
                raise ParseError(f"generator index {idx} out of range {bound}", ipos, self.text)
            return Gen(idx)
        if val == "e":
            self.take()
            return IDENTITY
        if val == "(":
            self.take()
            inner = self.expr()
            self.take(")")
            return inner
        if val == "[":
            self.take()
            first = self.expr()
            if self.peek()[0] == "engel":
                self.take()
                dpos = self.peek()[2]
                depth = self.unsigned()
                if depth < 1:
                    raise ParseError("Engel depth must be >= 1", dpos, self.text)
                second = self.expr()
                self.take("]")
                return Engel(first, second, depth)
            entries = [first]
            while self.peek()[1] == ",":
                self.take()
                entries.append(self.expr())
            if len(entries) < 2:
                raise ParseError("a bracket needs at least two entries", self.peek()[2], self.text)
            self.take("]")
            return bracket(*entries)
        raise ParseError(f"unexpected token {val or 'end of input'!r}", pos, self.text)


def parse(text: str, n: Optional[int] = None) -> Expr:
    """Parse ``text`` into an expression; ``n`` bounds generator indices."""
    p = _Parser(text, n)
    e = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ParseError(f"trailing input {val!r}", pos, text)
    return e
