"""Permutations cut into increasing blocks, Stirling numbers and shuffles.

A permutation is a tuple of distinct integers (its images in order).  A
*division* of a permutation into ``l`` blocks cuts it into ``l`` nonempty
contiguous runs, each strictly increasing; ``count_divisions`` returns how
many such cuts exist.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterable, Optional, Sequence

__all__ = [
    "PermStats", "count_divisions", "division_counts", "count_divisions_bruteforce", "divisions",
    "descents", "sigma_ln", "sigma_ln_at", "perm_table", "stirling2",
    "stirling2_bruteforce", "shuffles", "multinomial", "arrangements", "lemma_sums",
]

Perm = tuple


@dataclass(frozen=True)
class PermStats:
    perm: Perm
    l: int
    d: int

    def as_dict(self) -> dict:
        return {"perm": list(self.perm), "l": self.l, "d": self.d}


def _check_perm(p: Sequence[int]) -> tuple:
    p = tuple(p)
    if not p:
        raise ValueError("permutation must be nonempty")
    if len(set(p)) != len(p):
        raise ValueError(f"permutation entries must be distinct: {p}")
    return p


def descents(p: Sequence[int]) -> list:
    """Positions ``j`` (1-based gap index) with ``p[j-1] > p[j]``."""
    return [j for j in range(1, len(p)) if p[j - 1] > p[j]]


def division_counts(p: Sequence[int]) -> list:
    """``[d_0, d_1, ..., d_n]`` for ``p`` in one left-to-right pass.

    Cut-counting recurrence on the block-count polynomial: a descent gap
    forces a cut (multiply by ``t``), an ascent gap may or may not be cut
    (multiply by ``1 + t``).
    """
    p = _check_perm(p)
    poly = [0, 1]  # the first entry opens one block
    for a, b in zip(p, p[1:]):
        shifted = [0] + poly
        if a < b:
            poly = [x + y for x, y in zip(poly + [0], shifted)]
        else:
            poly = shifted
    return poly


def count_divisions(p: Sequence[int], l: int) -> int:
    """Number of ways to cut ``p`` into ``l`` strictly increasing blocks."""
    p = _check_perm(p)
    if not 1 <= l <= len(p):
        raise ValueError(f"need 1 <= l <= {len(p)}, got l={l}")
    return division_counts(p)[l]


def divisions(p: Sequence[int], l: int) -> Iterable[tuple]:
    """Enumerate divisions as tuples of blocks (reference algorithm)."""
    p = _check_perm(p)
    n = len(p)
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= {n}, got l={l}")
    for cuts in itertools.combinations(range(1, n), l - 1):
        bounds = (0,) + cuts + (n,)
        blocks = tuple(p[a:b] for a, b in zip(bounds, bounds[1:]))
        if all(all(x < y for x, y in zip(b, b[1:])) for b in blocks):
            yield blocks


def count_divisions_bruteforce(p: Sequence[int], l: int) -> int:
    return sum(1 for _ in divisions(p, l))


def arrangements(symbols: Sequence[int]) -> Iterable[tuple]:
    """All orderings of ``symbols`` in lexicographic order."""
    return itertools.permutations(sorted(symbols))


def sigma_ln(n: int, l: int, symbols: Optional[Sequence[int]] = None) -> list:
    """Permutations of ``{1..n}`` (or of ``symbols``) with ``d_l > 0``."""
    if symbols is None:
        symbols = range(1, n + 1)
    symbols = sorted(symbols)
    if len(symbols) != n:
        raise ValueError("symbol set size must equal n")
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    out = []
    for p in itertools.permutations(symbols):
        d = count_divisions(p, l)
        if d:
            out.append(PermStats(p, l, d))
    return out


def sigma_ln_at(n: int, l: int, i: int) -> list:
    """The members of ``sigma_ln(n, l)`` whose first entry is ``i``."""
    if not 1 <= i <= n:
        raise ValueError(f"need 1 <= i <= {n}, got i={i}")
    return [s for s in sigma_ln(n, l) if s.perm[0] == i]


def perm_table(n: int, l: int, first: Optional[int] = None) -> list:
    """Every permutation of ``{1..n}`` with its ``d_l``, zero rows included."""
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    if first is not None and not 1 <= first <= n:
        raise ValueError(f"need 1 <= first <= {n}, got {first}")
    rows = []
    for p in itertools.permutations(range(1, n + 1)):
        if first is None or p[0] == first:
            rows.append(PermStats(p, l, count_divisions(p, l)))
    return rows


@lru_cache(maxsize=None)
def stirling2(n: int, l: int) -> int:
    """Stirling number of the second kind; 0 outside the valid range."""
    if n < 0 or l < 0:
        return 0
    if n == 0 and l == 0:
        return 1
    if n == 0 or l == 0 or l > n:
        return 0
    row = [1] + [0] * l  # S(0, k)
    for m in range(1, n + 1):
        new = [0] * (l + 1)
        for k in range(1, min(m, l) + 1):
            new[k] = k * row[k] + row[k - 1]
        row = new
    return row[l]


def stirling2_bruteforce(n: int, l: int) -> int:
    """Count set partitions of ``{0..n-1}`` into ``l`` blocks by restricted growth strings."""
    if n == 0:
        return int(l == 0)
    count = 0

    def grow(pos: int, used: int):
        nonlocal count
        if pos == n:
            count += used == l
            return
        for b in range(min(used + 1, l)):
            grow(pos + 1, max(used, b + 1))

    grow(0, 0)
    return count


def multinomial(sizes: Sequence[int]) -> int:
    out, total = 1, 0
    for s in sizes:
        total += s
        out *= comb(total, s)
    return out


def shuffles(block_sizes: Sequence[int], symbols: Optional[Sequence[int]] = None) -> list:
    """All ``[i_1, ..., i_l]``-shuffles.

    A shuffle is a permutation ``sigma`` (returned as its image tuple
    ``(sigma(1), ..., sigma(m))``) that increases on each consecutive block of
    positions of the given sizes.  ``symbols`` defaults to ``1..sum(sizes)``.
    """
    sizes = list(block_sizes)
    if any(s < 1 for s in sizes):
        raise ValueError(f"block sizes must be >= 1: {sizes}")
    total = sum(sizes)
    if symbols is None:
        symbols = range(1, total + 1)
    symbols = sorted(symbols)
    if len(symbols) != total or len(set(symbols)) != total:
        raise ValueError(f"block sizes {sizes} inconsistent with {len(symbols)} symbols")
    out = []

    def place(remaining: tuple, k: int, acc: tuple):
        if k == len(sizes):
            out.append(acc)
            return
        for block in itertools.combinations(remaining, sizes[k]):
            rest = tuple(s for s in remaining if s not in block)
            place(rest, k + 1, acc + block)

    place(tuple(symbols), 0, ())
    out.sort()
    return out


def lemma_sums(n: int) -> dict:
    """Exhaustive sums of ``d_l`` over all permutations of ``{1..n}``.

    Returns ``{l: {"total": ..., "by_first": {i: ...}}}`` for ``1 <= l <= n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    totals = [0] * (n + 1)
    by_first = [[0] * (n + 1) for _ in range(n + 1)]
    for p in itertools.permutations(range(1, n + 1)):
        counts = division_counts(p)
        row = by_first[p[0]]
        for l in range(1, n + 1):
            c = counts[l]
            if c:
                totals[l] += c
                row[l] += c
    return {
        l: {"total": totals[l], "by_first": {i: by_first[i][l] for i in range(1, n + 1)}}
        for l in range(1, n + 1)
    }
