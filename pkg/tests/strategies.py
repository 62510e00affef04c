"""Hypothesis strategies for expressions."""
from hypothesis import strategies as st

from cohen import words as W


def exprs(n: int = 4, max_leaves: int = 8, max_exp: int = 4):
    gens = st.integers(1, n).map(W.Gen)

    def extend(children):
        return st.one_of(
            st.lists(children, min_size=0, max_size=3).map(lambda fs: W.Product(tuple(fs))),
            children.map(W.Inverse),
            st.tuples(children, st.integers(-max_exp, max_exp)).map(lambda t: W.Power(*t)),
            st.tuples(children, children).map(lambda t: W.Bracket(*t)),
            st.tuples(children, children, st.integers(1, 3)).map(lambda t: W.Engel(*t)),
        )

    return st.recursive(gens, extend, max_leaves=max_leaves)
