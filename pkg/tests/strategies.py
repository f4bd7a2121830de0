"""Hypothesis strategies shared by the property tests."""
from __future__ import annotations

from hypothesis import strategies as st

from pmdp_gp.expressions import Signomial

VARS = ("x", "y", "z", "w")

exponents = st.one_of(st.integers(-3, 3).map(float), st.sampled_from([-1.5, -0.5, 0.5, 1.5, 2.5]))
coefficients = st.one_of(st.floats(0.1, 10.0), st.floats(-10.0, -0.1))


@st.composite
def signomials(draw, vars=VARS, max_terms=4, positive=False):
    n = draw(st.integers(1, max_terms))
    out = Signomial()
    for _ in range(n):
        c = draw(st.floats(0.1, 10.0) if positive else coefficients)
        used = draw(st.lists(st.sampled_from(vars), min_size=0, max_size=len(vars), unique=True))
        out = out + Signomial.term(c, {v: draw(exponents) for v in used})
    return out


def posynomials(vars=VARS, max_terms=4):
    return signomials(vars, max_terms, positive=True)


@st.composite
def valuations(draw, vars=VARS, lo=0.2, hi=5.0):
    return {v: draw(st.floats(lo, hi)) for v in vars}
