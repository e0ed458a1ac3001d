from fractions import Fraction

import sympy as sp
from hypothesis import strategies as st

from poisson_sigma import Poly


def to_sympy(p: Poly, xs):
    expr = sp.Integer(0)
    for mi, c in p.items():
        term = sp.Rational(c.numerator, c.denominator)
        for x, e in zip(xs, mi):
            term *= x ** e
        expr += term
    return sp.expand(expr)


def from_sympy(expr, xs) -> Poly:
    d = len(xs)
    poly = sp.Poly(sp.expand(expr), *xs)
    return Poly(d, {tuple(m): Fraction(int(sp.Rational(c).p), int(sp.Rational(c).q)) for m, c in poly.terms()}) if not poly.is_zero else Poly.zero(d)


@st.composite
def polys(draw, d=2, max_terms=4, max_deg=3):
    n = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n):
        exps = tuple(draw(st.integers(0, max_deg)) for _ in range(d))
        num = draw(st.integers(-6, 6))
        den = draw(st.integers(1, 4))
        terms[exps] = terms.get(exps, 0) + Fraction(num, den)
    return Poly(d, {k: v for k, v in terms.items()})
