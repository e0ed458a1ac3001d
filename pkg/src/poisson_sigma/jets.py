"""Forms on the formal neighbourhood: Poly[x] (x) Lambda[dx] (x) Poly[y].

An element is a dict ``{(dxs, yexp): Poly}`` where ``dxs`` is a strictly
increasing tuple of one-form indices and ``yexp`` the fiber exponent.  The
dx factor is always written to the right of the y-monomial.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .core import Poly, partial


def wedge_sign(a: tuple, b: tuple):
    """Sign and sorted index tuple of dx^a ^ dx^b, or (0, None) if they overlap."""
    if set(a) & set(b):
        return 0, None
    seq = list(a) + list(b)
    sign = 1
    # bubble sort count; tuples are tiny
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                sign = -sign
    return sign, tuple(seq)


class JetForm:
    __slots__ = ("d", "terms")

    def __init__(self, d: int, terms: Mapping | None = None):
        self.d = d
        self.terms: dict = {}
        if terms:
            for k, p in terms.items():
                self._acc(k, p)

    def _acc(self, key, p: Poly):
        if p.is_zero():
            return
        cur = self.terms.get(key)
        s = p if cur is None else cur + p
        if s.is_zero():
            self.terms.pop(key, None)
        else:
            self.terms[key] = s

    @classmethod
    def y(cls, d: int, k: int) -> "JetForm":
        e = [0] * d
        e[k] = 1
        return cls(d, {((), tuple(e)): Poly.const(d, 1)})

    def copy(self) -> "JetForm":
        f = JetForm(self.d)
        f.terms = dict(self.terms)
        return f

    def __add__(self, other: "JetForm") -> "JetForm":
        out = self.copy()
        for k, p in other.terms.items():
            out._acc(k, p)
        return out

    def __neg__(self):
        return JetForm(self.d, {k: -p for k, p in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "JetForm":
        return JetForm(self.d, {k: p.scale(c) for k, p in self.terms.items()})

    def __mul__(self, other: "JetForm") -> "JetForm":
        out = JetForm(self.d)
        for (A, b), p in self.terms.items():
            for (B, c), q in other.terms.items():
                s, C = wedge_sign(A, B)
                if s:
                    pq = p * q
                    out._acc((C, tuple(u + v for u, v in zip(b, c))), pq if s > 0 else -pq)
        return out

    def d_y(self, l: int) -> "JetForm":
        """Partial derivative in the fiber variable y^l."""
        out = JetForm(self.d)
        for (A, b), p in self.terms.items():
            if b[l]:
                c = list(b)
                c[l] -= 1
                out._acc((A, tuple(c)), p.scale(b[l]))
        return out

    def times_y(self, l: int) -> "JetForm":
        out = JetForm(self.d)
        for (A, b), p in self.terms.items():
            c = list(b)
            c[l] += 1
            out._acc((A, tuple(c)), p)
        return out

    def is_zero(self) -> bool:
        return not self.terms

    def part(self, form_degree: int | None = None, y_degree: int | None = None) -> "JetForm":
        return JetForm(self.d, {
            k: p for k, p in self.terms.items()
            if (form_degree is None or len(k[0]) == form_degree)
            and (y_degree is None or sum(k[1]) == y_degree)
        })

    def __eq__(self, other):
        return isinstance(other, JetForm) and self.d == other.d and self.terms == other.terms

    def __repr__(self):
        body = " + ".join(
            f"({p})*" + "".join(f"y{i + 1}^{e}" for i, e in enumerate(y) if e) + "".join(f" dx{a + 1}" for a in dx)
            for (dx, y), p in sorted(self.terms.items())
        )
        return f"JetForm({body or '0'})"


class OddDerivation:
    """Odd derivation fixed by its values on the fiber generators y^k.

    With ``dx=True`` it additionally contains the de Rham part x^a -> dx^a.
    It kills every dx, so D(u dx^A) = D(u) dx^A for u even.
    """

    def __init__(self, d: int, images: list[JetForm], dx: bool = False):
        if len(images) != d:
            raise ValueError("one image per fiber generator")
        self.d = d
        self.images = images
        self.dx = dx

    def __call__(self, f: JetForm) -> JetForm:
        d = self.d
        out = JetForm(d)
        for (A, beta), p in f.terms.items():
            if self.dx:
                for a in range(d):
                    dp = partial(p, a)
                    if dp.is_zero():
                        continue
                    s, B = wedge_sign((a,), A)
                    if s:
                        out._acc((B, beta), dp if s > 0 else -dp)
            for k in range(d):
                bk = beta[k]
                if not bk:
                    continue
                rest = list(beta)
                rest[k] -= 1
                for (C, gamma), q in self.images[k].terms.items():
                    s, B = wedge_sign(C, A)
                    if not s:
                        continue
                    y = tuple(r + g for r, g in zip(rest, gamma))
                    out._acc((B, y), (p * q).scale(bk * s))
        return out


def koszul_delta(d: int) -> OddDerivation:
    """delta: y^k -> dx^k."""
    ims = []
    for k in range(d):
        ims.append(JetForm(d, {((k,), (0,) * d): Poly.const(d, 1)}))
    return OddDerivation(d, ims)


def koszul_contraction(f: JetForm) -> JetForm:
    """delta*: y^i iota_i / (p + q) on the (p, q) component; zero on (0, 0)."""
    d = f.d
    out = JetForm(d)
    for (A, beta), p in f.terms.items():
        n = len(A) + sum(beta)
        if n == 0:
            continue
        for s, i in enumerate(A):
            B = A[:s] + A[s + 1:]
            y = list(beta)
            y[i] += 1
            c = Fraction((-1) ** s, n)
            out._acc((B, tuple(y)), p.scale(c))
    return out
