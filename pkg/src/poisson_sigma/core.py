"""Exact sparse polynomials, truncated hbar-series and Poisson bivectors.

Polynomials are maps from exponent tuples to exact rationals.  Coordinates
are 0-based in the Python API (``x[0]`` is the first coordinate) and 1-based
in every string or JSON form (``x1``), matching how they are written by hand.
"""
from __future__ import annotations

import ast
import contextlib
import contextvars
import json
from fractions import Fraction
from numbers import Number, Rational
from typing import Callable, Iterable, Iterator, Mapping, Sequence

FORMAT_VERSION = 1

MultiIndex = tuple  # tuple[int, ...] of length d


class DimensionMismatch(ValueError):
    pass


class DegreeCapExceeded(ArithmeticError):
    pass


_degree_cap: contextvars.ContextVar[int | None] = contextvars.ContextVar("degree_cap", default=None)


@contextlib.contextmanager
def degree_cap(limit: int | None):
    """Fail loudly if any product inside the block exceeds ``limit``."""
    token = _degree_cap.set(limit)
    try:
        yield
    finally:
        _degree_cap.reset(token)


def _coerce(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)) and not isinstance(c, bool):
        return Fraction(c)
    if isinstance(c, bool):
        return Fraction(int(c))
    return c  # floats stay floats (Monte-Carlo weighted results)


def multi_index(exponents: Iterable[int], d: int | None = None) -> tuple:
    mi = tuple(int(e) for e in exponents)
    if any(e < 0 for e in mi):
        raise ValueError(f"negative exponent in {mi}")
    if d is not None and len(mi) != d:
        raise DimensionMismatch(f"multi-index {mi} has length {len(mi)}, expected {d}")
    return mi


class Poly:
    """Immutable sparse polynomial in ``d`` commuting variables."""

    __slots__ = ("d", "_terms", "_hash")

    def __init__(self, d: int, terms: Mapping[tuple, object] | None = None):
        if d < 0:
            raise ValueError("dimension must be non-negative")
        self.d = d
        clean = {}
        if terms:
            for mi, c in terms.items():
                mi = multi_index(mi, d)
                c = _coerce(c)
                if c != 0:
                    clean[mi] = clean.get(mi, 0) + c
                    if clean[mi] == 0:
                        del clean[mi]
        self._terms = clean
        self._hash = None

    # construction helpers
    @classmethod
    def zero(cls, d: int) -> "Poly":
        return cls(d)

    @classmethod
    def const(cls, d: int, c) -> "Poly":
        return cls(d, {(0,) * d: c})

    @classmethod
    def var(cls, d: int, i: int) -> "Poly":
        if not 0 <= i < d:
            raise IndexError(f"coordinate {i} out of range for d={d}")
        e = [0] * d
        e[i] = 1
        return cls(d, {tuple(e): 1})

    @classmethod
    def monomial(cls, exps: Sequence[int], c=1) -> "Poly":
        return cls(len(exps), {tuple(exps): c})

    @classmethod
    def _raw(cls, d: int, terms: dict) -> "Poly":
        p = object.__new__(cls)
        p.d = d
        p._terms = terms
        p._hash = None
        return p

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __iter__(self) -> Iterator[tuple]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def coeff(self, mi) -> object:
        return self._terms.get(tuple(mi), Fraction(0))

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def degree(self) -> int:
        return max((sum(m) for m in self._terms), default=-1)

    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m in self._terms)

    def constant_term(self):
        return self._terms.get((0,) * self.d, Fraction(0))

    # arithmetic
    def _check(self, other: "Poly"):
        if self.d != other.d:
            raise DimensionMismatch(f"dimension {self.d} vs {other.d}")

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check(other)
            return other
        if isinstance(other, Number):
            return Poly.const(self.d, other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            v = out.get(m, 0) + c
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
        return Poly._raw(self.d, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.d, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "Poly":
        c = _coerce(c)
        if c == 0:
            return Poly._raw(self.d, {})
        return Poly._raw(self.d, {m: v * c for m, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, Number):
            return self.scale(other)
        if not isinstance(other, Poly):
            return NotImplemented
        self._check(other)
        cap = _degree_cap.get()
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                if cap is not None and sum(m) > cap:
                    raise DegreeCapExceeded(f"degree {sum(m)} exceeds cap {cap}")
                v = out.get(m, 0) + c1 * c2
                if v == 0:
                    out.pop(m, None)
                else:
                    out[m] = v
        return Poly._raw(self.d, out)

    def __rmul__(self, other):
        if isinstance(other, Number):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        out = Poly.const(self.d, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.d == other.d and self._terms == other._terms
        if isinstance(other, Number):
            return self == Poly.const(self.d, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.d, frozenset(self._terms.items())))
        return self._hash

    def partial(self, i: int) -> "Poly":
        return partial(self, i)

    def evaluate(self, point: Sequence) -> object:
        total = 0
        for m, c in self._terms.items():
            t = c
            for x, e in zip(point, m):
                if e:
                    t = t * x**e
            total += t
        return total

    def map_coeffs(self, f: Callable) -> "Poly":
        return Poly(self.d, {m: f(c) for m, c in self._terms.items()})

    def substitute(self, images: Sequence["Poly"]) -> "Poly":
        """Compose: replace x_i by ``images[i]`` (all of a common dimension)."""
        if len(images) != self.d:
            raise DimensionMismatch("need one image per coordinate")
        if not images:
            return self
        e = images[0].d
        out = Poly.zero(e)
        cache: dict = {}
        for m, c in self._terms.items():
            t = Poly.const(e, c)
            for i, k in enumerate(m):
                if k:
                    if (i, k) not in cache:
                        cache[(i, k)] = images[i] ** k
                    t = t * cache[(i, k)]
            out = out + t
        return out

    def __repr__(self):
        return f"Poly({self.d}, {format_poly(self)!r})"

    def __str__(self):
        return format_poly(self)


def poly_arith(a: Poly, b: Poly, op: str) -> Poly:
    if a.d != b.d:
        raise DimensionMismatch(f"dimension {a.d} vs {b.d}")
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def partial(p: Poly, i: int) -> Poly:
    if not 0 <= i < p.d:
        raise IndexError(f"coordinate {i} out of range for d={p.d}")
    out = {}
    for m, c in p.items():
        k = m[i]
        if k:
            n = list(m)
            n[i] = k - 1
            out[tuple(n)] = c * k
    return Poly._raw(p.d, out)


def partial_multi(p: Poly, counts: Sequence[int]) -> Poly:
    """Apply prod_i d_i^{counts[i]}."""
    for i, k in enumerate(counts):
        for _ in range(k):
            p = partial(p, i)
            if p.is_zero():
                return p
    return p


# formatting and parsing

def _fmt_coeff(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"({c.numerator}/{c.denominator})"
    return repr(c)


def _fmt_monomial(m: tuple) -> str:
    parts = []
    for i, e in enumerate(m):
        if e == 1:
            parts.append(f"x{i + 1}")
        elif e > 1:
            parts.append(f"x{i + 1}^{e}")
    return "*".join(parts)


def monomial_order_key(m: tuple):
    return (-sum(m), tuple(-e for e in m))


def format_poly(p: Poly) -> str:
    if p.is_zero():
        return "0"
    chunks = []
    for m in sorted(p, key=monomial_order_key):
        c = p.coeff(m)
        neg = c < 0
        a = -c if neg else c
        mono = _fmt_monomial(m)
        if not mono:
            body = _fmt_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_fmt_coeff(a)}*{mono}"
        chunks.append(("-" if neg else "+", body))
    s = ("-" if chunks[0][0] == "-" else "") + chunks[0][1]
    for sign, body in chunks[1:]:
        s += f" {sign} {body}"
    return s


class ParseError(ValueError):
    pass


def parse_poly(text: str, d: int) -> Poly:
    """Parse integer-coefficient expressions in x1..xd with + - * ^ and parentheses."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as e:
        raise ParseError(f"cannot parse {text!r}: {e.msg}") from None

    def walk(node) -> Poly:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return Poly.const(d, node.value)
        if isinstance(node, ast.Name):
            name = node.id
            if name.startswith("x") and name[1:].isdigit():
                i = int(name[1:])
                if 1 <= i <= d:
                    return Poly.var(d, i - 1)
            raise ParseError(f"unknown variable {name!r} (expected x1..x{d})")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                    raise ParseError("exponent must be a non-negative integer literal")
                if node.right.value < 0:
                    raise ParseError("exponent must be a non-negative integer literal")
                return walk(node.left) ** node.right.value
            ops = {ast.Add: Poly.__add__, ast.Sub: Poly.__sub__, ast.Mult: Poly.__mul__}
            for k, f in ops.items():
                if isinstance(node.op, k):
                    return f(walk(node.left), walk(node.right))
        raise ParseError(f"unsupported syntax in {text!r}")

    return walk(tree)


# serialization of single polynomials: list of [e1..ed, num, den]

def poly_to_rows(p: Poly) -> list:
    rows = []
    for m in sorted(p, key=monomial_order_key):
        c = Fraction(p.coeff(m))
        rows.append([*m, c.numerator, c.denominator])
    return rows


def poly_from_rows(rows: Sequence[Sequence[int]], d: int) -> Poly:
    terms = {}
    for row in rows:
        if len(row) != d + 2:
            raise ValueError(f"row {row} should have {d + 2} entries")
        *e, num, den = row
        if den == 0:
            raise ValueError("zero denominator")
        m = multi_index(e, d)
        terms[m] = terms.get(m, 0) + Fraction(num, den)
    return Poly(d, terms)


class HbarSeries:
    """Truncated power series sum_{k<=K} c_k hbar^k.

    Coefficients may be any objects supporting +, - and (for multiplication)
    ``mul(a, b)``; the default product is ``a * b``.
    """

    __slots__ = ("order", "coeffs")

    def __init__(self, coeffs: Sequence, order: int | None = None, zero=None):
        coeffs = list(coeffs)
        if order is None:
            order = len(coeffs) - 1
        if order < 0:
            raise ValueError("order must be non-negative")
        if len(coeffs) > order + 1:
            coeffs = coeffs[: order + 1]
        if len(coeffs) < order + 1:
            if zero is None:
                if not coeffs:
                    raise ValueError("need a zero element to pad an empty series")
                zero = coeffs[0] - coeffs[0]
            coeffs += [zero] * (order + 1 - len(coeffs))
        self.order = order
        self.coeffs = tuple(coeffs)

    def __getitem__(self, k: int):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def _same(self, other: "HbarSeries"):
        if self.order != other.order:
            raise ValueError(f"orders differ: {self.order} vs {other.order}")

    def __add__(self, other: "HbarSeries") -> "HbarSeries":
        self._same(other)
        return HbarSeries([a + b for a, b in zip(self.coeffs, other.coeffs)], self.order)

    def __sub__(self, other: "HbarSeries") -> "HbarSeries":
        self._same(other)
        return HbarSeries([a - b for a, b in zip(self.coeffs, other.coeffs)], self.order)

    def __neg__(self):
        return HbarSeries([-a for a in self.coeffs], self.order)

    def mul(self, other: "HbarSeries", product: Callable | None = None) -> "HbarSeries":
        self._same(other)
        product = product or (lambda a, b: a * b)
        out = []
        for k in range(self.order + 1):
            acc = None
            for i in range(k + 1):
                t = product(self.coeffs[i], other.coeffs[k - i])
                acc = t if acc is None else acc + t
            out.append(acc)
        return HbarSeries(out, self.order)

    __mul__ = mul

    def truncate(self, order: int) -> "HbarSeries":
        if order > self.order:
            raise ValueError("cannot extend a truncated series")
        return HbarSeries(self.coeffs[: order + 1], order)

    def map(self, f: Callable) -> "HbarSeries":
        return HbarSeries([f(c) for c in self.coeffs], self.order)

    def is_zero(self) -> bool:
        return all((c.is_zero() if hasattr(c, "is_zero") else c == 0) for c in self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, HbarSeries):
            return NotImplemented
        return self.order == other.order and self.coeffs == other.coeffs

    def __repr__(self):
        return f"HbarSeries({format_series(self)!r}, order={self.order})"

    def __str__(self):
        return format_series(self)


def format_series(s: HbarSeries, symbol: str = "ħ") -> str:
    """Render as ``x1*x2 + (1/2) ħ``; each power of hbar is one chunk."""
    chunks = []
    for k, c in enumerate(s.coeffs):
        if hasattr(c, "is_zero") and c.is_zero() or (not hasattr(c, "is_zero") and c == 0):
            continue
        body = format_poly(c) if isinstance(c, Poly) else _fmt_coeff(_coerce(c))
        if k == 0:
            chunks.append(body)
            continue
        power = symbol if k == 1 else f"{symbol}^{k}"
        if body == "1":
            chunks.append(power)
        elif body == "-1":
            chunks.append(f"-{power}")
        else:
            if isinstance(c, Poly) and len(c) > 1:
                body = f"({body})"
            chunks.append(f"{body} {power}")
    if not chunks:
        return "0"
    out = chunks[0]
    for ch in chunks[1:]:
        out += f" - {ch[1:]}" if ch.startswith("-") else f" + {ch}"
    return out


class PoissonStructure:
    """Antisymmetric bivector Pi^{ij} with polynomial entries."""

    __slots__ = ("d", "components")

    def __init__(self, d: int, components: Sequence[Sequence[Poly]]):
        comp = tuple(tuple(row) for row in components)
        if len(comp) != d or any(len(r) != d for r in comp):
            raise DimensionMismatch(f"need a {d}x{d} array")
        for row in comp:
            for p in row:
                if p.d != d:
                    raise DimensionMismatch("entry dimension differs from d")
        for i in range(d):
            for j in range(i, d):
                if comp[i][j] != -comp[j][i]:
                    raise ValueError(f"not antisymmetric at ({i + 1},{j + 1})")
        self.d = d
        self.components = comp

    @classmethod
    def from_upper(cls, d: int, upper: Mapping[tuple, Poly | object]) -> "PoissonStructure":
        """Build from entries Pi^{ij}, i<j, 0-based."""
        comp = [[Poly.zero(d) for _ in range(d)] for _ in range(d)]
        for (i, j), p in upper.items():
            if not (0 <= i < j < d):
                raise ValueError(f"upper entries need 0 <= i < j < d, got {(i, j)}")
            if not isinstance(p, Poly):
                p = Poly.const(d, p)
            comp[i][j] = p
            comp[j][i] = -p
        return cls(d, comp)

    @classmethod
    def constant_standard(cls, d: int = 2) -> "PoissonStructure":
        """Pi^{2k-1,2k} = 1 (1-based)."""
        return cls.from_upper(d, {(2 * k, 2 * k + 1): 1 for k in range(d // 2)})

    @classmethod
    def so3(cls) -> "PoissonStructure":
        """Linear Lie-Poisson structure Pi^{ij} = eps^{ijk} x^k."""
        x = [Poly.var(3, i) for i in range(3)]
        return cls.from_upper(3, {(0, 1): x[2], (1, 2): x[0], (0, 2): -x[1]})

    def __getitem__(self, ij) -> Poly:
        i, j = ij
        return self.components[i][j]

    def max_degree(self) -> int:
        return max((p.degree() for row in self.components for p in row), default=-1)

    def is_constant(self) -> bool:
        return all(p.is_constant() for row in self.components for p in row)

    def jacobiator(self):
        return jacobiator(self)

    def is_poisson(self) -> bool:
        J = jacobiator(self)
        return all(p.is_zero() for a in J for b in a for p in b)

    def to_json(self) -> dict:
        entries = []
        for i in range(self.d):
            for j in range(i + 1, self.d):
                p = self.components[i][j]
                if not p.is_zero():
                    entries.append({"i": i + 1, "j": j + 1, "poly": poly_to_rows(p)})
        return {"format": "poisson", "version": FORMAT_VERSION, "dimension": self.d, "entries": entries}

    @classmethod
    def from_json(cls, doc: Mapping) -> "PoissonStructure":
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported Poisson format version {doc.get('version')!r}")
        d = int(doc["dimension"])
        upper = {}
        for e in doc.get("entries", []):
            i, j = int(e["i"]) - 1, int(e["j"]) - 1
            if i >= j:
                raise ValueError("only i<j entries may be stored")
            if (i, j) in upper:
                raise ValueError(f"duplicate entry ({i + 1},{j + 1})")
            upper[(i, j)] = poly_from_rows(e["poly"], d)
        return cls.from_upper(d, upper)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def load(cls, path) -> "PoissonStructure":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def __eq__(self, other):
        if not isinstance(other, PoissonStructure):
            return NotImplemented
        return self.d == other.d and self.components == other.components

    def __hash__(self):
        return hash((self.d, self.components))

    def __repr__(self):
        ent = {f"{i + 1}{j + 1}": str(self.components[i][j])
               for i in range(self.d) for j in range(i + 1, self.d) if self.components[i][j]}
        return f"PoissonStructure(d={self.d}, {ent})"


def jacobiator(pi: PoissonStructure):
    """J^{ijk} = sum_l Pi^{il} d_l Pi^{jk} + cyclic, as a nested d*d*d tuple."""
    d = pi.d
    P = pi.components
    dP = [[[partial(P[j][k], l) for l in range(d)] for k in range(d)] for j in range(d)]

    def term(i, j, k):
        acc = Poly.zero(d)
        for l in range(d):
            if P[i][l] and dP[j][k][l]:
                acc = acc + P[i][l] * dP[j][k][l]
        return acc

    return tuple(
        tuple(tuple(term(i, j, k) + term(j, k, i) + term(k, i, j) for k in range(d)) for j in range(d))
        for i in range(d)
    )


def rational_det(rows: Sequence[Sequence]) -> Fraction:
    """Exact determinant by fraction-valued Gaussian elimination."""
    a = [[Fraction(x) for x in r] for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


def rational_inverse(rows: Sequence[Sequence]) -> list:
    n = len(rows)
    a = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[c], a[piv] = a[piv], a[c]
        p = a[c][c]
        a[c] = [x / p for x in a[c]]
        for r in range(n):
            if r != c and a[r][c]:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [row[n:] for row in a]
