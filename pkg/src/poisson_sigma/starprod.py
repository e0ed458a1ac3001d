"""Bidifferential operators from boundary graphs, the star product and its checks."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .core import DimensionMismatch, HbarSeries, PoissonStructure, Poly, partial_multi
from .graphs import (
    L_KIND,
    PI_KIND,
    GraphClass,
    enumerate_boundary_graphs,
    kinds_for_poisson_degree,
    vacuum_candidates,
)
from .weights import NORMALIZATION_TAG, WeightCache, graph_weight_mc


class CurvedVertexError(ValueError):
    reason = "curved-vertex"


class MissingWeights(KeyError):
    def __init__(self, hashes):
        self.hashes = sorted(hashes)
        super().__init__(f"missing weights for {', '.join(self.hashes)}")

    def __str__(self):
        return self.args[0]


class BiDiffOperator:
    """sum_t c_t(x) d^{L_t} f d^{R_t} g, keyed by (L, R) exponent tuples."""

    def __init__(self, d: int, terms: Mapping | None = None):
        self.d = d
        self.terms: dict = {}
        for key, c in (terms or {}).items():
            self._acc(tuple(map(tuple, key)), c)

    def _acc(self, key, c: Poly):
        if c.is_zero():
            return
        cur = self.terms.get(key)
        s = c if cur is None else cur + c
        if s.is_zero():
            self.terms.pop(key, None)
        else:
            self.terms[key] = s

    def is_zero(self) -> bool:
        return not self.terms

    def __call__(self, f: Poly, g: Poly) -> Poly:
        if f.d != self.d or g.d != self.d:
            raise DimensionMismatch("operand dimension differs from operator")
        out = Poly.zero(self.d)
        for (L, R), c in self.terms.items():
            df = partial_multi(f, L)
            if df.is_zero():
                continue
            dg = partial_multi(g, R)
            if dg.is_zero():
                continue
            out = out + c * df * dg
        return out

    def scale(self, w) -> "BiDiffOperator":
        return BiDiffOperator(self.d, {k: c.scale(w) for k, c in self.terms.items()})

    def __add__(self, other: "BiDiffOperator") -> "BiDiffOperator":
        out = BiDiffOperator(self.d, self.terms)
        for k, c in other.terms.items():
            out._acc(k, c)
        return out

    def __eq__(self, other):
        return isinstance(other, BiDiffOperator) and self.d == other.d and self.terms == other.terms

    def __repr__(self):
        parts = []
        for (L, R), c in sorted(self.terms.items()):
            parts.append(f"({c}) d{list(L)} (x) d{list(R)}")
        return "BiDiffOperator(" + (" + ".join(parts) or "0") + ")"


def graph_to_bidiff(gc: GraphClass, pi: PoissonStructure) -> BiDiffOperator:
    """Sum over edge colourings: Pi-vertex v with ordered out-edges (e1, e2)
    contributes d_{incoming} Pi^{i(e1) i(e2)}; edges into f, g become the
    left, right derivatives."""
    g = gc.representative
    d = pi.d
    obs = {g.vertices[v].label: v for v in g.observables()}
    if set(obs) != {"f", "g"}:
        raise ValueError("boundary graph needs observables labelled f and g")
    internal = g.internal()
    for v in internal:
        k = g.vertices[v]
        if k.kind == L_KIND:
            raise CurvedVertexError(f"vertex {v} is an l-vertex; flat-target mode only assembles Pi-vertices")
        if k.kind != PI_KIND or g.out_degree(v) != 2:
            raise ValueError(f"vertex {v} is not a Pi-vertex with two out-edges")
    edges = list(g.edges)
    out_edges = {v: [i for i, (t, _) in enumerate(edges) if t == v] for v in internal}
    in_edges = {v: [i for i, (_, h) in enumerate(edges) if h == v] for v in range(g.n_vertices)}
    op = BiDiffOperator(d)
    deriv_cache: dict = {}
    for colour in itertools.product(range(d), repeat=len(edges)):
        coef = Poly.const(d, 1)
        for v in internal:
            e1, e2 = out_edges[v]
            i, j = colour[e1], colour[e2]
            base = pi[i, j]
            if base.is_zero():
                coef = None
                break
            cnt = [0] * d
            for e in in_edges[v]:
                cnt[colour[e]] += 1
            key = (i, j, tuple(cnt))
            if key not in deriv_cache:
                deriv_cache[key] = partial_multi(base, cnt)
            dp = deriv_cache[key]
            if dp.is_zero():
                coef = None
                break
            coef = coef * dp
        if coef is None:
            continue
        L = [0] * d
        R = [0] * d
        for e in in_edges[obs["f"]]:
            L[colour[e]] += 1
        for e in in_edges[obs["g"]]:
            R[colour[e]] += 1
        op._acc((tuple(L), tuple(R)), coef)
    return op


# weight sources

@dataclass
class WeightSource:
    values: dict               # hash -> number
    errors: dict = field(default_factory=dict)  # hash -> std error (MC only)
    tag: str = "exact"

    def get(self, h: str):
        return self.values.get(h)


def moyal_exact_weights(K: int) -> WeightSource:
    """(1/2)^k for the k-fold wedge, the only constant-Pi class at order k."""
    vals = {}
    for k in range(K + 1):
        (gc,) = enumerate_boundary_graphs(k, 1)
        vals[gc.hash] = Fraction(1, 2 ** k)
    return WeightSource(vals, {}, "exact")


def mc_weights(classes: Sequence[GraphClass], samples: int, seed: int, cache: WeightCache | None = None,
               positions=(0.0, 1.0), threads: int = 1) -> WeightSource:
    """Estimate each class once; class i (in hash order) uses seed SeedSequence([seed, i])."""
    vals, errs = {}, {}
    for i, gc in enumerate(sorted(classes, key=lambda c: c.hash)):
        res = cache.get(gc.hash, positions) if cache is not None else None
        if res is None or res.samples < samples:
            sub = int(np.random.SeedSequence([seed, i]).generate_state(1, dtype=np.uint64)[0])
            res = graph_weight_mc(gc, positions, samples, sub, threads)
            if cache is not None:
                cache.put(res)
        vals[gc.hash] = res.estimate
        errs[gc.hash] = res.std_error
    return WeightSource(vals, errs, NORMALIZATION_TAG)


def cache_weights(cache: WeightCache, positions=(0.0, 1.0)) -> WeightSource:
    vals, errs = {}, {}
    for (h, pos, tag), r in cache.all().items():
        if pos == tuple(float(p) for p in positions) and tag == NORMALIZATION_TAG:
            vals[h] = r.estimate
            errs[h] = r.std_error
    return WeightSource(vals, errs, NORMALIZATION_TAG)


def arity_cap_for(pi: PoissonStructure) -> int:
    return max(pi.max_degree(), 0) + 1


class StarProduct:
    """f * g = sum_k hbar^k sum_classes (w / |Aut|) B(f, g), truncated at order K."""

    def __init__(self, pi: PoissonStructure, weights: WeightSource, K: int, arity_cap: int | None = None):
        self.pi = pi
        self.K = K
        self.weights = weights
        cap = arity_cap if arity_cap is not None else arity_cap_for(pi)
        self.classes = {k: enumerate_boundary_graphs(k, cap) for k in range(K + 1)}
        self.operators: dict = {}
        missing = []
        for k, classes in self.classes.items():
            ops = []
            for gc in classes:
                B = graph_to_bidiff(gc, pi)
                if B.is_zero():
                    continue
                w = weights.get(gc.hash)
                if w is None:
                    missing.append(gc.hash)
                    continue
                ops.append((gc, w, B))
            self.operators[k] = ops
        if missing:
            raise MissingWeights(missing)

    def coefficient(self, k: int, f: Poly, g: Poly, weights: Mapping | None = None) -> Poly:
        acc = Poly.zero(self.pi.d)
        for gc, w, B in self.operators[k]:
            if weights is not None:
                w = weights[gc.hash]
            if w == 0:
                continue
            val = B(f, g)
            if val:
                acc = acc + val.scale(Fraction(w) / gc.aut if isinstance(w, (int, Fraction)) else w / gc.aut)
        return acc

    def __call__(self, f: Poly, g: Poly, weights: Mapping | None = None) -> HbarSeries:
        if f.d != self.pi.d or g.d != self.pi.d:
            raise DimensionMismatch("operand dimension differs from Pi")
        return HbarSeries([self.coefficient(k, f, g, weights) for k in range(self.K + 1)], self.K)

    def series(self, A: HbarSeries, B: HbarSeries, weights: Mapping | None = None) -> HbarSeries:
        """Bilinear extension to hbar-series, truncated at K."""
        d = self.pi.d
        out = [Poly.zero(d) for _ in range(self.K + 1)]
        for a, fa in enumerate(A.coeffs):
            if fa.is_zero():
                continue
            for b, gb in enumerate(B.coeffs):
                if gb.is_zero() or a + b > self.K:
                    continue
                for k in range(self.K + 1 - a - b):
                    out[a + b + k] = out[a + b + k] + self.coefficient(k, fa, gb, weights)
        return HbarSeries(out, self.K)


def star_product(f: Poly, g: Poly, pi: PoissonStructure, weights: WeightSource, K: int) -> HbarSeries:
    return StarProduct(pi, weights, K)(f, g)


def _as_series(p: Poly, K: int) -> HbarSeries:
    return HbarSeries([p], K, zero=Poly.zero(p.d))


def _defect(sp: StarProduct, f, g, h, weights=None) -> HbarSeries:
    K = sp.K
    left = sp.series(sp(f, g, weights), _as_series(h, K), weights)
    right = sp.series(_as_series(f, K), sp(g, h, weights), weights)
    return left - right


def associativity_defect(f: Poly, g: Poly, h: Poly, pi: PoissonStructure, weights: WeightSource,
                         K: int) -> HbarSeries:
    """(f*g)*h - f*(g*h) mod hbar^(K+1)."""
    return _defect(StarProduct(pi, weights, K), f, g, h)


@dataclass
class DefectReport:
    defect: HbarSeries       # exact in the (rationalised) weights
    sigma: HbarSeries        # propagated one-sigma error per monomial coefficient

    def within(self, factor: float = 3.0) -> bool:
        for D, S in zip(self.defect.coeffs, self.sigma.coeffs):
            for m, c in D.items():
                if abs(float(c)) > factor * float(S.coeff(m)):
                    return False
        return True

    def worst_ratio(self) -> float:
        worst = 0.0
        for D, S in zip(self.defect.coeffs, self.sigma.coeffs):
            for m, c in D.items():
                s = float(S.coeff(m))
                worst = max(worst, abs(float(c)) / s if s > 0 else float("inf"))
        return worst


def associativity_defect_with_error(f: Poly, g: Poly, h: Poly, pi: PoissonStructure, weights: WeightSource,
                                    K: int, star: StarProduct | None = None) -> DefectReport:
    """Defect plus linearised error propagation from the weight standard errors.

    The defect is a polynomial of degree at most two in the weights, so a
    central difference with unit step in exact arithmetic is its exact
    partial derivative.
    """
    sp = star or StarProduct(pi, weights, K)
    base = {gc.hash: Fraction(w) for ops in sp.operators.values() for gc, w, _ in ops}
    D = _defect(sp, f, g, h, base)
    var = [dict() for _ in range(K + 1)]
    for hsh, err in weights.errors.items():
        if hsh not in base or not err:
            continue
        up = dict(base)
        dn = dict(base)
        up[hsh] += 1
        dn[hsh] -= 1
        grad = _defect(sp, f, g, h, up) - _defect(sp, f, g, h, dn)
        for k, c in enumerate(grad.coeffs):
            for m, v in c.items():
                var[k][m] = var[k].get(m, 0.0) + (float(v) / 2.0 * err) ** 2
    d = pi.d
    sigma = HbarSeries([Poly(d, {m: v ** 0.5 for m, v in vk.items()}) for vk in var], K)
    return DefectReport(D, sigma)


# parallel edges

class SuperPoly:
    """Polynomials in odd generators (sorted tuple) and even generators (exponent tuple)."""

    def __init__(self, n_odd: int, n_even: int, terms=None):
        self.n_odd = n_odd
        self.n_even = n_even
        self.terms: dict = {}
        for k, c in (terms or {}).items():
            self._acc(k, c)

    def _acc(self, key, c):
        if c == 0:
            return
        v = self.terms.get(key, 0) + c
        if v == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = v

    @staticmethod
    def _merge(a: tuple, b: tuple):
        if set(a) & set(b):
            return 0, None
        seq = list(a) + list(b)
        sign = 1
        for i in range(len(seq)):
            for j in range(len(seq) - 1 - i):
                if seq[j] > seq[j + 1]:
                    seq[j], seq[j + 1] = seq[j + 1], seq[j]
                    sign = -sign
        return sign, tuple(seq)

    def __mul__(self, other: "SuperPoly") -> "SuperPoly":
        out = SuperPoly(self.n_odd, self.n_even)
        for (o1, e1), c1 in self.terms.items():
            for (o2, e2), c2 in other.terms.items():
                s, o = self._merge(o1, o2)
                if s:
                    out._acc((o, tuple(a + b for a, b in zip(e1, e2))), s * c1 * c2)
        return out

    def __add__(self, other: "SuperPoly") -> "SuperPoly":
        out = SuperPoly(self.n_odd, self.n_even, self.terms)
        for k, c in other.terms.items():
            out._acc(k, c)
        return out

    def d_odd(self, i: int) -> "SuperPoly":
        """Left derivative in the odd generator i."""
        out = SuperPoly(self.n_odd, self.n_even)
        for (o, e), c in self.terms.items():
            if i in o:
                p = o.index(i)
                out._acc((o[:p] + o[p + 1:], e), (-1) ** p * c)
        return out

    def d_even(self, i: int) -> "SuperPoly":
        out = SuperPoly(self.n_odd, self.n_even)
        for (o, e), c in self.terms.items():
            if e[i]:
                n = list(e)
                n[i] -= 1
                out._acc((o, tuple(n)), e[i] * c)
        return out

    def is_zero(self) -> bool:
        return not self.terms


@dataclass
class ParallelEdgeCertificate:
    m: int
    n: int
    dim: int
    eta_odd: bool
    residual: SuperPoly

    @property
    def is_zero(self) -> bool:
        return self.residual.is_zero()


def _random_tensor(rng: random.Random, shape, symmetric_from: int = 0):
    vals = {}
    for idx in itertools.product(*[range(s) for s in shape]):
        key = idx[:symmetric_from] + tuple(sorted(idx[symmetric_from:]))
        if key not in vals:
            vals[key] = Fraction(rng.randint(-9, 9), rng.randint(1, 5))
        vals[idx] = vals[key]
    return vals


def verify_parallel_edge_vanishing(m: int, n: int, dim: int = 2, pi_tensor=None, l_tensor=None,
                                   seed: int | None = None, eta_odd: bool = True) -> ParallelEdgeCertificate:
    """Contract the two eta-slots of a Pi_m vertex with two slots of the pairing tensor of l_n.

    The Pi-vertex is sum P[i, j, K] eta_i eta_j u^K with m-1 even spectator
    slots u; the l-vertex is sum Q[i, j, L] xi^i xi^j v^L with all n+1 slots
    even (invariance makes the pairing tensor symmetric).  The algebraic
    propagator sum_i d/d eta_i d/d xi^i is applied twice.  Unspecified
    tensors are random, P with no symmetry imposed.  ``eta_odd=False`` gives
    eta the wrong parity, which should leave a nonzero residual.
    """
    if m < 1 or n < 1:
        raise ValueError("arities must be positive")
    rng = random.Random(seed)
    P = pi_tensor if pi_tensor is not None else _random_tensor(rng, [dim] * (m + 1), 2)
    Q = l_tensor if l_tensor is not None else _random_tensor(rng, [dim] * (n + 1), 0)
    # even blocks: xi, u, v, and eta when it is made even
    n_even = 4 * dim
    XI, U, V, ETA = 0, dim, 2 * dim, 3 * dim

    A = SuperPoly(dim, n_even)
    for idx, c in P.items():
        e = [0] * n_even
        for r in idx[2:]:
            e[U + r] += 1
        if eta_odd:
            s, o = SuperPoly._merge((idx[0],), (idx[1],))
            if s:
                A._acc((o, tuple(e)), s * c)
        else:
            e[ETA + idx[0]] += 1
            e[ETA + idx[1]] += 1
            A._acc(((), tuple(e)), c)
    B = SuperPoly(dim, n_even)
    for idx, c in Q.items():
        e = [0] * n_even
        e[XI + idx[0]] += 1
        e[XI + idx[1]] += 1
        for r in idx[2:]:
            e[V + r] += 1
        B._acc(((), tuple(e)), c)

    prod = A * B
    for _ in range(2):
        acc = SuperPoly(dim, n_even)
        for i in range(dim):
            d_eta = prod.d_odd(i) if eta_odd else prod.d_even(ETA + i)
            acc = acc + d_eta.d_even(XI + i)
        prod = acc
    return ParallelEdgeCertificate(m, n, dim, eta_odd, prod)


# vacuum graphs

@dataclass
class VacuumReport:
    per_loop: dict          # loops -> list of class hashes
    constant_pi: bool

    @property
    def empty(self) -> bool:
        return all(not v for v in self.per_loop.values())

    @property
    def vanishing_certified(self) -> bool:
        return self.constant_pi and self.empty


def regular_vacuum_vanishing(pi: PoissonStructure, max_loops: int, dim: int | None = None) -> VacuumReport:
    """Vacuum-filter survivors for the Pi-vertex kinds that Pi can feed.

    Only for constant Pi is an empty result a vanishing statement; otherwise
    the candidate set is reported without a claim.
    """
    dim = pi.d if dim is None else dim
    degree = max(pi.max_degree(), 0)
    kinds = kinds_for_poisson_degree(degree)
    per = {}
    for l in range(0, max_loops + 1):
        per[l] = [gc.hash for gc in vacuum_candidates(kinds, l, dim)]
    return VacuumReport(per, pi.is_constant())


# master-equation bookkeeping

@dataclass(frozen=True)
class Stratum:
    kind: str            # vertex-to-boundary | boundary-cluster | bulk-collapse | observable-collapse
    vertices: tuple
    observable: str
    internal_edges: int
    required_edges: int
    classification: str


def qme_degree_audit(gc: GraphClass) -> list:
    """Codimension-one strata of the configuration space of ``gc`` with their fate.

    Rules: a cluster touching the boundary away from observables kills the
    eta-side forms (Dirichlet).  A cluster S collapsing onto an observable
    contributes iff it carries 2|S| - 1 internal edges (product term).  A
    bulk cluster of two vertices contributes an L-infinity/Jacobi term iff it
    carries exactly one edge; larger bulk clusters with 2|S| - 3 edges vanish
    by Kontsevich's lemma; every other cluster vanishes by form degree.
    """
    g = gc.representative
    internal = g.internal()
    obs = {v: g.vertices[v].label or str(v) for v in g.observables()}
    edges = g.edges
    out = []

    def inside(S):
        return sum(1 for t, h in edges if t in S and h in S)

    for r in range(1, len(internal) + 1):
        for S in itertools.combinations(internal, r):
            Sset = set(S)
            e = inside(Sset)
            if r == 1:
                out.append(Stratum("vertex-to-boundary", S, "", e, 0, "dirichlet-zero"))
            else:
                out.append(Stratum("boundary-cluster", S, "", e, 2 * r - 2, "dirichlet-zero"))
            for v, lab in obs.items():
                e_o = inside(Sset | {v})
                cls = "product" if e_o == 2 * r - 1 else "vanishes-by-degree"
                out.append(Stratum("observable-collapse", S, lab, e_o, 2 * r - 1, cls))
            if r >= 2:
                req = 2 * r - 3
                if e != req:
                    cls = "vanishes-by-degree"
                elif r == 2:
                    kinds = sorted("l" if g.vertices[v].kind == L_KIND else "Pi" for v in S)
                    cls = "linfty-jacobi:" + "-".join(kinds)
                else:
                    cls = "kontsevich-vanishing"
                out.append(Stratum("bulk-collapse", S, "", e, req, cls))
    return out
