"""Curved L-infinity brackets generated by a torsion-free connection.

The brackets live in a polynomial jet model: fiber coordinates y^k (even),
base one-forms dx^a (odd) and polynomial dependence on the base point x.
The whole structure is packed into one odd derivation

    D = delta + L_1 + L_2 + ...,   delta(y^k) = dx^k,
    L_1 = d_x - Gamma^k_{ai} dx^a y^i d/dy^k,
    L_n(y^k) = (1/n!) (l_n)^k_{a; i_1..i_n} dx^a y^{i_1}..y^{i_n},

and D^2 = 0 is the full tower of generalized Jacobi identities (the curving
is the delta term).  The higher L_n are solved degree by degree with the
Koszul contraction.  For a symplectic connection the contraction is applied
to generating functions (Hamiltonians) instead of vector fields, which is
what keeps the pairing invariant.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Sequence

from .core import (
    FORMAT_VERSION,
    DimensionMismatch,
    Poly,
    degree_cap,
    partial,
    poly_from_rows,
    poly_to_rows,
    rational_det,
    rational_inverse,
)
from .jets import JetForm, OddDerivation, koszul_contraction, koszul_delta


class TorsionError(ValueError):
    pass


class DegenerateForm(ValueError):
    pass


def _frac_matrix(m) -> tuple:
    return tuple(tuple(Fraction(v) for v in row) for row in m)


def _multinomial_weight(beta) -> int:
    w = 1
    for e in beta:
        w *= factorial(e)
    return w


def _beta_of(I: Sequence[int], d: int) -> tuple:
    b = [0] * d
    for i in I:
        b[i] += 1
    return tuple(b)


def _index_of(beta: Sequence[int]) -> tuple:
    return tuple(i for i, e in enumerate(beta) for _ in range(e))


class Connection:
    """Christoffel symbols Gamma^k_{ij} (``christoffels[k][i][j]``), optional constant omega."""

    def __init__(self, d: int, christoffels, omega=None):
        G = tuple(tuple(tuple(christoffels[k][i][j] for j in range(d)) for i in range(d)) for k in range(d))
        for k in range(d):
            for i in range(d):
                for j in range(d):
                    if not isinstance(G[k][i][j], Poly) or G[k][i][j].d != d:
                        raise DimensionMismatch("Christoffel entries must be Poly of dimension d")
        self.d = d
        self.christoffels = G
        self.omega = None
        if omega is not None:
            om = _frac_matrix(omega)
            if len(om) != d or any(len(r) != d for r in om):
                raise DimensionMismatch("omega must be d x d")
            if any(om[i][j] != -om[j][i] for i in range(d) for j in range(d)):
                raise ValueError("omega must be antisymmetric")
            self.omega = om

    @classmethod
    def from_entries(cls, d: int, entries: dict, omega=None) -> "Connection":
        """``entries[(k, i, j)] = Poly``; missing entries are zero (no symmetrization)."""
        Z = Poly.zero(d)
        G = [[[entries.get((k, i, j), Z) for j in range(d)] for i in range(d)] for k in range(d)]
        return cls(d, G, omega)

    @classmethod
    def flat(cls, d: int, omega=None) -> "Connection":
        return cls.from_entries(d, {}, omega)

    @classmethod
    def from_lowered(cls, d: int, lowered: dict, omega) -> "Connection":
        """Symplectic connection from a totally symmetric Gamma_{kij} = omega_{kl} Gamma^l_{ij}.

        Keys of ``lowered`` are sorted index triples; the tensor is symmetrized.
        """
        om = _frac_matrix(omega)
        inv = rational_inverse(om)
        Z = Poly.zero(d)
        low = {}
        for key, p in lowered.items():
            for perm in set(itertools.permutations(key)):
                low[perm] = p
        G = [[[sum((low.get((m, i, j), Z).scale(inv[l][m]) for m in range(d) if inv[l][m]), Z)
               for j in range(d)] for i in range(d)] for l in range(d)]
        return cls(d, G, om)

    def is_torsion_free(self) -> bool:
        G = self.christoffels
        return all(G[k][i][j] == G[k][j][i] for k in range(self.d) for i in range(self.d) for j in range(i))

    def nabla_omega(self):
        """(nabla omega)_{i;jk} for the constant form omega."""
        if self.omega is None:
            raise ValueError("no symplectic form attached")
        d, G, om = self.d, self.christoffels, self.omega
        out = {}
        for i in range(d):
            for j in range(d):
                for k in range(d):
                    acc = Poly.zero(d)
                    for l in range(d):
                        acc = acc - G[l][i][j].scale(om[l][k]) - G[l][i][k].scale(om[j][l])
                    if acc:
                        out[(i, j, k)] = acc
        return out

    def is_symplectic(self) -> bool:
        return self.omega is not None and rational_det(self.omega) != 0 and not self.nabla_omega()

    def curvature(self):
        """R^k_{lmn} = d_m Gamma^k_{nl} - d_n Gamma^k_{ml} + Gamma^k_{mp} Gamma^p_{nl} - Gamma^k_{np} Gamma^p_{ml}."""
        d, G = self.d, self.christoffels
        out = {}
        for k, l, m, n in itertools.product(range(d), repeat=4):
            acc = partial(G[k][n][l], m) - partial(G[k][m][l], n)
            for p in range(d):
                acc = acc + G[k][m][p] * G[p][n][l] - G[k][n][p] * G[p][m][l]
            if acc:
                out[(k, l, m, n)] = acc
        return out

    def transformed(self, A) -> "Connection":
        """Connection in coordinates x' = A x (A constant and invertible)."""
        d = self.d
        A = _frac_matrix(A)
        B = rational_inverse(A)
        back = [sum((Poly.var(d, j).scale(B[i][j]) for j in range(d) if B[i][j]), Poly.zero(d)) for i in range(d)]
        Gs = [[[self.christoffels[p][q][r].substitute(back) for r in range(d)] for q in range(d)] for p in range(d)]
        G = [[[Poly.zero(d) for _ in range(d)] for _ in range(d)] for _ in range(d)]
        for k, i, j in itertools.product(range(d), repeat=3):
            acc = Poly.zero(d)
            for p, q, r in itertools.product(range(d), repeat=3):
                c = A[k][p] * B[q][i] * B[r][j]
                if c and Gs[p][q][r]:
                    acc = acc + Gs[p][q][r].scale(c)
            G[k][i][j] = acc
        om = None
        if self.omega is not None:
            om = [[sum(self.omega[q][r] * B[q][i] * B[r][j] for q in range(d) for r in range(d))
                   for j in range(d)] for i in range(d)]
        return Connection(d, G, om)

    def to_json(self) -> dict:
        d = self.d
        ents = []
        for k, i, j in itertools.product(range(d), repeat=3):
            p = self.christoffels[k][i][j]
            if p:
                ents.append({"k": k + 1, "i": i + 1, "j": j + 1, "poly": poly_to_rows(p)})
        doc = {"format": "connection", "version": FORMAT_VERSION, "dimension": d, "christoffels": ents}
        if self.omega is not None:
            doc["omega"] = [[[v.numerator, v.denominator] for v in row] for row in self.omega]
        return doc

    @classmethod
    def from_json(cls, doc) -> "Connection":
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported connection format version {doc.get('version')!r}")
        d = int(doc["dimension"])
        entries = {}
        for e in doc.get("christoffels", []):
            entries[(int(e["k"]) - 1, int(e["i"]) - 1, int(e["j"]) - 1)] = poly_from_rows(e["poly"], d)
        om = None
        if doc.get("omega") is not None:
            om = [[Fraction(*v) if isinstance(v, list) else Fraction(v) for v in row] for row in doc["omega"]]
        return cls.from_entries(d, entries, om)


def standard_omega(d: int):
    """omega_{2k-1,2k} = +1, omega_{2k,2k-1} = -1 (1-based)."""
    if d % 2:
        raise DegenerateForm("symplectic form needs even dimension")
    om = [[Fraction(0)] * d for _ in range(d)]
    for k in range(d // 2):
        om[2 * k][2 * k + 1] = Fraction(1)
        om[2 * k + 1][2 * k] = Fraction(-1)
    return om


def curved_symplectic_example() -> Connection:
    """d=2 symplectic connection with polynomial Christoffels and nonzero curvature."""
    x1, x2 = Poly.var(2, 0), Poly.var(2, 1)
    return Connection.from_lowered(2, {(0, 0, 0): x2, (0, 1, 1): x1 * x2, (1, 1, 1): x1}, standard_omega(2))


def single_christoffel_example() -> Connection:
    """d=2 torsion-free connection with Gamma^1_{11} = x2 only (not symplectic)."""
    return Connection.from_entries(2, {(0, 0, 0): Poly.var(2, 1)})


@dataclass
class LInftyBrackets:
    d: int
    N: int
    derivations: dict  # n -> OddDerivation; n = 1 carries the d_x part
    gauge: str = "vector"
    omega: tuple | None = None
    curving: tuple | None = None  # l_0; zero in this model (absorbed into delta)

    def component_tensor(self, n: int) -> dict:
        """Nonzero (l_n)^k_{a; I} keyed by (k, a, I) with I sorted."""
        if not 1 <= n <= self.N:
            raise ValueError(f"arity {n} outside 1..{self.N}")
        out = {}
        for k, img in enumerate(self.derivations[n].images):
            for (A, beta), p in img.terms.items():
                (a,) = A
                out[(k, a, _index_of(beta))] = p.scale(_multinomial_weight(beta))
        return out

    def component(self, n: int, k: int, a: int, I: Sequence[int]) -> Poly:
        beta = _beta_of(I, self.d)
        p = self.derivations[n].images[k].terms.get(((a,), beta))
        if p is None:
            return Poly.zero(self.d)
        return p.scale(_multinomial_weight(beta))

    def with_component(self, n: int, k: int, a: int, I: Sequence[int], shift) -> "LInftyBrackets":
        """Copy with (l_n)^k_{a;I} shifted by ``shift`` (all orderings of I at once)."""
        beta = _beta_of(I, self.d)
        ders = dict(self.derivations)
        old = ders[n]
        ims = [im.copy() for im in old.images]
        add = shift if isinstance(shift, Poly) else Poly.const(self.d, shift)
        ims[k]._acc(((a,), beta), add.scale(Fraction(1, _multinomial_weight(beta))))
        ders[n] = OddDerivation(self.d, ims, dx=old.dx)
        return LInftyBrackets(self.d, self.N, ders, self.gauge, self.omega, self.curving)

    def dump(self) -> dict:
        """All nonzero components, 1-based, for regression diffing."""
        rows = []
        for n in range(1, self.N + 1):
            for (k, a, I), p in sorted(self.component_tensor(n).items()):
                rows.append({"n": n, "k": k + 1, "a": a + 1, "inputs": [i + 1 for i in I], "poly": poly_to_rows(p)})
        return {"format": "linfty-brackets", "version": FORMAT_VERSION, "dimension": self.d,
                "arity_cutoff": self.N, "gauge": self.gauge, "components": rows}


def _l1_derivation(conn: Connection) -> OddDerivation:
    d, G = conn.d, conn.christoffels
    ims = []
    for k in range(d):
        t = {}
        for a in range(d):
            for i in range(d):
                if G[k][a][i]:
                    t[((a,), _beta_of((i,), d))] = -G[k][a][i]
        ims.append(JetForm(d, t))
    return OddDerivation(d, ims, dx=True)


def _hamiltonian(vf: Sequence[JetForm], omega, q: int) -> JetForm:
    """Generating function of a vector field homogeneous of fiber degree q."""
    d = len(vf)
    h = JetForm(d)
    for m in range(d):
        for k in range(d):
            if omega[m][k]:
                h = h + vf[k].times_y(m).scale(Fraction(omega[m][k]) / (q + 1))
    return h


def _hamiltonian_vf(h: JetForm, omega_inv) -> list:
    d = h.d
    return [sum((h.d_y(l).scale(omega_inv[k][l]) for l in range(d) if omega_inv[k][l]), JetForm(d))
            for k in range(d)]


def _obstruction(ders: dict, n: int, k: int) -> JetForm:
    """sum_{a+b=n, a,b>=1} L_a(L_b(y^k))."""
    d = ders[1].d
    acc = JetForm(d)
    for a in range(1, n):
        acc = acc + ders[a](ders[n - a].images[k])
    return acc


def build_from_connection(conn: Connection, N: int, gauge: str = "auto",
                          max_degree: int | None = None) -> LInftyBrackets:
    """Solve D^2 = 0 for L_2..L_N given L_1 = nabla.

    ``gauge``: "vector" contracts vector fields, "hamiltonian" contracts
    generating functions (needs a symplectic connection), "auto" picks
    hamiltonian exactly when the connection is symplectic.
    """
    if N < 1:
        raise ValueError("arity cutoff must be at least 1")
    if not conn.is_torsion_free():
        raise TorsionError("connection has torsion")
    if gauge == "auto":
        gauge = "hamiltonian" if conn.omega is not None and conn.is_symplectic() else "vector"
    if gauge == "hamiltonian":
        if conn.omega is None or rational_det(conn.omega) == 0:
            raise DegenerateForm("hamiltonian gauge needs a nondegenerate omega")
        if not conn.is_symplectic():
            raise ValueError("hamiltonian gauge needs nabla omega = 0")
        om_inv = rational_inverse(conn.omega)
    elif gauge != "vector":
        raise ValueError(f"unknown gauge {gauge!r}")
    d = conn.d
    with degree_cap(max_degree):
        ders = {1: _l1_derivation(conn)}
        for n in range(2, N + 1):
            F = [_obstruction(ders, n, k) for k in range(d)]
            if gauge == "vector":
                ims = [-koszul_contraction(f) for f in F]
            else:
                h = -koszul_contraction(_hamiltonian(F, conn.omega, n - 1))
                ims = _hamiltonian_vf(h, om_inv)
            ders[n] = OddDerivation(d, ims)
    return LInftyBrackets(d, N, ders, gauge, conn.omega)


@dataclass
class IdentityReport:
    arity: int
    residual: dict = field(default_factory=dict)  # (k, (a, b), I) -> Poly

    @property
    def is_zero(self) -> bool:
        return not self.residual


def jacobi_residual(br: LInftyBrackets, n: int) -> list:
    """[delta, L_n] + sum_{a+b=n} L_a L_b applied to each y^k."""
    delta = koszul_delta(br.d)
    return [delta(br.derivations[n].images[k]) + _obstruction(br.derivations, n, k) for k in range(br.d)]


def check_linfty_identities(br: LInftyBrackets, arity_max: int) -> list:
    if arity_max > br.N:
        raise ValueError(f"arity {arity_max} exceeds cutoff {br.N}")
    reports = []
    for n in range(1, arity_max + 1):
        res = {}
        for k, form in enumerate(jacobi_residual(br, n)):
            for (A, beta), p in form.terms.items():
                res[(k, A, _index_of(beta))] = p.scale(_multinomial_weight(beta))
        reports.append(IdentityReport(n, res))
    return reports


@dataclass
class PairingReport:
    arity: int
    residual: dict = field(default_factory=dict)  # (s, a, (i0..in)) -> Poly, s = swapped slot pair

    @property
    def is_zero(self) -> bool:
        return not self.residual


def _check_omega(omega):
    if omega is None:
        raise DegenerateForm("a symplectic form is required")
    om = _frac_matrix(omega)
    if rational_det(om) == 0:
        raise DegenerateForm("omega is degenerate")
    return om


def pairing_tensor(br: LInftyBrackets, omega, n: int) -> dict:
    """T_{a; i0 i1..in} = omega_{i0 k} (l_n)^k_{a; i1..in}, keyed (a, (i0, I))."""
    d = br.d
    comp = br.component_tensor(n)
    out = {}
    for (k, a, I), p in comp.items():
        for i0 in range(d):
            c = omega[i0][k]
            if c:
                key = (a, (i0,) + I)
                out[key] = out.get(key, Poly.zero(d)) + p.scale(c)
    return {k: v for k, v in out.items() if v}


def check_pairing_invariance(br: LInftyBrackets, omega, arity_max: int) -> list:
    om = _check_omega(omega)
    if arity_max > br.N:
        raise ValueError(f"arity {arity_max} exceeds cutoff {br.N}")
    d = br.d
    reports = []
    for n in range(1, arity_max + 1):
        T = pairing_tensor(br, om, n)

        def get(a, idx):
            return T.get((a, (idx[0],) + tuple(sorted(idx[1:]))), None)

        res = {}
        for a in range(d):
            for idx in itertools.product(range(d), repeat=n + 1):
                for s in range(n):
                    sw = list(idx)
                    sw[s], sw[s + 1] = sw[s + 1], sw[s]
                    u, v = get(a, idx), get(a, sw)
                    diff = (u if u is not None else Poly.zero(d)) - (v if v is not None else Poly.zero(d))
                    if diff:
                        res[(s, a, idx)] = diff
        reports.append(PairingReport(n, res))
    return reports


def _pair(omega, U: Sequence[JetForm], V: Sequence[JetForm]) -> JetForm:
    """omega_{jk} U^j ^ V^k."""
    d = len(U)
    acc = JetForm(d)
    for j in range(d):
        for k in range(d):
            if omega[j][k] and not U[j].is_zero() and not V[k].is_zero():
                acc = acc + (U[j] * V[k]).scale(omega[j][k])
    return acc


def _basis(d: int, j: int) -> list:
    return [JetForm(d, {((), (0,) * d): Poly.const(d, 1)}) if k == j else JetForm(d) for k in range(d)]


@dataclass
class ShuffleReport:
    total_arity: int
    direct: dict    # j -> JetForm: sum_m 1/(m!(n-1)!) omega(l_n(l_m(X^m), X^{n-1}), e_j)
    mirrored: dict  # j -> JetForm: the second sum, slots moved through the pairing

    @property
    def is_zero(self) -> bool:
        return all(f.is_zero() for f in self.direct.values()) and all(f.is_zero() for f in self.mirrored.values())

    def residual(self) -> dict:
        out = {}
        for tag, part in (("direct", self.direct), ("mirrored", self.mirrored)):
            for j, f in part.items():
                for (A, beta), p in f.terms.items():
                    out[(tag, j, A, _index_of(beta))] = p
        return out


def shuffle_cancellation_check(br: LInftyBrackets, omega, total_arity: int) -> ShuffleReport:
    """Both rearranged sums of the boundary-reduction variation, against Z = e_j.

    X is the generic fiber vector y.  The shuffle weight
    |shuffle(m, n-1)| / (m+n-1)! = 1 / (m! (n-1)!) turns each summand into a
    composite of the derivations L_m, with l_0 the delta term and l_1
    carrying its d_x part.  The mirrored sum omega(Z, l_m(l_n(X^n), X^{m-1}))
    is evaluated as omega(l_n(X^n), l_m(Z, X^{m-1})), i.e. with Z moved
    through the pairing; that move is exactly the invariance of omega.
    """
    om = _check_omega(omega)
    T = total_arity
    if T < 1:
        raise ValueError("total arity must be positive")
    if T > br.N:
        raise ValueError(f"total arity {T} exceeds cutoff {br.N}")
    d = br.d
    ders = br.derivations
    delta = koszul_delta(d)
    Ly = {n: ders[n].images for n in range(1, T + 1)}
    Ly[0] = delta.images

    def apply(m, f):
        return delta(f) if m == 0 else ders[m](f)

    inner = [JetForm(d) for _ in range(d)]
    for n in range(1, T + 1):
        m = T - n
        for k in range(d):
            inner[k] = inner[k] + apply(m, Ly[n][k])
    direct = {j: _pair(om, inner, _basis(d, j)) for j in range(d)}

    mirrored = {}
    for j in range(d):
        acc = JetForm(d)
        Z = _basis(d, j)
        for m in range(1, T + 1):
            n = T - m
            tensor_part = [f.d_y(j) for f in Ly[m]]  # l_m(Z, X^{m-1}) / (m-1)!
            acc = acc + _pair(om, Ly[n], tensor_part)
            if m == 1:
                # the d_x part of l_1 is not a tensor and stays in place
                dx_only = OddDerivation(d, [JetForm(d) for _ in range(d)], dx=True)
                acc = acc + _pair(om, Z, [dx_only(f) for f in Ly[n]])
        mirrored[j] = acc
    return ShuffleReport(T, direct, mirrored)


@dataclass
class HolographyTerm:
    arity: int
    weight: Fraction
    tensor: dict  # (a, (i0, I)) -> Poly for arity >= 1; (i, j) -> Fraction for arity 0


def holography_homotopy_term(br: LInftyBrackets, omega, truncation: int) -> dict:
    """Kernel of H = -int omega(X, 1/2 dX + sum_n l_n(X^n)/(n+1)!), truncated.

    Returns ``{"prefactor": -1, "terms": [HolographyTerm...]}``; the arity-0
    term is the kinetic 1/2 dX kernel with tensor omega.  Zero kernels are
    omitted.
    """
    om = _check_omega(omega)
    if truncation > br.N:
        raise ValueError(f"truncation {truncation} exceeds cutoff {br.N}")
    d = br.d
    terms = [HolographyTerm(0, Fraction(1, 2), {(i, j): om[i][j] for i in range(d) for j in range(d) if om[i][j]})]
    for n in range(1, truncation + 1):
        T = pairing_tensor(br, om, n)
        if T:
            terms.append(HolographyTerm(n, Fraction(1, factorial(n + 1)), T))
    return {"prefactor": -1, "terms": terms}


def transform_brackets(br: LInftyBrackets, A) -> dict:
    """Component tensors of ``br`` pushed through x' = A x, keyed by arity."""
    d = br.d
    A = _frac_matrix(A)
    B = rational_inverse(A)
    back = [sum((Poly.var(d, j).scale(B[i][j]) for j in range(d) if B[i][j]), Poly.zero(d)) for i in range(d)]
    out = {}
    for n in range(1, br.N + 1):
        comp = {key: p.substitute(back) for key, p in br.component_tensor(n).items()}
        new = {}
        for k in range(d):
            for a in range(d):
                for I in itertools.combinations_with_replacement(range(d), n):
                    acc = Poly.zero(d)
                    for (p_, b, J), val in comp.items():
                        c = A[k][p_] * B[b][a]
                        if not c:
                            continue
                        # sum over orderings of J matched against the fixed ordering I
                        s = Fraction(0)
                        for perm in set(itertools.permutations(J)):
                            t = Fraction(1)
                            for jj, ii in zip(perm, I):
                                t *= B[jj][ii]
                                if not t:
                                    break
                            s += t
                        if s:
                            acc = acc + val.scale(c * s)
                    if acc:
                        new[(k, a, I)] = acc
        out[n] = new
    return out


def load_connection(path) -> Connection:
    with open(path) as fh:
        return Connection.from_json(json.load(fh))
