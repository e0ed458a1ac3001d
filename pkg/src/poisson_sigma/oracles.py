"""Independent reference computations used to regenerate fixtures.

Nothing here calls the code it is meant to check: the Moyal product is the
closed exponential formula, graph classes come from exhaustive generation
with permutation-minimal codes, curvature is expanded from its definition.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction

from .core import Poly, partial


def moyal(f: Poly, g: Poly, pi_const, K: int) -> list:
    """Coefficients of exp((hbar/2) Pi^{ij} d_i (x) d_j)(f (x) g) up to hbar^K.

    ``pi_const`` is a d x d antisymmetric matrix of numbers.
    """
    d = f.d
    out = []
    for k in range(K + 1):
        acc = Poly.zero(d)
        for ij in itertools.product(range(d), repeat=2 * k):
            c = Fraction(1)
            for s in range(k):
                c *= Fraction(pi_const[ij[2 * s]][ij[2 * s + 1]])
            if c == 0:
                continue
            df, dg = f, g
            for s in range(k):
                df = partial(df, ij[2 * s])
                dg = partial(dg, ij[2 * s + 1])
            acc = acc + (df * dg).scale(c / (2 ** k * math.factorial(k)))
        out.append(acc)
    return out


# graphs

def _kind_data(kinds):
    # (name, out slots, in slots)
    table = []
    for k in kinds:
        if k.kind == "L":
            table.append((str(k), 1, k.arity))
        else:
            table.append((str(k), 2, k.arity - 1))
    return table


def _connected(V, edges):
    seen = {0}
    stack = [0]
    adj = {v: set() for v in range(V)}
    for t, h in edges:
        adj[t].add(h)
        adj[h].add(t)
    while stack:
        v = stack.pop()
        for w in adj[v] - seen:
            seen.add(w)
            stack.append(w)
    return len(seen) == V


def _chains_ok(names, edges, dim):
    biv = [v for v, n in enumerate(names) if n in ("L1", "Pi1")]
    parent = {v: v for v in biv}

    def root(v):
        while parent[v] != v:
            v = parent[v]
        return v

    for t, h in edges:
        if t in parent and h in parent:
            parent[root(t)] = root(h)
    groups = {}
    for v in biv:
        groups.setdefault(root(v), []).append(names[v])
    for members in groups.values():
        c = Counter(members)
        if c["L1"] > dim or c["Pi1"] > 1:
            return False
    return True


def _min_code(names, edges):
    V = len(names)
    best = None
    for perm in itertools.permutations(range(V)):
        # perm[v] is the new label of v
        lab = [None] * V
        for v in range(V):
            lab[perm[v]] = names[v]
        code = (tuple(lab), tuple(sorted((perm[t], perm[h]) for t, h in edges)))
        if best is None or code < best:
            best = code
    return best


def brute_force_classes(n_ext: int, loops: int, kinds, dim: int = 2, max_vertices: int = 4) -> dict:
    """Exhaustive generate-and-filter.

    Returns {min_code: (names, edges, labelled_count)} where labelled_count is
    the number of edge sets on the sorted kind sequence landing in the class.
    """
    table = _kind_data(kinds)
    classes: dict = {}
    for V in range(1, max_vertices + 1):
        pairs = [(t, h) for t in range(V) for h in range(V) if t != h]
        for combo in itertools.combinations_with_replacement(sorted(table), V):
            names = [c[0] for c in combo]
            outs = [c[1] for c in combo]
            ins = [c[2] for c in combo]
            for r in range(len(pairs) + 1):
                if r - V + 1 != loops:
                    continue
                for edges in itertools.combinations(pairs, r):
                    od = [0] * V
                    idg = [0] * V
                    for t, h in edges:
                        od[t] += 1
                        idg[h] += 1
                    if any(od[v] > outs[v] or idg[v] > ins[v] for v in range(V)):
                        continue
                    legs = sum(outs) + sum(ins) - 2 * r
                    if legs != n_ext:
                        continue
                    if not _connected(V, edges) or not _chains_ok(names, edges, dim):
                        continue
                    code = _min_code(names, edges)
                    if code in classes:
                        classes[code][2] += 1
                    else:
                        classes[code] = [names, edges, 1]
    return classes


def curvature(christoffels, d: int) -> dict:
    """R^k_{lmn} = d_m G^k_{nl} - d_n G^k_{ml} + G^k_{mp} G^p_{nl} - G^k_{np} G^p_{ml}."""
    G = christoffels
    out = {}
    for k, l, m, n in itertools.product(range(d), repeat=4):
        r = partial(G[k][n][l], m) - partial(G[k][m][l], n)
        for p in range(d):
            r = r + G[k][m][p] * G[p][n][l] - G[k][n][p] * G[p][m][l]
        if not r.is_zero():
            out[(k, l, m, n)] = r
    return out


def l2_from_curvature(christoffels, d: int, omega=None, omega_inv=None) -> dict:
    """Arity-two bracket implied by the curvature; keyed (k, a, (m, n)) with m <= n.

    Without a symplectic form: (1/3)(R^k_{mna} + R^k_{nma}).  With one:
    (1/4)(R^k_{mna} + R^k_{nma} + omega^{kl} omega_{mp} R^p_{nla}).
    """
    R = curvature(christoffels, d)
    zero = Poly.zero(d)
    out = {}
    for k, a, m, n in itertools.product(range(d), repeat=4):
        if m > n:
            continue
        if omega is None:
            v = (R.get((k, m, n, a), zero) + R.get((k, n, m, a), zero)).scale(Fraction(1, 3))
        else:
            v = R.get((k, m, n, a), zero) + R.get((k, n, m, a), zero)
            for l, p in itertools.product(range(d), repeat=2):
                c = Fraction(omega_inv[k][l]) * Fraction(omega[m][p])
                if c:
                    v = v + R.get((p, n, l, a), zero).scale(c)
            v = v.scale(Fraction(1, 4))
        if not v.is_zero():
            out[(k, a, (m, n))] = v
    return out


def surface_row(g: int, n: int) -> dict:
    b1 = 2 * g + n - 1
    chi = 2 - 2 * g - n
    return {"absolute": [1, b1, 0], "relative": [0, b1, 1], "boundary": [n, n],
            "euler_characteristic": chi, "tadpole_admissible": chi == 0, "diagonal_entries": 2 * g + n}
