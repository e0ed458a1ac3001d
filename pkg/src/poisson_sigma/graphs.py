"""Feynman graphs of the sigma model: vertex kinds, canonical forms, enumeration.

Edges point from the eta side (tail) to the X side (head).  A vertex kind
fixes its slots:

    L(n)   one eta slot, n X slots      (l_n interaction)
    Pi(m)  two eta slots, m-1 X slots   (m-th Taylor piece of Pi)
    obs    boundary observable, X slots only, unlimited

Slots not used by an edge are external legs, so the legs of a bulk graph are
determined by its vertices and edges.  Out-going half-edges at a vertex are
unordered and so are in-coming ones; the matching symmetry factor is |Aut|,
counted over vertex permutations.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import FORMAT_VERSION

L_KIND, PI_KIND, OBS_KIND = "L", "Pi", "obs"


@dataclass(frozen=True, order=True)
class VertexKind:
    kind: str
    arity: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind not in (L_KIND, PI_KIND, OBS_KIND):
            raise ValueError(f"unknown vertex kind {self.kind!r}")

    @property
    def out_slots(self) -> int:
        return {L_KIND: 1, PI_KIND: 2, OBS_KIND: 0}[self.kind]

    @property
    def in_slots(self) -> int | None:
        if self.kind == L_KIND:
            return self.arity
        if self.kind == PI_KIND:
            return self.arity - 1
        return None

    @property
    def valence(self) -> int | None:
        i = self.in_slots
        return None if i is None else i + self.out_slots

    def __str__(self):
        if self.kind == OBS_KIND:
            return f"obs({self.label})"
        return f"{self.kind}{self.arity}"


def LVertex(n: int) -> VertexKind:
    return VertexKind(L_KIND, n)


def PiVertex(m: int) -> VertexKind:
    if m < 1:
        raise ValueError("Pi-vertex arity must be at least 1")
    return VertexKind(PI_KIND, m)


def BoundaryObservable(label: str) -> VertexKind:
    return VertexKind(OBS_KIND, 0, label)


def default_kinds(max_arity: int = 3) -> tuple:
    return tuple([LVertex(n) for n in range(1, max_arity + 1)] + [PiVertex(m) for m in range(1, max_arity + 1)])


@dataclass(frozen=True)
class FeynmanGraph:
    vertices: tuple
    edges: tuple
    legs: tuple = ()

    @classmethod
    def bulk(cls, vertices: Sequence[VertexKind], edges: Iterable[tuple]) -> "FeynmanGraph":
        """Graph whose legs are the unused slots."""
        vertices = tuple(vertices)
        edges = tuple(tuple(e) for e in edges)
        outd, ind = Counter(t for t, _ in edges), Counter(h for _, h in edges)
        legs = []
        for v, k in enumerate(vertices):
            if k.kind == OBS_KIND:
                continue
            legs += [(v, "eta")] * (k.out_slots - outd[v])
            legs += [(v, "X")] * (k.in_slots - ind[v])
        return cls(vertices, edges, tuple(legs))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def out_degree(self, v: int) -> int:
        return sum(1 for t, _ in self.edges if t == v)

    def in_degree(self, v: int) -> int:
        return sum(1 for _, h in self.edges if h == v)

    def internal(self) -> list:
        return [v for v, k in enumerate(self.vertices) if k.kind != OBS_KIND]

    def observables(self) -> list:
        return [v for v, k in enumerate(self.vertices) if k.kind == OBS_KIND]

    def loops(self) -> int:
        """First Betti number of the underlying graph (legs excluded)."""
        comps = len(_components(self.n_vertices, self.edges))
        return len(self.edges) - self.n_vertices + comps

    def is_connected(self) -> bool:
        return len(_components(self.n_vertices, self.edges)) <= 1

    def bivalent(self) -> list:
        return [v for v, k in enumerate(self.vertices) if k.valence == 2]

    def higher(self) -> list:
        return [v for v, k in enumerate(self.vertices) if k.valence is not None and k.valence >= 3]

    def relabel(self, order: Sequence[int]) -> "FeynmanGraph":
        """New graph whose vertex i is old vertex order[i]."""
        pos = {v: i for i, v in enumerate(order)}
        verts = tuple(self.vertices[v] for v in order)
        edges = tuple(sorted((pos[t], pos[h]) for t, h in self.edges))
        legs = tuple(sorted((pos[v], tag) for v, tag in self.legs))
        return FeynmanGraph(verts, edges, legs)

    def to_json(self) -> dict:
        return {
            "vertices": [{"kind": k.kind, "arity": k.arity, **({"label": k.label} if k.label else {})}
                         for k in self.vertices],
            "edges": [list(e) for e in self.edges],
            "legs": [[v, tag] for v, tag in self.legs],
        }

    @classmethod
    def from_json(cls, doc) -> "FeynmanGraph":
        verts = tuple(VertexKind(v["kind"], int(v.get("arity", 0)), v.get("label", "")) for v in doc["vertices"])
        edges = tuple(tuple(int(x) for x in e) for e in doc.get("edges", []))
        legs = tuple((int(v), str(tag)) for v, tag in doc.get("legs", []))
        n = len(verts)
        for t, h in edges:
            if not (0 <= t < n and 0 <= h < n):
                raise ValueError(f"edge {(t, h)} refers to a missing vertex")
        for v, tag in legs:
            if not 0 <= v < n or tag not in ("X", "eta"):
                raise ValueError(f"bad leg {(v, tag)}")
        return cls(verts, edges, legs)


def _components(n: int, edges) -> list:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for t, h in edges:
        parent[find(t)] = find(h)
    groups = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


# validation

def violations(g: FeynmanGraph, require_connected: bool = True, dim: int | None = None) -> list:
    """Reasons a graph is not admissible; empty when it passes every filter."""
    out = []
    if any(t == h for t, h in g.edges):
        out.append("tadpole")
    if len(set(g.edges)) != len(g.edges):
        out.append("parallel-edge")
    if any(k.kind == L_KIND and k.arity == 0 for k in g.vertices):
        out.append("l0-vertex")
    legs = Counter(g.legs)
    for v, k in enumerate(g.vertices):
        if k.kind == OBS_KIND:
            if g.out_degree(v) or legs[(v, "eta")] or legs[(v, "X")]:
                out.append(f"observable {v} has out-edges or legs")
            continue
        if g.out_degree(v) + legs[(v, "eta")] != k.out_slots:
            out.append(f"vertex {v} eta slots mismatch")
        if g.in_degree(v) + legs[(v, "X")] != k.in_slots:
            out.append(f"vertex {v} X slots mismatch")
    if require_connected and not g.is_connected():
        out.append("disconnected")
    if dim is not None and not chains_within_caps(g, dim):
        out.append("bivalent-chain")
    return out


def chains_within_caps(g: FeynmanGraph, dim: int) -> bool:
    """Each connected run of bivalent vertices holds <= dim L1 and <= 1 Pi1 vertices."""
    biv = set(g.bivalent())
    if not biv:
        return True
    idx = sorted(biv)
    local = {v: i for i, v in enumerate(idx)}
    sub = [(local[t], local[h]) for t, h in g.edges if t in biv and h in biv]
    for comp in _components(len(idx), sub):
        kinds = Counter(g.vertices[idx[i]].kind for i in comp)
        if kinds[L_KIND] > dim or kinds[PI_KIND] > 1:
            return False
    return True


# canonical form

def _vertex_key(k: VertexKind) -> tuple:
    order = {L_KIND: 0, PI_KIND: 1, OBS_KIND: 2}
    return (order[k.kind], k.arity, k.label)


def _rank(sigs: list) -> list:
    uniq = sorted(set(sigs))
    r = {s: i for i, s in enumerate(uniq)}
    return [r[s] for s in sigs]


def _refine(colors: list, outs: list, ins: list) -> list:
    while True:
        sigs = [(colors[v], tuple(sorted(colors[w] for w in outs[v])), tuple(sorted(colors[w] for w in ins[v])))
                for v in range(len(colors))]
        new = _rank(sigs)
        if len(set(new)) == len(set(colors)):
            return new
        colors = new


def _search(g: FeynmanGraph):
    """Yield every leaf ordering of the individualization-refinement tree."""
    n = g.n_vertices
    outs = [[] for _ in range(n)]
    ins = [[] for _ in range(n)]
    for t, h in g.edges:
        outs[t].append(h)
        ins[h].append(t)
    legc = Counter(g.legs)
    init = _rank([(_vertex_key(k), legc[(v, "eta")], legc[(v, "X")]) for v, k in enumerate(g.vertices)])
    stack = [_refine(init, outs, ins)]
    while stack:
        colors = stack.pop()
        cells = Counter(colors)
        target = min((c for c, m in cells.items() if m > 1), default=None)
        if target is None:
            yield sorted(range(n), key=lambda v: colors[v])
            continue
        for v in [u for u in range(n) if colors[u] == target]:
            ind = [2 * c + (1 if (c == target and u != v) else 0) for u, c in enumerate(colors)]
            stack.append(_refine(_rank(ind), outs, ins))


def _code(g: FeynmanGraph, order: Sequence[int]) -> tuple:
    h = g.relabel(order)
    return (tuple(_vertex_key(k) for k in h.vertices), h.edges, h.legs)


def canonical_form(g: FeynmanGraph):
    """(canonical relabelled graph, |Aut|)."""
    best, best_order, count = None, None, 0
    for order in _search(g):
        c = _code(g, order)
        if best is None or c < best:
            best, best_order, count = c, order, 1
        elif c == best:
            count += 1
    if best is None:  # empty graph
        return g, 1
    return g.relabel(best_order), count


def _hash_code(code) -> str:
    blob = json.dumps(code, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:20]


def canonical_hash(g: FeynmanGraph) -> str:
    can, _ = canonical_form(g)
    return _hash_code(_code(can, range(can.n_vertices)))


def automorphisms(g: FeynmanGraph) -> int:
    return canonical_form(g)[1]


@dataclass(frozen=True)
class GraphClass:
    hash: str
    representative: FeynmanGraph
    aut: int

    @classmethod
    def of(cls, g: FeynmanGraph) -> "GraphClass":
        can, aut = canonical_form(g)
        return cls(_hash_code(_code(can, range(can.n_vertices))), can, aut)

    def to_json(self) -> dict:
        return {"version": FORMAT_VERSION, **self.representative.to_json(), "hash": self.hash, "aut": self.aut}

    @classmethod
    def from_json(cls, doc) -> "GraphClass":
        gc = cls.of(FeynmanGraph.from_json(doc))
        if "hash" in doc and doc["hash"] != gc.hash:
            raise ValueError(f"stored hash {doc['hash']} does not match recomputed {gc.hash}")
        return gc


# bounds and enumeration

@dataclass(frozen=True)
class FinitenessBound:
    v_max: int
    l1_chain_cap: int
    pi1_chain_cap: int
    bivalent_max: int


def finiteness_bound(n_ext: int, loops: int, dim: int) -> FinitenessBound:
    if n_ext < 0 or loops < 0:
        raise ValueError("counts must be non-negative")
    v_max = max(0, 2 * loops + n_ext - 2)
    # every bivalent run sits on one edge of the reduced graph, on a leg, or is a whole cycle
    runs = max(1, v_max + loops - 1 + n_ext)
    return FinitenessBound(v_max, dim, 1, (dim + 1) * runs)


def _kind_multisets(kinds: Sequence[VertexKind], V: int, excess: int, v_max: int):
    for combo in itertools.combinations_with_replacement(sorted(kinds), V):
        if sum(k.valence - 2 for k in combo) != excess:
            continue
        if sum(1 for k in combo if k.valence >= 3) > v_max:
            continue
        yield combo


def _edge_sets(combo: Sequence[VertexKind], E: int):
    V = len(combo)
    pairs = [(t, h) for t in range(V) for h in range(V) if t != h]
    out_cap = [k.out_slots for k in combo]
    in_cap = [k.in_slots for k in combo]
    outd, ind = [0] * V, [0] * V
    chosen: list = []

    def rec(start):
        if len(chosen) == E:
            yield tuple(chosen)
            return
        for p in range(start, len(pairs) - (E - len(chosen)) + 1):
            t, h = pairs[p]
            if outd[t] < out_cap[t] and ind[h] < in_cap[h]:
                outd[t] += 1
                ind[h] += 1
                chosen.append((t, h))
                yield from rec(p + 1)
                chosen.pop()
                outd[t] -= 1
                ind[h] -= 1

    yield from rec(0)


def _classes_for_combo(args):
    combo, E, dim = args
    found = {}
    for edges in _edge_sets(combo, E):
        g = FeynmanGraph.bulk(combo, edges)
        if not g.is_connected() or not chains_within_caps(g, dim):
            continue
        gc = GraphClass.of(g)
        found.setdefault(gc.hash, gc)
    return found


class _Builder:
    """Core vertices plus bivalent chains hung on slots; edges are added as chains are laid."""

    def __init__(self, core):
        self.vertices = list(core)
        self.edges = []

    def add(self, kind):
        self.vertices.append(kind)
        return len(self.vertices) - 1

    def run_from(self, start, k, L1):
        # start -> c1 -> ... -> ck, returns the last vertex
        prev = start
        for _ in range(k):
            c = self.add(L1)
            self.edges.append((prev, c))
            prev = c
        return prev

    def run_into(self, end, k, L1):
        # ck -> ... -> c1 -> end, returns ck
        nxt = end
        for _ in range(k):
            c = self.add(L1)
            self.edges.append((c, nxt))
            nxt = c
        return nxt


def _chain_options(dim, has_l1, has_pi1):
    """Decorations: L1 runs of length <= dim, and (a, b) splits around one Pi1."""
    runs = list(range(dim + 1)) if has_l1 else [0]
    splits = [(a, b) for a in runs for b in runs if a + b <= dim] if has_pi1 else []
    return runs, splits


def _decorated_classes(args):
    """Classes whose higher-valence vertices are exactly ``core``.

    Every bivalent vertex sits on a chain joining two core slots or hanging
    off one (ending in a leg).  Chains joining an eta slot to an X slot are
    L1 runs; chains joining two X slots carry exactly one Pi1; no bivalent
    kind can join two eta slots.
    """
    core, n_ext, dim, max_vertices, min_vertices, L1, P1 = args
    runs, splits = _chain_options(dim, L1 is not None, P1 is not None)
    v = len(core)
    out_free = [k.out_slots for k in core]
    in_free = [k.in_slots for k in core]
    items: list = []
    found: dict = {}
    state = {"legs": 0, "extra": 0}

    def cost(it):
        t = it[0]
        if t == "d":
            return it[3]
        if t == "p":
            return it[3] + it[4] + 1
        if t == "leg-out":
            return it[2]
        return it[2] + it[4] + (1 if it[3] else 0)

    def build():
        b = _Builder(core)
        for it in items:
            t = it[0]
            if t == "d":
                _, u, w, k = it
                last = b.run_from(u, k, L1)
                b.edges.append((last, w))
            elif t == "p":
                _, u, w, a, c = it
                p = b.add(P1)
                b.edges.append((p, b.run_into(u, a, L1)))
                b.edges.append((p, b.run_into(w, c, L1)))
            elif t == "leg-out":
                b.run_from(it[1], it[2], L1)
            else:
                _, u, a, pi, c = it
                top = b.run_into(u, a, L1)
                if pi:
                    p = b.add(P1)
                    b.edges.append((p, top))
                    b.run_from(p, c, L1)
        return FeynmanGraph.bulk(b.vertices, b.edges)

    def options(u, side):
        opts = []
        if side == "out":
            opts += [("leg-out", u, k) for k in runs]
            for w in range(v):
                if in_free[w] > 0:
                    opts += [("d", u, w, k) for k in runs if k > 0 or w != u]
        else:
            opts += [("leg-in", u, a, False, 0) for a in runs]
            opts += [("leg-in", u, a, True, c) for a, c in splits]
            for w in range(u, v):
                if w == u:
                    if in_free[u] >= 2:
                        opts += [("p", u, u, a, c) for a, c in splits if a <= c and a + c > 0]
                elif in_free[w] > 0:
                    opts += [("p", u, w, a, c) for a, c in splits]
            for w in range(u + 1, v):
                if out_free[w] > 0:
                    opts += [("d", w, u, k) for k in runs]
        return opts

    def apply(it, sign):
        t = it[0]
        if t == "d":
            out_free[it[1]] -= sign
            in_free[it[2]] -= sign
        elif t == "p":
            in_free[it[1]] -= sign
            in_free[it[2]] -= sign
        elif t == "leg-out":
            out_free[it[1]] -= sign
            state["legs"] += sign
        else:
            in_free[it[1]] -= sign
            state["legs"] += sign
        state["extra"] += sign * cost(it)

    def rec(last):
        u = next((x for x in range(v) if out_free[x] or in_free[x]), None)
        if u is None:
            if state["legs"] == n_ext and min_vertices <= v + state["extra"]:
                g = build()
                if g.is_connected() and not any(t == h for t, h in g.edges) \
                        and len(set(g.edges)) == len(g.edges):
                    gc = GraphClass.of(g)
                    found.setdefault(gc.hash, gc)
            return
        side = "out" if out_free[u] else "in"
        key = (u, side)
        for it in options(u, side):
            if last.get(key) is not None and it < last[key]:
                continue
            is_leg = it[0].startswith("leg")
            if is_leg and state["legs"] >= n_ext:
                continue
            if v + state["extra"] + cost(it) > max_vertices:
                continue
            apply(it, 1)
            items.append(it)
            prev = last.get(key)
            last[key] = it
            rec(last)
            last[key] = prev
            items.pop()
            apply(it, -1)

    rec({})
    return found


def enumerate_graphs(n_ext: int, loops: int, kinds: Sequence[VertexKind] | None = None, dim: int = 2,
                     max_vertices: int | None = None, min_vertices: int = 1, workers: int = 1) -> list:
    """All admissible connected classes with n_ext legs and the given loop number, sorted by hash.

    Higher-valence vertices are placed first (at most v_max of them); bivalent
    vertices only ever appear in chains, so they are hung on the slots
    afterwards.  Without ``max_vertices`` the list is complete.
    """
    kinds = tuple(kinds) if kinds is not None else default_kinds()
    for k in kinds:
        if k.kind == OBS_KIND:
            raise ValueError("bulk enumeration takes L and Pi kinds only")
        if k.kind == L_KIND and k.arity < 1:
            raise ValueError("LVertex(0) is never generated")
    b = finiteness_bound(n_ext, loops, dim)
    if max_vertices is None:
        max_vertices = b.v_max + b.bivalent_max
    excess = 2 * loops + n_ext - 2
    if excess < 0:
        return []
    merged: dict = {}
    if excess == 0:
        # a single chain or a single cycle of bivalent vertices
        for V in range(max(1, min_vertices), min(max_vertices, dim + 1) + 1):
            for combo in _kind_multisets(kinds, V, 0, 0):
                merged.update(_classes_for_combo((combo, V + loops - 1, dim)))
        return [merged[h] for h in sorted(merged)]
    L1 = LVertex(1) if LVertex(1) in kinds else None
    P1 = PiVertex(1) if PiVertex(1) in kinds else None
    higher = [k for k in kinds if k.valence >= 3]
    jobs = []
    for V in range(1, min(b.v_max, max_vertices) + 1):
        for combo in _kind_multisets(higher, V, excess, b.v_max):
            jobs.append((combo, n_ext, dim, max_vertices, min_vertices, L1, P1))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_decorated_classes, jobs))
    else:
        parts = [_decorated_classes(j) for j in jobs]
    for part in parts:
        for h, gc in part.items():
            merged.setdefault(h, gc)
    return [merged[h] for h in sorted(merged)]


def enumerate_boundary_graphs(k: int, pi_arity_cap: int = 1) -> list:
    """Kontsevich-type graphs: k internal Pi-vertices, observables f and g.

    Internal vertex i has two out-edges to distinct targets other than i and
    receives at most ``pi_arity_cap - 1`` edges; its kind is Pi(indegree+1).
    The representative lists internal vertices first, then f, then g.
    """
    if k < 0:
        raise ValueError("order must be non-negative")
    if pi_arity_cap < 1:
        raise ValueError("Pi arity cap must be at least 1")
    choices = [list(itertools.combinations([w for w in range(k + 2) if w != v], 2)) for v in range(k)]
    found: dict = {}
    for pick in itertools.product(*choices):
        edges = [(v, w) for v, pair in enumerate(pick) for w in pair]
        ind = Counter(h for _, h in edges)
        if any(ind[v] > pi_arity_cap - 1 for v in range(k)):
            continue
        verts = [PiVertex(ind[v] + 1) for v in range(k)] + [BoundaryObservable("f"), BoundaryObservable("g")]
        gc = GraphClass.of(FeynmanGraph(tuple(verts), tuple(edges), ()))
        found.setdefault(gc.hash, gc)
    return [found[h] for h in sorted(found)]


class GraphPreconditionError(ValueError):
    pass


def vacuum_filter(gc: GraphClass) -> bool:
    g = gc.representative
    if g.legs or g.observables():
        raise GraphPreconditionError("vacuum filter needs a graph without legs or observables")
    if len(g.edges) != 2 * g.n_vertices:
        return False
    return any(k.kind == PI_KIND and g.in_degree(v) > 0 for v, k in enumerate(g.vertices))


def kinds_for_poisson_degree(pi_degree: int, max_arity: int = 3) -> tuple:
    """Pi-vertex kinds that can be nonzero for a polynomial Pi of the given degree."""
    return tuple(PiVertex(m) for m in range(1, min(pi_degree + 1, max_arity) + 1))


def vacuum_candidates(kinds: Sequence[VertexKind], loops: int, dim: int = 2) -> list:
    """Connected leg-free classes passing the vacuum filter.

    E = 2V together with the Euler relation forces V = loops - 1.
    """
    V = loops - 1
    if V < 1:
        return []
    out = []
    for gc in enumerate_graphs(0, loops, kinds, dim, max_vertices=V, min_vertices=V):
        if vacuum_filter(gc):
            out.append(gc)
    return out
