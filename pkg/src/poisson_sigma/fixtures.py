"""Regression fixtures: recompute from the oracles, diff against what is stored."""
from __future__ import annotations

import json
from pathlib import Path

from . import oracles
from .core import FORMAT_VERSION, PoissonStructure, Poly, format_poly, jacobiator, parse_poly, rational_inverse
from .graphs import default_kinds, enumerate_boundary_graphs, enumerate_graphs
from .linfty import build_from_connection, curved_symplectic_example, single_christoffel_example
from .starprod import StarProduct, moyal_exact_weights
from .surface import SurfaceTopology, surface_info
from .weights import NORMALIZATION_TAG

FIXTURE_DIR = Path(__file__).with_name("fixtures")


class UnknownSuite(KeyError):
    pass


class OracleFailure(AssertionError):
    def __init__(self, suite, case, detail):
        self.suite, self.case = suite, case
        super().__init__(f"{suite}/{case}: {detail}")


MOYAL_GRID = [
    ("x1", "x2"), ("x2", "x1"), ("x1^2", "x2^2"), ("x1*x2", "x1*x2"),
    ("x1^3", "x2^2"), ("x1^2*x2", "x1*x2^2"), ("x1 + x2", "x1 - x2"), ("x1^2 - 3*x2", "x2^3 + x1"),
]


def _moyal_cases() -> dict:
    pi = PoissonStructure.constant_standard(2)
    mat = [[pi[i, j].constant_term() for j in range(2)] for i in range(2)]
    sp = StarProduct(pi, moyal_exact_weights(2), 2)
    cases = {}
    for fs, gs in MOYAL_GRID:
        f, g = parse_poly(fs, 2), parse_poly(gs, 2)
        ref = [format_poly(c) for c in oracles.moyal(f, g, mat, 2)]
        got = [format_poly(c) for c in sp(f, g).coeffs]
        name = f"{fs} | {gs}"
        if ref != got:
            raise OracleFailure("moyal", name, f"graph sum {got} != Moyal {ref}")
        cases[name] = ref
    return cases


def _surface_cases() -> dict:
    cases = {}
    for g in range(4):
        for n in range(1, 5):
            info = surface_info(SurfaceTopology(g, n))
            ref = oracles.surface_row(g, n)
            got = {**info["cohomology"], "euler_characteristic": info["euler_characteristic"],
                   "tadpole_admissible": info["tadpole_admissible"],
                   "diagonal_entries": len(info["diagonal_class"])}
            if got != ref:
                raise OracleFailure("surface", f"g{g}n{n}", f"{got} != {ref}")
            cases[f"g{g}n{n}"] = info
    return cases


def _graph_cases() -> dict:
    from .graphs import FeynmanGraph, VertexKind, canonical_hash

    cases = {}
    for n in range(4):
        for l in range(3):
            bf = oracles.brute_force_classes(n, l, default_kinds(), 2, 4)
            hashes = set()
            for names, edges, _ in bf.values():
                kinds = [VertexKind("L", int(s[1:])) if s[0] == "L" else VertexKind("Pi", int(s[2:])) for s in names]
                hashes.add(canonical_hash(FeynmanGraph.bulk(kinds, edges)))
            got = {gc.hash for gc in enumerate_graphs(n, l, max_vertices=4)}
            name = f"ext{n}-loops{l}"
            if got != hashes or len(hashes) != len(bf):
                raise OracleFailure("graphs", name, f"{len(got)} enumerated vs {len(bf)} brute-force classes")
            cases[name] = sorted(hashes)
    for cap in (1, 2):
        for k in range(3):
            cases[f"boundary-k{k}-cap{cap}"] = [[gc.hash, gc.aut] for gc in enumerate_boundary_graphs(k, cap)]
    return cases


def _linfty_cases() -> dict:
    cases = {}
    for name, conn in (("single-christoffel", single_christoffel_example()),
                       ("curved-symplectic", curved_symplectic_example())):
        br = build_from_connection(conn, 3)
        om = conn.omega if br.gauge == "hamiltonian" else None
        ref = oracles.l2_from_curvature(conn.christoffels, conn.d, om, rational_inverse(om) if om else None)
        got = br.component_tensor(2)
        if got != ref:
            raise OracleFailure("linfty", name, "arity-two bracket differs from the curvature contraction")
        cases[name] = br.dump()
    pi = PoissonStructure.from_upper(3, {(0, 1): Poly.var(3, 2)})
    J = jacobiator(pi)
    cases["jacobiator-x3"] = [[[format_poly(J[i][j][k]) for k in range(3)] for j in range(3)] for i in range(3)]
    return cases


SUITES = {"moyal": _moyal_cases, "surface": _surface_cases, "graphs": _graph_cases, "linfty": _linfty_cases}


def fixture_path(suite: str, directory=None) -> Path:
    return Path(directory or FIXTURE_DIR) / f"{suite}.json"


def load_fixture(suite: str, directory=None) -> dict:
    with open(fixture_path(suite, directory)) as fh:
        return json.load(fh)


def compute(suite: str) -> dict:
    if suite not in SUITES:
        raise UnknownSuite(f"unknown fixture suite {suite!r}; known: {', '.join(sorted(SUITES))}")
    return {"format": "fixture", "suite": suite, "version": FORMAT_VERSION,
            "normalization": NORMALIZATION_TAG, "cases": SUITES[suite]()}


def _norm(x):
    return json.loads(json.dumps(x))


def regen(suite: str, directory=None, write: bool = False) -> dict:
    """Recompute ``suite``; return {"suite", "changed", "added", "removed", "written"}."""
    fresh = compute(suite)
    path = fixture_path(suite, directory)
    old = {}
    if path.exists():
        with open(path) as fh:
            old = json.load(fh).get("cases", {})
    new = _norm(fresh["cases"])
    report = {
        "suite": suite,
        "changed": sorted(k for k in new if k in old and old[k] != new[k]),
        "added": sorted(k for k in new if k not in old),
        "removed": sorted(k for k in old if k not in new),
        "written": False,
    }
    dirty = report["changed"] or report["added"] or report["removed"]
    if write and dirty:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(fresh, fh, indent=1, sort_keys=True)
            fh.write("\n")
        report["written"] = True
    return report
