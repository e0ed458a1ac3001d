"""Command line entry point.

Exit status: 0 success, 1 validation error, 2 numeric non-convergence.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys

from . import __version__
from .core import (FORMAT_VERSION, DimensionMismatch, ParseError, PoissonStructure, Poly, format_poly,
                   format_series, parse_poly)
from .fixtures import SUITES, OracleFailure, regen
from .graphs import GraphClass, enumerate_boundary_graphs, enumerate_graphs
from .linfty import (DegenerateForm, TorsionError, build_from_connection, check_linfty_identities,
                     check_pairing_invariance, curved_symplectic_example, load_connection,
                     shuffle_cancellation_check, single_christoffel_example)
from .starprod import (CurvedVertexError, MissingWeights, StarProduct, associativity_defect_with_error,
                       cache_weights, mc_weights, moyal_exact_weights, qme_degree_audit)
from .surface import ClosedSurfaceError, SurfaceTopology, surface_info
from .weights import NORMALIZATION_TAG, WeightCache, graph_weight_mc

OK, INVALID, NONCONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _header(seed=None) -> dict:
    h = {"version": FORMAT_VERSION, "tool_version": __version__, "normalization": NORMALIZATION_TAG}
    if seed is not None:
        h["seed"] = seed
    return h


def _emit(doc: dict, fmt: str, table_lines=None):
    if fmt == "table" and table_lines is not None:
        for line in table_lines:
            print(line)
    else:
        print(json.dumps(doc, indent=1, sort_keys=True))


def _load_pi(path) -> PoissonStructure:
    if path is None:
        return PoissonStructure.constant_standard(2)
    with open(path) as fh:
        return PoissonStructure.from_json(json.load(fh))


def _load_graph(path) -> GraphClass:
    with open(path) as fh:
        return GraphClass.from_json(json.load(fh))


# commands

def cmd_surface_info(a):
    info = surface_info(SurfaceTopology(a.genus, a.boundaries))
    info.update(_header())
    _emit(info, a.format, [f"{k}: {v}" for k, v in sorted(info.items())])
    return OK


def cmd_graphs_enumerate(a):
    if a.boundary is not None:
        classes = enumerate_boundary_graphs(a.boundary, a.pi_cap)
    else:
        classes = enumerate_graphs(a.ext, a.loops, dim=a.dim, max_vertices=a.max_vertices, workers=a.threads)
    doc = {**_header(), "format": "graph-classes", "count": len(classes), "classes": [gc.to_json() for gc in classes]}
    lines = [f"{gc.hash} aut={gc.aut} V={gc.representative.n_vertices} E={len(gc.representative.edges)}"
             for gc in classes] + [f"{len(classes)} classes"]
    _emit(doc, a.format, lines)
    return OK


def cmd_weights_compute(a):
    gc = _load_graph(a.graph)
    positions = tuple(a.positions)
    cache = WeightCache(a.cache) if a.cache else None
    res = cache.get(gc.hash, positions) if cache else None
    cached = res is not None and res.samples >= a.samples and res.seed == a.seed
    if not cached:
        res = graph_weight_mc(gc, positions, a.samples, a.seed, a.threads)
        if cache:
            cache.put(res)
    doc = {**_header(a.seed), "format": "weight", "cached": cached, "result": res.to_json()}
    _emit(doc, a.format, [f"{res.graph_hash}: {res.estimate:.6f} +- {res.std_error:.6f} ({res.samples} samples)"])
    return OK if res.converged else NONCONVERGED


def _weight_source(a, pi, K):
    if a.weights == "exact":
        if not pi.is_constant():
            raise ValueError("exact weights are only tabulated for constant Pi")
        return moyal_exact_weights(K)
    if a.weights == "cache":
        return cache_weights(WeightCache(a.cache))
    classes = [gc for k in range(K + 1) for gc in enumerate_boundary_graphs(k, max(pi.max_degree(), 0) + 1)]
    return mc_weights(classes, a.samples, a.seed, WeightCache(a.cache) if a.cache else None, threads=a.threads)


def _exact_weights_default(a, pi):
    if a.weights is None:
        a.weights = "exact" if pi.is_constant() else "cache"


def cmd_star_eval(a):
    pi = _load_pi(a.poisson)
    _exact_weights_default(a, pi)
    f, g = parse_poly(a.f, pi.d), parse_poly(a.g, pi.d)
    W = _weight_source(a, pi, a.order)
    s = StarProduct(pi, W, a.order)(f, g)
    text = format_series(s)
    doc = {**_header(a.seed if a.weights == "mc" else None), "format": "star-series", "weights": W.tag,
           "order": a.order, "series": text, "coefficients": [format_poly(c) for c in s.coeffs]}
    _emit(doc, a.format, [text])
    return OK


def _random_monomial(rng, d, max_deg):
    exps = [0] * d
    for _ in range(rng.randint(1, max_deg)):
        exps[rng.randrange(d)] += 1
    return Poly.monomial(exps, rng.randint(1, 3))


def cmd_star_assoc(a):
    pi = _load_pi(a.poisson)
    _exact_weights_default(a, pi)
    W = _weight_source(a, pi, a.order)
    sp = StarProduct(pi, W, a.order)
    rng = random.Random(a.seed)
    if a.f or a.g or a.h:
        if not (a.f and a.g and a.h):
            raise ValueError("give all of --f --g --h or none")
        triples = [tuple(parse_poly(t, pi.d) for t in (a.f, a.g, a.h))]
    else:
        triples = [tuple(_random_monomial(rng, pi.d, 2) for _ in range(3)) for _ in range(a.triples)]
    rows, ok = [], True
    for f, g, h in triples:
        rep = associativity_defect_with_error(f, g, h, pi, W, a.order, sp)
        exact = not W.errors
        good = rep.defect.is_zero() if exact else rep.within(3.0)
        ok = ok and good
        rows.append({"f": format_poly(f), "g": format_poly(g), "h": format_poly(h),
                     "defect": [format_poly(c.map_coeffs(float) if not exact else c) for c in rep.defect.coeffs],
                     "worst_sigma_ratio": None if exact else rep.worst_ratio(), "ok": good})
    doc = {**_header(a.seed), "format": "associativity", "weights": W.tag, "order": a.order, "cases": rows, "ok": ok}
    _emit(doc, a.format, [f"{r['f']} | {r['g']} | {r['h']}: {'ok' if r['ok'] else 'FAIL'}" for r in rows])
    if ok:
        return OK
    return INVALID if not W.errors else NONCONVERGED


def _connection(a):
    if a.connection:
        return load_connection(a.connection)
    return {"curved": curved_symplectic_example, "single": single_christoffel_example}[a.example]()


def cmd_linfty_build(a):
    br = build_from_connection(_connection(a), a.order, a.gauge)
    doc = {**_header(), **br.dump()}
    _emit(doc, a.format, [f"l{r['n']}^{r['k']}_{r['a']};{r['inputs']} = {r['poly']}" for r in doc["components"]])
    return OK


def cmd_linfty_check(a):
    conn = _connection(a)
    br = build_from_connection(conn, a.order, a.gauge)
    jac = {r.arity: r.is_zero for r in check_linfty_identities(br, a.order)}
    doc = {**_header(), "format": "linfty-check", "gauge": br.gauge, "jacobi": jac}
    ok = all(jac.values())
    if conn.omega is not None and br.gauge == "hamiltonian":
        pair = {r.arity: r.is_zero for r in check_pairing_invariance(br, conn.omega, a.order)}
        shuf = {T: shuffle_cancellation_check(br, conn.omega, T).is_zero for T in range(1, a.order + 1)}
        doc.update(pairing=pair, shuffle=shuf)
        ok = ok and all(pair.values()) and all(shuf.values())
    doc["ok"] = ok
    _emit(doc, a.format, [f"{k}: {v}" for k, v in sorted(doc.items())])
    return OK if ok else INVALID


def cmd_audit_qme(a):
    gc = _load_graph(a.graph)
    strata = qme_degree_audit(gc)
    rows = [{"kind": s.kind, "vertices": list(s.vertices), "observable": s.observable,
             "internal_edges": s.internal_edges, "required_edges": s.required_edges,
             "classification": s.classification} for s in strata]
    doc = {**_header(), "format": "qme-audit", "graph": gc.hash, "strata": rows}
    _emit(doc, a.format, [f"{r['kind']} {r['vertices']} {r['observable']}: {r['classification']}" for r in rows])
    return OK


def cmd_fixtures_regen(a):
    suites = sorted(SUITES) if a.suite == "all" else [a.suite]
    reports = [regen(s, a.dir, a.write) for s in suites]
    dirty = any(r["changed"] or r["added"] or r["removed"] for r in reports)
    doc = {**_header(), "format": "fixture-diff", "reports": reports}
    lines = []
    for r in reports:
        for tag in ("changed", "added", "removed"):
            lines += [f"{r['suite']}: {tag} {c}" for c in r[tag]]
        if not (r["changed"] or r["added"] or r["removed"]):
            lines.append(f"{r['suite']}: unchanged")
    _emit(doc, a.format, lines)
    return INVALID if dirty and not a.write else OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="poisson-sigma", description="Boundary Poisson sigma model toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def threads(q):
        q.add_argument("--threads", type=int, default=1)

    def leaf(s, name):
        q = s.add_parser(name)
        q.add_argument("--format", choices=["json", "table"], default="json")
        return q

    s = sub.add_parser("surface").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = leaf(s, "info")
    q.add_argument("--genus", type=int, required=True)
    q.add_argument("--boundaries", type=int, required=True)
    q.set_defaults(func=cmd_surface_info)

    s = sub.add_parser("graphs").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = leaf(s, "enumerate")
    q.add_argument("--ext", type=int, default=0)
    q.add_argument("--loops", type=int, default=0)
    q.add_argument("--dim", type=int, default=2)
    q.add_argument("--boundary", type=int, help="order k of boundary graphs; overrides --ext/--loops")
    q.add_argument("--pi-cap", type=int, default=1, help="max Pi arity for boundary graphs")
    q.add_argument("--max-vertices", type=int)
    threads(q)
    q.set_defaults(func=cmd_graphs_enumerate)

    s = sub.add_parser("weights").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = leaf(s, "compute")
    q.add_argument("--graph", required=True)
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--cache")
    q.add_argument("--positions", type=float, nargs=2, default=[0.0, 1.0])
    threads(q)
    q.set_defaults(func=cmd_weights_compute)

    s = sub.add_parser("star").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("eval", cmd_star_eval), ("assoc", cmd_star_assoc)):
        q = leaf(s, name)
        q.add_argument("--poisson", help="Poisson structure JSON; default constant Pi^12 = 1 on d = 2")
        q.add_argument("--order", type=int, required=True)
        q.add_argument("--weights", choices=["cache", "exact", "mc"])
        q.add_argument("--cache")
        q.add_argument("--samples", type=int, default=100_000)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--f", required=name == "eval")
        q.add_argument("--g", required=name == "eval")
        if name == "assoc":
            q.add_argument("--h")
            q.add_argument("--triples", type=int, default=5)
        threads(q)
        q.set_defaults(func=func)

    s = sub.add_parser("linfty").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("build", cmd_linfty_build), ("check", cmd_linfty_check)):
        q = leaf(s, name)
        src = q.add_mutually_exclusive_group()
        src.add_argument("--connection", help="connection JSON")
        src.add_argument("--example", choices=["curved", "single"], default="curved")
        q.add_argument("--order", type=int, default=3)
        q.add_argument("--gauge", choices=["auto", "vector", "hamiltonian"], default="auto")
        q.set_defaults(func=func)

    s = sub.add_parser("audit").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = leaf(s, "qme")
    q.add_argument("--graph", required=True)
    q.set_defaults(func=cmd_audit_qme)

    s = sub.add_parser("fixtures").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = leaf(s, "regen")
    q.add_argument("suite", help=f"one of {', '.join(sorted(SUITES))} or all")
    q.add_argument("--dir", help="fixture directory (default: the packaged one)")
    q.add_argument("--write", action="store_true", help="overwrite fixtures that differ")
    q.set_defaults(func=cmd_fixtures_regen)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return INVALID
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    if a.group == "fixtures" and a.suite != "all" and a.suite not in SUITES:
        print(f"error: unknown fixture suite {a.suite!r}", file=sys.stderr)
        return INVALID
    try:
        return a.func(a)
    except BrokenPipeError:
        raise
    except (ValueError, KeyError, OSError, ParseError, DimensionMismatch, ClosedSurfaceError, TorsionError,
            DegenerateForm, CurvedVertexError, MissingWeights, OracleFailure) as e:
        print(f"error: {e}", file=sys.stderr)
        return INVALID


def main():
    try:
        code = dispatch()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = OK
    sys.exit(code)


if __name__ == "__main__":
    main()
