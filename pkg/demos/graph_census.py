# Counting Feynman graphs.
#
# How many connected graphs survive the filters (no tadpoles, no parallel
# edges, no curving vertices, bivalent chains capped by the dimension) for a
# given number of legs and loops?

from collections import Counter

from poisson_sigma import PoissonStructure, oracles
from poisson_sigma.graphs import default_kinds, enumerate_boundary_graphs, enumerate_graphs, finiteness_bound
from poisson_sigma.starprod import regular_vacuum_vanishing

print("legs loops  bound  classes")
for n in range(4):
    for l in range(3):
        b = finiteness_bound(n, l, 2)
        cls = enumerate_graphs(n, l, max_vertices=4)
        print(f"{n:4} {l:5}  {b.v_max:5}  {len(cls):7}")

# same numbers from brute force (all edge sets, minimal code over permutations)
bf = oracles.brute_force_classes(2, 1, default_kinds(), 2, 4)
print("brute force, 2 legs 1 loop:", len(bf))

# symmetry factors for the boundary graphs of order 2
for gc in enumerate_boundary_graphs(2, 2):
    g = gc.representative
    print(gc.hash[:12], "aut", gc.aut, "edges", g.edges)

print(Counter(gc.aut for k in range(4) for gc in enumerate_boundary_graphs(k, 2)))


# Vacuum graphs need every Pi vertex to receive two edges on average, so a
# bivector that is at most linear has none at all.
for name, pi in [("constant", PoissonStructure.constant_standard(2)), ("so3", PoissonStructure.so3())]:
    rep = regular_vacuum_vanishing(pi, 3)
    print(name, "vacuum classes per loop:", {k: len(v) for k, v in rep.per_loop.items()})
