# Star products from graph sums.
#
# Constant bivector first: the graph sum should reproduce the Moyal product,
# with weights known in closed form.  Then a linear bivector (so(3)), where the
# weights come from Monte Carlo and associativity only holds within error bars.

from poisson_sigma import PoissonStructure, Poly, format_series, parse_poly
from poisson_sigma.graphs import enumerate_boundary_graphs
from poisson_sigma.starprod import (StarProduct, associativity_defect_with_error, mc_weights,
                                    moyal_exact_weights, star_product)
from poisson_sigma.weights import graph_weight_mc

pi = PoissonStructure.constant_standard(2)
W = moyal_exact_weights(3)

x1, x2 = parse_poly("x1", 2), parse_poly("x2", 2)
print("x1 * x2      =", format_series(star_product(x1, x2, pi, W, 3)))
print("x2 * x1      =", format_series(star_product(x2, x1, pi, W, 3)))
print("x1^2 * x2^2  =", format_series(star_product(x1 ** 2, x2 ** 2, pi, W, 3)))


# The one weight that matters at first order is the wedge: one bulk vertex
# pointing at both boundary points.  Its value is 1/2.

wedge = enumerate_boundary_graphs(1)[0]
for samples in (10_000, 100_000, 1_000_000):
    r = graph_weight_mc(wedge, samples=samples, seed=1)
    print(f"wedge, {samples:>9} samples: {r.estimate:.5f} +- {r.std_error:.5f}")

# moving the boundary points around does not change it.  (With one seed the
# three runs would be the same samples moved by an affine map, so use three.)
for seed, pos in enumerate([(0, 1), (-2, 0.5), (3, 10)]):
    r = graph_weight_mc(wedge, positions=pos, samples=200_000, seed=seed)
    print("positions", pos, "->", f"{r.estimate:.5f}")


# so(3): Pi^{ij} = eps^{ijk} x_k.  Arity-2 bulk vertices now contribute.

so3 = PoissonStructure.so3()
classes = [gc for k in range(3) for gc in enumerate_boundary_graphs(k, 2)]
print(len(classes), "boundary graph classes up to order 2")
Wmc = mc_weights(classes, 200_000, seed=5)
sp = StarProduct(so3, Wmc, 2)

y = [Poly.var(3, i) for i in range(3)]
print("y1 * y2 =", format_series(sp(y[0], y[1])))

rep = associativity_defect_with_error(y[0], y[1], y[2] * y[0], so3, Wmc, 2, star=sp)
print("associativity defect / sigma, worst coefficient:", round(rep.worst_ratio(), 3))
