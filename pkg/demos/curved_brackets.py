# Brackets from a curved connection.
#
# A torsion-free symplectic connection on R^2 with nonzero curvature gives a
# curved target; its jet model produces brackets l1, l2, l3, ...  The checks
# below are exact (rational arithmetic).

from poisson_sigma.linfty import (build_from_connection, check_linfty_identities, check_pairing_invariance,
                                  curved_symplectic_example, shuffle_cancellation_check)

conn = curved_symplectic_example()
br = build_from_connection(conn, 4)
print("gauge:", br.gauge)

for (k, a, I), v in sorted(br.component_tensor(2).items())[:6]:
    print(f"l2^{k}_{a}{I} =", v)

for rep in check_linfty_identities(br, 4):
    print("Jacobi arity", rep.arity, "zero" if rep.is_zero else "NONZERO")
for rep in check_pairing_invariance(br, conn.omega, 4):
    print("pairing arity", rep.arity, "zero" if rep.is_zero else "NONZERO")
print("shuffle through 4:", all(shuffle_cancellation_check(br, conn.omega, T).is_zero for T in range(1, 5)))

# the vector-field gauge also solves Jacobi but is not symmetric for the pairing
vec = build_from_connection(conn, 3, gauge="vector")
print([r.is_zero for r in check_linfty_identities(vec, 3)], [r.is_zero for r in check_pairing_invariance(vec, conn.omega, 3)])
