"""Topology of a compact oriented surface with boundary.

Labels for cohomology representatives: ``alpha0`` (constant function),
``alpha1_i`` and ``beta0_i`` for the boundary circles i = 1..n-1,
``gamma1_k`` for the 2g interior cycles and ``beta1`` for the relative top
class.  ``dbeta*`` denotes the image under the connecting map.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import FORMAT_VERSION


class ClosedSurfaceError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceTopology:
    genus: int
    boundary_components: int

    def __post_init__(self):
        if self.genus < 0 or self.boundary_components < 0:
            raise ValueError("genus and boundary count must be non-negative")

    def require_boundary(self):
        if self.boundary_components < 1:
            raise ClosedSurfaceError("closed surfaces (n = 0) are out of scope")


@dataclass(frozen=True)
class DiagonalEntry:
    left: str
    right: str
    coefficient: int


@dataclass(frozen=True)
class DiagonalClassSpec:
    entries: tuple

    def __len__(self):
        return len(self.entries)


def cohomology_dims(S: SurfaceTopology):
    """(H*(S), H*(S, dS), H*(dS)) dimensions."""
    S.require_boundary()
    g, n = S.genus, S.boundary_components
    b1 = 2 * g + n - 1
    return (1, b1, 0), (0, b1, 1), (n, n)


def euler_characteristic(S: SurfaceTopology) -> int:
    return 2 - 2 * S.genus - S.boundary_components


def symplectic_matrix(two_g: int):
    om = [[0] * two_g for _ in range(two_g)]
    for k in range(0, two_g, 2):
        om[k][k + 1] = 1
        om[k + 1][k] = -1
    return om


def diagonal_class(S: SurfaceTopology) -> DiagonalClassSpec:
    S.require_boundary()
    g, n = S.genus, S.boundary_components
    entries = [DiagonalEntry("alpha0", "dbeta1", 1)]
    entries += [DiagonalEntry(f"alpha1_{i}", f"dbeta0_{i}", 1) for i in range(1, n)]
    om = symplectic_matrix(2 * g)
    for k in range(2 * g):
        for l in range(2 * g):
            if om[k][l]:
                entries.append(DiagonalEntry(f"gamma1_{k + 1}", f"gamma1_{l + 1}", om[k][l]))
    return DiagonalClassSpec(tuple(entries))


def lefschetz_pairings(S: SurfaceTopology) -> dict:
    """Nonzero duality pairings between absolute and relative representatives."""
    S.require_boundary()
    g, n = S.genus, S.boundary_components
    table = {("alpha0", "beta1"): 1}
    for i in range(1, n):
        table[(f"alpha1_{i}", f"beta0_{i}")] = 1
    om = symplectic_matrix(2 * g)
    for k in range(2 * g):
        for l in range(2 * g):
            if om[k][l]:
                table[(f"gamma1_{k + 1}", f"gamma1_{l + 1}")] = om[k][l]
    return table


def tadpole_admissible(S: SurfaceTopology):
    """(admissible, chi); a nonsingular point-splitting exists only when chi = 0."""
    S.require_boundary()
    chi = euler_characteristic(S)
    return chi == 0, chi


def surface_info(S: SurfaceTopology) -> dict:
    absolute, relative, boundary = cohomology_dims(S)
    ok, chi = tadpole_admissible(S)
    return {
        "format": "surface-info",
        "version": FORMAT_VERSION,
        "genus": S.genus,
        "boundaries": S.boundary_components,
        "cohomology": {"absolute": list(absolute), "relative": list(relative), "boundary": list(boundary)},
        "euler_characteristic": chi,
        "tadpole_admissible": ok,
        "diagonal_class": [[e.left, e.right, e.coefficient] for e in diagonal_class(S).entries],
    }
