"""Computational toolkit for the boundary Poisson sigma model."""
from .core import (
    DegreeCapExceeded,
    DimensionMismatch,
    HbarSeries,
    PoissonStructure,
    Poly,
    degree_cap,
    format_poly,
    format_series,
    jacobiator,
    parse_poly,
    partial,
    poly_arith,
)

__version__ = "0.1.0"

__all__ = [
    "DegreeCapExceeded", "DimensionMismatch", "HbarSeries", "PoissonStructure", "Poly", "degree_cap",
    "format_poly", "format_series", "jacobiator", "parse_poly", "partial", "poly_arith",
]
