"""Geometric algebra, geometric calculus and Hamiltonian-constraint dynamics."""

from gamcal.ga_core import (
    Multivector,
    basis_vectors,
    blade_inverse,
    e,
    geometric_product,
    grade_project,
    gram_det,
    inner,
    magnitude,
    outer,
    parse_multivector,
    reverse,
)

__version__ = "0.1.0"

__all__ = [
    "Multivector",
    "basis_vectors",
    "blade_inverse",
    "e",
    "geometric_product",
    "grade_project",
    "gram_det",
    "inner",
    "magnitude",
    "outer",
    "parse_multivector",
    "reverse",
]
