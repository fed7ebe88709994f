"""Randomised checks of the standard geometric-algebra identities.

Each check draws random homogeneous multivectors respecting the grade
preconditions of the identity and returns the relative error
``|lhs - rhs| / scale``, where ``scale`` is the larger of |lhs|, |rhs| and
the product of the input magnitudes.  Scaling by the inputs keeps the
measure meaningful when both sides vanish identically (e.g. a wedge whose
grade exceeds n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from gamcal.ga_core import (
    Multivector,
    geometric_product,
    grade_project,
    gram_det,
    inner,
    magnitude,
    outer,
    reverse,
    tables,
    wedge,
)

RELATIVE_TOL = 1e-12


def random_grade(rng: np.random.Generator, n: int, r: int) -> Multivector:
    """Random r-vector (a general homogeneous element, not necessarily a blade)."""
    t = tables(n)
    c = np.where(t.grade == r, rng.standard_normal(t.size), 0.0)
    return Multivector(n, c)


def random_vector(rng: np.random.Generator, n: int) -> Multivector:
    return Multivector.vector(rng.standard_normal(n))


def _rel(lhs: Multivector, rhs: Multivector, *inputs: Multivector) -> float:
    scale = max(magnitude(lhs), magnitude(rhs), float(np.prod([magnitude(x) for x in inputs])))
    if scale == 0.0:
        return 0.0
    return magnitude(lhs - rhs) / scale


def _sign(k: int) -> float:
    return -1.0 if k % 2 else 1.0


def check_inner_swap(rng, n):
    s = int(rng.integers(0, n + 1))
    r = int(rng.integers(0, s + 1))
    A, B = random_grade(rng, n, r), random_grade(rng, n, s)
    return _rel(inner(A, B), _sign(r * (s - 1)) * inner(B, A), A, B)


def check_outer_swap(rng, n):
    r, s = (int(x) for x in rng.integers(0, n + 1, size=2))
    A, B = random_grade(rng, n, r), random_grade(rng, n, s)
    return _rel(outer(A, B), _sign(r * s) * outer(B, A), A, B)


def _split_rst(rng, n):
    t = int(rng.integers(2, n + 1))
    r = int(rng.integers(1, t))
    s = int(rng.integers(1, t - r + 1))
    return r, s, t


def check_inner_outer_left(rng, n):
    r, s, t = _split_rst(rng, n)
    A, B, C = random_grade(rng, n, r), random_grade(rng, n, s), random_grade(rng, n, t)
    return _rel(inner(A, inner(B, C)), inner(outer(A, B), C), A, B, C)


def check_inner_outer_right(rng, n):
    r, s, t = _split_rst(rng, n)
    A, B, C = random_grade(rng, n, r), random_grade(rng, n, s), random_grade(rng, n, t)
    return _rel(inner(inner(C, B), A), inner(C, outer(B, A)), A, B, C)


def check_inner_assoc(rng, n):
    s = int(rng.integers(0, n + 1))
    r = int(rng.integers(0, s + 1))
    t = int(rng.integers(0, s - r + 1))
    A, B, C = random_grade(rng, n, r), random_grade(rng, n, s), random_grade(rng, n, t)
    return _rel(inner(A, inner(B, C)), inner(inner(A, B), C), A, B, C)


def check_vector_inner_outer(rng, n):
    r, s = (int(x) for x in rng.integers(0, n + 1, size=2))
    a = random_vector(rng, n)
    A, B = random_grade(rng, n, r), random_grade(rng, n, s)
    lhs = inner(a, outer(A, B))
    rhs = outer(inner(a, A), B) + _sign(r) * outer(A, inner(a, B))
    return _rel(lhs, rhs, a, A, B)


def check_vector_outer_inner(rng, n):
    s = int(rng.integers(2, n + 1))
    r = int(rng.integers(2, s + 1))
    a = random_vector(rng, n)
    A, B = random_grade(rng, n, r), random_grade(rng, n, s)
    lhs = outer(a, inner(A, B))
    rhs = inner(inner(a, A), B) + _sign(r) * inner(A, outer(a, B))
    return _rel(lhs, rhs, a, A, B)


def expansion_rhs(a: Multivector, vectors: list[Multivector]) -> Multivector:
    """Alternating-sum expansion of ``a . (a1 ^ ... ^ ar)``."""
    n = a.dim
    out = Multivector(n)
    for j, aj in enumerate(vectors):
        rest = vectors[:j] + vectors[j + 1:]
        coef = _sign(j) * float(np.dot(a.vector_part(), aj.vector_part()))
        out = out + coef * wedge(rest, dim=n)
    return out


def check_expansion(rng, n):
    r = int(rng.integers(1, min(4, n) + 1))
    a = random_vector(rng, n)
    vs = [random_vector(rng, n) for _ in range(r)]
    A = wedge(vs)
    return _rel(inner(a, A), expansion_rhs(a, vs), a, *vs)


def random_mixed(rng: np.random.Generator, n: int) -> Multivector:
    return Multivector(n, rng.standard_normal(1 << n))


def check_reverse_product(rng, n):
    A, B = random_mixed(rng, n), random_mixed(rng, n)
    lhs = reverse(geometric_product(A, B))
    rhs = geometric_product(reverse(B), reverse(A))
    return _rel(lhs, rhs, A, B)


def check_gram(rng, n):
    r = int(rng.integers(1, n + 1))
    va = [random_vector(rng, n) for _ in range(r)]
    vb = [random_vector(rng, n) for _ in range(r)]
    m = np.array([[np.dot(x.vector_part(), y.vector_part()) for y in vb] for x in va])
    blade_form = gram_det(va, vb)
    det = float(np.linalg.det(m))
    scale = max(abs(det), float(np.prod([magnitude(v) for v in va + vb])))
    return abs(blade_form - det) / scale


def check_product_decomposition(rng, n):
    r, s = (int(x) for x in rng.integers(0, n + 1, size=2))
    A, B = random_grade(rng, n, r), random_grade(rng, n, s)
    AB = geometric_product(A, B)
    parts = Multivector(n)
    for g in range(abs(r - s), min(r + s, n) + 1, 2):
        parts = parts + grade_project(AB, g)
    return _rel(AB, parts, A, B)


IDENTITIES: dict[str, Callable[[np.random.Generator, int], float]] = {
    "inner_swap": check_inner_swap,
    "outer_swap": check_outer_swap,
    "inner_outer_left": check_inner_outer_left,
    "inner_outer_right": check_inner_outer_right,
    "inner_assoc": check_inner_assoc,
    "vector_inner_outer": check_vector_inner_outer,
    "vector_outer_inner": check_vector_outer_inner,
    "expansion": check_expansion,
    "reverse_product": check_reverse_product,
    "gram_det": check_gram,
    "product_decomposition": check_product_decomposition,
}


@dataclass
class IdentityResult:
    name: str
    cases: int
    max_error: float
    tol: float
    dims: list[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "cases": self.cases,
            "dims": self.dims,
            "max_error": self.max_error,
            "tol": self.tol,
            "passed": self.passed,
        }


def run_identity(name: str, seed: int, index: int, cases: int = 1000,
                 dims=(3, 4, 5), tol: float = RELATIVE_TOL) -> IdentityResult:
    """Run one identity with its own stream derived from ``(seed, index)``."""
    check = IDENTITIES[name]
    worst = 0.0
    for n in dims:
        rng = np.random.default_rng([seed, index, n])
        for _ in range(cases):
            worst = max(worst, check(rng, n))
    return IdentityResult(name, cases, worst, tol, list(dims))


def run_suite(seed: int = 42, cases: int = 1000, dims=(3, 4, 5)) -> list[IdentityResult]:
    return [run_identity(name, seed, i, cases, dims) for i, name in enumerate(IDENTITIES)]
