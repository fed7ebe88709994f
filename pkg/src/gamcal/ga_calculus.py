"""Numerical geometric calculus: derivatives by central differences and
directed integrals over simplicial chains.

Functions of a point take a grade-1 :class:`Multivector` (or an array of
coordinates) and return a :class:`Multivector` or a real number.  User
callables must be safe to call concurrently if the caller parallelises;
nothing here holds state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from gamcal.ga_core import (
    Multivector,
    as_multivector,
    basis_vectors,
    geometric_product,
    grade_project,
    inner,
    magnitude,
    outer,
    tables,
    wedge,
)

DEFAULT_STEP = 1e-5

PointFunction = Callable[[Multivector], "Multivector | float"]


def as_point(q) -> Multivector:
    if isinstance(q, Multivector):
        return q
    return Multivector.vector(np.asarray(q, dtype=float))


def _check_step(h: float) -> float:
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"step size must be positive and finite, got {h}")
    return float(h)


def _evaluate(F: PointFunction, q: Multivector, dim: int | None = None) -> Multivector:
    try:
        value = F(q)
    except ValueError as exc:
        raise ValueError(f"function not finite at probe point {q}: {exc}") from exc
    if not isinstance(value, Multivector):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"function not finite at probe point {q}")
        return Multivector.scalar(q.dim if dim is None else dim, value)
    return value


def directional_derivative(F: PointFunction, q, a, h: float = DEFAULT_STEP) -> Multivector:
    """``(a . d_q) F`` as the central difference ``(F(q+ha) - F(q-ha)) / 2h``."""
    h = _check_step(h)
    q, a = as_point(q), as_point(a)
    if q.dim != a.dim:
        raise ValueError(f"dimension mismatch: point {q.dim}, direction {a.dim}")
    fp = _evaluate(F, q + h * a)
    fm = _evaluate(F, q - h * a)
    if fp.dim != fm.dim:
        raise ValueError("function output dimension changed between calls")
    return (fp - fm) / (2 * h)


def partials(F: PointFunction, q, h: float = DEFAULT_STEP) -> list[Multivector]:
    """Derivatives of F along each orthonormal basis direction."""
    q = as_point(q)
    return [directional_derivative(F, q, ej, h) for ej in basis_vectors(q.dim)]


def vector_derivative(F: PointFunction, q, h: float = DEFAULT_STEP) -> Multivector:
    """``d_q F = sum_j e_j (e_j . d_q) F``; the gradient for scalar F."""
    q = as_point(q)
    parts = partials(F, q, h)
    out = Multivector(parts[0].dim)
    for ej, dF in zip(basis_vectors(q.dim), parts):
        out = out + geometric_product(ej, dF)
    return out


def divergence(F: PointFunction, q, h: float = DEFAULT_STEP) -> Multivector:
    """Lowering part ``d_q . F`` of the vector derivative."""
    q = as_point(q)
    out = Multivector(q.dim)
    for ej, dF in zip(basis_vectors(q.dim), partials(F, q, h)):
        out = out + inner(ej, dF)
    return out


def curl(F: PointFunction, q, h: float = DEFAULT_STEP) -> Multivector:
    """Raising part ``d_q ^ F`` of the vector derivative."""
    q = as_point(q)
    out = Multivector(q.dim)
    for ej, dF in zip(basis_vectors(q.dim), partials(F, q, h)):
        out = out + outer(ej, dF)
    return out


def _grade_basis(n: int, D: int) -> list[int]:
    t = tables(n)
    return [b for b in range(t.size) if t.grade[b] == D]


def multivector_derivative(H: Callable, q, P: Multivector, D: int,
                           h: float = DEFAULT_STEP) -> Multivector:
    """``d_P H(q, P)`` for real-valued H and a grade-D argument P.

    Computed as ``sum_J reverse(e_J) (e_J . d_P) H`` over the orthonormal
    grade-D blades e_J.
    """
    h = _check_step(h)
    q = as_point(q)
    if not 0 <= D <= P.dim:
        raise ValueError(f"grade {D} out of range for n={P.dim}")
    if not P.grades() <= {D}:
        raise ValueError(f"P must be of pure grade {D}, has grades {sorted(P.grades())}")
    n = P.dim
    out = np.zeros(1 << n)
    rev = tables(n).rev_sign
    for b in _grade_basis(n, D):
        eJ = Multivector.blade(n, b)
        hp = float(H(q, P + h * eJ))
        hm = float(H(q, P - h * eJ))
        if not (math.isfinite(hp) and math.isfinite(hm)):
            raise ValueError("H not finite at probe momentum")
        out[b] = rev[b] * (hp - hm) / (2 * h)
    return Multivector(n, out)


# ------------------------------------------------------------ outermorphisms

def jacobian(f: PointFunction, q, h: float = DEFAULT_STEP) -> np.ndarray:
    """Matrix whose column j holds the components of ``(e_j . d_q) f``."""
    q = as_point(q)
    cols = []
    for dF in partials(f, q, h):
        if not grade_project(dF, 1).allclose(dF, atol=1e-9):
            raise ValueError("pushforward requires a vector-valued map")
        cols.append(dF.vector_part())
    return np.column_stack(cols)


def outermorphism(matrix: np.ndarray, A: Multivector) -> Multivector:
    """Extend the linear map of ``matrix`` (acting on coordinates) to A.

    Every basis blade ``e_J`` is sent to the wedge of the images of its
    factors; scalars are left unchanged.  By linearity this is exact for any
    multivector, blade or not.
    """
    n = A.dim
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (n, n):
        raise ValueError(f"matrix shape {matrix.shape} does not match n={n}")
    images = [Multivector.vector(matrix[:, j]) for j in range(n)]
    out = Multivector(n)
    for b, c in enumerate(A.coeffs):
        if c == 0.0:
            continue
        factors = [images[j] for j in range(n) if b >> j & 1]
        out = out + c * wedge(factors, dim=n)
    return out


def pushforward(f: PointFunction, q, A: Multivector, h: float = DEFAULT_STEP) -> Multivector:
    """Differential of f at q, ``a -> (a . d_q) f``, extended as an outermorphism."""
    return outermorphism(jacobian(f, q, h), A)


def adjoint(f: PointFunction, q, B: Multivector, h: float = DEFAULT_STEP) -> Multivector:
    """Adjoint of the differential, ``b -> d_q (f(q) . b)``, as an outermorphism."""
    return outermorphism(jacobian(f, q, h).T, B)


# ---------------------------------------------------------------- chains

def _factorial(k: int) -> int:
    return math.factorial(k)


@dataclass(frozen=True)
class SimplexChain:
    """Oriented D-simplices in R^n with integer multiplicities (usually +-1).

    ``vertices`` has shape (m, D+1, n).  The volume element of simplex i is
    ``sign_i * (a_1 ^ ... ^ a_D) / D!`` with edge vectors ``a_k = v_k - v_0``.
    """

    vertices: np.ndarray
    signs: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 3:
            raise ValueError("vertices must have shape (m, D+1, n)")
        v.setflags(write=False)
        signs = np.ones(v.shape[0], dtype=int) if self.signs is None else np.array(self.signs, dtype=int)
        if signs.shape != (v.shape[0],):
            raise ValueError("one sign per simplex required")
        signs.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "signs", signs)
        tables(self.dim)
        for i, el in enumerate(self.volume_elements()):
            if magnitude(el) <= 0.0:
                raise ValueError(f"degenerate simplex at index {i}")

    @property
    def D(self) -> int:
        return self.vertices.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.vertices.shape[2]

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def volume_elements(self) -> list[Multivector]:
        D, n = self.D, self.dim
        out = []
        for verts, s in zip(self.vertices, self.signs):
            edges = [Multivector.vector(verts[k] - verts[0]) for k in range(1, D + 1)]
            out.append(wedge(edges, dim=n) * (float(s) / _factorial(D)))
        return out

    def centroids(self) -> np.ndarray:
        return self.vertices.mean(axis=1)

    def to_json(self) -> str:
        payload = {"dim": self.dim, "simplices": self.vertices.tolist()}
        if np.any(self.signs != 1):
            payload["signs"] = self.signs.tolist()
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "SimplexChain":
        data = json.loads(text)
        dim = int(data["dim"])
        simplices = data["simplices"]
        if not simplices:
            raise ValueError("chain JSON holds no simplices")
        v = np.array(simplices, dtype=float)
        if v.ndim != 3 or v.shape[2] != dim:
            raise ValueError("simplex vertex arrays do not match declared dim")
        return cls(v, data.get("signs"))


def empty_chain(D: int, n: int) -> SimplexChain:
    return SimplexChain(np.zeros((0, D + 1, n)))


def directed_integral(L: Callable, chain: SimplexChain) -> Multivector:
    """Riemann sum ``sum_i L(dGamma_i; q_i)`` with q_i the simplex centroid."""
    n = chain.dim
    total = Multivector(n)
    for dG, c in zip(chain.volume_elements(), chain.centroids()):
        total = total + as_multivector(L(dG, Multivector.vector(c)), n)
    return total


def _permutation_parity(keys: list) -> tuple[list[int], int]:
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    parity = 1
    seen = [False] * len(order)
    for i in range(len(order)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            parity = -parity
    return order, parity


def boundary_chain(chain: SimplexChain) -> SimplexChain:
    """Oriented (D-1)-faces of a D-chain, interior faces cancelled.

    Face i of ``[v_0..v_D]`` (v_i dropped) carries the weight
    ``(-1)**i * (-1)**(D-1)``.  The extra global factor matches the
    ``dGamma . d`` ordering of the fundamental theorem, so that
    ``directed_integral(L, boundary_chain(c))`` approximates
    ``directed_integral(fundamental_integrand(L), c)``.
    """
    D = chain.D
    if D < 1:
        raise ValueError("a 0-chain has no boundary")
    acc: dict[tuple, int] = {}
    rep: dict[tuple, np.ndarray] = {}
    glob = -1 if (D - 1) % 2 else 1
    for verts, s in zip(chain.vertices, chain.signs):
        for i in range(D + 1):
            face = np.delete(verts, i, axis=0)
            keys = [tuple(p) for p in face]
            order, parity = _permutation_parity(keys)
            key = tuple(keys[k] for k in order)
            w = int(s) * (-1 if i % 2 else 1) * glob * parity
            if key not in acc:
                acc[key] = 0
                rep[key] = face[order]
            acc[key] += w
    faces, signs = [], []
    for key, w in acc.items():
        if w == 0:
            continue
        if abs(w) > 1:
            raise ValueError(
                f"inconsistent orientation: face {key} has net multiplicity {w}"
            )
        faces.append(rep[key])
        signs.append(w)
    if not faces:
        return empty_chain(D - 1, chain.dim)
    return SimplexChain(np.array(faces), signs)


def fundamental_integrand(L: Callable, h: float = DEFAULT_STEP) -> Callable:
    """Interior integrand ``L(dGamma . d; q)`` with d acting on q only.

    Expanded in the basis: ``sum_j (e_j . d_q) L(dGamma . e_j; q)``.
    """
    h = _check_step(h)

    def integrand(dG: Multivector, q: Multivector) -> Multivector:
        n = q.dim
        total = Multivector(n)
        for ej in basis_vectors(n):
            arg = inner(dG, ej)
            lp = as_multivector(L(arg, q + h * ej), n)
            lm = as_multivector(L(arg, q - h * ej), n)
            total = total + (lp - lm) / (2 * h)
        return total

    return integrand


# ----------------------------------------------------------- chain builders

def grid_chain(xs: Sequence[float], ys: Sequence[float],
               embed: Callable[[float, float], Sequence[float]]) -> SimplexChain:
    """Triangulate the parameter grid ``xs x ys`` and map nodes with ``embed``.

    Each cell is split along its diagonal into two triangles with the
    orientation of the (x, y) parameter plane.
    """
    pts = np.array([[embed(x, y) for y in ys] for x in xs], dtype=float)
    tris = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            p00, p10 = pts[i, j], pts[i + 1, j]
            p01, p11 = pts[i, j + 1], pts[i + 1, j + 1]
            tris.append([p00, p10, p11])
            tris.append([p00, p11, p01])
    return SimplexChain(np.array(tris))


def square_chain(cells: int, lo: float = 0.0, hi: float = 1.0, n: int = 2) -> SimplexChain:
    """Flat square [lo, hi]^2 in the e1 e2 plane of R^n."""
    xs = np.linspace(lo, hi, cells + 1)

    def embed(x, y):
        p = np.zeros(n)
        p[0], p[1] = x, y
        return p

    return grid_chain(xs, xs, embed)


def polyline_chain(points: np.ndarray) -> SimplexChain:
    """1-chain of consecutive segments through ``points`` (shape (m, n))."""
    points = np.asarray(points, dtype=float)
    segs = np.stack([points[:-1], points[1:]], axis=1)
    return SimplexChain(segs)


def disk_chain(rings: int, radius: float = 1.0) -> SimplexChain:
    """Triangulated disk in the e1 e2 plane: ring k carries 6k nodes."""
    nodes = [[np.zeros(2)]]
    for k in range(1, rings + 1):
        r = radius * k / rings
        ang = 2 * np.pi * np.arange(6 * k) / (6 * k)
        nodes.append([np.array([r * np.cos(a), r * np.sin(a)]) for a in ang])
    tris = []
    for k in range(1, rings + 1):
        inner_ring, outer_ring = nodes[k - 1], nodes[k]
        ni, no = len(inner_ring), len(outer_ring)
        if ni == 1:
            for j in range(no):
                tris.append([inner_ring[0], outer_ring[j], outer_ring[(j + 1) % no]])
            continue
        # merge the two rings by edge-midpoint angle
        i = j = 0
        while i < ni or j < no:
            if j < no and (i >= ni or (j + 0.5) / no <= (i + 0.5) / ni):
                tris.append([inner_ring[i % ni], outer_ring[j], outer_ring[(j + 1) % no]])
                j += 1
            else:
                tris.append([inner_ring[i], outer_ring[j % no], inner_ring[(i + 1) % ni]])
                i += 1
    tris = np.array(tris)
    a = tris[:, 1] - tris[:, 0]
    b = tris[:, 2] - tris[:, 0]
    flip = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return SimplexChain(tris)
