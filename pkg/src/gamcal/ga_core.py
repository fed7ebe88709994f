"""Dense multivectors of the Euclidean geometric algebra G(R^n), 2 <= n <= 8.

Coefficients are stored over all 2^n basis blades.  Index ``b`` is a bitmask:
bit ``j`` set means the basis vector ``e_{j+1}`` is a factor, factors written
in ascending order.  ``e13`` is therefore index ``0b101``.

The sign of a basis product ``e_a e_b`` is ``(-1)**k`` where ``k`` counts the
pairs (i in a, j in b) with i > j, i.e. the transpositions needed to sort the
concatenated factor list.  It is computed from popcounts of shifted masks, so
the basis orientation is bit-exact on every platform.
"""

from __future__ import annotations

import math
import re
from functools import lru_cache
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

MIN_DIM = 2
MAX_DIM = 8
BLADE_TOL = 1e-10


def _popcount(x: int) -> int:
    return bin(x).count("1")


def reorder_sign(a: int, b: int) -> int:
    """Sign of the basis-blade product ``e_a e_b`` for bitmasks a, b."""
    swaps = 0
    a >>= 1
    while a:
        swaps += _popcount(a & b)
        a >>= 1
    return -1 if swaps & 1 else 1


class _Tables:
    def __init__(self, n: int):
        size = 1 << n
        idx = np.arange(size)
        self.n = n
        self.size = size
        self.grade = np.array([_popcount(i) for i in range(size)])
        self.xor = idx[:, None] ^ idx[None, :]
        self.sign = np.array(
            [[reorder_sign(a, b) for b in range(size)] for a in range(size)],
            dtype=float,
        )
        ga = self.grade[:, None]
        gb = self.grade[None, :]
        gp = self.grade[self.xor]
        self.inner_mask = (ga > 0) & (gb > 0) & (gp == np.abs(ga - gb))
        self.outer_mask = gp == ga + gb
        self.rev_sign = np.array(
            [(-1.0) ** (g * (g - 1) // 2) for g in self.grade]
        )
        self.flat_xor = self.xor.ravel()
        self.gp_w = self.sign
        self.inner_w = self.sign * self.inner_mask
        self.outer_w = self.sign * self.outer_mask


@lru_cache(maxsize=None)
def tables(n: int) -> _Tables:
    if not MIN_DIM <= n <= MAX_DIM:
        raise ValueError(f"algebra dimension must be in [{MIN_DIM}, {MAX_DIM}], got {n}")
    return _Tables(n)


class Multivector:
    """Immutable element of G(R^n).

    Supports ``+``, ``-``, scalar ``*`` and ``/``, ``A * B`` (geometric
    product), ``A ^ B`` (outer), ``A | B`` (inner), ``~A`` (reverse) and
    ``abs(A)`` (magnitude).
    """

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim: int, coeffs=None):
        t = tables(dim)
        if coeffs is None:
            arr = np.zeros(t.size)
        else:
            arr = np.array(coeffs, dtype=float)
            if arr.shape != (t.size,):
                raise ValueError(
                    f"expected {t.size} coefficients for n={dim}, got shape {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError("multivector coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    # construction helpers
    @classmethod
    def scalar(cls, dim: int, value: float) -> "Multivector":
        c = np.zeros(1 << dim)
        c[0] = value
        return cls(dim, c)

    @classmethod
    def vector(cls, coords: Sequence[float]) -> "Multivector":
        coords = np.asarray(coords, dtype=float)
        dim = coords.shape[0]
        c = np.zeros(1 << dim)
        c[1 << np.arange(dim)] = coords
        return cls(dim, c)

    @classmethod
    def blade(cls, dim: int, mask: int, value: float = 1.0) -> "Multivector":
        c = np.zeros(1 << dim)
        c[mask] = value
        return cls(dim, c)

    # views
    @property
    def scalar_part(self) -> float:
        return float(self.coeffs[0])

    def vector_part(self) -> np.ndarray:
        """Components of the grade-1 part as an array of length n."""
        return self.coeffs[1 << np.arange(self.dim)].copy()

    def grades(self, tol: float = 0.0) -> set[int]:
        g = tables(self.dim).grade
        nz = np.abs(self.coeffs) > tol
        return set(int(x) for x in np.unique(g[nz]))

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    def grade(self, r: int) -> "Multivector":
        return grade_project(self, r)

    # arithmetic
    def _coerce(self, other) -> "Multivector":
        if isinstance(other, Multivector):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        if isinstance(other, Real):
            return Multivector.scalar(self.dim, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Multivector(self.dim, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Multivector(self.dim, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Multivector(self.dim, other.coeffs - self.coeffs)

    def __neg__(self):
        return Multivector(self.dim, -self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Real):
            return Multivector(self.dim, self.coeffs * float(other))
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, Real):
            return Multivector(self.dim, self.coeffs * float(other))
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, Real):
            return Multivector(self.dim, self.coeffs / float(other))
        return NotImplemented

    def __xor__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return outer(self, other)

    def __rxor__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return outer(other, self)

    def __or__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return inner(self, other)

    def __ror__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return inner(other, self)

    def __invert__(self):
        return reverse(self)

    def __abs__(self):
        return magnitude(self)

    def __eq__(self, other):
        if isinstance(other, Real):
            other = Multivector.scalar(self.dim, float(other))
        if not isinstance(other, Multivector):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.dim, self.coeffs.tobytes()))

    def allclose(self, other, rtol: float = 0.0, atol: float = 1e-12) -> bool:
        other = self._coerce(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))

    def __repr__(self):
        return format_multivector(self)

    __str__ = __repr__


def basis_vectors(n: int) -> list[Multivector]:
    return [Multivector.blade(n, 1 << j) for j in range(n)]


def e(n: int, *indices: int) -> Multivector:
    """Geometric product ``e_i e_j ...`` of 1-based basis vectors in G(R^n)."""
    out = Multivector.scalar(n, 1.0)
    for i in indices:
        if not 1 <= i <= n:
            raise ValueError(f"basis index {i} out of range for n={n}")
        out = out * Multivector.blade(n, 1 << (i - 1))
    return out


def as_multivector(value, dim: int) -> Multivector:
    if isinstance(value, Multivector):
        if value.dim != dim:
            raise ValueError(f"dimension mismatch: {value.dim} vs {dim}")
        return value
    return Multivector.scalar(dim, float(value))


def _check_pair(A: Multivector, B: Multivector) -> _Tables:
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    return tables(A.dim)


def _bilinear(A: Multivector, B: Multivector, weights: np.ndarray) -> Multivector:
    t = _check_pair(A, B)
    terms = (weights * np.outer(A.coeffs, B.coeffs)).ravel()
    return Multivector(A.dim, np.bincount(t.flat_xor, weights=terms, minlength=t.size))


def geometric_product(A: Multivector, B: Multivector) -> Multivector:
    return _bilinear(A, B, tables(A.dim).gp_w)


def inner(A: Multivector, B: Multivector) -> Multivector:
    """Inner product, zero whenever either factor is a scalar.

    Mixed-grade arguments are handled bilinearly: every pair of grade parts
    (r, s) with r, s > 0 contributes the grade-|r-s| part of A_r B_s.
    """
    return _bilinear(A, B, tables(A.dim).inner_w)


def outer(A: Multivector, B: Multivector) -> Multivector:
    return _bilinear(A, B, tables(A.dim).outer_w)


@lru_cache(maxsize=None)
def _product_tensor(n: int, kind: str) -> np.ndarray:
    t = tables(n)
    w = {"geometric": t.gp_w, "inner": t.inner_w, "outer": t.outer_w}[kind]
    G = np.zeros((t.size, t.size, t.size))
    a, b = np.meshgrid(np.arange(t.size), np.arange(t.size), indexing="ij")
    G[a, b, t.xor] = w
    return G


def batch_product(A: np.ndarray, B: np.ndarray, kind: str = "geometric") -> np.ndarray:
    """Products of coefficient arrays of shape (..., 2^n), broadcasting over ``...``.

    ``kind`` is ``"geometric"``, ``"inner"`` or ``"outer"``; results match the
    scalar-path functions term by term.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    size = A.shape[-1]
    n = size.bit_length() - 1
    if B.shape[-1] != size or 1 << n != size:
        raise ValueError("coefficient arrays must share a 2^n trailing axis")
    return np.einsum("...a,...b,abk->...k", A, B, _product_tensor(n, kind))


def vectors_to_coeffs(v: np.ndarray) -> np.ndarray:
    """Embed arrays of vector components (..., n) as coefficients (..., 2^n)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    out = np.zeros(v.shape[:-1] + (1 << n,))
    out[..., 1 << np.arange(n)] = v
    return out


def grade_project(A: Multivector, r: int) -> Multivector:
    t = tables(A.dim)
    if not 0 <= r <= A.dim:
        raise ValueError(f"grade {r} out of range [0, {A.dim}]")
    return Multivector(A.dim, np.where(t.grade == r, A.coeffs, 0.0))


def reverse(A: Multivector) -> Multivector:
    return Multivector(A.dim, A.coeffs * tables(A.dim).rev_sign)


def scalar_product(A: Multivector, B: Multivector) -> float:
    """Scalar part of the geometric product AB."""
    t = _check_pair(A, B)
    # <e_a e_b>_0 is nonzero only for a == b, with sign e_a e_a = rev_sign[a]
    return float(np.dot(A.coeffs * t.rev_sign, B.coeffs))


def magnitude(A: Multivector) -> float:
    return math.sqrt(max(geometric_product(reverse(A), A).scalar_part, 0.0))


def is_blade(A: Multivector, tol: float = BLADE_TOL) -> bool:
    """True for nonzero pure-grade A whose square ``~A A`` is a scalar."""
    norm2 = float(np.dot(A.coeffs, A.coeffs))
    if norm2 == 0.0:
        return False
    grades = A.grades(tol=tol * math.sqrt(norm2))
    if len(grades) != 1:
        return False
    sq = geometric_product(reverse(A), A)
    rest = sq - sq.scalar_part
    return magnitude(rest) <= tol * norm2


def blade_inverse(A: Multivector) -> Multivector:
    if not is_blade(A):
        raise ValueError("not an invertible blade")
    (r,) = A.grades(tol=BLADE_TOL * magnitude(A))
    A = grade_project(A, r)
    return reverse(A) / magnitude(A) ** 2


def wedge(vectors: Iterable[Multivector], dim: int | None = None) -> Multivector:
    """Outer product of a sequence of vectors; the empty product is 1."""
    vectors = list(vectors)
    if not vectors:
        if dim is None:
            raise ValueError("dim required for an empty wedge")
        return Multivector.scalar(dim, 1.0)
    out = vectors[0]
    for v in vectors[1:]:
        out = outer(out, v)
    return out


def gram_det(vs_a: Sequence[Multivector], vs_b: Sequence[Multivector]) -> float:
    """Scalar ``reverse(a1^...^ar) . (b1^...^br)`` for two lists of vectors."""
    if len(vs_a) != len(vs_b):
        raise ValueError(f"length mismatch: {len(vs_a)} vs {len(vs_b)}")
    if not vs_a:
        return 1.0
    dim = vs_a[0].dim
    for v in list(vs_a) + list(vs_b):
        if v.dim != dim:
            raise ValueError("all vectors must share one dimension")
    A = wedge(vs_a)
    B = wedge(vs_b)
    return inner(reverse(A), B).scalar_part


# ---------------------------------------------------------------- text form

def _blade_name(mask: int) -> str:
    return "e" + "".join(str(j + 1) for j in range(MAX_DIM) if mask >> j & 1)


def format_multivector(A: Multivector) -> str:
    """Render as e.g. ``1.0 + 1.5*e13 - 2.0*e2`` (grade, then index order)."""
    t = tables(A.dim)
    order = sorted(range(t.size), key=lambda b: (t.grade[b], b))
    parts = []
    for b in order:
        c = float(A.coeffs[b])
        if c == 0.0:
            continue
        term = repr(abs(c)) if b == 0 else f"{abs(c)!r}*{_blade_name(b)}"
        if not parts:
            parts.append(("-" if c < 0 else "") + term)
        else:
            parts.append(("- " if c < 0 else "+ ") + term)
    return " ".join(parts) if parts else "0"


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(
    rf"\s*(?P<sign>[+-])?\s*(?:(?P<coef>{_NUM})(?:\*(?P<b1>e\d+))?|(?P<b2>e\d+))\s*"
)


def parse_multivector(text: str, dim: int) -> Multivector:
    """Inverse of :func:`format_multivector`; also accepts unordered indices."""
    pos = 0
    out = Multivector(dim)
    text = text.strip()
    if not text:
        raise ValueError("empty multivector text")
    first = True
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse multivector near {text[pos:]!r}")
        if not first and m.group("sign") is None:
            raise ValueError(f"missing operator near {text[pos:]!r}")
        first = False
        sign = -1.0 if m.group("sign") == "-" else 1.0
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        name = m.group("b1") or m.group("b2")
        term = Multivector.scalar(dim, sign * coef)
        if name:
            indices = [int(ch) for ch in name[1:]]
            term = term * e(dim, *indices)
        out = out + term
        pos = m.end()
    return out
