"""Hamiltonian constraints H(q, P) with analytic gradients.

Three families are provided: non-relativistic mechanics (a time axis e_t
split off the configuration space), De Donder-Weyl scalar field theory (a
spacetime blade I_x and a field axis e_y) and the string Hamiltonian
``(|P|^2 - L^2) / 2``.  ``grad_q`` is always the explicit derivative in q with
the momentum held fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from gamcal.ga_calculus import as_point
from gamcal.ga_core import (
    Multivector,
    basis_vectors,
    geometric_product,
    magnitude,
    reverse,
    scalar_product,
)

FRAME_TOL = 1e-12


@dataclass(frozen=True)
class Potential:
    """Polynomial ``V(phi) = c0 + c1 phi + c2 phi^2 + ...``."""

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs) or (0.0,)
        if not all(math.isfinite(x) for x in c):
            raise ValueError("potential coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, phi):
        return npoly.polyval(phi, self.coeffs)

    def derivative(self, phi):
        return npoly.polyval(phi, npoly.polyder(self.coeffs))

    def second_derivative(self, phi):
        return npoly.polyval(phi, npoly.polyder(self.coeffs, 2))

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])


@dataclass(frozen=True)
class SplitFrame:
    """Orthonormal splitting of configuration space.

    For mechanics (D = 1) only ``time_axis`` is used.  For field theory the
    spacetime is spanned by ``spacetime_axes`` (so ``I_x = e_1 ... e_D``) and
    the field direction is ``field_axis``.
    """

    n: int
    D: int
    time_axis: Multivector | None = None
    spacetime_axes: tuple[Multivector, ...] = ()
    field_axis: Multivector | None = None

    def __post_init__(self):
        if self.time_axis is not None:
            if abs(magnitude(self.time_axis) - 1.0) > FRAME_TOL or self.time_axis.grades() != {1}:
                raise ValueError("time axis must be a unit vector")
        if self.spacetime_axes:
            if len(self.spacetime_axes) != self.D:
                raise ValueError("need exactly D spacetime axes")
            if self.field_axis is None:
                raise ValueError("field axis required alongside spacetime axes")
            vs = list(self.spacetime_axes) + [self.field_axis]
            gram = np.array([[np.dot(a.vector_part(), b.vector_part()) for b in vs] for a in vs])
            if not np.allclose(gram, np.eye(len(vs)), atol=FRAME_TOL):
                raise ValueError("spacetime and field axes must be orthonormal")

    @classmethod
    def mechanics(cls, n: int, time_index: int = 0) -> "SplitFrame":
        return cls(n=n, D=1, time_axis=basis_vectors(n)[time_index])

    @classmethod
    def field(cls, D: int) -> "SplitFrame":
        """Spacetime ``e_1 .. e_D`` and field axis ``e_{D+1}`` in R^(D+1)."""
        es = basis_vectors(D + 1)
        return cls(n=D + 1, D=D, spacetime_axes=tuple(es[:D]), field_axis=es[D])

    @property
    def time_index(self) -> int:
        comps = self.time_axis.vector_part()
        return int(np.argmax(np.abs(comps)))

    @property
    def pseudoscalar(self) -> Multivector:
        out = Multivector.scalar(self.n, 1.0)
        for a in self.spacetime_axes:
            out = geometric_product(out, a)
        return out

    def E(self, j: int) -> Multivector:
        """``E_j = I_x e_j e_y`` for 0-based spacetime index j."""
        return geometric_product(
            geometric_product(self.pseudoscalar, self.spacetime_axes[j]), self.field_axis
        )


class Hamiltonian:
    """Base class: subclasses implement ``__call__``, ``grad_q`` and ``grad_P``."""

    D: int
    n: int

    def _momentum(self, P) -> Multivector:
        if not isinstance(P, Multivector):
            if self.D != 1:
                raise ValueError("array momenta are only accepted for D = 1")
            P = Multivector.vector(P)
        if P.dim != self.n:
            raise ValueError(f"momentum lives in n={P.dim}, Hamiltonian in n={self.n}")
        if not P.grades() <= {self.D}:
            raise ValueError(f"momentum must have grade {self.D}, has {sorted(P.grades())}")
        return P

    def energy(self, q, P) -> float:
        """Diagnostic conserved quantity reported alongside motions."""
        return float(self(q, P))


class MechanicalH0(Protocol):
    """Non-relativistic Hamiltonian on coordinate arrays (q includes time)."""

    def value(self, q: np.ndarray, p: np.ndarray) -> float: ...

    def grad_q(self, q: np.ndarray, p: np.ndarray) -> np.ndarray: ...

    def grad_p(self, q: np.ndarray, p: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class SeparableH0:
    """``|p_x|^2 / 2m + sum_k V(x_k)`` over the spatial coordinates."""

    potential: Potential
    time_index: int = 0
    mass: float = 1.0

    def _spatial(self, arr):
        out = np.array(arr, dtype=float)
        out[self.time_index] = 0.0
        return out

    def value(self, q, p):
        px = self._spatial(p)
        x = np.delete(np.asarray(q, dtype=float), self.time_index)
        return float(0.5 * np.dot(px, px) / self.mass + np.sum(self.potential(x)))

    def grad_p(self, q, p):
        return self._spatial(p) / self.mass

    def grad_q(self, q, p):
        out = np.array(self.potential.derivative(np.asarray(q, dtype=float)), dtype=float)
        out[self.time_index] = 0.0
        return out


class MechanicsHamiltonian(Hamiltonian):
    """``H = P . e_t + H0(q, P)`` with ``e_t . d_p H0 = 0``."""

    def __init__(self, H0: MechanicalH0, frame: SplitFrame):
        if frame.time_axis is None:
            raise ValueError("mechanics needs a frame with a time axis")
        self.H0 = H0
        self.frame = frame
        self.n = frame.n
        self.D = 1
        self.e_t = frame.time_axis.vector_part()
        rng = np.random.default_rng(0)
        for _ in range(3):
            q, p = rng.standard_normal(self.n), rng.standard_normal(self.n)
            if abs(np.dot(self.e_t, H0.grad_p(q, p))) > 1e-12:
                raise ValueError("H0 momentum gradient must be orthogonal to e_t")

    def __call__(self, q, P) -> float:
        q, P = as_point(q), self._momentum(P)
        qa, pa = q.vector_part(), P.vector_part()
        return float(np.dot(pa, self.e_t) + self.H0.value(qa, pa))

    def grad_P(self, q, P) -> Multivector:
        q, P = as_point(q), self._momentum(P)
        return Multivector.vector(self.e_t + self.H0.grad_p(q.vector_part(), P.vector_part()))

    def grad_q(self, q, P) -> Multivector:
        q, P = as_point(q), self._momentum(P)
        return Multivector.vector(self.H0.grad_q(q.vector_part(), P.vector_part()))

    def energy(self, q, P) -> float:
        q, P = as_point(q), self._momentum(P)
        return float(self.H0.value(q.vector_part(), P.vector_part()))

    # array forms used by the integrator
    def velocity(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        return self.e_t + self.H0.grad_p(q, p)

    def force(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        return -np.asarray(self.H0.grad_q(q, p), dtype=float)


class DeDonderWeylHamiltonian(Hamiltonian):
    """``H = P . I_x + sum_j (P . E_j)^2 / 2 + V(e_y . q)``."""

    def __init__(self, potential: Potential, frame: SplitFrame):
        if frame.D < 2 or frame.n != frame.D + 1 or not frame.spacetime_axes:
            raise ValueError("De Donder-Weyl needs D >= 2, n = D + 1 and a field frame")
        self.V = potential
        self.frame = frame
        self.n, self.D = frame.n, frame.D
        self.I_x = frame.pseudoscalar
        self.E = [frame.E(j) for j in range(self.D)]

    def field_value(self, q) -> float:
        return float(np.dot(as_point(q).vector_part(), self.frame.field_axis.vector_part()))

    def momenta(self, P) -> np.ndarray:
        """Polymomenta ``pi_j = P . E_j``."""
        P = self._momentum(P)
        return np.array([scalar_product(P, Ej) for Ej in self.E])

    def hdw(self, q, P) -> float:
        pi = self.momenta(P)
        return float(0.5 * np.dot(pi, pi) + self.V(self.field_value(q)))

    def __call__(self, q, P) -> float:
        P = self._momentum(P)
        return scalar_product(P, self.I_x) + self.hdw(q, P)

    def grad_P(self, q, P) -> Multivector:
        # d_P (P . C) = C for grade-D C in an orthonormal blade basis
        out = self.I_x
        for pj, Ej in zip(self.momenta(P), self.E):
            out = out + pj * Ej
        return out

    def grad_q(self, q, P) -> Multivector:
        self._momentum(P)
        return float(self.V.derivative(self.field_value(q))) * self.frame.field_axis

    def energy(self, q, P) -> float:
        return self.hdw(q, P)

    def momentum_from(self, q, pi: Sequence[float]) -> Multivector:
        """On-shell P with polymomenta ``pi`` and ``P . I_x = -H_DW``."""
        pi = np.asarray(pi, dtype=float)
        alpha = -(0.5 * np.dot(pi, pi) + float(self.V(self.field_value(q))))
        P = alpha * reverse(self.I_x)
        for pj, Ej in zip(pi, self.E):
            P = P + pj * reverse(Ej)
        return P


class StringHamiltonian(Hamiltonian):
    """``H = (|P|^2 - tension^2) / 2`` for grade-D momenta in R^n."""

    def __init__(self, tension: float, D: int, n: int):
        if not tension > 0:
            raise ValueError(f"tension must be positive, got {tension}")
        if not 1 <= D < n:
            raise ValueError(f"need 1 <= D < n, got D={D}, n={n}")
        self.tension = float(tension)
        self.D, self.n = D, n

    def __call__(self, q, P) -> float:
        P = self._momentum(P)
        return 0.5 * (scalar_product(reverse(P), P) - self.tension ** 2)

    def grad_P(self, q, P) -> Multivector:
        return reverse(self._momentum(P))

    def grad_q(self, q, P) -> Multivector:
        self._momentum(P)
        return Multivector(self.n)

    def energy(self, q, P) -> float:
        P = self._momentum(P)
        return 0.5 * scalar_product(reverse(P), P)


def mechanics_hamiltonian(H0: MechanicalH0, frame: SplitFrame) -> MechanicsHamiltonian:
    return MechanicsHamiltonian(H0, frame)


def dw_hamiltonian(V: Potential, frame: SplitFrame) -> DeDonderWeylHamiltonian:
    return DeDonderWeylHamiltonian(V, frame)


def string_hamiltonian(tension: float, D: int, n: int) -> StringHamiltonian:
    return StringHamiltonian(tension, D, n)


def from_config(block: dict) -> Hamiltonian:
    """Build a Hamiltonian from ``{type, potential, lambda, dims: {n, D}}``."""
    kind = block.get("type")
    dims = block.get("dims", {})
    potential = Potential(tuple(block.get("potential", [0.0])))
    if kind == "mechanics":
        n = int(dims.get("n", 2))
        if int(dims.get("D", 1)) != 1:
            raise ValueError("mechanics requires D = 1")
        mass = float(block.get("mass", 1.0))
        if not mass > 0:
            raise ValueError("mass must be positive")
        frame = SplitFrame.mechanics(n, int(block.get("time_index", 0)))
        return MechanicsHamiltonian(SeparableH0(potential, frame.time_index, mass), frame)
    if kind == "dw":
        D = int(dims.get("D", 2))
        n = int(dims.get("n", D + 1))
        if n != D + 1:
            raise ValueError("dw requires n = D + 1")
        return DeDonderWeylHamiltonian(potential, SplitFrame.field(D))
    if kind == "string":
        if "lambda" not in block:
            raise ValueError("string Hamiltonian needs 'lambda'")
        return StringHamiltonian(float(block["lambda"]), int(dims.get("D", 1)), int(dims.get("n", 3)))
    raise ValueError(f"unknown hamiltonian type {kind!r}; expected mechanics, dw or string")
