"""Local Hamilton-Jacobi verification.

A Hamilton-Jacobi function S maps points to grade ``D - 1`` multivectors and
induces momenta ``P(q) = d_q ^ S(q)``.  Nothing here solves for S: candidate
functions are supplied by the caller and checked by residual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from gamcal.ga_calculus import (
    DEFAULT_STEP,
    SimplexChain,
    as_point,
    boundary_chain,
    curl,
    directed_integral,
    divergence,
    directional_derivative,
)
from gamcal.ga_core import Multivector, grade_project, inner, outer, reverse, scalar_product
from gamcal.hamiltonian import Hamiltonian, Potential, SplitFrame
from gamcal.solver import MotionCurve, _steps

EXCLUSION_FACTOR = 10.0
PARALLEL_TOL = 1e-10


@dataclass(frozen=True)
class HJFunction:
    """Candidate Hamilton-Jacobi function.

    ``fn(q, alpha)`` returns a Multivector (or a float for grade 0).
    ``param_derivative(q, alpha, k)`` returns ``d S / d alpha_k``.
    ``singular_points(alpha)`` lists points where S is not differentiable;
    evaluations closer than ``10 h`` to any of them are rejected.
    """

    fn: Callable
    grade: int
    params: tuple[float, ...] = ()
    param_derivative: Callable | None = None
    singular_points: Callable | None = None

    def __call__(self, q, alpha: Sequence[float] | None = None) -> Multivector:
        q = as_point(q)
        a = self.params if alpha is None else tuple(alpha)
        val = self.fn(q, a)
        if not isinstance(val, Multivector):
            val = Multivector.scalar(q.dim, float(val))
        if not val.grades() <= {self.grade}:
            raise ValueError(f"S must have grade {self.grade}, got {sorted(val.grades())}")
        return val

    def at(self, alpha: Sequence[float] | None = None) -> Callable[[Multivector], Multivector]:
        return lambda q: self(q, alpha)

    def d_alpha(self, q, k: int, alpha: Sequence[float] | None = None) -> Multivector:
        if self.param_derivative is None:
            raise ValueError("HJ function has no parameter derivative")
        q = as_point(q)
        a = self.params if alpha is None else tuple(alpha)
        val = self.param_derivative(q, a, k)
        if not isinstance(val, Multivector):
            val = Multivector.scalar(q.dim, float(val))
        return val

    def distance_to_singularity(self, q) -> float:
        if self.singular_points is None:
            return math.inf
        pts = self.singular_points(self.params)
        if len(pts) == 0:
            return math.inf
        v = as_point(q).vector_part()
        return float(min(np.linalg.norm(v - np.asarray(p, dtype=float)) for p in pts))


def relativistic_particle(tension: float, q0: Sequence[float]) -> HJFunction:
    """``S = tension |q - q0|`` with parameters ``q0``."""
    if not tension > 0:
        raise ValueError("tension must be positive")
    q0 = tuple(float(x) for x in q0)

    def fn(q, a):
        return tension * float(np.linalg.norm(q.vector_part() - np.asarray(a)))

    def d_alpha(q, a, k):
        d = q.vector_part() - np.asarray(a)
        return -tension * d[k] / float(np.linalg.norm(d))

    return HJFunction(fn, 0, q0, d_alpha, lambda a: [np.asarray(a)])


def free_mechanics(energy: float, frame: SplitFrame, direction: Sequence[float] | None = None) -> HJFunction:
    """``S = -E t + sqrt(2E) (u . x)`` for ``H0 = |p|^2 / 2``, parameter E.

    ``u`` is a unit spatial direction, default the first spatial axis.
    """
    if not energy > 0:
        raise ValueError("energy must be positive")
    e_t = frame.time_axis.vector_part()
    if direction is None:
        u = np.zeros(frame.n)
        u[(frame.time_index + 1) % frame.n] = 1.0
    else:
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)
    if abs(np.dot(u, e_t)) > PARALLEL_TOL:
        raise ValueError("direction must be orthogonal to the time axis")

    def fn(q, a):
        v = q.vector_part()
        return -a[0] * float(np.dot(v, e_t)) + math.sqrt(2 * a[0]) * float(np.dot(v, u))

    def d_alpha(q, a, k):
        v = q.vector_part()
        return -float(np.dot(v, e_t)) + float(np.dot(v, u)) / math.sqrt(2 * a[0])

    return HJFunction(fn, 0, (float(energy),), d_alpha)


def weyl_from_s(s: Callable, frame: SplitFrame, params: Sequence[float] = (),
                ds_dalpha: Callable | None = None) -> HJFunction:
    """HJ function ``S = s . reverse(I_x)`` for a vector field s in the I_x plane.

    ``s(q, alpha)`` and ``ds_dalpha(q, alpha, k)`` return vectors.
    """
    Ir = reverse(frame.pseudoscalar)
    D = frame.D

    def fn(q, a):
        return grade_project(inner(s(q, a), Ir), D - 1)

    def d_alpha(q, a, k):
        return grade_project(inner(ds_dalpha(q, a, k), Ir), D - 1)

    return HJFunction(fn, D - 1, tuple(params), None if ds_dalpha is None else d_alpha)


def _guard(S: HJFunction, q: Multivector, h: float) -> None:
    if S.distance_to_singularity(q) < EXCLUSION_FACTOR * h:
        raise ValueError(f"point within {EXCLUSION_FACTOR:g} h of a singularity of S")


def induced_momentum(S: HJFunction, q, D: int, h: float = DEFAULT_STEP,
                     alpha: Sequence[float] | None = None) -> Multivector:
    """``P(q) = grade_D(d_q ^ S)`` by central differences."""
    q = as_point(q)
    _guard(S, q, h)
    if S.grade != D - 1:
        raise ValueError(f"S has grade {S.grade}, expected {D - 1}")
    return grade_project(curl(S.at(alpha), q, h), D)


def hj_residual(H: Hamiltonian, S: HJFunction, q, h: float = DEFAULT_STEP) -> float:
    """``|H(q, d_q ^ S)|``."""
    q = as_point(q)
    P = induced_momentum(S, q, H.D, h)
    return abs(float(H(q, P)))


def weyl_hj_residual(V: Potential, s: Callable, q, h: float = DEFAULT_STEP,
                     frame: SplitFrame | None = None) -> float:
    """``|d . s + (d_phi s)^2 / 2 + V(phi)|`` for a vector field s in the I_x plane.

    ``s`` maps a point to a vector; the default frame puts the field axis
    last.
    """
    q = as_point(q)
    frame = SplitFrame.field(q.dim - 1) if frame is None else frame
    if frame.n != q.dim:
        raise ValueError("point does not live in the frame's space")
    I_x = frame.pseudoscalar

    def field(x):
        val = s(x)
        if not isinstance(val, Multivector):
            val = Multivector.vector(val)
        if not val.grades() <= {1}:
            raise ValueError("s must be vector valued")
        return val

    sq = field(q)
    w = outer(sq, I_x)
    if abs(w) > PARALLEL_TOL * max(1.0, abs(sq)):
        raise ValueError("s is not parallel to I_x")
    div = divergence(field, q, h).scalar_part
    e_y = frame.field_axis
    ds_phi = directional_derivative(field, q, e_y, h)
    phi = float(np.dot(q.vector_part(), e_y.vector_part()))
    return abs(div + 0.5 * scalar_product(ds_phi, ds_phi) + float(V(phi)))


def conserved_quantity(S: HJFunction, motion: MotionCurve, k: int,
                       h: float = DEFAULT_STEP) -> tuple[np.ndarray, float]:
    """Sample ``dS / d alpha_k`` along a motion; return (values, max - min).

    Samples inside the singularity exclusion zone are skipped.
    """
    if S.grade != 0:
        raise ValueError("conserved quantities are sampled for D = 1 motions")
    if S.param_derivative is None:
        raise ValueError("HJ function has no parameter derivative")
    vals = []
    for i in range(len(motion)):
        q = motion.point(i)
        if S.distance_to_singularity(q) < EXCLUSION_FACTOR * h:
            continue
        vals.append(S.d_alpha(q, k).scalar_part)
    if not vals:
        raise ValueError("no samples outside the singularity exclusion zone")
    arr = np.array(vals)
    return arr, float(arr.max() - arr.min())


def motion_from_hj(q0, v, s_end: float, ds: float, tension: float = 1.0) -> MotionCurve:
    """Straight motion on the level set ``(q - q0) / |q - q0| = v``.

    For ``S = tension |q - q0|`` the parameter derivatives ``dS/dq0 =
    -tension (q - q0) / |q - q0|`` are constant along the motion, which fixes
    the unit direction v; points are ``q0 + s v`` at uniform arclength.
    """
    q0 = as_point(q0).vector_part()
    v = as_point(v).vector_part()
    if q0.shape != v.shape:
        raise ValueError("q0 and v must have the same dimension")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    if not tension > 0:
        raise ValueError("tension must be positive")
    steps, h = _steps(s_end, ds)
    s = h * np.arange(steps + 1)
    q = q0[None, :] + s[:, None] * v[None, :]
    p = np.tile(tension * v, (steps + 1, 1))
    energy = np.full(steps + 1, 0.5 * tension ** 2)
    return MotionCurve(s, q, p, np.zeros(steps + 1), energy)


def hj_continuity_check(S: HJFunction, patch: SimplexChain, k: int = 0) -> float:
    """``|integral over the patch boundary of dSigma . dS/d alpha_k|``."""
    if patch.D < 2:
        raise ValueError("continuity check needs a patch of dimension D >= 2")
    if S.grade != patch.D - 1:
        raise ValueError(f"S has grade {S.grade}, patch needs {patch.D - 1}")
    rim = boundary_chain(patch)
    if len(rim) == 0:
        raise ValueError("patch has no boundary to integrate over")

    def L(dS, q):
        return scalar_product(dS, S.d_alpha(q, k))

    return abs(directed_integral(L, rim).scalar_part)


def residual_report(op: str, residuals: Sequence[float]) -> str:
    """JSON ``{op, samples, max_residual, mean_residual}``."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("no residuals to report")
    return json.dumps({
        "op": op,
        "samples": int(r.size),
        "max_residual": float(r.max()),
        "mean_residual": float(r.mean()),
    }, sort_keys=True)
