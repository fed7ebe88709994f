"""Solvers and residual diagnostics for the canonical equations of motion.

* mechanics: RK4 on ``dq/dt = d_P H``, ``dp/dt = -d_q H`` with the motion
  parametrised by time, so the Lagrange multiplier is ``dt`` itself;
* scalar field: Dirichlet relaxation of ``Laplace(phi) = -V'(phi)`` on a
  uniform grid, with polymomenta ``pi_j = d_j phi``;
* string, D = 1: straight geodesics at unit speed in arclength, ``p = L v``.

Residual evaluators (constraint, canonical equations, continuity of the
energy-momentum tensor, spur of a surface) are pure functions of their data.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from gamcal.ga_calculus import SimplexChain, as_point, directed_integral
from gamcal.ga_core import (
    Multivector,
    batch_product,
    reverse,
    scalar_product,
    vectors_to_coeffs,
)
from gamcal.hamiltonian import (
    DeDonderWeylHamiltonian,
    Hamiltonian,
    MechanicsHamiltonian,
    Potential,
    StringHamiltonian,
)

UNIT_TOL = 1e-12


class IntegrationError(RuntimeError):
    """Non-finite state during time stepping."""

    def __init__(self, step: int, message: str = "non-finite state"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class ConvergenceError(RuntimeError):
    """Relaxation did not reach the requested residual."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"relaxation did not converge in {iterations} sweeps (residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class SchemaError(ValueError):
    """Data file does not follow the documented CSV layout."""


def _fmt(x: float) -> str:
    return repr(float(x))


# ------------------------------------------------------------------ motions

@dataclass
class MotionCurve:
    """Discretised D = 1 motion: parameters, points, momenta, diagnostics."""

    tau: np.ndarray
    q: np.ndarray
    p: np.ndarray
    h_residual: np.ndarray | None = None
    energy: np.ndarray | None = None

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_2d(np.asarray(self.p, dtype=float))
        m = self.tau.shape[0]
        if self.q.shape[0] != m or self.p.shape != self.q.shape:
            raise ValueError("tau, q and p must have matching lengths and widths")
        if m > 1 and not np.all(np.diff(self.tau) > 0):
            raise ValueError("curve parameter must be strictly increasing")
        for name in ("tau", "q", "p"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in {name}")
        for name in ("h_residual", "energy"):
            val = getattr(self, name)
            setattr(self, name, np.zeros(m) if val is None else np.asarray(val, dtype=float))

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def __len__(self) -> int:
        return self.tau.shape[0]

    def point(self, i: int) -> Multivector:
        return Multivector.vector(self.q[i])

    def momentum(self, i: int) -> Multivector:
        return Multivector.vector(self.p[i])

    def header(self) -> list[str]:
        n = self.n
        return (["tau"] + [f"q_{k + 1}" for k in range(n)] + [f"p_{k + 1}" for k in range(n)]
                + ["H_residual", "energy"])

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for i in range(len(self)):
            row = [self.tau[i], *self.q[i], *self.p[i], self.h_residual[i], self.energy[i]]
            w.writerow([_fmt(x) for x in row])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "MotionCurve":
        header, data = _read_csv(source)
        if not header or header[0] != "tau" or header[-2:] != ["H_residual", "energy"]:
            raise SchemaError("motion CSV must have columns tau,q_*,p_*,H_residual,energy")
        width = len(header) - 3
        if width % 2 or width == 0:
            raise SchemaError("motion CSV must have equal numbers of q and p columns")
        n = width // 2
        expect = (["tau"] + [f"q_{k + 1}" for k in range(n)] + [f"p_{k + 1}" for k in range(n)]
                  + ["H_residual", "energy"])
        if header != expect:
            raise SchemaError(f"unexpected motion CSV header {header}")
        try:
            return cls(data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n],
                       data[:, -2], data[:, -1])
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc


def _read_csv(source) -> tuple[list[str], np.ndarray]:
    """Parse a CSV given as a path, a file object or text (anything with a newline)."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise SchemaError(f"cannot read {source}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise SchemaError("CSV file has no data rows")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"non-numeric CSV entry: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise SchemaError("ragged CSV rows")
    return header, data


def rk4(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, t0: float,
        dt: float, steps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta; returns all ``steps + 1`` states."""
    ys = np.empty((steps + 1, y0.shape[0]))
    ys[0] = y0
    y, t = np.array(y0, dtype=float), float(t0)
    for i in range(steps):
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (i + 1) * dt
        if not np.all(np.isfinite(y)):
            raise IntegrationError(i + 1)
        ys[i + 1] = y
    return ys


def _steps(span: float, step: float) -> tuple[int, float]:
    if not (step > 0 and math.isfinite(step)):
        raise ValueError(f"step must be positive, got {step}")
    if not (span > 0 and math.isfinite(span)):
        raise ValueError(f"integration span must be positive, got {span}")
    count = max(1, int(math.ceil(span / step - 1e-9)))
    return count, span / count


def on_shell_momentum(H: MechanicsHamiltonian, q, p) -> np.ndarray:
    """Set the e_t component of p so that ``H(q, p) = 0``."""
    q = np.asarray(q, dtype=float)
    p = np.array(p, dtype=float)
    e_t = H.e_t
    p = p - np.dot(p, e_t) * e_t
    return p - H.H0.value(q, p) * e_t


def solve_mechanics(H: MechanicsHamiltonian, q0, p0, t_end: float, dt: float) -> MotionCurve:
    """Integrate the motion from time ``e_t . q0`` over a span ``t_end``.

    The momentum's e_t component is put on shell first; the step is shrunk
    to ``t_end / ceil(t_end / dt)`` so the final sample lands on t_end.
    """
    if not isinstance(H, MechanicsHamiltonian):
        raise TypeError("solve_mechanics needs a mechanics Hamiltonian")
    q0 = as_point(q0).vector_part()
    p0 = on_shell_momentum(H, q0, as_point(p0).vector_part())
    steps, h = _steps(t_end, dt)
    n = H.n

    def rhs(t, y):
        q, p = y[:n], y[n:]
        return np.concatenate([H.velocity(q, p), H.force(q, p)])

    t0 = float(np.dot(q0, H.e_t))
    ys = rk4(rhs, np.concatenate([q0, p0]), t0, h, steps)
    q, p = ys[:, :n], ys[:, n:]
    tau = t0 + h * np.arange(steps + 1)
    energy = np.array([H.H0.value(qi, pi) for qi, pi in zip(q, p)])
    resid = np.abs(p @ H.e_t + energy)
    return MotionCurve(tau, q, p, resid, energy)


def solve_geodesic(H: StringHamiltonian, q0, v0, s_end: float, ds: float) -> MotionCurve:
    """Arclength-parametrised straight motion with momenta ``tension * v``."""
    if not isinstance(H, StringHamiltonian) or H.D != 1:
        raise TypeError("solve_geodesic needs a D = 1 string Hamiltonian")
    q0 = as_point(q0).vector_part()
    v0 = as_point(v0).vector_part()
    if q0.shape[0] != H.n or v0.shape[0] != H.n:
        raise ValueError("q0 and v0 must live in the Hamiltonian's space")
    if abs(np.linalg.norm(v0) - 1.0) > UNIT_TOL:
        raise ValueError("initial direction must be a unit vector")
    steps, h = _steps(s_end, ds)
    n = H.n

    def rhs(s, y):
        return np.concatenate([y[n:], np.zeros(n)])

    ys = rk4(rhs, np.concatenate([q0, v0]), 0.0, h, steps)
    q, v = ys[:, :n], ys[:, n:]
    p = H.tension * v
    energy = 0.5 * np.einsum("ij,ij->i", p, p)
    resid = np.abs(energy - 0.5 * H.tension ** 2)
    return MotionCurve(h * np.arange(steps + 1), q, p, resid, energy)


# --------------------------------------------------------------- residuals

def constraint_residual(H: Hamiltonian, motion) -> float:
    """``max |H(q, P)|`` over the samples of a motion or field grid."""
    if isinstance(motion, MotionCurve):
        return float(max(abs(H(motion.q[i], motion.momentum(i))) for i in range(len(motion))))
    if isinstance(motion, FieldGrid):
        if not isinstance(H, DeDonderWeylHamiltonian):
            raise TypeError("field grids need a De Donder-Weyl Hamiltonian")
        if motion.momenta is None or motion.p_scalar is None:
            raise ValueError("field grid carries no momenta")
        worst = 0.0
        I_rev = reverse(H.I_x)
        E_rev = [reverse(Ej) for Ej in H.E]
        e_y = H.frame.field_axis.vector_part()
        x = motion.coordinates()
        for idx in np.ndindex(motion.shape):
            q = np.zeros(H.n)
            q[:H.D] = x[idx]
            q = q + motion.phi[idx] * e_y
            P = motion.p_scalar[idx] * I_rev
            for j in range(H.D):
                P = P + motion.momenta[(j,) + idx] * E_rev[j]
            worst = max(worst, abs(H(q, P)))
        return worst
    raise TypeError(f"unsupported motion type {type(motion).__name__}")


class CanonicalResiduals(NamedTuple):
    alignment: float  # sine of the angle between dGamma and d_P H
    transport: float  # |dP + lambda d_q H| / |dGamma|
    constraint: float
    multipliers: np.ndarray


def canonical_residuals(H: Hamiltonian, motion: MotionCurve) -> CanonicalResiduals:
    """Per-segment residuals of the three canonical equations for D = 1.

    On each segment the multiplier is the least-squares fit
    ``lambda = (dGamma . g) / (g . g)`` with g the momentum gradient at the
    midpoint.
    """
    if H.D != 1:
        raise ValueError("canonical_residuals handles D = 1 motions")
    align = transport = 0.0
    lams = []
    for i in range(len(motion) - 1):
        dG = motion.q[i + 1] - motion.q[i]
        qm = 0.5 * (motion.q[i + 1] + motion.q[i])
        pm = 0.5 * (motion.p[i + 1] + motion.p[i])
        g = H.grad_P(qm, pm).vector_part()
        lam = float(np.dot(dG, g) / np.dot(g, g))
        lams.append(lam)
        norm = np.linalg.norm(dG)
        align = max(align, np.linalg.norm(dG - lam * g) / norm)
        dP = motion.p[i + 1] - motion.p[i]
        fq = H.grad_q(qm, pm).vector_part()
        transport = max(transport, np.linalg.norm(dP + lam * fq) / norm)
    return CanonicalResiduals(align, transport, constraint_residual(H, motion), np.array(lams))


# -------------------------------------------------------------- field grids

@dataclass
class FieldGrid:
    """Scalar field on a uniform D-dimensional box with Dirichlet boundary.

    ``phi`` has shape ``shape``; ``momenta`` (shape ``(D, *shape)``) holds
    ``pi_j = P . E_j`` and ``p_scalar`` holds ``P . I_x``.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    phi: np.ndarray
    momenta: np.ndarray | None = None
    p_scalar: np.ndarray | None = None

    def __post_init__(self):
        self.lower = tuple(float(x) for x in self.lower)
        self.upper = tuple(float(x) for x in self.upper)
        self.phi = np.array(self.phi, dtype=float)
        if len(self.lower) != self.phi.ndim or len(self.upper) != self.phi.ndim:
            raise ValueError("extents must match the field dimensionality")
        for lo, hi, m in zip(self.lower, self.upper, self.phi.shape):
            if not hi > lo:
                raise ValueError("grid extents must have upper > lower")
            if m < 3:
                raise ValueError("need at least 3 nodes per axis")
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("field values must be finite")

    @classmethod
    def dirichlet(cls, lower: Sequence[float], upper: Sequence[float], shape: Sequence[int],
                  boundary: Callable[[np.ndarray], float], initial: float = 0.0) -> "FieldGrid":
        """Grid with ``phi = boundary(x)`` on the boundary and ``initial`` inside."""
        shape = tuple(int(m) for m in shape)
        axes = [np.linspace(lo, hi, m) for lo, hi, m in zip(lower, upper, shape)]
        x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        phi = np.full(shape, float(initial))
        mask = boundary_mask(shape)
        phi[mask] = [boundary(p) for p in x[mask]]
        return cls(lower, upper, phi)

    @property
    def D(self) -> int:
        return self.phi.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.phi.shape

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (m - 1) for lo, hi, m in zip(self.lower, self.upper, self.shape))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, m) for lo, hi, m in zip(self.lower, self.upper, self.shape)]

    def coordinates(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def gradient(self) -> np.ndarray:
        """Central differences of phi along each axis (second-order one-sided at edges)."""
        return np.stack([np.gradient(self.phi, h, axis=k, edge_order=2)
                         for k, h in enumerate(self.spacing)])

    def header(self) -> list[str]:
        D = self.D
        return ([f"x_{k + 1}" for k in range(D)] + ["phi"]
                + [f"pi_{k + 1}" for k in range(D)] + ["p_I"])

    def to_csv(self, target=None) -> str:
        if self.momenta is None or self.p_scalar is None:
            raise ValueError("grid has no momenta to write")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        x = self.coordinates()
        for idx in np.ndindex(self.shape):
            row = [*x[idx], self.phi[idx], *self.momenta[(slice(None),) + idx], self.p_scalar[idx]]
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "FieldGrid":
        header, data = _read_csv(source)
        if "phi" not in header:
            raise SchemaError("field CSV needs a phi column")
        D = header.index("phi")
        expect = ([f"x_{k + 1}" for k in range(D)] + ["phi"]
                  + [f"pi_{k + 1}" for k in range(D)] + ["p_I"])
        if header != expect or D < 1:
            raise SchemaError(f"unexpected field CSV header {header}")
        axes = [np.unique(data[:, k]) for k in range(D)]
        shape = tuple(len(a) for a in axes)
        if int(np.prod(shape)) != data.shape[0]:
            raise SchemaError("field CSV rows do not form a full grid")
        try:
            grid = cls([a[0] for a in axes], [a[-1] for a in axes],
                       data[:, D].reshape(shape),
                       np.stack([data[:, D + 1 + j].reshape(shape) for j in range(D)]),
                       data[:, -1].reshape(shape))
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
        return grid


def boundary_mask(shape: Sequence[int]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for k in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[k] = 0
        mask[tuple(idx)] = True
        idx[k] = -1
        mask[tuple(idx)] = True
    return mask


def _interior(D: int, shift: int = 0, axis: int = 0) -> tuple:
    out = [slice(1, -1)] * D
    if shift:
        out[axis] = slice(1 + shift, None if shift == 1 else -2)
    return tuple(out)


def _neighbour_sum(phi: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    D = phi.ndim
    total = np.zeros(tuple(m - 2 for m in phi.shape))
    for k, h in enumerate(spacing):
        total += (phi[_interior(D, 1, k)] + phi[_interior(D, -1, k)]) / h ** 2
    return total


def field_equation_residual(phi: np.ndarray, spacing: Sequence[float], V: Potential) -> np.ndarray:
    """Discrete ``Laplace(phi) + V'(phi)`` at interior nodes (standard 2D+1 stencil)."""
    diag = sum(2.0 / h ** 2 for h in spacing)
    inner = phi[_interior(phi.ndim)]
    return _neighbour_sum(phi, spacing) - diag * inner + V.derivative(inner)


def sor_factor(shape: Sequence[int], spacing: Sequence[float]) -> float:
    """Over-relaxation factor from the Jacobi spectral radius of the Laplacian."""
    w = [1.0 / h ** 2 for h in spacing]
    rho = sum(wk * math.cos(math.pi / (m - 1)) for wk, m in zip(w, shape)) / sum(w)
    return 2.0 / (1.0 + math.sqrt(max(1.0 - rho ** 2, 0.0)))


def solve_scalar_field(H: DeDonderWeylHamiltonian, grid: FieldGrid, tol: float = 1e-10,
                       max_iter: int = 200_000, omega: float | None = None,
                       check_every: int = 10) -> FieldGrid:
    """Relax ``Laplace(phi) = -V'(phi)`` with pointwise-Newton red-black sweeps.

    ``omega`` scales each Newton correction: values below 1 damp, values in
    (1, 2) over-relax.  The default is the SOR factor of the linear
    Laplacian.  Boundary nodes are never touched.  The returned grid carries
    ``pi_j = d_j phi`` and the on-shell ``P . I_x = -H_DW``.
    """
    if not isinstance(H, DeDonderWeylHamiltonian):
        raise TypeError("solve_scalar_field needs a De Donder-Weyl Hamiltonian")
    if grid.D != H.D:
        raise ValueError(f"grid is {grid.D}-dimensional, Hamiltonian has D={H.D}")
    if not tol > 0 or max_iter < 1:
        raise ValueError("tol and max_iter must be positive")
    V = H.V
    spacing = grid.spacing
    if omega is None:
        omega = sor_factor(grid.shape, spacing)
    if not 0 < omega < 2:
        raise ValueError("relaxation factor must lie in (0, 2)")
    phi = grid.phi.copy()
    D = phi.ndim
    inner_shape = tuple(m - 2 for m in phi.shape)
    parity = np.indices(inner_shape).sum(axis=0) % 2
    colours = [parity == 0, parity == 1]
    diag = sum(2.0 / h ** 2 for h in spacing)
    view = phi[_interior(D)]

    residual = float(np.max(np.abs(field_equation_residual(phi, spacing, V))))
    it = 0
    while residual > tol:
        if it >= max_iter:
            raise ConvergenceError(it, residual)
        for c in colours:
            F = _neighbour_sum(phi, spacing) - diag * view + V.derivative(view)
            dF = -diag + V.second_derivative(view)
            view[c] -= omega * (F / dF)[c]
        it += 1
        if not np.all(np.isfinite(view)):
            raise IntegrationError(it, "non-finite field during relaxation")
        if it % check_every == 0:
            residual = float(np.max(np.abs(field_equation_residual(phi, spacing, V))))

    out = FieldGrid(grid.lower, grid.upper, phi)
    out.momenta = out.gradient()
    out.p_scalar = -(0.5 * np.sum(out.momenta ** 2, axis=0) + V(phi))
    return out


class DWResiduals(NamedTuple):
    momentum_relation: float  # max |pi_j - d_j phi|
    field_equation: float  # max |sum_j d_j pi_j + V'(phi)| at interior nodes


def dw_residuals(grid: FieldGrid, V: Potential) -> DWResiduals:
    """Residuals of the De Donder-Weyl pair on a grid carrying momenta."""
    if grid.momenta is None:
        raise ValueError("grid carries no momenta")
    rel = float(np.max(np.abs(grid.momenta - grid.gradient())))
    D = grid.D
    if any(m < 5 for m in grid.shape):
        raise ValueError("field-equation residual needs at least 5 nodes per axis")
    # differences of the centrally differenced momenta only: nodes [2:-2]
    div = np.zeros(tuple(m - 4 for m in grid.shape))
    for k, h in enumerate(grid.spacing):
        pk = grid.momenta[k][_interior(D)]
        div += (pk[_interior(D, 1, k)] - pk[_interior(D, -1, k)]) / (2 * h)
    eq = div + V.derivative(grid.phi[_interior(D)][_interior(D)])
    return DWResiduals(rel, float(np.max(np.abs(eq))))


@dataclass
class EnergyMomentumField:
    """Canonical stress tensor ``T[j, k]`` sampled on a field grid."""

    T: np.ndarray
    spacing: tuple[float, ...]
    lower: tuple[float, ...] = ()

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        D = self.T.shape[0]
        if self.T.shape[1] != D or self.T.ndim != D + 2:
            raise ValueError("T must have shape (D, D, *grid)")
        self.spacing = tuple(float(h) for h in self.spacing)
        if len(self.spacing) != D:
            raise ValueError("one spacing per axis required")
        if not self.lower:
            self.lower = (0.0,) * D

    @property
    def D(self) -> int:
        return self.T.shape[0]

    def to_csv(self, target=None) -> str:
        D = self.D
        shape = self.T.shape[2:]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x_{k + 1}" for k in range(D)]
                   + [f"T_{j + 1}{k + 1}" for j in range(D) for k in range(D)])
        for idx in np.ndindex(shape):
            x = [lo + i * h for lo, i, h in zip(self.lower, idx, self.spacing)]
            vals = [self.T[(j, k) + idx] for j in range(D) for k in range(D)]
            w.writerow([_fmt(v) for v in x + vals])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


def energy_momentum_tensor(grid: FieldGrid, V: Potential) -> EnergyMomentumField:
    """``T_jk = -delta_jk L + d_j phi d_k phi`` with ``L = |d phi|^2 / 2 - V(phi)``.

    Sampled on interior nodes only, where every derivative is a central
    difference; the returned field is two nodes smaller per axis.
    """
    D = grid.D
    inner = _interior(D)
    g = grid.gradient()[(slice(None),) + inner]
    lag = 0.5 * np.sum(g ** 2, axis=0) - V(grid.phi[inner])
    T = np.einsum("j...,k...->jk...", g, g)
    for j in range(D):
        T[j, j] -= lag
    lower = tuple(lo + h for lo, h in zip(grid.lower, grid.spacing))
    return EnergyMomentumField(T, grid.spacing, lower)


def continuity_residual(T, h: Sequence[float] | float | None = None) -> float:
    """``max_j max_interior |sum_k d_k T_jk|`` by central differences."""
    if isinstance(T, EnergyMomentumField):
        spacing = T.spacing if h is None else h
        T = T.T
    else:
        T = np.asarray(T, dtype=float)
        spacing = h
    D = T.shape[0]
    if spacing is None:
        raise ValueError("grid spacing required")
    if np.isscalar(spacing):
        spacing = (float(spacing),) * D
    if any(m < 3 for m in T.shape[2:]):
        raise ValueError("continuity residual needs at least 3 nodes per axis")
    worst = 0.0
    for j in range(D):
        div = np.zeros(tuple(m - 2 for m in T.shape[2:]))
        for k, hk in enumerate(spacing):
            Tjk = T[j, k]
            div += (Tjk[_interior(D, 1, k)] - Tjk[_interior(D, -1, k)]) / (2 * hk)
        worst = max(worst, float(np.max(np.abs(div))))
    return worst


# ----------------------------------------------------------------- surfaces

@dataclass
class SurfaceMesh:
    """Structured mesh of points: shape (nu, nv, n) for surfaces, (m, n) for curves.

    ``momenta`` optionally holds multivector coefficients per node, shape
    ``points.shape[:-1] + (2^n,)``.
    """

    points: np.ndarray
    du: float = 1.0
    dv: float = 1.0
    momenta: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim not in (2, 3):
            raise ValueError("points must have shape (m, n) or (nu, nv, n)")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("mesh points must be finite")
        if min(self.points.shape[:-1]) < 5:
            raise ValueError("need at least 5 nodes per direction")
        if self.momenta is not None:
            self.momenta = np.asarray(self.momenta, dtype=float)
            if self.momenta.shape != self.points.shape[:-1] + (1 << self.n,):
                raise ValueError("momenta must hold 2^n coefficients per node")

    @property
    def n(self) -> int:
        return self.points.shape[-1]

    @property
    def D(self) -> int:
        return self.points.ndim - 1

    @classmethod
    def from_parametrization(cls, f: Callable[[float, float], Sequence[float]],
                             us: np.ndarray, vs: np.ndarray) -> "SurfaceMesh":
        pts = np.array([[f(u, v) for v in vs] for u in us], dtype=float)
        return cls(pts, float(us[1] - us[0]), float(vs[1] - vs[0]))

    def tangents(self) -> list[np.ndarray]:
        """Central-difference tangent vectors at nodes [1:-1] in each direction."""
        P = self.points
        if self.D == 1:
            return [(P[2:] - P[:-2]) / (2 * self.du)]
        tu = (P[2:, 1:-1] - P[:-2, 1:-1]) / (2 * self.du)
        tv = (P[1:-1, 2:] - P[1:-1, :-2]) / (2 * self.dv)
        return [tu, tv]

    def tangent_blade(self) -> np.ndarray:
        """Unit pseudoscalar I_gamma at nodes [1:-1] (coefficient arrays)."""
        ts = self.tangents()
        blade = vectors_to_coeffs(ts[0])
        for t in ts[1:]:
            blade = batch_product(blade, vectors_to_coeffs(t), "outer")
        norm = np.sqrt(np.sum(blade ** 2, axis=-1))
        bad = np.argwhere(~(norm > 1e-14 * (1 + np.max(norm))))
        if bad.size:
            idx = tuple(int(i) + 1 for i in bad[0])
            raise ValueError(f"degenerate tangent blade at node {idx}")
        return blade / norm[..., None]


class SpurResult(NamedTuple):
    values: np.ndarray  # |spur| at nodes [2:-2] in each direction
    max: float
    vectors: np.ndarray


def spur_residual(mesh: SurfaceMesh) -> SpurResult:
    """``|(I . d) . I|`` from central differences of the unit tangent blade.

    The derivative is taken only along the surface, through the reciprocal
    frame of the parameter tangents.  Nodes within two of the mesh edge are
    excluded, so every value uses central stencils only.
    """
    I = mesh.tangent_blade()
    ts = mesh.tangents()
    if mesh.D == 1:
        t = ts[0][1:-1]
        dI = (I[2:] - I[:-2]) / (2 * mesh.du)
        recip = t / np.sum(t * t, axis=-1, keepdims=True)
        frame_vecs, derivs, Ic = [recip], [dI], I[1:-1]
    else:
        tu, tv = ts[0][1:-1, 1:-1], ts[1][1:-1, 1:-1]
        dIu = (I[2:, 1:-1] - I[:-2, 1:-1]) / (2 * mesh.du)
        dIv = (I[1:-1, 2:] - I[1:-1, :-2]) / (2 * mesh.dv)
        g = np.stack([np.stack([np.sum(a * b, -1) for b in (tu, tv)], -1) for a in (tu, tv)], -2)
        ginv = np.linalg.inv(g)
        ru = ginv[..., 0, 0, None] * tu + ginv[..., 0, 1, None] * tv
        rv = ginv[..., 1, 0, None] * tu + ginv[..., 1, 1, None] * tv
        frame_vecs, derivs, Ic = [ru, rv], [dIu, dIv], I[1:-1, 1:-1]
    spur = 0.0
    for r, dI in zip(frame_vecs, derivs):
        contracted = batch_product(Ic, vectors_to_coeffs(r), "inner")
        # curves: I . r is a scalar, so the contraction is plain scaling
        spur = spur + batch_product(contracted, dI, "geometric" if mesh.D == 1 else "inner")
    values = np.sqrt(np.sum(spur ** 2, axis=-1))
    return SpurResult(values, float(np.max(values)), spur)


# ------------------------------------------------------------------ action

def motion_chain(motion) -> SimplexChain:
    """Simplicial chain through the samples of a curve or structured surface."""
    if isinstance(motion, MotionCurve):
        segs = np.stack([motion.q[:-1], motion.q[1:]], axis=1)
        return SimplexChain(segs)
    if isinstance(motion, SurfaceMesh) and motion.D == 2:
        P = motion.points
        tris = []
        for i in range(P.shape[0] - 1):
            for j in range(P.shape[1] - 1):
                tris.append([P[i, j], P[i + 1, j], P[i + 1, j + 1]])
                tris.append([P[i, j], P[i + 1, j + 1], P[i, j + 1]])
        return SimplexChain(np.array(tris))
    raise TypeError(f"cannot build a chain from {type(motion).__name__}")


def _simplex_momenta(motion) -> np.ndarray:
    if isinstance(motion, MotionCurve):
        return vectors_to_coeffs(0.5 * (motion.p[:-1] + motion.p[1:]))
    M = motion.momenta
    out = []
    for i in range(M.shape[0] - 1):
        for j in range(M.shape[1] - 1):
            out.append((M[i, j] + M[i + 1, j] + M[i + 1, j + 1]) / 3)
            out.append((M[i, j] + M[i + 1, j + 1] + M[i, j + 1]) / 3)
    return np.array(out)


def action_value(motion) -> float:
    """Directed integral of ``P . dGamma`` over the discretised motion.

    P at each simplex centroid is the mean of its vertex momenta.
    """
    if isinstance(motion, SurfaceMesh) and motion.momenta is None:
        raise ValueError("surface mesh carries no momenta")
    chain = motion_chain(motion)
    if isinstance(motion, MotionCurve):
        # D = 1 fast path: P . dGamma reduces to a dot product per segment
        pm = 0.5 * (motion.p[:-1] + motion.p[1:])
        return float(np.sum(np.einsum("ij,ij->i", pm, np.diff(motion.q, axis=0))))
    moms = _simplex_momenta(motion)
    counter = iter(range(len(chain)))

    def L(dG: Multivector, q: Multivector) -> float:
        return scalar_product(Multivector(dG.dim, moms[next(counter)]), dG)

    return directed_integral(L, chain).scalar_part
