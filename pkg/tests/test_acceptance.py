"""Acceptance criteria, one test each, printing a PASS/FAIL line per criterion."""

import csv
import json
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gamcal.cli import SCENARIOS, main
from gamcal.ga_calculus import (
    boundary_chain,
    directed_integral,
    fundamental_integrand,
    grid_chain,
    multivector_derivative,
)
from gamcal.ga_core import Multivector, grade_project, magnitude, reverse, scalar_product
from gamcal.hamilton_jacobi import conserved_quantity, induced_momentum, motion_from_hj, relativistic_particle
from gamcal.hamiltonian import Potential, SeparableH0, SplitFrame, dw_hamiltonian, mechanics_hamiltonian, string_hamiltonian
from gamcal.identities import run_suite
from gamcal.solver import (
    FieldGrid,
    MotionCurve,
    SurfaceMesh,
    action_value,
    constraint_residual,
    continuity_residual,
    dw_residuals,
    energy_momentum_tensor,
    solve_geodesic,
    solve_mechanics,
    solve_scalar_field,
    spur_residual,
)


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def orders(errs):
    errs = np.asarray(errs, dtype=float)
    return np.log2(errs[:-1] / errs[1:])


def test_criterion_1_identity_suite():
    results = run_suite(seed=42, cases=1000, dims=(3, 4, 5))
    worst = max(r.max_error for r in results)
    failed = [r.name for r in results if not r.passed]
    report(1, not failed and worst <= 1e-12,
           f"{len(results)} identities x 1000 cases in n=3,4,5, max relative error {worst:.2e}"
           + (f", failing {failed}" if failed else ""))


def test_criterion_2_multivector_derivative():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        P = grade_project(Multivector(4, rng.standard_normal(16)), 2)
        d = multivector_derivative(lambda q, X: scalar_product(reverse(X), X), [0, 0, 0, 0], P, 2, h=1e-5)
        worst = max(worst, float(np.max(np.abs((d - 2 * reverse(P)).coeffs))))
    report(2, worst <= 1e-5, f"100 grade-2 P in n=4, max |d|P|^2 - 2 rev(P)| = {worst:.2e}")


def field3(q):
    x, y, z = q.vector_part()
    return Multivector.vector([math.sin(x) * y, x * z + y * y, math.cos(x * y)]) + math.exp(0.3 * z)


def test_criterion_3_fundamental_theorem():
    def L(A, q):
        return A * field3(q)

    surfaces = {
        "flat square": lambda x, y: [x, y, 0.0],
        "graph surface": lambda x, y: [x, y, 0.3 * math.sin(2 * x) * math.cos(y)],
    }
    parts, worst = [], math.inf
    for name, embed in surfaces.items():
        errs = []
        for cells in (4, 8, 16):
            xs = np.linspace(0.0, 1.0, cells + 1)
            chain = grid_chain(xs, xs, embed)
            lhs = directed_integral(L, boundary_chain(chain))
            rhs = directed_integral(fundamental_integrand(L), chain)
            errs.append(magnitude(lhs - rhs))
        o = orders(errs)
        worst = min(worst, float(o.min()))
        parts.append(f"{name} orders {np.round(o, 3).tolist()}")
    report(3, worst >= 1.9, "; ".join(parts))


def test_criterion_4_oscillator():
    H = mechanics_hamiltonian(SeparableH0(Potential((0.0, 0.0, 0.5))), SplitFrame.mechanics(2))
    one = solve_mechanics(H, [0.0, 1.0], [0.0, 0.0], 2 * math.pi, 1e-3)
    ten = solve_mechanics(H, [0.0, 1.0], [0.0, 0.0], 20 * math.pi, 1e-3)
    x_err = abs(one.q[-1, 1] - 1.0)
    drift = float(np.max(np.abs(ten.energy - ten.energy[0])))
    resid = max(constraint_residual(H, one), constraint_residual(H, ten))
    report(4, x_err <= 1e-6 and drift <= 1e-8 and resid <= 1e-8,
           f"|x(2pi)-1| = {x_err:.2e}, energy drift over 10 periods {drift:.2e}, max H residual {resid:.2e}")


def test_criterion_5_scalar_field():
    V = Potential((0.0, 0.0, 0.5))
    H = dw_hamiltonian(V, SplitFrame.field(2))
    errs, hs, cont, relation = [], [], [], 0.0
    for N in (17, 33, 65, 129):
        grid = FieldGrid.dirichlet((0.0, 0.0), (math.pi, 1.0), (N, N), lambda x: math.sin(x[0]))
        out = solve_scalar_field(H, grid, tol=1e-10)
        errs.append(float(np.max(np.abs(out.phi - np.sin(out.coordinates()[..., 0])))))
        hs.append(out.spacing[0])
        cont.append(continuity_residual(energy_momentum_tensor(out, V)))
        relation = max(relation, dw_residuals(out, V).momentum_relation)
    C = errs[0] / hs[0] ** 2
    bounded = all(err <= 2 * C * h * h for err, h in zip(errs, hs))
    err_o, cont_o = orders(errs), orders(cont)
    ok = bounded and err_o.min() >= 1.9 and relation == 0.0 and cont_o.min() >= 1.9
    report(5, ok, f"error h^2 constant {C:.4f}, error orders {np.round(err_o, 3).tolist()}, "
                  f"momenta relation residual {relation:.1e}, continuity orders {np.round(cont_o, 3).tolist()}")


def test_criterion_6_string():
    rng = np.random.default_rng(6)
    tension = 2.0
    H = string_hamiltonian(tension, 1, 3)
    q0 = rng.standard_normal(3)
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    g = solve_geodesic(H, q0, v, 5.0, 0.01)
    d = g.q - g.q[0]
    collinear = float(np.max(np.linalg.norm(d - np.outer(d @ v, v), axis=1)))
    norm_err = float(np.max(np.abs(np.linalg.norm(g.p, axis=1) - tension)))
    length = float(np.sum(np.linalg.norm(np.diff(g.q, axis=0), axis=1)))
    action_err = abs(abs(action_value(g)) - tension * length)

    def grid(f, N, u, w):
        return SurfaceMesh.from_parametrization(f, np.linspace(*u, N), np.linspace(*w, N))

    plane = spur_residual(grid(lambda a, b: (a, b, 0.3 * a - 0.2 * b), 21, (0, 1), (0, 2))).max
    cat = [spur_residual(grid(lambda a, b: (math.cosh(b) * math.cos(a), math.cosh(b) * math.sin(a), b),
                              N, (0, 1), (-0.5, 0.5))).max for N in (11, 21, 41)]
    R = 2.0
    sph = spur_residual(grid(lambda a, b: (R * math.sin(a) * math.cos(b), R * math.sin(a) * math.sin(b),
                                           R * math.cos(a)), 31, (0.5, 1.5), (0.0, 1.0)))
    sph_err = float(np.max(np.abs(sph.values - 2 / R)) / (2 / R))
    ok = (collinear <= 1e-10 and norm_err <= 1e-10 and action_err <= 1e-8 and plane <= 1e-10
          and orders(cat).min() >= 1.9 and sph_err <= 0.05)
    report(6, ok, f"collinearity {collinear:.1e}, ||P|-L| {norm_err:.1e}, |action - L*length| {action_err:.1e}, "
                  f"plane spur {plane:.1e}, catenoid spur {cat[-1]:.1e} with orders {np.round(orders(cat), 3).tolist()}, "
                  f"sphere relative error {sph_err:.2e}")


def test_criterion_7_hamilton_jacobi():
    rng = np.random.default_rng(7)
    tension = 2.0
    q0 = rng.standard_normal(4)
    S = relativistic_particle(tension, q0)
    norm_err = max(abs(magnitude(induced_momentum(S, rng.standard_normal(4), 1, h=1e-5)) - tension)
                   for _ in range(1000))

    H = string_hamiltonian(tension, 1, 4)
    spread = 0.0
    for _ in range(5):
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        g = solve_geodesic(H, q0, v, 3.0, 0.05)
        spread = max(spread, max(conserved_quantity(S, g, k)[1] for k in range(4)))
    th = np.linspace(0.0, 1.5, 60)
    arc = MotionCurve(th, np.c_[np.sin(th), 1 - np.cos(th), 0 * th], np.c_[np.cos(th), np.sin(th), 0 * th])
    arc_spread = conserved_quantity(relativistic_particle(1.0, [0.0, 0.0, 0.0]), arc, 0)[1]

    v = rng.standard_normal(4)
    v /= np.linalg.norm(v)
    m = motion_from_hj(q0, v, 2.5, 0.01, tension=tension)
    g = solve_geodesic(H, q0, v, 2.5, 0.01)
    match = float(np.max(np.linalg.norm(m.q - g.q, axis=1)))
    ok = norm_err <= 1e-6 and spread <= 1e-8 and arc_spread >= 0.01 and match <= 1e-10
    report(7, ok, f"||dS|-L| over 1000 points {norm_err:.1e}, geodesic spread {spread:.1e}, "
                  f"arc spread {arc_spread:.3f}, hj motion vs geodesic {match:.1e}")


def _corrupt(src, dst, column):
    rows = list(csv.reader(src.open()))
    k = rows[0].index(column)
    for row in rows[1:]:
        row[k] = repr(float(row[k]) + 0.05)
    with dst.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def test_criterion_8_cli(tmp_path, capsys):
    cfg = tmp_path / "selftest.json"
    cfg.write_text(json.dumps({"numeric": {"cases": 100}}))
    problems = []
    for scenario in SCENARIOS:
        extra = ["--config", str(cfg)] if scenario == "ga-selftest" else []
        dirs = [tmp_path / scenario / tag for tag in ("a", "b")]
        codes = [main([scenario, "--seed", "42", "--out", str(d), *extra]) for d in dirs]
        if codes != [0, 0]:
            problems.append(f"{scenario} exit codes {codes}")
            continue
        a, b = dirs
        for f in sorted(a.iterdir()):
            if f.read_bytes() != (b / f.name).read_bytes():
                problems.append(f"{scenario}/{f.name} differs")
        for f in sorted(a.glob("*.csv")) + sorted(a.glob("identities.json")):
            if main(["verify", "--config", str(a / "config.json"), "--data", str(f)]) != 0:
                problems.append(f"verify failed on {scenario}/{f.name}")
    caught = 0
    for scenario, name, column in [("mechanics", "motion.csv", "p_2"), ("geodesic", "motion.csv", "p_1"),
                                   ("scalar-field", "field.csv", "pi_1")]:
        bad = tmp_path / f"bad-{scenario}.csv"
        _corrupt(tmp_path / scenario / "a" / name, bad, column)
        if main(["verify", "--config", str(tmp_path / scenario / "a" / "config.json"), "--data", str(bad)]) == 1:
            caught += 1
        else:
            problems.append(f"corrupted {scenario} momentum not detected")
    capsys.readouterr()
    report(8, not problems, f"{len(SCENARIOS)} scenarios byte-identical and verified, "
                            f"{caught}/3 corrupted momentum columns rejected"
                            + (f"; problems: {problems}" if problems else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
