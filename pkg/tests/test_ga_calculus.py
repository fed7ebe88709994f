import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamcal.ga_calculus import (
    SimplexChain,
    adjoint,
    boundary_chain,
    curl,
    directed_integral,
    directional_derivative,
    disk_chain,
    divergence,
    fundamental_integrand,
    grid_chain,
    jacobian,
    multivector_derivative,
    outermorphism,
    polyline_chain,
    pushforward,
    square_chain,
    vector_derivative,
)
from gamcal.ga_core import Multivector, e, grade_project, magnitude, reverse, scalar_product, wedge


def quadratic(q):
    x, y, z = q.vector_part()
    return x * x + 2 * y * z


def position(q):
    return q


def test_gradient_of_quadratic():
    g = vector_derivative(quadratic, [1.0, 2.0, 3.0])
    assert g.allclose(Multivector.vector([2.0, 6.0, 4.0]), atol=1e-8)


def test_divergence_and_curl_of_position():
    q = [0.3, -1.0, 2.0, 0.5]
    assert divergence(position, q).scalar_part == pytest.approx(4.0, abs=1e-8)
    assert curl(position, q).allclose(Multivector(4), atol=1e-8)


def test_vector_derivative_splits_into_divergence_and_curl():
    def F(q):
        x, y, z = q.vector_part()
        return Multivector.vector([y * z, x * x, math.sin(y)])

    q = [0.4, 0.7, -0.2]
    total = vector_derivative(F, q)
    assert total.allclose(divergence(F, q) + curl(F, q), atol=1e-12)


def test_curl_of_gradient_vanishes():
    def grad(q):
        x, y, z = q.vector_part()
        return Multivector.vector([y * z, x * z, x * y])

    assert magnitude(curl(grad, [0.5, 1.5, -0.3])) < 1e-8


def test_directional_derivative_is_central_difference():
    d = directional_derivative(lambda q: q.vector_part()[0] ** 3, [1.0, 0.0], [1.0, 0.0], h=1e-3)
    # central difference of x^3 has error exactly h^2
    assert d.scalar_part == pytest.approx(3.0 + 1e-6, abs=1e-12)


def test_bad_step_rejected():
    with pytest.raises(ValueError):
        vector_derivative(quadratic, [1.0, 2.0, 3.0], h=0.0)


def test_non_finite_function_rejected():
    with pytest.raises(ValueError):
        vector_derivative(lambda q: math.inf, [0.0, 0.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_multivector_derivative_of_squared_magnitude(seed):
    rng = np.random.default_rng(seed)
    P = grade_project(Multivector(4, rng.standard_normal(16)), 2)

    def H(q, P):
        return scalar_product(reverse(P), P)

    d = multivector_derivative(H, [0, 0, 0, 0], P, 2)
    assert d.allclose(2 * reverse(P), atol=1e-5)


def test_multivector_derivative_of_linear_form():
    C = 2 * e(3, 1, 2) - e(3, 2, 3)
    d = multivector_derivative(lambda q, P: scalar_product(P, C), [0, 0, 0], 0.5 * e(3, 1, 3), 2)
    assert d.allclose(C, atol=1e-8)


def test_multivector_derivative_rejects_mixed_grade():
    with pytest.raises(ValueError):
        multivector_derivative(lambda q, P: 0.0, [0, 0, 0], e(3, 1) + e(3, 1, 2), 1)


def test_pushforward_of_linear_map_is_exact():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((3, 3))

    def f(q):
        return Multivector.vector(M @ q.vector_part())

    assert np.allclose(jacobian(f, [0.1, 0.2, 0.3]), M, atol=1e-8)
    A = wedge([e(3, 1), e(3, 2)])
    expect = wedge([Multivector.vector(M[:, 0]), Multivector.vector(M[:, 1])])
    assert pushforward(f, [0, 0, 0], A).allclose(expect, atol=1e-8)
    # pseudoscalar scales by the determinant
    I = e(3, 1, 2, 3)
    assert pushforward(f, [0, 0, 0], I).allclose(np.linalg.det(M) * I, atol=1e-8)
    assert adjoint(f, [0, 0, 0], e(3, 1)).allclose(Multivector.vector(M[0]), atol=1e-8)


def test_outermorphism_shape_checked():
    with pytest.raises(ValueError):
        outermorphism(np.eye(2), e(3, 1))


def test_simplex_volume_elements():
    tri = SimplexChain(np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], dtype=float))
    assert tri.volume_elements()[0] == 0.5 * e(3, 1, 2)
    seg = polyline_chain(np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert seg.volume_elements()[0] == Multivector.vector([3.0, 4.0])


def test_degenerate_simplex_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        SimplexChain(np.array([[[0, 0], [1, 1], [2, 2]]], dtype=float))


def test_chain_json_round_trip():
    chain = square_chain(2)
    back = SimplexChain.from_json(chain.to_json())
    assert np.array_equal(back.vertices, chain.vertices)
    payload = json.loads(chain.to_json())
    assert payload["dim"] == 2 and len(payload["simplices"]) == 8
    with pytest.raises(ValueError):
        SimplexChain.from_json(json.dumps({"dim": 3, "simplices": [[[0, 0], [1, 0], [0, 1]]]}))


def test_square_area_and_boundary_length():
    chain = square_chain(4, 0.0, 2.0)
    area = directed_integral(lambda dG, q: dG, chain)
    assert area.allclose(4.0 * e(2, 1, 2), atol=1e-12)
    rim = boundary_chain(chain)
    assert len(rim) == 16
    length = sum(magnitude(v) for v in rim.volume_elements())
    assert length == pytest.approx(8.0)
    # a closed curve has zero vector length
    assert directed_integral(lambda dG, q: dG, rim).allclose(Multivector(2), atol=1e-12)


def test_boundary_of_boundary_is_empty():
    assert len(boundary_chain(boundary_chain(disk_chain(3)))) == 0


def test_inconsistent_orientation_rejected():
    tri = [[0, 0], [1, 0], [0, 1]]
    with pytest.raises(ValueError, match="orientation"):
        boundary_chain(SimplexChain(np.array([tri, tri], dtype=float)))


def test_disk_area_converges():
    errs = []
    for rings in (4, 8, 16):
        area = directed_integral(lambda dG, q: dG, disk_chain(rings)).coeffs[3]
        errs.append(abs(area - math.pi))
    assert errs[0] > 3 * errs[1] > 9 * errs[2]


def test_enclosed_area_from_boundary():
    # half the loop integral of q ^ dq is the enclosed oriented area
    rim = boundary_chain(disk_chain(12, 1.5))
    val = directed_integral(lambda dG, q: 0.5 * (q ^ dG), rim)
    assert abs(val.coeffs[3]) == pytest.approx(math.pi * 1.5 ** 2, rel=1e-2)


def field3(q):
    x, y, z = q.vector_part()
    return Multivector.vector([math.sin(x) * y, x * z + y * y, math.cos(x * y)]) + math.exp(0.3 * z)


def test_fundamental_theorem_converges_on_graph_surface():
    def L(A, q):
        return A * field3(q)

    errs = []
    for cells in (4, 8):
        xs = np.linspace(0, 1, cells + 1)
        chain = grid_chain(xs, xs, lambda x, y: [x, y, 0.3 * math.sin(2 * x) * math.cos(y)])
        lhs = directed_integral(L, boundary_chain(chain))
        rhs = directed_integral(fundamental_integrand(L), chain)
        errs.append(magnitude(lhs - rhs))
    assert math.log2(errs[0] / errs[1]) > 1.8


def test_fundamental_theorem_for_curves():
    # the 1-chain boundary pairs endpoint values with signs
    pts = np.array([[0.0, 0.0], [0.5, 0.2], [1.0, 1.0]])
    f = lambda dG, q: dG.scalar_part * (q.vector_part()[0] ** 2)  # noqa: E731
    rim = boundary_chain(polyline_chain(pts))
    assert len(rim) == 2
    total = directed_integral(f, rim).scalar_part
    assert total == pytest.approx(1.0)
