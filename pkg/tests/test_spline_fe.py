import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confined_elastica.spline_fe import (
    DiscreteCurve,
    Mesh,
    arclength_violation,
    assemble,
    bending_energy,
    element_mass,
    element_stiffness,
    evaluate,
    interpolate,
    lumped_product,
)


def hermite_oracle(h):
    """Hermite basis on [0, h] as power-series coefficients, solved from the
    interpolation conditions (independent of the closed-form matrices)."""
    V = np.array([
        [1, 0, 0, 0],          # value at 0
        [0, 1, 0, 0],          # derivative at 0
        [1, h, h**2, h**3],    # value at h
        [0, 1, 2 * h, 3 * h**2],
    ])
    return [np.polynomial.Polynomial(c) for c in np.linalg.solve(V, np.eye(4)).T]


def quadrature_matrix(h, deriv, n_points):
    basis = [b.deriv(deriv) for b in hermite_oracle(h)]
    x, w = np.polynomial.legendre.leggauss(n_points)
    x = 0.5 * h * (x + 1)
    w = 0.5 * h * w
    vals = np.array([b(x) for b in basis])
    return (vals * w) @ vals.T


def rel_err(A, B):
    return np.max(np.abs(A - B)) / np.max(np.abs(B))


def test_element_stiffness_unit_length():
    expected = np.array([[12, 6, -12, 6], [6, 4, -6, 2], [-12, -6, 12, -6], [6, 2, -6, 4]])
    np.testing.assert_allclose(element_stiffness(1.0), expected, rtol=0, atol=1e-14)
    assert rel_err(element_stiffness(1.0), quadrature_matrix(1.0, 2, 2)) < 1e-13


def test_element_mass_unit_length():
    expected = np.array([[156, 22, 54, -13], [22, 4, 13, -3],
                         [54, 13, 156, -22], [-13, -3, -22, 4]]) / 420
    np.testing.assert_allclose(element_mass(1.0), expected, rtol=0, atol=1e-15)
    assert rel_err(element_mass(1.0), quadrature_matrix(1.0, 0, 4)) < 1e-13


def test_element_matrices_match_quadrature_for_random_lengths(rng):
    for h in rng.uniform(0.05, 2.0, size=100):
        assert rel_err(element_stiffness(h), quadrature_matrix(h, 2, 2)) < 1e-13
        assert rel_err(element_mass(h), quadrature_matrix(h, 0, 4)) < 1e-13


def test_stiffness_scaling():
    K1, K2 = element_stiffness(1.0), element_stiffness(0.5)
    D = np.diag([1.0, 0.5, 1.0, 0.5])
    # K(h) = h^-3 D_h K(1) D_h with D_h scaling derivative DOFs by h
    np.testing.assert_allclose(K2, 0.5**-3 * D @ K1 @ D, rtol=1e-14)
    assert rel_err(K2, quadrature_matrix(0.5, 2, 2)) < 1e-13


@pytest.mark.parametrize("h", [0.1, 1.0, 3.0])
def test_stiffness_affine_null_space(h):
    K = element_stiffness(h)
    a, b = 0.7, -1.3
    affine = np.array([a, b, a + b * h, b])
    np.testing.assert_allclose(K @ affine, 0.0, atol=1e-12 / h**3)
    eig = np.linalg.eigvalsh(K)
    assert np.sum(np.abs(eig) < 1e-10 * eig.max()) == 2


def test_mass_constant_function_and_spd(rng):
    for h in rng.uniform(1e-3, 1.0, size=20):
        M = element_mass(h)
        one = np.array([1.0, 0.0, 1.0, 0.0])
        assert one @ M @ one == pytest.approx(h, rel=1e-14)
        assert np.linalg.eigvalsh(M).min() > 0


def test_element_matrices_reject_bad_length():
    with pytest.raises(ValueError):
        element_stiffness(0.0)
    with pytest.raises(ValueError):
        element_mass(-1.0)


def test_lumped_weights_open_uniform():
    asm = assemble(Mesh.uniform(2, 2.0))
    np.testing.assert_allclose(asm.beta, [0.5, 1.0, 0.5])
    assert asm.beta.sum() == pytest.approx(2.0)


def test_global_matrices_properties(rng):
    nodes = np.cumsum(np.concatenate([[0.0], rng.uniform(0.1, 0.5, 20)]))
    for closed in (False, True):
        mesh = Mesh(nodes, closed)
        asm = assemble(mesh)
        K, M = asm.K.toarray(), asm.M.toarray()
        np.testing.assert_allclose(K, K.T, atol=1e-12)
        assert np.linalg.eigvalsh(K).min() > -1e-9 * np.abs(K).max()
        assert np.linalg.eigvalsh(M).min() > 0
        assert np.all(asm.beta > 0)
        assert asm.beta.sum() == pytest.approx(mesh.length, rel=1e-14)
        if closed:
            const = np.tile([1.0, 0.0], mesh.n_nodes)
            np.testing.assert_allclose(K @ const, 0.0, atol=1e-10)
        else:
            x = mesh.nodes
            affine = np.ravel(np.stack([2 + 3 * x, np.full_like(x, 3.0)], axis=1))
            np.testing.assert_allclose(K @ affine, 0.0, atol=1e-9)


def test_3d_matrices_are_componentwise():
    asm = assemble(Mesh.uniform(5, 1.0, closed=True))
    K3 = asm.K3.toarray()
    for c in range(3):
        np.testing.assert_allclose(K3[c::3, c::3], asm.K.toarray())
    assert np.count_nonzero(K3[0::3, 1::3]) == 0


def circle_curve(n, r=1.0, closed=True):
    L = 2 * np.pi * r
    t = np.arange(n) / n * 2 * np.pi
    pts = r * np.stack([np.cos(t), np.sin(t), 0 * t], axis=1)
    tan = np.stack([-np.sin(t), np.cos(t), 0 * t], axis=1)
    return interpolate(Mesh.uniform(n, L, closed), pts, tan)


def test_circle_bending_energy():
    kappa, r = 10.0, 1.7
    curve = circle_curve(100, r)
    L = 2 * np.pi * r
    exact = kappa * L / (2 * r**2)
    assert exact == pytest.approx(2 * kappa * np.pi**2 / L)
    assert bending_energy(curve, kappa) == pytest.approx(exact, rel=0.01)


def test_bending_energy_converges_at_second_order():
    errors = []
    for n in (10, 20, 40, 80):
        errors.append(abs(bending_energy(circle_curve(n), 1.0) - np.pi))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert ratios[-1] >= 4.0 * 0.95


def test_evaluate_interpolates_nodes(rng):
    curve = circle_curve(12)
    x = curve.mesh.nodes[:-1]
    np.testing.assert_allclose(evaluate(curve, x, 0), curve.positions, atol=1e-15)
    np.testing.assert_allclose(evaluate(curve, x, 1), curve.tangents, atol=1e-14)


def test_evaluate_reproduces_cubic(rng):
    nodes = np.cumsum(np.concatenate([[0.0], rng.uniform(0.2, 1.0, 9)]))
    mesh = Mesh(nodes)
    coef = rng.standard_normal((4, 3))

    def poly(x, order):
        x = np.asarray(x)[..., None]
        if order == 0:
            return coef[0] + coef[1] * x + coef[2] * x**2 + coef[3] * x**3
        if order == 1:
            return coef[1] + 2 * coef[2] * x + 3 * coef[3] * x**2
        return 2 * coef[2] + 6 * coef[3] * x

    curve = DiscreteCurve(mesh, poly(nodes, 0), poly(nodes, 1))
    x = rng.uniform(nodes[0], nodes[-1], 100)
    for order in (0, 1, 2):
        np.testing.assert_allclose(evaluate(curve, x, order), poly(x, order), rtol=1e-10, atol=1e-10)


def test_first_derivative_continuous_at_nodes(rng):
    mesh = Mesh.uniform(6, 3.0)
    curve = DiscreteCurve(mesh, rng.standard_normal((7, 3)), rng.standard_normal((7, 3)))
    for x in mesh.nodes[1:-1]:
        left = evaluate(curve, x - 1e-13, 1)
        right = evaluate(curve, x, 1)
        np.testing.assert_allclose(left, right, atol=1e-9)


def test_evaluate_errors():
    curve = DiscreteCurve(Mesh.uniform(4, 1.0), np.zeros((5, 3)), np.ones((5, 3)))
    with pytest.raises(ValueError):
        evaluate(curve, 1.5)
    with pytest.raises(ValueError):
        evaluate(curve, 0.5, order=3)


def test_closed_evaluation_wraps():
    curve = circle_curve(16)
    L = curve.mesh.length
    np.testing.assert_allclose(evaluate(curve, 0.3 + L), evaluate(curve, 0.3), atol=1e-14)


def test_interpolate_normalizes_tangents():
    mesh = Mesh.uniform(100, 2 * np.pi, closed=True)
    t = mesh.nodes[:-1]
    pts = np.stack([np.cos(t), np.sin(t), 0 * t], axis=1)
    tan = 3.0 * np.stack([-np.sin(t), np.cos(t), 0 * t], axis=1)
    curve = interpolate(mesh, pts, tan)
    assert arclength_violation(curve) < 1e-15
    unit = interpolate(mesh, pts, tan / 3.0)
    np.testing.assert_allclose(unit.tangents, tan / 3.0, rtol=0, atol=4e-16)
    tan[4] = 0
    with pytest.raises(ValueError, match="node 4"):
        interpolate(mesh, pts, tan)


def test_arclength_violation_examples():
    curve = circle_curve(20)
    assert arclength_violation(curve) == pytest.approx(0.0, abs=1e-15)
    curve.tangents[3] *= 1.1
    assert arclength_violation(curve) == pytest.approx(0.21)


def test_lumped_product_examples(rng):
    mesh = Mesh.uniform(10, 2.0)
    e = np.tile([0.0, 0.0, 1.0], (11, 1))
    assert lumped_product(mesh, e, e) == pytest.approx(2.0)
    f = np.tile([1.0, 0.0, 0.0], (11, 1))
    assert lumped_product(mesh, f, e) == 0.0
    with pytest.raises(ValueError):
        lumped_product(mesh, f, e[:-1])


def test_lumped_product_matches_trapezoid(rng):
    nodes = np.cumsum(np.concatenate([[0.0], rng.uniform(0.1, 1.0, 15)]))
    mesh = Mesh(nodes)
    f = rng.standard_normal((16, 3))
    g = rng.standard_normal((16, 3))
    fg = np.einsum("ij,ij->i", f, g)
    oracle = np.sum(0.5 * (fg[1:] + fg[:-1]) * np.diff(nodes))
    assert lumped_product(mesh, f, g) == pytest.approx(oracle, rel=1e-12, abs=1e-12)


def test_mesh_validation():
    with pytest.raises(ValueError):
        Mesh([0.0, 1.0])
    with pytest.raises(ValueError):
        Mesh([0.0, 1.0, 1.0])
    mesh = Mesh.uniform(5, 1.0, closed=True)
    assert mesh.n_nodes == 5 and mesh.n_elements == 5
    assert Mesh.uniform(5, 1.0).n_nodes == 6


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 40), st.floats(0.1, 10.0), st.booleans())
def test_weights_sum_to_length(n, length, closed):
    asm = assemble(Mesh.uniform(n, length, closed))
    assert asm.beta.sum() == pytest.approx(length, rel=1e-12)


@pytest.mark.parametrize("closed", [True, False])
def test_bending_energy_matches_stiffness_form(rng, closed):
    nodes = np.cumsum(np.concatenate([[0.0], rng.uniform(0.2, 1.0, 9)]))
    mesh = Mesh(nodes, closed)
    n = mesh.n_nodes
    curve = DiscreteCurve(mesh, rng.standard_normal((n, 3)), rng.standard_normal((n, 3)))
    K = assemble(mesh).K
    u = np.stack([curve.positions, curve.tangents], axis=1).reshape(2 * n, 3)
    expected = 0.5 * 3.0 * np.sum(u * (K @ u))
    assert bending_energy(curve, 3.0) == pytest.approx(expected, rel=1e-12)
