import numpy as np
import pytest

from confined_elastica.curve_model import (
    AnalyticCurve,
    BoundaryCondition,
    CurveError,
    dof_map,
    generate,
)
from confined_elastica.spline_fe import Mesh, arclength_violation, evaluate


@pytest.mark.parametrize("n", [8, 37, 100])
def test_circle_nodes_on_circle(n):
    r = 2.5
    curve = generate(AnalyticCurve("circle", {"r": r}, 2 * np.pi * r), n)
    np.testing.assert_allclose(np.linalg.norm(curve.tangents, axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(curve.positions, axis=1), r, rtol=1e-12)
    assert curve.mesh.closed and curve.mesh.n_nodes == n


def test_target_length_rescales():
    curve = generate(AnalyticCurve("circle", {"r": 1.0}, 10.0), 50)
    np.testing.assert_allclose(np.linalg.norm(curve.positions, axis=1), 10 / (2 * np.pi), rtol=1e-12)
    assert curve.mesh.length == pytest.approx(10.0)


def _polygon_length(p):
    return np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1))


def test_trefoil_length(trefoil):
    x = np.linspace(0.0, 31.9, 100_001)[:-1]
    assert _polygon_length(evaluate(trefoil, x)) == pytest.approx(31.9, rel=1e-3)
    assert arclength_violation(trefoil) == pytest.approx(0.0, abs=1e-15)
    # nodal chords lose h^2 curvature^2 / 24; 0.1% is reached at h ~ 0.1
    fine = generate(AnalyticCurve("torus_knot", {"p": 2, "q": 3}, 31.9), 320)
    assert _polygon_length(fine.positions) == pytest.approx(31.9, rel=1e-3)


def _rotation_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _same_point_set(a, b, tol):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return np.max(np.min(d, axis=1)) < tol


def test_perturbed_circle_has_rotational_symmetry():
    curve = generate(AnalyticCurve("perturbed_circle", {"r": 1.0, "nu": 5, "amplitude": 0.3}, 7.0), 100)
    rotated = curve.positions @ _rotation_z(2 * np.pi / 5).T
    assert _same_point_set(rotated, curve.positions, 1e-10)
    assert not _same_point_set(curve.positions @ _rotation_z(2 * np.pi / 4).T, curve.positions, 1e-3)


def test_covered_perturbed_circle_symmetry():
    # z = A sin(5 t / 3) over three turns is invariant under rotation by 2 pi / 5
    curve = generate(AnalyticCurve("perturbed_circle", {"nu": 5, "covers": 3, "amplitude": 0.2}, 20.0), 150)
    rotated = curve.positions @ _rotation_z(2 * np.pi / 5).T
    assert _same_point_set(rotated, curve.positions, 1e-10)


@pytest.mark.parametrize("family, params", [
    ("torus_knot", {"p": 2, "q": 3}),
    ("torus_knot", {"p": 3, "q": 5}),
    ("perturbed_circle", {"nu": 3, "amplitude": 0.5}),
])
def test_nodes_equispaced_in_arclength(family, params):
    curve = generate(AnalyticCurve(family, params, 20.0), 200)
    p = curve.positions
    chords = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    assert np.max(np.abs(chords - chords.mean())) < 0.01 * chords.mean()
    assert arclength_violation(curve) == pytest.approx(0.0, abs=1e-15)


def test_line_family_is_open():
    curve = generate(AnalyticCurve("line", {"direction": [0, 0, 2]}, 3.0), 10)
    assert not curve.mesh.closed and curve.mesh.n_nodes == 11
    np.testing.assert_allclose(curve.positions[-1], [0, 0, 3.0], atol=1e-12)
    np.testing.assert_allclose(curve.tangents, np.tile([0, 0, 1.0], (11, 1)))


@pytest.mark.parametrize("family, params", [
    ("circle", {"r": 0.0}),
    ("torus_knot", {"p": 0, "q": 0}),
    ("torus_knot", {"p": 2, "q": 4}),
    ("perturbed_circle", {"nu": 0}),
    ("spiral", {}),
])
def test_degenerate_parameters(family, params):
    with pytest.raises(CurveError):
        generate(AnalyticCurve(family, params, 1.0), 20)


def test_too_few_elements():
    with pytest.raises(CurveError):
        generate(AnalyticCurve("circle", {}, 1.0), 7)


def test_dof_map_counts():
    n = 12
    closed = Mesh.uniform(n, 1.0, closed=True)
    open_ = Mesh.uniform(n, 1.0)
    assert dof_map(closed, BoundaryCondition("periodic")).n_free == 6 * n
    curve = generate(AnalyticCurve("line", {}, 1.0), n)
    assert dof_map(open_, BoundaryCondition("clamped"), curve).n_free == 6 * (n + 1) - 12
    assert dof_map(open_, BoundaryCondition("free")).n_free == 6 * (n + 1)


def test_dof_map_roundtrip(rng):
    curve = generate(AnalyticCurve("line", {}, 2.0), 10)
    dm = dof_map(curve.mesh, BoundaryCondition("clamped"), curve)
    u = curve.dofs()
    np.testing.assert_array_equal(dm.extend(dm.restrict(u)), u)
    w = rng.standard_normal(dm.n_free)
    np.testing.assert_array_equal(dm.restrict(dm.extend(w)), w)
    inv = dm.inverse()
    np.testing.assert_array_equal(inv[dm.free], np.arange(dm.n_free))
    assert np.all(inv[dm.fixed] == -1)
    np.testing.assert_array_equal(dm.constrained_nodes, np.arange(1, 10))


def test_dof_map_incompatible():
    with pytest.raises(CurveError):
        dof_map(Mesh.uniform(10, 1.0), BoundaryCondition("periodic"))
    with pytest.raises(CurveError):
        dof_map(Mesh.uniform(10, 1.0, closed=True), BoundaryCondition("free"))
    with pytest.raises(CurveError):
        BoundaryCondition("sliding")
    with pytest.raises(CurveError):
        BoundaryCondition("clamped", start=((0, 0, 0), (2, 0, 0)))
