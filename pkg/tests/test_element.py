"""Reference bases, dual bases, quadrature and local matrices."""

from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import composite_rule
from rdloc.approx import dual_eval
from rdloc.element import (DualBasis, assemble_local, lattice, physical_nodes, reference_basis,
                           reference_mass, triangle_rule)
from rdloc.errors import DegenerateGeometryError
from rdloc.targets import AnalyticTarget, polynomial_target

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
degrees = st.integers(1, 3)


@st.composite
def triangles(draw):
    pts = np.array(draw(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
                                 min_size=3, max_size=3)))
    d = np.column_stack([pts[1] - pts[0], pts[2] - pts[0]])
    area = 0.5 * np.linalg.det(d)
    scale = np.ptp(pts, axis=0).max()
    if abs(area) < 1e-2 * max(scale, 1e-3) ** 2:
        pts = REF * draw(st.floats(0.1, 3)) + pts[0]
    elif area < 0:
        pts = pts[[0, 2, 1]]
    return pts


@pytest.mark.parametrize("degree", range(1, 12))
def test_quadrature_matches_monomial_moments(degree) -> None:
    rule = triangle_rule(degree)
    assert rule.degree >= degree
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            got = rule.weights @ (rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            assert abs(got - exact) <= 1e-13 * exact


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_basis_is_nodal_and_sums_to_one(degree) -> None:
    basis = reference_basis(degree)
    assert len(basis) == (degree + 1) * (degree + 2) // 2
    assert np.allclose(basis.eval(basis.nodes), np.eye(len(basis)), atol=1e-13)
    pts = np.random.default_rng(degree).dirichlet([1, 1, 1], 50)[:, 1:]
    assert np.allclose(basis.eval(pts).sum(axis=1), 1.0, atol=1e-13)
    assert np.allclose(basis.grad(pts).sum(axis=1), 0.0, atol=1e-12)


def test_node_classification_and_order() -> None:
    assert lattice(1) == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    kinds = reference_basis(3).kinds
    assert kinds.count("vertex") == 3 and kinds.count("edge") == 6 and kinds.count("interior") == 1
    assert reference_basis(2).kinds.count("interior") == 0


def test_p1_reference_mass() -> None:
    m = assemble_local(REF, 1).mass
    expected = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    assert np.allclose(m, expected, atol=1e-16)
    assert np.allclose(reference_mass(1), expected, atol=1e-16)


@settings(max_examples=40, deadline=None)
@given(triangles(), degrees)
def test_local_matrix_invariants(tri, degree) -> None:
    lm = assemble_local(tri, degree)
    area = 0.5 * abs(np.linalg.det(np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])))
    assert np.allclose(lm.mass, lm.mass.T) and np.allclose(lm.stiffness, lm.stiffness.T)
    assert np.linalg.eigvalsh(lm.mass).min() > 0
    scale = np.abs(lm.stiffness).max()
    assert np.abs(lm.stiffness @ np.ones(len(lm.mass))).max() <= 1e-12 * scale
    # kernel is exactly the constants
    assert np.sort(np.linalg.eigvalsh(lm.stiffness))[1] > 1e-10 * scale
    assert abs(lm.mass.sum() - area) <= 1e-12 * area
    row = lm.mass.sum(axis=1)
    basis = reference_basis(degree)
    rule = triangle_rule(degree + 2)
    assert np.allclose(row, 2 * area * rule.weights @ basis.eval(rule.points), rtol=1e-12)
    # a second, higher rule gives the same matrices
    hi = assemble_local(tri, degree, quad_degree=2 * degree + 8)
    assert np.allclose(hi.mass, lm.mass, rtol=0, atol=1e-13 * np.abs(lm.mass).max())
    assert np.allclose(hi.stiffness, lm.stiffness, rtol=0, atol=1e-13 * scale)
    # edge mass of a constant is the edge length
    for i in range(3):
        assert abs(lm.face_mass(i).sum() - lm.edge_lengths[i]) <= 1e-12 * lm.edge_lengths[i]


@settings(max_examples=40, deadline=None)
@given(triangles(), degrees)
def test_dual_basis_biorthogonal_and_scaling(tri, degree) -> None:
    lm = assemble_local(tri, degree)
    dual = DualBasis(tri, degree)
    assert np.allclose(dual.matrix @ lm.mass, np.eye(len(lm.mass)), atol=1e-12)
    ratio = lm.area / 0.5
    ref_m = reference_mass(degree)
    # ||phi_z||_K = (|K|/|K_ref|)^(1/2) ||phi_ref||, ||psi_z||_K = (|K_ref|/|K|)^(1/2) ||psi_ref||
    phi_norm = np.sqrt(np.diag(lm.mass))
    assert np.allclose(phi_norm, np.sqrt(ratio * np.diag(ref_m)), rtol=1e-12)
    psi_ref = np.linalg.inv(ref_m)
    psi_norm = np.sqrt(np.einsum("zi,ij,zj->z", dual.matrix, lm.mass, dual.matrix))
    assert np.allclose(psi_norm, np.sqrt(np.diag(psi_ref @ ref_m @ psi_ref) / ratio), rtol=1e-12)


def test_degenerate_triangle_rejected() -> None:
    with pytest.raises(DegenerateGeometryError):
        assemble_local(np.array([[0, 0], [1, 0], [2, 1e-15]]), 1)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_dual_eval_reproduces_constants_and_polynomials(degree) -> None:
    tri = np.array([[0.2, -0.1], [1.4, 0.3], [0.5, 1.1]])
    one = AnalyticTarget(lambda p: np.ones(len(p)), lambda p: np.zeros((len(p), 2)))
    assert np.allclose(dual_eval(one, tri, degree), 1.0, atol=1e-13)
    p = polynomial_target(degree, seed=11)
    assert np.allclose(dual_eval(p, tri, degree), p.value(physical_nodes(tri, degree)),
                       atol=1e-12)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_dual_eval_of_higher_power_matches_composite_oracle(degree) -> None:
    tri = np.array([[0.2, -0.1], [1.4, 0.3], [0.5, 1.1]])
    k = degree + 1
    u = AnalyticTarget(lambda p: p[:, 0] ** k,
                       lambda p: np.column_stack([k * p[:, 0] ** (k - 1), 0 * p[:, 0]]))
    got = dual_eval(u, tri, degree)
    pts, w = composite_rule(tri)
    dual = DualBasis(tri, degree)
    from rdloc.element import eval_physical
    phi = np.stack([eval_physical(tri, degree, e, pts) for e in np.eye(len(got))], axis=1)
    oracle = dual.matrix @ (phi.T @ (w * pts[:, 0] ** k))
    assert np.allclose(got, oracle, rtol=1e-10, atol=1e-12)
    assert not np.allclose(got, physical_nodes(tri, degree)[:, 0] ** k, atol=1e-6)
