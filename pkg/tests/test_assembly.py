import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hygrofem.assembly import (
    BoundaryDrive,
    ClimateSeries,
    Field,
    SegmentDrive,
    SparseSystem,
    assemble_step_system,
    discrete_energy,
    evaluate_coefficients,
    interface_flux_jump,
    weighted_totals,
)
from hygrofem.domain import LayerRect, Mesh, build_domain, triangulate
from hygrofem.errors import DimensionMismatch, NonfiniteCoefficient, NonMonotoneTime
from hygrofem.linsolve import solve
from hygrofem.materials import CoefficientSet, LinearParams


def reference_triangle_mesh():
    dom = build_domain([LayerRect(0, 0, 1, 1)])
    ro = lambda a, dt=float: np.asarray(a, dtype=dt)  # noqa: E731
    return Mesh(
        nodes=ro([[0, 0], [1, 0], [0, 1]]), triangles=ro([[0, 1, 2]], int), tri_layer=ro([0], int),
        exterior_edges=ro([[0, 1], [1, 2], [2, 0]], int), exterior_layer=ro([0, 0, 0], int),
        exterior_segment=ro([0, 1, 2], int), exterior_tri=ro([0, 0, 0], int),
        interface_edges=np.zeros((0, 2), int), interface_layers=np.zeros((0, 2), int),
        interface_tris=np.zeros((0, 2), int), interface_segment=np.zeros(0, int),
        h_mesh=1.0, domain=dom,
    )


def coeffs_const(nt, beta, kappa):
    p = LinearParams(beta, kappa)
    b = np.broadcast_to(p.beta.T, (nt, 2, 2)).copy()
    a = np.broadcast_to(p.kappa, (nt, 2, 2)).copy()
    return CoefficientSet(np.zeros((nt, 2)), b, a, np.zeros((nt, 2)))


def test_field_checks():
    with pytest.raises(DimensionMismatch):
        Field(np.zeros(3))
    with pytest.raises(DimensionMismatch):
        Field(np.zeros(4), n_nodes=3)
    f = Field.from_components([1, 2], [3, 4])
    np.testing.assert_array_equal(f.values, [1, 3, 2, 4])
    np.testing.assert_array_equal(f.component(1), [3, 4])


def test_reference_triangle_stiffness():
    m = reference_triangle_mesh()
    c = coeffs_const(1, np.eye(2), np.eye(2))
    A = assemble_step_system(m, c, Field(np.zeros(6)), math.inf, None, 0.0).to_scipy().toarray()
    K = A[0::2, 0::2]
    np.testing.assert_allclose(K, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)
    np.testing.assert_allclose(A[0::2, 1::2], 0.0)


def test_reference_triangle_mass_and_edges():
    m = reference_triangle_mesh()
    c = coeffs_const(1, [[2.0, 0.5], [0.25, 3.0]], np.eye(2) * 1e-300)
    ht = 0.5
    A = assemble_step_system(m, c, Field(np.zeros(6)), ht, None, 0.0).to_scipy().toarray()
    Ml = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    np.testing.assert_allclose(A[0::2, 0::2], 2.0 * Ml / ht, rtol=1e-12)
    np.testing.assert_allclose(A[0::2, 1::2], 0.5 * Ml / ht, rtol=1e-12)  # equation 1, unknown 2
    np.testing.assert_allclose(A[1::2, 0::2], 0.25 * Ml / ht, rtol=1e-12)
    # Newton term on the south edge: alpha * L/6 [[2,1],[1,2]], rhs alpha sigma L/2
    drive = BoundaryDrive({0: SegmentDrive(ClimateSeries.constant(5.0, 7.0), (3.0, 4.0))})
    c0 = coeffs_const(1, np.eye(2), np.eye(2) * 1e-300)
    s = assemble_step_system(m, c0, Field(np.zeros(6)), math.inf, drive, 0.0)
    A = s.to_scipy().toarray()
    np.testing.assert_allclose(A[0::2, 0::2][:2, :2], 3.0 * np.array([[2, 1], [1, 2]]) / 6, rtol=1e-12)
    np.testing.assert_allclose(A[1::2, 1::2][:2, :2], 4.0 * np.array([[2, 1], [1, 2]]) / 6, rtol=1e-12)
    np.testing.assert_allclose(s.rhs[[0, 2, 4]], [7.5, 7.5, 0.0])
    np.testing.assert_allclose(s.rhs[[1, 3, 5]], [14.0, 14.0, 0.0])


def test_zero_data_gives_zero_rhs(two_layer_mesh):
    c = coeffs_const(two_layer_mesh.n_triangles, [[1, 0.2], [0.1, 1]], [[1, 0.1], [0.1, 0.5]])
    drive = BoundaryDrive({0: SegmentDrive(ClimateSeries.constant(0.0, 0.0), (1.0, 1.0))})
    s = assemble_step_system(two_layer_mesh, c, Field(np.zeros(2 * two_layer_mesh.n_nodes)), 0.1, drive, 0.0)
    assert np.all(s.rhs == 0)


def test_csr_structure(two_layer_mesh):
    c = coeffs_const(two_layer_mesh.n_triangles, np.eye(2), [[1, 0.1], [0.1, 0.5]])
    s = assemble_step_system(two_layer_mesh, c, Field(np.zeros(2 * two_layer_mesh.n_nodes)), 0.1, None, 0.0)
    assert s.n == 2 * two_layer_mesh.n_nodes
    for r in range(s.n):
        cols = s.col_idx[s.row_ptr[r]:s.row_ptr[r + 1]]
        assert np.all(np.diff(cols) > 0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=4, max_size=4), st.floats(-5, 5), st.floats(-5, 5))
def test_constant_field_in_stiffness_kernel(k, c1, c2):
    dom = build_domain([LayerRect(0, 0, 0.5, 1), LayerRect(0.5, 0, 1, 1)])
    m = triangulate(dom, 0.25)
    c = coeffs_const(m.n_triangles, np.eye(2), np.reshape(k, (2, 2)))
    A = assemble_step_system(m, c, Field(np.zeros(2 * m.n_nodes)), math.inf, None, 0.0).to_scipy()
    u = Field.constant(m.n_nodes, c1, c2).values
    assert np.abs(A @ u).max() <= 1e-12 * (1 + max(k)) * (1 + abs(c1) + abs(c2))


def test_nonfinite_coefficients_rejected(two_layer_mesh):
    c = coeffs_const(two_layer_mesh.n_triangles, np.eye(2), np.eye(2))
    c.a[3, 0, 0] = np.nan
    with pytest.raises(NonfiniteCoefficient):
        assemble_step_system(two_layer_mesh, c, Field(np.zeros(2 * two_layer_mesh.n_nodes)), 1.0, None, 0.0)
    with pytest.raises(DimensionMismatch):
        assemble_step_system(two_layer_mesh, c, Field(np.zeros(4)), 1.0, None, 0.0)


def test_conservation_identity_one_step(two_layer_mesh, rng):
    m = two_layer_mesh
    models = [LinearParams([[1, 0.2], [0.1, 1]], [[1, 0.1], [0.1, 0.5]]),
              LinearParams([[2, 0.3], [0.1, 1]], [[2, 0.1], [0.1, 0.5]])]
    u0 = Field(rng.normal(size=2 * m.n_nodes))
    c = evaluate_coefficients(m, models, u0)
    s = assemble_step_system(m, c, u0, 0.05, None, 0.0)
    u1 = Field(solve(s, s.rhs, tol=1e-12).x)
    np.testing.assert_allclose(weighted_totals(m, u1, c), weighted_totals(m, u0, c), rtol=1e-10, atol=1e-10)


def test_source_uniform_ode():
    # beta = kappa = I, no exchange, constant source c: the field rises by c*h_t
    dom = build_domain([LayerRect(0, 0, 1, 1)])
    m = triangulate(dom, 0.25)
    c = coeffs_const(m.n_triangles, np.eye(2), np.eye(2))
    c.fsrc[:] = [2.0, -1.0]
    u0 = Field.constant(m.n_nodes, 1.0, 1.0)
    s = assemble_step_system(m, c, u0, 0.1, None, 0.0)
    expect = Field.constant(m.n_nodes, 1.2, 0.9).values
    A = s.to_scipy()
    assert np.linalg.norm(A @ expect - s.rhs) <= 1e-12 * np.linalg.norm(s.rhs)


def test_midpoint_source_quadrature_exact_for_linear():
    # int_T f phi_p for f = x on the reference triangle
    m = reference_triangle_mesh()
    c = coeffs_const(1, np.eye(2), np.eye(2))
    src = lambda t, x, y: np.stack([x, y], axis=-1)  # noqa: E731
    s = assemble_step_system(m, c, Field(np.zeros(6)), math.inf, None, 0.0, source=src)
    # exact: int x phi_0 = 1/24, int x phi_1 = 1/12, int x phi_2 = 1/24
    np.testing.assert_allclose(s.rhs[0::2], [1 / 24, 1 / 12, 1 / 24], rtol=1e-14)
    np.testing.assert_allclose(s.rhs[1::2], [1 / 24, 1 / 24, 1 / 12], rtol=1e-14)


def test_flux_jump_examples():
    single = triangulate(build_domain([LayerRect(0, 0, 1, 1)]), 0.25)
    c = coeffs_const(single.n_triangles, np.eye(2), np.eye(2))
    assert interface_flux_jump(single, Field(np.zeros(2 * single.n_nodes)), c).shape == (0, 2)
    dom = build_domain([LayerRect(0, 0, 0.5, 1), LayerRect(0.5, 0, 1, 1)])
    m = triangulate(dom, 0.125)
    x = m.nodes[:, 0]
    u = Field.from_components(x, 0 * x)
    models = [LinearParams(np.eye(2), [[1, 0.1], [0.1, 1]])] * 2
    j = interface_flux_jump(m, u, evaluate_coefficients(m, models, u))
    assert np.abs(j).max() <= 1e-13
    models = [LinearParams(np.eye(2), [[1, 0.1], [0.1, 1]]), LinearParams(np.eye(2), [[2, 0.1], [0.1, 1]])]
    j = interface_flux_jump(m, u, evaluate_coefficients(m, models, u))
    # flux of u1 = x jumps by 1 along an interface of length 1
    np.testing.assert_allclose(j, [[1.0, 0.0]], atol=1e-13)


def test_discrete_energy_examples():
    m = triangulate(build_domain([LayerRect(0, 0, 1, 1)]), 0.25)
    x, y = m.nodes.T
    p = LinearParams(np.eye(2), [[2, 1], [1, 2]])
    assert discrete_energy(m, Field(np.zeros(2 * m.n_nodes)), p) == 0.0
    assert discrete_energy(m, Field.from_components(x, y), p) == pytest.approx(2.0, rel=1e-12)
    # zero cross conductivities: all weights vanish
    q = LinearParams(np.eye(2), np.eye(2))
    assert discrete_energy(m, Field.from_components(x * x, y), q) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 3), min_size=4, max_size=4),
       st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_energy_density_positive_iff_ellipticity(k, g):
    kap = np.reshape(k, (2, 2))
    m = triangulate(build_domain([LayerRect(0, 0, 1, 1)]), 1.0)
    x, y = m.nodes.T
    g1, g2 = np.array(g[:2]), np.array(g[2:])
    f = Field.from_components(g1[0] * x + g1[1] * y, g2[0] * x + g2[1] * y)
    e = discrete_energy(m, f, LinearParams(np.eye(2), kap))
    # quadratic form matrix in (grad u1, grad u2)
    Q = np.array([[kap[1, 0] * kap[0, 0], kap[0, 1] * kap[1, 0]],
                  [kap[0, 1] * kap[1, 0], kap[0, 1] * kap[1, 1]]])
    ref = 0.5 * (Q[0, 0] * g1 @ g1 + Q[1, 1] * g2 @ g2) + Q[0, 1] * g1 @ g2
    assert e == pytest.approx(ref, rel=1e-9, abs=1e-12)
    pd = kap[0, 0] * kap[1, 1] > kap[0, 1] * kap[1, 0]
    if pd and (g1 @ g1 + g2 @ g2) > 1e-6:
        assert e > 0


def test_energy_indefinite_without_ellipticity():
    m = triangulate(build_domain([LayerRect(0, 0, 1, 1)]), 1.0)
    x, y = m.nodes.T
    kap = np.array([[1.0, 2.0], [2.0, 1.0]])
    e = discrete_energy(m, Field.from_components(x, -x), LinearParams(np.eye(2), kap))
    assert e < 0


def test_climate_series():
    s = ClimateSeries([0.0, 3600.0], [[293.15, 0.5], [283.15, 0.8]])
    np.testing.assert_allclose(s(1800.0), [288.15, 0.65])
    np.testing.assert_allclose(s(-10), [293.15, 0.5])
    np.testing.assert_allclose(s(1e6), [283.15, 0.8])
    with pytest.raises(NonMonotoneTime):
        ClimateSeries([0.0, 0.0], [[1, 1], [2, 2]])


def test_sparse_system_roundtrip():
    import scipy.sparse as sp

    A = sp.random(10, 10, density=0.3, random_state=1) + sp.identity(10)
    s = SparseSystem.from_scipy(A, np.ones(10))
    np.testing.assert_allclose(s.to_scipy().toarray(), A.toarray())


def test_renumbering_invariance(rng):
    dom = build_domain([LayerRect(0, 0, 0.5, 1), LayerRect(0.5, 0, 1, 1)])
    m = triangulate(dom, 0.25)
    models = [LinearParams([[1, 0.2], [0.1, 1]], [[1, 0.1], [0.1, 0.5]]),
              LinearParams([[1, 0.2], [0.1, 1]], [[2, 0.1], [0.1, 0.5]])]
    drive = BoundaryDrive({0: SegmentDrive(ClimateSeries.constant(1.0, 2.0), (1.0, 0.5))})
    u0 = Field(rng.normal(size=2 * m.n_nodes))
    c = evaluate_coefficients(m, models, u0)
    x = solve(assemble_step_system(m, c, u0, 0.1, drive, 0.0), assemble_step_system(m, c, u0, 0.1, drive, 0.0).rhs, tol=1e-13).x
    perm = rng.permutation(m.n_nodes)
    inv = np.argsort(perm)
    m2 = Mesh(
        nodes=m.nodes[perm], triangles=inv[m.triangles], tri_layer=m.tri_layer,
        exterior_edges=inv[m.exterior_edges], exterior_layer=m.exterior_layer,
        exterior_segment=m.exterior_segment, exterior_tri=m.exterior_tri,
        interface_edges=inv[m.interface_edges], interface_layers=m.interface_layers,
        interface_tris=m.interface_tris, interface_segment=m.interface_segment,
        h_mesh=m.h_mesh, domain=m.domain,
    )
    u0p = Field(u0.nodal[perm].ravel())
    s2 = assemble_step_system(m2, c, u0p, 0.1, drive, 0.0)
    x2 = solve(s2, s2.rhs, tol=1e-13).x
    np.testing.assert_allclose(x2.reshape(-1, 2), x.reshape(-1, 2)[perm], rtol=1e-9, atol=1e-11)
