import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polylift.dofs import DiscreteSpace, DofMap, DofVector, apply_dirichlet, interpolate, restrict
from polylift.mesh import PolygonalMesh, generate_mesh
from polylift.poly import dim_poly, element_quadrature, edge_quadrature


def hexagon():
    ang = np.arange(6) * np.pi / 3
    return PolygonalMesh.from_polygons(np.column_stack([np.cos(ang), np.sin(ang)]), [list(range(6))])


def test_block_sizes():
    for k in range(4):
        dm = DofMap(generate_mesh("cartesian", 3), k)
        assert dm.n_element == k * (k + 1) // 2 and dm.n_edge == k
        m = generate_mesh("cartesian", 3)
        assert dm.ndofs == m.num_elements * dm.n_element + m.num_edges * k + m.num_vertices


def test_constant_k1():
    sp = DiscreteSpace(generate_mesh("cartesian", 3), 1)
    v = interpolate(sp, lambda p: np.ones(len(p)))
    assert np.all(v.vertex_values == 1.0)
    for T in range(sp.mesh.num_elements):
        assert v.element_moments(T) == pytest.approx([1.0], abs=1e-14)
    for E in range(sp.mesh.num_edges):
        assert v.edge_moments(E) == pytest.approx([1.0], abs=1e-14)


def test_linear_k0():
    m = generate_mesh("distorted-quad", 3, seed=1)
    sp = DiscreteSpace(m, 0)
    v = interpolate(sp, lambda p: p[:, 0])
    assert sp.dofmap.ndofs == m.num_vertices
    assert np.array_equal(v.vertex_values, m.vertices[:, 0])


def test_sinsin_moments_independent_quadrature():
    m = generate_mesh("cartesian", 2)
    sp = DiscreteSpace(m, 2)
    f = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
    v = interpolate(sp, f)
    for T in range(m.num_elements):
        r = element_quadrature(m, sp.submesh, T, 2 * sp.element_degree)
        B = sp.element_basis(T, 1).eval(r.points)  # orthonormal: coefficient = moment
        assert np.allclose(v.element_moments(T), B.T @ (r.weights * f(r.points)), atol=1e-13)
    for E in range(m.num_edges):
        a, b = m.vertices[m.edges[E]]
        r = edge_quadrature(a, b, 12)
        P = sp.edge_basis(E, 1).eval(r.points)
        c = np.linalg.solve(P.T @ (r.weights[:, None] * P), P.T @ (r.weights * f(r.points)))
        assert np.allclose(v.edge_moments(E), c, atol=1e-13)


def test_restrict_sizes():
    sq = DiscreteSpace(generate_mesh("cartesian", 1), 0)
    assert restrict(DofVector(sq), 0).size == 4
    # one element moment, one moment per edge, four vertices
    assert DofMap(generate_mesh("cartesian", 1), 1).local_size(0) == 1 + 4 + 4
    assert DofMap(hexagon(), 2).local_size(0) == 21


def test_local_ordering_documented():
    m = generate_mesh("hexagonal-dominant", 2)
    dm = DofMap(m, 2)
    T = 1
    idx = dm.local_indices(T)
    assert np.array_equal(idx[:3], np.arange(dm.element_offset[T], dm.element_offset[T] + 3))
    for i, E in enumerate(m.element_edges[T]):
        assert np.array_equal(idx[3 + 2 * i: 5 + 2 * i], dm.edge_offset[E] + np.arange(2))
    assert np.array_equal(idx[-len(m.elements[T]):], dm.vertex_index[m.elements[T]])


def test_dofmap_is_bijection():
    m = generate_mesh("hexagonal-dominant", 3)
    dm = DofMap(m, 2)
    seen = np.zeros(dm.ndofs, dtype=int)
    for T in range(m.num_elements):
        g2l = dm.global_to_local(T)
        idx = dm.local_indices(T)
        assert all(g2l[g] == i for i, g in enumerate(idx))
        seen[idx] += 1
    assert np.all(seen > 0)
    bnd = np.concatenate([np.concatenate([np.arange(dm.edge_offset[E], dm.edge_offset[E] + 2)
                                          for E in np.flatnonzero(m.edge_boundary)]),
                          dm.vertex_index[m.vertex_boundary]])
    assert sorted(bnd) == list(range(dm.n_interior, dm.ndofs))


def test_apply_dirichlet_examples():
    sq = DiscreteSpace(generate_mesh("cartesian", 1), 0)
    v = apply_dirichlet(DofVector(sq, np.arange(4.0)), None)
    assert np.all(v.values == 0) and v.is_homogeneous()
    g = apply_dirichlet(DofVector(sq), lambda p: p[:, 0])
    cyc = sq.mesh.elements[0]
    assert g.vertex_values[cyc].tolist() == [0.0, 1.0, 1.0, 0.0]
    sp = DiscreteSpace(generate_mesh("cartesian", 3), 1)
    w = lambda p: p[:, 0] + p[:, 1]
    ref = interpolate(sp, w)
    x = DofVector(sp, np.random.default_rng(0).normal(size=sp.dofmap.ndofs))
    got = apply_dirichlet(x, w)
    assert np.allclose(got.boundary, ref.boundary, atol=1e-14)
    assert np.array_equal(got.interior, x.interior)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_interpolation_linear(a, b):
    sp = DiscreteSpace(generate_mesh("distorted-quad", 2, seed=7), 2)
    u = lambda p: np.sin(p[:, 0]) + p[:, 1] ** 2
    v = lambda p: np.exp(p[:, 1]) * p[:, 0]
    lhs = interpolate(sp, lambda p: a * u(p) + b * v(p))
    rhs = a * interpolate(sp, u) + b * interpolate(sp, v)
    assert np.allclose(lhs.values, rhs.values, atol=1e-12)


def test_serialization_round_trip():
    sp = DiscreteSpace(generate_mesh("hexagonal-dominant", 2), 2)
    v = interpolate(sp, lambda p: np.cos(p[:, 0] + 2 * p[:, 1]))
    data = json.loads(v.to_json())
    assert set(data) == {"k", "mesh", "elements", "edges", "vertices"}
    back = DofVector.from_dict(sp, data)
    assert np.array_equal(back.values, v.values)
    other = DiscreteSpace(generate_mesh("cartesian", 2), 2)
    with pytest.raises(ValueError):
        DofVector.from_dict(other, data)


def test_dofvector_shape_checked():
    sp = DiscreteSpace(generate_mesh("cartesian", 1), 1)
    with pytest.raises(ValueError):
        DofVector(sp, np.zeros(3))
    assert dim_poly(sp.k - 1) == 1
