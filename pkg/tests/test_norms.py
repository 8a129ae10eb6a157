import numpy as np
import pytest

from polylift.dofs import DofVector, interpolate
from polylift.harness import get_case
from polylift.norms import (ConsistencyFunctional, coercivity_bracket, consistency_functional, dof_h1_norm,
                            dual_norm, energy_norm, norm_equivalence_probe, norm_grams, pencil_extremes)
from polylift.poly import edge_quadrature, element_quadrature
from polylift.scheme import spd_factor

from conftest import disc, monomial


def random_vh(d, seed):
    v = DofVector(d.space)
    v.values[: d.dofmap.n_interior] = np.random.default_rng(seed).uniform(-1, 1, d.dofmap.n_interior)
    return v


def test_trivial_values():
    d = disc("cartesian", 2, 1)
    assert energy_norm(d, DofVector(d.space)) == 0.0
    assert dof_h1_norm(d, DofVector(d.space)) == 0.0
    one = interpolate(d.space, lambda p: np.ones(len(p)))
    assert dof_h1_norm(d, one) <= 1e-13
    assert energy_norm(d, one) <= 1e-13


def test_dof_h1_norm_term_by_term():
    d = disc("cartesian", 2, 1)
    v = random_vh(d, 3)
    total = 0.0
    for T, ops in enumerate(d.ops):
        vT = v.element_moments(T)[0]  # constant on T (k = 1)
        h = ops.diameter
        for E in d.mesh.element_edges[T]:
            a, b = d.mesh.vertices[d.mesh.edges[E]]
            r = edge_quadrature(a, b, 5)
            total += np.sum(r.weights * (vT - v.edge_moments(E)[0]) ** 2) / h
        total += np.sum((vT - v.vertex_values[d.mesh.elements[T]]) ** 2)
    assert dof_h1_norm(d, v) ** 2 == pytest.approx(total, rel=1e-13)


def test_energy_norm_term_by_term():
    d = disc("hexagonal-dominant", 2, 2)
    v = random_vh(d, 4)
    total = 0.0
    for ops in d.ops:
        x = v.values[d.dofmap.local_indices(ops.T)]
        r = element_quadrature(d.mesh, d.space.submesh, ops.T, 2 * d.space.element_degree)
        G = ops.gradient_values(r.points) @ x
        total += np.sum(r.weights * np.sum(G**2, axis=1))
        R = ops.potential @ x
        for ed in ops.edges:
            a, b = d.mesh.vertices[d.mesh.edges[ed.E]]
            er = edge_quadrature(a, b, 8)
            t = d.space.edge_basis(ed.E, 3).coordinate(er.points)
            gam = (t[:, None] ** np.arange(4)[None, :]) @ (ed.trace @ x)
            total += np.sum(er.weights * (ops.eval_poly(R, er.points) - gam) ** 2) / ops.diameter
    assert energy_norm(d, v) ** 2 == pytest.approx(total, rel=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_grams_spd_on_vh(k):
    d = disc("distorted-quad", 3, k, 1)
    g = norm_grams(d)
    spd_factor(g.interior("energy"))
    if k > 0:
        spd_factor(g.interior("h1"))


def test_norm_axioms():
    d = disc("hexagonal-dominant", 3, 1)
    rng = np.random.default_rng(9)
    for s in range(10):
        u, w = random_vh(d, 100 + s), random_vh(d, 200 + s)
        c = rng.uniform(-3, 3)
        for nrm in (energy_norm, dof_h1_norm):
            assert nrm(d, c * u) == pytest.approx(abs(c) * nrm(d, u), rel=1e-12)
            assert nrm(d, u + w) <= nrm(d, u) + nrm(d, w) + 1e-10


def test_dual_norm_matches_dense():
    d = disc("cartesian", 3, 1)
    eps = np.random.default_rng(1).normal(size=d.dofmap.n_interior)
    N = norm_grams(d).interior("energy").toarray()
    assert dual_norm(d, eps) == pytest.approx(np.sqrt(eps @ np.linalg.solve(N, eps)), rel=1e-12)
    assert dual_norm(d, np.zeros(d.dofmap.n_interior)) == 0.0
    # the dual norm is the supremum of eps(v) / ||v||
    v = np.linalg.solve(N, eps)
    assert eps @ v / np.sqrt(v @ N @ v) == pytest.approx(dual_norm(d, eps), rel=1e-12)


@pytest.mark.parametrize("family", ["cartesian", "hexagonal-dominant"])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_consistency_vanishes_for_polynomials(family, k):
    d = disc(family, 4, k)
    case = get_case(f"monomial:{k},1")  # degree k + 1
    E = consistency_functional(d, "E_h", case.u, f=case.f)
    assert dual_norm(d, E) <= 1e-9
    F = consistency_functional(d, "frak_E_h", case.u, laplacian=case.laplacian)
    assert dual_norm(d, F) <= 1e-9


def test_potential_load_matches_strong_form():
    case = get_case("sinsin")
    for k in (0, 1, 2):
        d = disc("distorted-quad", 4, k)
        E = consistency_functional(d, "E_h", case.u, f=case.f, load="potential")
        F = consistency_functional(d, "frak_E_h", case.u, laplacian=case.laplacian)
        assert np.abs(E.vector - F.vector).max() <= 1e-12
        assert abs(dual_norm(d, E) - dual_norm(d, F)) <= 1e-12


def test_functional_is_linear_and_errors():
    d = disc("cartesian", 2, 1)
    case = get_case("sinsin")
    E = consistency_functional(d, "E_h", case.u, f=case.f)
    assert isinstance(E, ConsistencyFunctional)
    u, w = random_vh(d, 1), random_vh(d, 2)
    assert E(DofVector(d.space)) == 0.0
    assert E(u + 2 * w) == pytest.approx(E(u) + 2 * E(w), rel=1e-12)
    with pytest.raises(ValueError):
        consistency_functional(d, "E_h", case.u)
    with pytest.raises(ValueError):
        consistency_functional(d, "frak_E_h", case.u)
    with pytest.raises(ValueError):
        consistency_functional(d, "weak", case.u, f=case.f)


def test_equivalence_probe_basics():
    d = disc("cartesian", 2, 1)
    s = norm_equivalence_probe(d, 50, seed=0)
    assert s.eig_min <= s.sample_min**2 + 1e-12 and s.sample_max**2 <= s.eig_max + 1e-12
    v = random_vh(d, 0)
    r1 = dof_h1_norm(d, v) / energy_norm(d, v)
    r2 = dof_h1_norm(d, 2 * v) / energy_norm(d, 2 * v)
    assert r1 == pytest.approx(r2, rel=1e-14)


def test_equivalence_k0_regression():
    s = norm_equivalence_probe(disc("cartesian", 2, 0), 10, seed=0)
    # one interior unknown: the bracket collapses to a single value
    assert s.eig_min == pytest.approx(1.7891470035425749, rel=1e-12)
    assert s.eig_max == pytest.approx(s.eig_min, rel=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_equivalence_without_boundary_conditions_is_mesh_independent(k):
    # modulo constants, the brackets over all DOFs coincide with the element brackets
    ref = None
    for n in (2, 4, 8):
        g = norm_grams(disc("cartesian", n, k))
        lo, hi = pencil_extremes(g.h1.toarray(), g.energy.toarray())
        ref = ref or (lo, hi)
        assert lo == pytest.approx(ref[0], rel=1e-10) and hi == pytest.approx(ref[1], rel=1e-10)


def test_global_equivalence_bracket_inside_local_one():
    for k in (1, 2):
        for n in (2, 4):
            d = disc("cartesian", n, k)
            g = norm_grams(d)
            loc = [pencil_extremes(a, b) for a, b in zip(g.h1_local, g.energy_local)]
            s = norm_equivalence_probe(d, 10)
            assert s.eig_min >= min(l[0] for l in loc) - 1e-12
            assert s.eig_max <= max(l[1] for l in loc) + 1e-12


def test_coercivity_brackets_regression():
    expected = {0: (0.99999999999999967, 4.2426406871192839),
                1: (0.99999999999999933, 2.9791230239479241),
                2: (0.89932544650797897, 9.8994949366116813)}
    for k, (lo, hi) in expected.items():
        got = coercivity_bracket(disc("cartesian", 2, k))
        assert got[0] == pytest.approx(lo, rel=1e-10) and got[1] == pytest.approx(hi, rel=1e-10)


def test_pencil_kernel_check():
    A = np.diag([1.0, 1.0])
    B = np.diag([1.0, 0.0])
    with pytest.raises(ArithmeticError):
        pencil_extremes(A, B)
    assert pencil_extremes(np.diag([2.0, 0.0]), B) == pytest.approx((2.0, 2.0))


def test_coercivity_random_samples_inside_bracket():
    d = disc("hexagonal-dominant", 2, 2)
    lo, hi = coercivity_bracket(d)
    g = norm_grams(d)
    rng = np.random.default_rng(0)
    for ops, form, N in zip(d.ops, d.forms, g.energy_local):
        X = rng.uniform(-1, 1, (ops.ndofs, 1000))
        q = np.einsum("is,ij,js->s", X, form.stiffness, X) / np.einsum("is,ij,js->s", X, N, X)
        assert q.min() >= lo - 1e-12 and q.max() <= hi + 1e-12
    assert lo > 0


def test_monomial_helper():
    assert monomial(2, 1)(np.array([[2.0, 3.0]]))[0] == 12.0
