"""Element reconstructions: edge traces, discrete gradient and potentials.

Every operator is a dense matrix acting on the local DOF vector of an
element, ordered as in :meth:`DofMap.local_indices`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .dofs import DiscreteSpace
from .poly import EdgeBasis, ElementBasis, QuadratureRule, check_gram, dense_solve, dim_poly, gram


@dataclass
class EdgeData:
    E: int
    local_index: int
    normal: np.ndarray  # unit, pointing out of the element
    rule: QuadratureRule
    t: np.ndarray  # edge coordinate of the quadrature points
    moment_dofs: np.ndarray  # local indices of the k edge moments
    vertex_dofs: np.ndarray  # local indices of (global start, global end)
    moment_mass: np.ndarray  # Gram of P^{k-1}(E) in the edge basis
    trace: np.ndarray  # (k+2, N): local DOFs -> coefficients of gamma_E in t^j, j <= k+1
    trace_at_q: np.ndarray  # (nq, N): gamma_E at quadrature points
    poly_at_q: np.ndarray  # (nq, dim P^{k+1}): element monomials at quadrature points


@dataclass
class ElementOperators:
    T: int
    k: int
    diameter: float
    ndofs: int
    basis: ElementBasis  # spans P^{k+1}(T); P^k and P^{k-1} are leading slices
    rule: QuadratureRule
    values: np.ndarray  # basis at element quadrature points
    grads: np.ndarray
    mass: np.ndarray  # Gram of P^{k+1}(T)
    vector_mass: np.ndarray  # Gram of P^k(T;R^2)
    edges: List[EdgeData]
    gradient: np.ndarray  # (2 dim P^k, N)
    potential: np.ndarray  # (dim P^{k+1}, N)
    projected_potential: np.ndarray  # (dim P^k, N)
    interpolation: np.ndarray  # (N, dim P^{k+1}): sigma_T on P^{k+1}(T)
    vertex_dofs: np.ndarray

    @property
    def n_element(self) -> int:
        return dim_poly(self.k - 1)

    @property
    def nk(self) -> int:
        return dim_poly(self.k)

    def gradient_values(self, points: np.ndarray) -> np.ndarray:
        """G_T at ``points`` as a ``(npoints, 2, N)`` array."""
        nk = self.nk
        V = self.basis.eval(points)[:, :nk]
        return np.stack([V @ self.gradient[:nk], V @ self.gradient[nk:]], axis=1)

    def eval_poly(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        V = self.basis.eval(points)
        return V[:, : len(coeffs)] @ coeffs


def edge_trace_matrix(basis: EdgeBasis, rule: QuadratureRule, k: int) -> np.ndarray:
    """Map ``(v_E, v(start), v(end))`` to the coefficients of gamma_E in P^{k+1}(E).

    gamma_E is the unique polynomial of degree k+1 whose P^{k-1} projection
    has coefficients v_E and which takes the given endpoint values.
    """
    t = basis.coordinate(rule.points)
    P = t[:, None] ** np.arange(k + 2)[None, :]
    A = np.zeros((k + 2, k + 2))
    rhs = np.zeros((k + 2, k + 2))
    A[:k] = gram(P[:, :k], rule.weights, P)
    rhs[:k, :k] = gram(P[:, :k], rule.weights)
    A[k] = (-0.5) ** np.arange(k + 2)
    A[k + 1] = 0.5 ** np.arange(k + 2)
    rhs[k, k] = rhs[k + 1, k + 1] = 1.0
    return dense_solve(A, rhs, "edge trace system")


def build_element_operators(space: DiscreteSpace, T: int) -> ElementOperators:
    mesh, k = space.mesh, space.k
    cyc = mesh.elements[T]
    nv = len(cyc)
    n_el = dim_poly(k - 1)
    nk = dim_poly(k)
    n1 = dim_poly(k + 1)
    N = n_el + nv * k + nv
    vertex_dofs = n_el + nv * k + np.arange(nv)

    basis = space.element_basis(T, k + 1)
    rule = space.element_rule(T)
    w = rule.weights
    V = basis.eval(rule.points)
    Gr = basis.grad(rule.points)
    M1 = gram(V, w)
    check_gram(M1, f"mass matrix of element {T}")
    Mk = M1[:nk, :nk]
    Mvec = np.zeros((2 * nk, 2 * nk))
    Mvec[:nk, :nk] = Mk
    Mvec[nk:, nk:] = Mk

    pts = mesh.vertices[cyc]
    edges: List[EdgeData] = []
    for i, E in enumerate(mesh.element_edges[T]):
        d = pts[(i + 1) % nv] - pts[i]
        normal = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        eb = space.edge_basis(E, k + 1)
        erule = space.edge_rule(E)
        t = eb.coordinate(erule.points)
        gstart = mesh.edges[E][0]
        pos = i if cyc[i] == gstart else (i + 1) % nv
        other = (i + 1) % nv if pos == i else i
        moment_dofs = n_el + i * k + np.arange(k)
        vdofs = np.array([vertex_dofs[pos], vertex_dofs[other]])
        sel = np.zeros((k + 2, N))
        sel[np.arange(k), moment_dofs] = 1.0
        sel[k, vdofs[0]] = 1.0
        sel[k + 1, vdofs[1]] = 1.0
        trace = edge_trace_matrix(eb, erule, k) @ sel
        P = t[:, None] ** np.arange(k + 2)[None, :]
        edges.append(EdgeData(
            E=int(E), local_index=i, normal=normal, rule=erule, t=t,
            moment_dofs=moment_dofs, vertex_dofs=vdofs,
            moment_mass=gram(P[:, :k], erule.weights),
            trace=trace, trace_at_q=P @ trace, poly_at_q=basis.eval(erule.points),
        ))

    # discrete gradient: tested against m_a e_x, m_a e_y for m_a in P^k
    BG = np.zeros((2 * nk, N))
    for c in range(2):
        BG[c * nk:(c + 1) * nk, :n_el] -= gram(Gr[:, :nk, c], w, V[:, :n_el])
    for ed in edges:
        for c in range(2):
            BG[c * nk:(c + 1) * nk] += ed.normal[c] * gram(ed.poly_at_q[:, :nk], ed.rule.weights, ed.trace_at_q)
    G = dense_solve(Mvec, BG, f"vector mass matrix of element {T}")

    # potential: tested against (x - x_T) m_a for m_a in P^{k+1}
    r = rule.points - basis.center
    div_vals = 2.0 * V + np.einsum("qd,qad->qa", r, Gr)
    lhs = gram(div_vals, w, V)
    rhs = np.zeros((n1, N))
    for c in range(2):
        C = gram(V, w * r[:, c], V[:, :nk])
        rhs -= C @ G[c * nk:(c + 1) * nk]
    for ed in edges:
        flux = (ed.rule.points - basis.center) @ ed.normal
        rhs += gram(ed.poly_at_q, ed.rule.weights * flux, ed.trace_at_q)
    R = dense_solve(lhs, rhs, f"divergence system of element {T}")
    RL = np.linalg.solve(Mk, M1[:nk]) @ R

    I = np.zeros((N, n1))
    if n_el:
        I[:n_el] = np.linalg.solve(M1[:n_el, :n_el], M1[:n_el])
    for ed in edges:
        if k:
            P = ed.t[:, None] ** np.arange(k)[None, :]
            I[ed.moment_dofs] = np.linalg.solve(ed.moment_mass, gram(P, ed.rule.weights, ed.poly_at_q))
    I[vertex_dofs] = basis.eval(pts)

    return ElementOperators(
        T=T, k=k, diameter=float(mesh.diameters[T]), ndofs=N, basis=basis, rule=rule,
        values=V, grads=Gr, mass=M1, vector_mass=Mvec, edges=edges,
        gradient=G, potential=R, projected_potential=RL, interpolation=I,
        vertex_dofs=vertex_dofs,
    )


def build_all(space: DiscreteSpace, threads: int = 1) -> List[ElementOperators]:
    """Operators for every element, in element order whatever the thread count."""
    elements = range(space.mesh.num_elements)
    if threads <= 1:
        return [build_element_operators(space, T) for T in elements]
    # warm the quadrature cache first so worker threads only read it
    for T in elements:
        space.element_rule(T)
    for E in range(space.mesh.num_edges):
        space.edge_rule(E)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda T: build_element_operators(space, T), elements))


def local_interpolate(ops: ElementOperators, coeffs: np.ndarray) -> np.ndarray:
    """sigma_T of a polynomial of P^{k+1}(T) given in the element basis."""
    return ops.interpolation @ coeffs


def projection_boundedness_probe(space: DiscreteSpace, T: int, samples: int, seed: int = 0,
                                 ops: Optional[ElementOperators] = None) -> float:
    """Largest ratio between both sides of the DOF bound on L2 projections.

    Samples w in P^{k+1}(T) with scaled-monomial coefficients uniform in
    [-1, 1]; such w are members of the local virtual space, with
    pi^{k+1} w = w and pi^k grad w = grad w.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    ops = build_element_operators(space, T) if ops is None else ops
    rng = np.random.default_rng(seed)
    C = rng.uniform(-1.0, 1.0, (dim_poly(space.k + 1), samples))
    h = ops.diameter
    w = ops.rule.weights
    n_el = ops.n_element

    vals = ops.values @ C
    l2 = np.sqrt(w @ vals**2)
    g = np.einsum("qad,as->qsd", ops.grads, C)
    grad_l2 = np.sqrt(np.einsum("q,qsd->s", w, g**2))
    lhs = l2 + h * grad_l2

    dofs = ops.interpolation @ C
    elem = dofs[:n_el]
    rhs = np.sqrt(np.einsum("is,ij,js->s", elem, ops.mass[:n_el, :n_el], elem)) if n_el else np.zeros(samples)
    for ed in ops.edges:
        if space.k:
            m = dofs[ed.moment_dofs]
            rhs = rhs + np.sqrt(h) * np.sqrt(np.einsum("is,ij,js->s", m, ed.moment_mass, m))
    rhs = rhs + h * np.abs(dofs[ops.vertex_dofs]).sum(axis=0)
    return float(np.max(lhs / rhs))
