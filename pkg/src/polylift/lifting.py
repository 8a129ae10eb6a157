"""Conforming lifting of DOF vectors into the Lagrange space on the fan submesh.

L_h = L1_h + L2_h.  L1_h interpolates the skeleton traces gamma_E on
skeleton nodes and R_T^a inside the elements; L2_h adds b_T q with b_T the
hat function of the star center, so that the P^k projection on each element
matches R_T^L.  Both stages are linear, and the whole map is stored as a
sparse matrix from global DOFs to Lagrange nodal values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .dofs import DofVector
from .mesh import SimplicialSubmesh
from .norms import norm_grams
from .poly import ElementBasis, monomial_exponents, reference_triangle_rule
from .scheme import Discretization


@lru_cache(maxsize=None)
def reference_lagrange(p: int):
    """Lattice ``(i, j)`` of the P^p nodes at (i/p, j/p) and the monomial-to-nodal map."""
    lattice = np.array([(i, j) for j in range(p + 1) for i in range(p + 1 - j)], dtype=int)
    xi = lattice / p
    e = monomial_exponents(p)
    V = xi[:, None, 0] ** e[None, :, 0] * xi[:, None, 1] ** e[None, :, 1]
    return lattice, np.linalg.inv(V)


def lagrange_eval(p: int, ref: np.ndarray):
    """Values ``(nq, nloc)`` and reference gradients ``(nq, nloc, 2)`` of the P^p nodal basis."""
    _, C = reference_lagrange(p)
    e = monomial_exponents(p)
    x, y = ref[:, None, 0], ref[:, None, 1]
    ex, ey = e[None, :, 0], e[None, :, 1]
    V = x**ex * y**ey
    gx = ex * x ** np.maximum(ex - 1, 0) * y**ey
    gy = ey * x**ex * y ** np.maximum(ey - 1, 0)
    return V @ C, np.stack([gx @ C, gy @ C], axis=-1)


class LagrangeSpace:
    """Continuous piecewise P^p functions on the submesh, p = k + 1."""

    def __init__(self, submesh: SimplicialSubmesh, degree: int, mesh=None):
        self.submesh = submesh
        self.degree = p = degree
        lattice, _ = reference_lagrange(p)
        self.lattice = lattice
        edge_id = {}
        boundary_edge = set()
        if mesh is not None:
            for E, (a, b) in enumerate(mesh.edges):
                edge_id[(int(a), int(b))] = E
                if mesh.edge_boundary[E]:
                    boundary_edge.add((int(a), int(b)))
        nV = mesh.num_vertices if mesh is not None else None

        keys: Dict[tuple, int] = {}
        coords = []
        self.node_edge: List[int] = []  # mesh edge carrying a skeleton node, else -1
        self.node_vertex: List[int] = []  # mesh vertex at the node, else -1
        tri_nodes = np.empty((len(submesh.triangles), len(lattice)), dtype=int)
        boundary = []
        pts = submesh.points
        for t, tri in enumerate(submesh.triangles):
            g = [int(v) for v in tri]
            for loc, (i, j) in enumerate(lattice):
                w = (p - i - j, i, j)
                support = [(g[r], w[r]) for r in range(3) if w[r] > 0]
                if len(support) == 1:
                    key = ("v", support[0][0])
                elif len(support) == 2:
                    (ga, wa), (gb, wb) = sorted(support)
                    key = ("e", ga, gb, wb)
                else:
                    key = ("t", t, i, j)
                idx = keys.get(key)
                if idx is None:
                    idx = keys[key] = len(coords)
                    coords.append((w[0] * pts[g[0]] + w[1] * pts[g[1]] + w[2] * pts[g[2]]) / p)
                    E, V, on_bnd = -1, -1, False
                    if key[0] == "v" and nV is not None and key[1] < nV:
                        V = key[1]
                        on_bnd = bool(mesh.vertex_boundary[V])
                    elif key[0] == "e" and (key[1], key[2]) in edge_id:
                        E = edge_id[(key[1], key[2])]
                        on_bnd = (key[1], key[2]) in boundary_edge
                    self.node_edge.append(E)
                    self.node_vertex.append(V)
                    boundary.append(on_bnd)
                tri_nodes[t, loc] = idx
        self.coordinates = np.array(coords)
        self.triangle_nodes = tri_nodes
        self.boundary_mask = np.array(boundary, dtype=bool)

    @property
    def num_nodes(self) -> int:
        return len(self.coordinates)


@dataclass
class LiftedFunction:
    space: LagrangeSpace
    values: np.ndarray

    def eval(self, points: np.ndarray, triangle: int) -> np.ndarray:
        """Values at ``points`` known to lie in submesh triangle ``triangle``."""
        P = self.space.submesh.points[self.space.submesh.triangles[triangle]]
        J = np.column_stack([P[1] - P[0], P[2] - P[0]])
        ref = np.linalg.solve(J, (np.atleast_2d(points) - P[0]).T).T
        V, _ = lagrange_eval(self.space.degree, ref)
        return V @ self.values[self.space.triangle_nodes[triangle]]


@dataclass
class Bubble:
    """Hat function of the star center of element ``T`` at the element quadrature points."""
    T: int
    values: np.ndarray
    region: np.ndarray  # Lagrange nodes where b_T may be nonzero

    def check(self) -> None:
        if self.values.min() < -1e-14 or self.values.max() > 1 + 1e-14:
            raise ArithmeticError(f"bubble of element {self.T} leaves [0, 1]")


@dataclass
class ElementLifting:
    T: int
    nodes: np.ndarray  # global Lagrange node ids touched by the element
    L1: np.ndarray  # (len(nodes), N_T)
    q: np.ndarray  # (dim P^k, N_T): correction polynomial coefficients
    L2: np.ndarray  # (len(nodes), N_T)
    values: np.ndarray  # Lagrange basis at the element quadrature points, (nq, len(nodes))
    grads: np.ndarray  # (nq, len(nodes), 2)
    bubble: Bubble


class Lifting:
    """The lifting for one discretization, as local and global matrices."""

    def __init__(self, disc: Discretization):
        self.disc = disc
        space = disc.space
        mesh, k = disc.mesh, disc.k
        self.lagrange = LagrangeSpace(space.submesh, k + 1, mesh)
        self.elements = [self._build_element(T) for T in range(mesh.num_elements)]
        self.L1_matrix = self._globalize("L1")
        self.L2_matrix = self._globalize("L2")
        self.matrix = (self.L1_matrix + self.L2_matrix).tocsr()

    def _build_element(self, T: int) -> ElementLifting:
        disc = self.disc
        space, k, mesh = disc.space, disc.k, disc.mesh
        ops = disc.ops[T]
        lag = self.lagrange
        p = k + 1
        sub = space.submesh
        tris = sub.element_triangles[T]
        ref, _ = reference_triangle_rule(space.element_degree)
        ref_vals, ref_grads = lagrange_eval(p, ref)
        nq_t = len(ref)

        nodes = list(dict.fromkeys(int(n) for t in tris for n in lag.triangle_nodes[t]))
        pos = {n: i for i, n in enumerate(nodes)}
        nn = len(nodes)
        values = np.zeros((nq_t * len(tris), nn))
        grads = np.zeros((nq_t * len(tris), nn, 2))
        lam0 = np.zeros(nq_t * len(tris))
        mapped = np.zeros((nq_t * len(tris), 2))
        for s, t in enumerate(tris):
            P = sub.points[sub.triangles[t]]
            J = np.column_stack([P[1] - P[0], P[2] - P[0]])
            Jinv = np.linalg.inv(J)
            cols = [pos[int(n)] for n in lag.triangle_nodes[t]]
            rows = slice(s * nq_t, (s + 1) * nq_t)
            blk = np.zeros((nq_t, nn))
            blk[:, cols] = ref_vals
            values[rows] = blk
            gblk = np.zeros((nq_t, nn, 2))
            gblk[:, cols] = ref_grads @ Jinv
            grads[rows] = gblk
            lam0[rows] = 1.0 - ref[:, 0] - ref[:, 1]
            mapped[rows] = P[0] + ref @ J.T
        if not np.allclose(ops.rule.points, mapped, atol=1e-14 * ops.diameter, rtol=0):
            raise AssertionError("element quadrature does not follow the fan triangles")

        # L1: skeleton traces on dT, R_T^a inside
        X = lag.coordinates[nodes]
        L1 = np.zeros((nn, ops.ndofs))
        local_vertex = {int(v): i for i, v in enumerate(mesh.elements[T])}
        local_edge = {ed.E: ed for ed in ops.edges}
        R_at_nodes = ops.basis.eval(X) @ ops.potential
        for i, n in enumerate(nodes):
            V, E = lag.node_vertex[n], lag.node_edge[n]
            if V >= 0:
                L1[i, ops.vertex_dofs[local_vertex[V]]] = 1.0
            elif E >= 0:
                ed = local_edge[E]
                t = space.edge_basis(E, k + 1).coordinate(X[i:i + 1])
                L1[i] = (t[:, None] ** np.arange(k + 2)[None, :]) @ ed.trace
            else:
                L1[i] = R_at_nodes[i]

        # L2: b_T q with int b_T q r = int (R_T^L - L1) r for r in P^k
        nk = ops.nk
        w = ops.rule.weights
        Phi = ops.values[:, :nk]
        B = Phi.T @ ((w * lam0)[:, None] * Phi)
        rhs = ops.mass[:nk, :nk] @ ops.projected_potential - Phi.T @ (w[:, None] * values) @ L1
        try:
            cf = sla.cho_factor(B)
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError(f"weighted Gram of element {T} is not SPD") from exc
        q = sla.cho_solve(cf, rhs)
        # b_T at a node is its barycentric weight on the star center
        b_nodes = self._center_weight(T, nodes)
        L2 = (b_nodes[:, None] * ops.basis.eval(X)[:, :nk]) @ q
        bubble = Bubble(T, lam0, np.asarray(nodes)[b_nodes > 0])
        bubble.check()
        return ElementLifting(T, np.asarray(nodes), L1, q, L2, values, grads, bubble)

    def _center_weight(self, T: int, nodes: List[int]) -> np.ndarray:
        """Barycentric weight of the star center at each node (the hat b_T)."""
        lag, sub = self.lagrange, self.disc.space.submesh
        p = lag.degree
        out = np.zeros(len(nodes))
        pos = {n: i for i, n in enumerate(nodes)}
        for t in sub.element_triangles[T]:
            for loc, (i, j) in enumerate(lag.lattice):
                out[pos[int(lag.triangle_nodes[t, loc])]] = (p - i - j) / p
        return out

    def _globalize(self, which: str) -> sp.csr_matrix:
        """Node rows taken from the first element owning each node (rows agree across owners)."""
        dm = self.disc.dofmap
        seen = np.zeros(self.lagrange.num_nodes, dtype=bool)
        rows, cols, vals = [], [], []
        for el in self.elements:
            M = getattr(el, which)
            idx = dm.local_indices(el.T)
            fresh = ~seen[el.nodes]
            seen[el.nodes] = True
            sub = M[fresh]
            r, c = np.nonzero(sub)
            rows.append(el.nodes[fresh][r])
            cols.append(idx[c])
            vals.append(sub[r, c])
        shape = (self.lagrange.num_nodes, dm.ndofs)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)

    # ------------------------------------------------------------ application

    def _values(self, v) -> np.ndarray:
        return v.values if isinstance(v, DofVector) else np.asarray(v)

    def lift_L1(self, v) -> LiftedFunction:
        return LiftedFunction(self.lagrange, self.L1_matrix @ self._values(v))

    def lift_L2(self, v) -> LiftedFunction:
        return LiftedFunction(self.lagrange, self.L2_matrix @ self._values(v))

    def lift(self, v) -> LiftedFunction:
        return LiftedFunction(self.lagrange, self.matrix @ self._values(v))

    def correction_polynomial(self, v, T: int) -> np.ndarray:
        x = self._values(v)[self.disc.dofmap.local_indices(T)]
        return self.elements[T].q @ x


@dataclass
class LiftingReport:
    projection_residual: float
    consistency_residual: float
    boundedness_ratio: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "projection_residual": self.projection_residual,
            "consistency_residual": self.consistency_residual,
            "boundedness_ratio": self.boundedness_ratio,
            "samples": self.samples,
        }


def _raw_monomial_coefficients(ops) -> np.ndarray:
    """Coefficients in the element basis of the scaled monomials spanning P^{k+1}(T)."""
    raw = ElementBasis(ops.basis.center, ops.basis.diameter, ops.k + 1)
    W = ops.values.T @ (ops.rule.weights[:, None] * raw.eval(ops.rule.points))
    return np.linalg.solve(ops.mass, W)


def verify_all(lifting: Lifting, V) -> LiftingReport:
    """Projection residual, consistency residual and boundedness ratio for DOF vectors.

    ``V`` is one DOF vector or an ``(ndofs, samples)`` array; residuals are
    maxima over samples and elements, the ratio is the maximum over samples.
    """
    disc = lifting.disc
    X = V.values[:, None] if isinstance(V, DofVector) else np.asarray(V, float)
    if X.ndim == 1:
        X = X[:, None]
    S = X.shape[1]
    L = lifting.matrix @ X
    grams = norm_grams(disc)
    dm = disc.dofmap
    proj = cons = 0.0
    grad_sq = np.zeros(S)
    energy_sq = np.einsum("is,is->s", X, grams.energy @ X)
    for el, ops, form, NT in zip(lifting.elements, disc.ops, disc.forms, grams.energy_local):
        x = X[dm.local_indices(el.T)]
        Ln = L[el.nodes]
        w = ops.rule.weights
        nk = ops.nk
        # (i) pi^k of L_h v against R_T^L v
        mom = ops.values[:, :nk].T @ (w[:, None] * (el.values @ Ln))
        d = np.linalg.solve(ops.mass[:nk, :nk], mom) - ops.projected_potential @ x
        proj = max(proj, float(np.sqrt(np.einsum("is,ij,js->s", d, ops.mass[:nk, :nk], d).max())))
        # (ii) a_T(sigma_T w, v) against int grad w . grad L_h v
        C = _raw_monomial_coefficients(ops)
        lhs = (form.stiffness @ ops.interpolation @ C).T @ x
        gL = np.einsum("qnd,ns->qsd", el.grads, Ln)
        gw = np.einsum("qad,ab->qbd", ops.grads, C)
        rhs = np.einsum("q,qbd,qsd->bs", w, gw, gL)
        nrm = np.sqrt(np.maximum(np.einsum("is,ij,js->s", x, NT, x), 0.0))
        res = np.abs(lhs - rhs).max(axis=0)
        scale = np.where(nrm > 1e-300, nrm, 1.0)
        cons = max(cons, float((res / scale).max()))
        grad_sq += np.einsum("q,qsd->s", w, gL**2)
    en = np.sqrt(np.maximum(energy_sq, 0.0))
    ratio = np.where(en > 0, np.sqrt(grad_sq) / np.where(en > 0, en, 1.0), 0.0)
    return LiftingReport(proj, cons, float(ratio.max()), S)


def random_dofs(disc: Discretization, samples: int, seed: int = 0) -> np.ndarray:
    """Members of V_h with interior entries uniform in [-1, 1], boundary entries zero."""
    rng = np.random.default_rng(seed)
    X = np.zeros((disc.dofmap.ndofs, samples))
    X[: disc.dofmap.n_interior] = rng.uniform(-1.0, 1.0, (disc.dofmap.n_interior, samples))
    return X
