"""Local stabilized forms, global assembly, loads and the SPD solve."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dofs import DiscreteSpace, DofVector, apply_dirichlet
from .mesh import PolygonalMesh
from .recon import ElementOperators, build_all

LOAD_VARIANTS = ("projected", "potential")


class SolverError(RuntimeError):
    pass


class QuadratureBudgetError(ValueError):
    pass


@dataclass
class LocalForm:
    stiffness: np.ndarray
    stabilization: np.ndarray  # s_T evaluated on (I - sigma_T R_T^a) v
    consistency: np.ndarray  # Gram of G_T in P^k(T;R^2)


def local_stabilization(ops: ElementOperators) -> np.ndarray:
    """Matrix of s_T on raw local DOF vectors; the element block does not contribute."""
    S = np.zeros((ops.ndofs, ops.ndofs))
    for ed in ops.edges:
        idx = ed.moment_dofs
        S[np.ix_(idx, idx)] += ed.moment_mass / ops.diameter
    S[ops.vertex_dofs, ops.vertex_dofs] += 1.0
    return S


def local_stiffness(ops: ElementOperators) -> LocalForm:
    consistency = ops.gradient.T @ ops.vector_mass @ ops.gradient
    residual = np.eye(ops.ndofs) - ops.interpolation @ ops.potential
    stab = residual.T @ local_stabilization(ops) @ residual
    A = consistency + stab
    return LocalForm(0.5 * (A + A.T), 0.5 * (stab + stab.T), 0.5 * (consistency + consistency.T))


class Discretization:
    """Element operators and local forms for one (mesh, k) pair."""

    def __init__(self, mesh: PolygonalMesh, k: int, threads: int = 1, space: Optional[DiscreteSpace] = None):
        self.space = space if space is not None else DiscreteSpace(mesh, k)
        self.mesh = self.space.mesh
        self.k = self.space.k
        self.dofmap = self.space.dofmap
        self.ops: List[ElementOperators] = build_all(self.space, threads)
        self.forms: List[LocalForm] = [local_stiffness(o) for o in self.ops]

    def scatter(self, local: List[np.ndarray]) -> sp.csr_matrix:
        """Sum element matrices into a global sparse matrix (fixed accumulation order)."""
        rows, cols, vals = [], [], []
        for T, M in enumerate(local):
            idx = self.dofmap.local_indices(T)
            rows.append(np.repeat(idx, len(idx)))
            cols.append(np.tile(idx, len(idx)))
            vals.append(M.ravel())
        n = self.dofmap.ndofs
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        return A.tocsr()

    def scatter_vector(self, local: List[np.ndarray]) -> np.ndarray:
        b = np.zeros(self.dofmap.ndofs)
        for T, v in enumerate(local):
            np.add.at(b, self.dofmap.local_indices(T), v)
        return b

    def stiffness_matrix(self) -> sp.csr_matrix:
        if not hasattr(self, "_stiffness"):
            self._stiffness = self.scatter([f.stiffness for f in self.forms])
        return self._stiffness

    def local_load(self, T: int, f: Callable, variant: str = "projected") -> np.ndarray:
        ops = self.ops[T]
        fq = np.asarray(f(ops.rule.points), dtype=float)
        moments = ops.values.T @ (ops.rule.weights * fq)
        if variant == "projected":
            return ops.projected_potential.T @ moments[: ops.nk]
        if variant == "potential":
            return ops.potential.T @ moments
        raise ValueError(f"unknown load variant {variant!r}; expected one of {LOAD_VARIANTS}")

    def load_vector(self, f: Callable, variant: str = "projected", f_degree: Optional[int] = None) -> np.ndarray:
        """Global load over all DOFs (boundary rows included)."""
        if f_degree is not None:
            test_degree = self.k if variant == "projected" else self.k + 1
            if f_degree + test_degree > self.space.element_degree:
                raise QuadratureBudgetError(
                    f"load of degree {f_degree} exceeds the quadrature budget "
                    f"{self.space.element_degree - test_degree}"
                )
        return self.scatter_vector([self.local_load(T, f, variant) for T in range(self.mesh.num_elements)])


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix  # interior x interior
    rhs: np.ndarray
    boundary_values: np.ndarray
    discretization: Discretization


def assemble(disc: Discretization, f: Optional[Callable] = None, g: Optional[Callable] = None,
             load: str = "projected", f_degree: Optional[int] = None) -> LinearSystem:
    """Interior system after eliminating the Dirichlet DOFs of ``g``."""
    n_int = disc.dofmap.n_interior
    A = disc.stiffness_matrix()
    b = np.zeros(disc.dofmap.ndofs) if f is None else disc.load_vector(f, load, f_degree)
    ub = apply_dirichlet(DofVector(disc.space), g).boundary
    A_II = A[:n_int, :n_int]
    A_IB = A[:n_int, n_int:]
    rhs = b[:n_int] - A_IB @ ub
    return LinearSystem(A_II.tocsr(), rhs, ub, disc)


def spd_factor(A: sp.spmatrix):
    """Symmetric-mode sparse LU without pivoting, used as a Cholesky factorization.

    With a symmetric fill-reducing ordering and no row pivoting, the
    diagonal of U holds the LDL^T pivots, so positivity certifies SPD.
    """
    lu = spla.splu(
        sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise SolverError("factorization pivoted rows; matrix is not positive definite")
    d = lu.U.diagonal()
    bad = np.flatnonzero(d <= 0.0)
    if bad.size:
        raise SolverError(f"matrix is not SPD: pivot {int(lu.perm_c[bad[0]])} equals {d[bad[0]]:.3e}")
    return lu


def spd_solve(A: sp.spmatrix, b: np.ndarray, rtol: float = 1e-12, lu=None) -> np.ndarray:
    if A.shape[0] == 0:
        return np.zeros(0)
    lu = spd_factor(A) if lu is None else lu
    x = lu.solve(b)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return x
    for _ in range(3):
        r = b - A @ x
        if np.linalg.norm(r) <= rtol * nb:
            return x
        x = x + lu.solve(r)
    res = np.linalg.norm(b - A @ x) / nb
    if res > rtol:
        raise SolverError(f"relative residual {res:.2e} above {rtol:.0e}")
    return x


def solve(system: LinearSystem) -> DofVector:
    disc = system.discretization
    u = DofVector(disc.space)
    n_int = disc.dofmap.n_interior
    u.values[:n_int] = spd_solve(system.matrix, system.rhs)
    u.values[n_int:] = system.boundary_values
    return u
