"""Discrete norms, dual norms of consistency errors and equivalence probes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .dofs import DofVector, interpolate
from .recon import ElementOperators
from .scheme import Discretization, spd_factor, spd_solve

KINDS = ("E_h", "frak_E_h")
# relative eigenvalue threshold separating a Gram kernel from its range
KERNEL_TOL = 1e-10


def local_energy_gram(ops: ElementOperators) -> np.ndarray:
    """||G_T v||^2 + h_T^{-1} ||R_T^a v - gamma_dT v||^2_{L2(dT)} as a matrix."""
    N = ops.gradient.T @ ops.vector_mass @ ops.gradient
    for ed in ops.edges:
        D = ed.poly_at_q @ ops.potential - ed.trace_at_q
        N += (D.T * ed.rule.weights) @ D / ops.diameter
    return 0.5 * (N + N.T)


def local_h1_gram(ops: ElementOperators) -> np.ndarray:
    """DOF-based H1-like norm; v_T is the element moment polynomial (zero when k = 0)."""
    n_el, k, N = ops.n_element, ops.k, ops.ndofs
    M = np.zeros((N, N))
    g = ops.grads[:, :n_el]
    M[:n_el, :n_el] = np.einsum("q,qad,qbd->ab", ops.rule.weights, g, g)
    for ed in ops.edges:
        if k == 0:
            continue
        D = np.zeros((len(ed.t), N))
        D[:, :n_el] = ed.poly_at_q[:, :n_el]
        D[:, ed.moment_dofs] -= ed.t[:, None] ** np.arange(k)[None, :]
        M += (D.T * ed.rule.weights) @ D / ops.diameter
    Vv = ops.interpolation[ops.vertex_dofs]  # basis values at the vertices
    D = np.zeros((len(ops.vertex_dofs), N))
    D[:, :n_el] = Vv[:, :n_el]
    D[np.arange(len(ops.vertex_dofs)), ops.vertex_dofs] -= 1.0
    M += D.T @ D
    return 0.5 * (M + M.T)


@dataclass
class NormGram:
    energy_local: list
    h1_local: list
    energy: sp.csr_matrix
    h1: sp.csr_matrix
    n_interior: int

    def select(self, which: str) -> sp.csr_matrix:
        return {"energy": self.energy, "h1": self.h1}[which]

    def interior(self, which: str = "energy") -> sp.csr_matrix:
        n = self.n_interior
        return self.select(which)[:n, :n].tocsc()


def norm_grams(disc: Discretization) -> NormGram:
    if getattr(disc, "_norm_grams", None) is None:
        el = [local_energy_gram(o) for o in disc.ops]
        h1 = [local_h1_gram(o) for o in disc.ops]
        disc._norm_grams = NormGram(el, h1, disc.scatter(el), disc.scatter(h1), disc.dofmap.n_interior)
    return disc._norm_grams


def _vec(v) -> np.ndarray:
    return v.values if isinstance(v, DofVector) else np.asarray(v)


def energy_norm(disc: Discretization, v) -> float:
    x = _vec(v)
    return float(np.sqrt(max(x @ (norm_grams(disc).energy @ x), 0.0)))


def dof_h1_norm(disc: Discretization, v) -> float:
    x = _vec(v)
    return float(np.sqrt(max(x @ (norm_grams(disc).h1 @ x), 0.0)))


def local_energy_norm(disc: Discretization, T: int, v_local: np.ndarray) -> float:
    N = norm_grams(disc).energy_local[T]
    return float(np.sqrt(max(v_local @ N @ v_local, 0.0)))


# ---------------------------------------------------------------- dual norms


@dataclass
class ConsistencyFunctional:
    vector: np.ndarray  # over interior DOFs
    kind: str

    def __call__(self, v) -> float:
        x = _vec(v)
        return float(self.vector @ x[: len(self.vector)])


def dual_norm(disc: Discretization, functional, gram: str = "energy") -> float:
    """sqrt(eps^T N^{-1} eps) with N the chosen Gram restricted to interior DOFs."""
    eps = functional.vector if isinstance(functional, ConsistencyFunctional) else np.asarray(functional)
    if not np.any(eps):
        return 0.0
    grams = norm_grams(disc)
    cache = disc.__dict__.setdefault("_gram_factors", {})
    if gram not in cache:
        cache[gram] = spd_factor(grams.interior(gram))
    N = grams.interior(gram)
    y = spd_solve(N, eps, lu=cache[gram])
    return float(np.sqrt(max(eps @ y, 0.0)))


def consistency_functional(disc: Discretization, kind: str, u: Callable, laplacian: Optional[Callable] = None,
                           f: Optional[Callable] = None, load: str = "projected") -> ConsistencyFunctional:
    """l_h(v) - a_h(sigma_h u, v), or its strong form with -lap(u) tested against R_T^a v."""
    su = interpolate(disc.space, u)
    residual = disc.stiffness_matrix() @ su.values
    if kind == "E_h":
        if f is None:
            raise ValueError("E_h needs the load f")
        b = disc.load_vector(f, load)
    elif kind == "frak_E_h":
        if laplacian is None:
            raise ValueError("frak_E_h needs the closed-form Laplacian of u")
        b = disc.load_vector(lambda p: -np.asarray(laplacian(p)), "potential")
    else:
        raise ValueError(f"unknown functional kind {kind!r}; expected one of {KINDS}")
    n = disc.dofmap.n_interior
    return ConsistencyFunctional((b - residual)[:n], kind)


# ---------------------------------------------------------------- probes


def pencil_extremes(A: np.ndarray, B: np.ndarray, tol: float = KERNEL_TOL) -> Tuple[float, float]:
    """Extreme generalized eigenvalues of (A, B) on the complement of ker B.

    The kernel of ``B`` must also annihilate ``A`` (checked).
    """
    ev, Q = np.linalg.eigh(B)
    keep = ev > tol * ev.max()
    K = Q[:, ~keep]
    if K.size:
        leak = np.abs(K.T @ A @ K).max()
        if leak > 1e-8 * np.abs(A).max():
            raise ArithmeticError(f"kernel of the norm Gram is not in the form kernel (leak {leak:.2e})")
    Z = Q[:, keep]
    lam = sla.eigh(Z.T @ A @ Z, Z.T @ B @ Z, eigvals_only=True)
    return float(lam[0]), float(lam[-1])


def coercivity_bracket(disc: Discretization) -> Tuple[float, float]:
    """Min and max over elements of the Rayleigh quotient a_T(v, v) / ||v||^2_{V_T}."""
    grams = norm_grams(disc)
    lo, hi = np.inf, -np.inf
    for form, N in zip(disc.forms, grams.energy_local):
        a, b = pencil_extremes(form.stiffness, N)
        lo, hi = min(lo, a), max(hi, b)
    return lo, hi


@dataclass
class EquivalenceStats:
    sample_min: float
    sample_max: float
    eig_min: Optional[float]  # extremes of the squared-norm pencil (h1, energy)
    eig_max: Optional[float]


def norm_equivalence_probe(disc: Discretization, samples: int = 100, seed: int = 0,
                           exact: Optional[bool] = None) -> EquivalenceStats:
    """Ratios ||v||_{1,h} / ||v||_{V_h} over random interior v (entries uniform in [-1, 1]).

    The exact extremes come from a dense generalized eigensolve and are
    computed by default when there are at most 4000 interior unknowns.
    """
    grams = norm_grams(disc)
    n = disc.dofmap.n_interior
    N1 = grams.interior("h1")
    NV = grams.interior("energy")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, samples))
    r = np.sqrt(np.einsum("is,is->s", X, N1 @ X) / np.einsum("is,is->s", X, NV @ X))
    if exact is None:
        exact = n <= 4000
    lo = hi = None
    if exact and n:
        lam = sla.eigh(N1.toarray(), NV.toarray(), eigvals_only=True)
        lo, hi = float(lam[0]), float(lam[-1])
    return EquivalenceStats(float(r.min()), float(r.max()), lo, hi)
