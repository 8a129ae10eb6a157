"""Scaled monomial bases, quadrature on the fan submesh and L2 projectors."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.special import roots_jacobi, roots_legendre

GRAM_COND_MAX = 1e12
PIVOT_RATIO_MIN = 1e-13


class DegenerateGeometryError(ArithmeticError):
    """A local matrix is too ill-conditioned to be trusted."""


def dim_poly(degree: int) -> int:
    """Dimension of P^degree in two variables (0 for degree -1)."""
    return (degree + 1) * (degree + 2) // 2 if degree >= 0 else 0


@lru_cache(maxsize=None)
def monomial_exponents(degree: int) -> np.ndarray:
    """Exponents ``(a, b)`` of x^a y^b, graded lexicographic: 1, x, y, x^2, xy, y^2, ..."""
    exps = [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]
    return np.array(exps, dtype=int).reshape(-1, 2)


def dense_solve(A: np.ndarray, B: np.ndarray, what: str = "local system") -> np.ndarray:
    """LU solve with partial pivoting; refuses near-singular matrices."""
    lu, piv = sla.lu_factor(A, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.size and d.min() < PIVOT_RATIO_MIN * d.max():
        raise DegenerateGeometryError(
            f"singular {what}: pivot ratio {d.min() / d.max():.2e}"
        )
    return sla.lu_solve((lu, piv), B, check_finite=False)


def check_gram(G: np.ndarray, what: str = "Gram matrix") -> None:
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 0 or ev[-1] > GRAM_COND_MAX * ev[0]:
        cond = np.inf if ev[0] <= 0 else ev[-1] / ev[0]
        raise DegenerateGeometryError(f"{what} condition number {cond:.2e} exceeds {GRAM_COND_MAX:.0e}")


# ---------------------------------------------------------------- bases


class ElementBasis:
    """Monomials ((x - x_T) / h_T)^alpha, |alpha| <= degree.

    With ``transform`` (an upper triangular matrix), the basis functions are
    ``monomials @ transform`` instead; triangularity keeps P^l spanned by
    the leading ``dim_poly(l)`` functions.
    """

    def __init__(self, center, diameter: float, degree: int, transform: Optional[np.ndarray] = None):
        self.center = np.asarray(center, dtype=float)
        self.diameter = float(diameter)
        self.degree = degree
        self.exponents = monomial_exponents(max(degree, 0))[: dim_poly(degree)]
        n = len(self.exponents)
        self.transform = None if transform is None else np.asarray(transform)[:n, :n]

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def scaled(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.center) / self.diameter

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values, shape ``(npoints, dim)``."""
        y = self.scaled(points)
        e = self.exponents
        V = y[:, None, 0] ** e[None, :, 0] * y[:, None, 1] ** e[None, :, 1]
        return V if self.transform is None else V @ self.transform

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Gradients, shape ``(npoints, dim, 2)``."""
        y = self.scaled(points)
        e = self.exponents
        ex, ey = e[:, 0], e[:, 1]
        px = y[:, None, 0] ** np.maximum(ex - 1, 0) * y[:, None, 1] ** ey * ex
        py = y[:, None, 0] ** ex * y[:, None, 1] ** np.maximum(ey - 1, 0) * ey
        g = np.stack([px, py], axis=-1) / self.diameter
        return g if self.transform is None else np.einsum("qad,ab->qbd", g, self.transform)

    def orthonormalizer(self, rule: "QuadratureRule") -> np.ndarray:
        """Upper triangular ``C`` making ``eval(x) @ C`` orthonormal in L2(T).

        Householder QR of the weighted Vandermonde matrix, followed by one
        Cholesky correction pass.
        """
        V = self.eval(rule.points)
        sw = np.sqrt(rule.weights)[:, None]
        _, R = np.linalg.qr(sw * V)
        R *= np.sign(np.diag(R))[:, None]
        C = sla.solve_triangular(R, np.eye(len(R)))
        L = np.linalg.cholesky(gram(V @ C, rule.weights))
        return C @ sla.solve_triangular(L.T, np.eye(len(L)))


class EdgeBasis:
    """Monomials t^j with t = (s - s_E) / h_E along the edge from ``a`` to ``b``."""

    def __init__(self, a, b, degree: int):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.degree = degree
        self.length = float(np.linalg.norm(self.b - self.a))
        self.midpoint = 0.5 * (self.a + self.b)

    @property
    def dim(self) -> int:
        return max(self.degree + 1, 0)

    def coordinate(self, points: np.ndarray) -> np.ndarray:
        d = self.b - self.a
        return (np.atleast_2d(points) - self.midpoint) @ d / self.length**2

    def eval_t(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(t)[:, None] ** np.arange(self.dim)[None, :]

    def eval(self, points: np.ndarray) -> np.ndarray:
        return self.eval_t(self.coordinate(points))


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int):
    """Collapsed Gauss-Jacobi rule on the triangle (0,0), (1,0), (0,1)."""
    m = degree // 2 + 1
    u, wu = roots_jacobi(m, 1.0, 0.0)
    v, wv = roots_legendre(m)
    a = 0.5 * (1.0 + u)
    b = 0.5 * (1.0 + v)
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.column_stack([A.ravel(), ((1.0 - A) * B).ravel()])
    w = np.outer(wu / 4.0, wv / 2.0).ravel()
    return pts, w


def triangle_quadrature(p0, p1, p2, degree: int) -> QuadratureRule:
    ref, w = reference_triangle_rule(degree)
    p0 = np.asarray(p0, float)
    J = np.column_stack([np.asarray(p1, float) - p0, np.asarray(p2, float) - p0])
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    return QuadratureRule(p0 + ref @ J.T, w * abs(det), degree)


def element_quadrature(mesh, submesh, T: int, degree: int) -> QuadratureRule:
    """Rule exact to ``degree`` on element ``T``, assembled over its fan triangles."""
    pts, wts = [], []
    for t in submesh.element_triangles[T]:
        corners = submesh.points[submesh.triangles[t]]
        r = triangle_quadrature(*corners, degree)
        pts.append(r.points)
        wts.append(r.weights)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), degree)


def edge_quadrature(a, b, npoints: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``npoints`` nodes on the segment [a, b]."""
    x, w = roots_legendre(npoints)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    s = 0.5 * (1.0 + x)
    L = float(np.linalg.norm(b - a))
    return QuadratureRule(a + s[:, None] * (b - a), 0.5 * L * w, 2 * npoints - 1)


# ---------------------------------------------------------------- projectors


def gram(values: np.ndarray, weights: np.ndarray, other: Optional[np.ndarray] = None) -> np.ndarray:
    """``int phi_i psi_j`` from basis values at quadrature points."""
    other = values if other is None else other
    return values.T @ (weights[:, None] * other)


def l2_project(basis, rule: QuadratureRule, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Coefficients of the L2-orthogonal projection of ``f`` onto ``basis``.

    ``f`` takes an ``(npoints, 2)`` array of points. Returns an empty array
    for the zero space P^{-1}.
    """
    if basis.dim == 0:
        return np.zeros(0)
    B = basis.eval(rule.points)
    G = gram(B, rule.weights)
    check_gram(G)
    rhs = B.T @ (rule.weights * np.asarray(f(rule.points), dtype=float))
    return np.linalg.solve(G, rhs)


def vector_mass_and_div_matrices(basis_k1: ElementBasis, rule: QuadratureRule):
    """Mass matrix of P^k(T;R^2) and the divergence of (x - x_T) P^{k+1}(T).

    ``basis_k1`` spans P^{k+1}(T).  The vector basis of P^k(T;R^2) is
    ``m_a e_x`` for all a, then ``m_a e_y``.  Column ``a`` of the returned
    divergence matrix holds the P^{k+1} coefficients of div((x - x_T) m_a).
    The third value is the 2-norm condition number of that matrix.
    """
    k = basis_k1.degree - 1
    nk = dim_poly(k)
    V = basis_k1.eval(rule.points)
    Mk = gram(V[:, :nk], rule.weights)
    mass = np.zeros((2 * nk, 2 * nk))
    mass[:nk, :nk] = Mk
    mass[nk:, nk:] = Mk

    Gr = basis_k1.grad(rule.points)
    r = rule.points - basis_k1.center
    div_vals = 2.0 * V + np.einsum("qd,qad->qa", r, Gr)
    Mk1 = gram(V, rule.weights)
    check_gram(Mk1)
    div = np.linalg.solve(Mk1, gram(V, rule.weights, div_vals))
    cond = np.linalg.cond(div)
    if not np.isfinite(cond) or cond > GRAM_COND_MAX:
        raise DegenerateGeometryError(f"divergence matrix condition {cond:.2e}")
    return mass, div, cond
