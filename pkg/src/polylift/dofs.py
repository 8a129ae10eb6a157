"""Discrete space of element moments, edge moments and vertex values."""

from __future__ import annotations

import json
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .mesh import PolygonalMesh, SimplicialSubmesh, build_submesh
from .poly import EdgeBasis, ElementBasis, QuadratureRule, dim_poly, edge_quadrature, element_quadrature, l2_project

ORTHONORMAL_FROM_DEGREE = 2

Function = Callable[[np.ndarray], np.ndarray]


class DofMap:
    """Global numbering; interior unknowns first, boundary unknowns at the tail.

    Interior block: all element moments, interior edge moments, interior
    vertex values.  Boundary block: boundary edge moments, then boundary
    vertex values.
    """

    def __init__(self, mesh: PolygonalMesh, k: int):
        if k < 0:
            raise ValueError("k must be >= 0")
        self.k = k
        self.n_element = dim_poly(k - 1)
        self.n_edge = k
        nT, nE, nV = mesh.num_elements, mesh.num_edges, mesh.num_vertices

        self.element_offset = np.arange(nT) * self.n_element
        pos = nT * self.n_element
        self.edge_offset = np.empty(nE, dtype=int)
        self.vertex_index = np.empty(nV, dtype=int)
        interior_edges = np.flatnonzero(~mesh.edge_boundary)
        boundary_edges = np.flatnonzero(mesh.edge_boundary)
        interior_vertices = np.flatnonzero(~mesh.vertex_boundary)
        boundary_vertices = np.flatnonzero(mesh.vertex_boundary)

        self.edge_offset[interior_edges] = pos + np.arange(len(interior_edges)) * k
        pos += len(interior_edges) * k
        self.vertex_index[interior_vertices] = pos + np.arange(len(interior_vertices))
        pos += len(interior_vertices)
        self.n_interior = pos
        self.edge_offset[boundary_edges] = pos + np.arange(len(boundary_edges)) * k
        pos += len(boundary_edges) * k
        self.vertex_index[boundary_vertices] = pos + np.arange(len(boundary_vertices))
        pos += len(boundary_vertices)
        self.ndofs = pos

        self._mesh = mesh
        self._local = [self._build_local(T) for T in range(nT)]

    @property
    def n_boundary(self) -> int:
        return self.ndofs - self.n_interior

    def _build_local(self, T: int) -> np.ndarray:
        mesh = self._mesh
        parts = [self.element_offset[T] + np.arange(self.n_element)]
        for E in mesh.element_edges[T]:
            parts.append(self.edge_offset[E] + np.arange(self.n_edge))
        parts.append(self.vertex_index[mesh.elements[T]])
        return np.concatenate(parts).astype(int)

    def local_indices(self, T: int) -> np.ndarray:
        """Global indices of the local vector: element block, edges of E_T, vertices."""
        return self._local[T]

    def local_size(self, T: int) -> int:
        return len(self._local[T])

    def global_to_local(self, T: int) -> dict:
        return {int(g): i for i, g in enumerate(self._local[T])}

    def element_slice(self, T: int) -> slice:
        o = self.element_offset[T]
        return slice(o, o + self.n_element)

    def edge_slice(self, E: int) -> slice:
        o = self.edge_offset[E]
        return slice(o, o + self.n_edge)


class DiscreteSpace:
    """Mesh, degree, submesh and numbering, with cached bases and quadratures."""

    def __init__(self, mesh: PolygonalMesh, k: int, submesh: Optional[SimplicialSubmesh] = None,
                 orthonormal: Optional[bool] = None):
        self.mesh = mesh
        self.k = k
        self.submesh = submesh if submesh is not None else build_submesh(mesh)
        self.dofmap = DofMap(mesh, k)
        # element coefficients refer to orthonormalized monomials when enabled
        self.orthonormal = k >= ORTHONORMAL_FROM_DEGREE if orthonormal is None else orthonormal
        self._rules: dict = {}
        self._transforms: dict = {}

    @property
    def element_degree(self) -> int:
        return 2 * (self.k + 2)

    @property
    def edge_points(self) -> int:
        return self.k + 2

    def element_basis(self, T: int, degree: int) -> ElementBasis:
        """Basis of P^degree(T); degrees up to k+1 share one orthonormalization."""
        center, h = self.mesh.star_centers[T], self.mesh.diameters[T]
        if not self.orthonormal:
            return ElementBasis(center, h, degree)
        top = max(degree, self.k + 1)
        key = (T, top)
        if key not in self._transforms:
            raw = ElementBasis(center, h, top)
            self._transforms[key] = raw.orthonormalizer(self.element_rule(T, max(self.element_degree, 2 * top)))
        return ElementBasis(center, h, degree, self._transforms[key])

    def element_rule(self, T: int, degree: Optional[int] = None) -> QuadratureRule:
        degree = self.element_degree if degree is None else degree
        key = ("T", T, degree)
        if key not in self._rules:
            self._rules[key] = element_quadrature(self.mesh, self.submesh, T, degree)
        return self._rules[key]

    def edge_basis(self, E: int, degree: int) -> EdgeBasis:
        a, b = self.mesh.vertices[self.mesh.edges[E]]
        return EdgeBasis(a, b, degree)

    def edge_rule(self, E: int, npoints: Optional[int] = None) -> QuadratureRule:
        npoints = self.edge_points if npoints is None else npoints
        key = ("E", E, npoints)
        if key not in self._rules:
            a, b = self.mesh.vertices[self.mesh.edges[E]]
            self._rules[key] = edge_quadrature(a, b, npoints)
        return self._rules[key]

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.dofmap.ndofs, dtype=bool)
        mask[self.dofmap.n_interior:] = True
        return mask


class DofVector:
    """Coefficient vector over the global numbering of a :class:`DiscreteSpace`.

    Element and edge blocks hold the coefficients of the P^{k-1} projections
    in the scaled monomial bases.
    """

    def __init__(self, space: DiscreteSpace, values: Optional[np.ndarray] = None):
        self.space = space
        n = space.dofmap.ndofs
        self.values = np.zeros(n) if values is None else np.asarray(values, dtype=float).copy()
        if self.values.shape != (n,):
            raise ValueError(f"expected {n} values, got shape {self.values.shape}")

    def element_moments(self, T: int) -> np.ndarray:
        return self.values[self.space.dofmap.element_slice(T)]

    def edge_moments(self, E: int) -> np.ndarray:
        return self.values[self.space.dofmap.edge_slice(E)]

    @property
    def vertex_values(self) -> np.ndarray:
        return self.values[self.space.dofmap.vertex_index]

    @property
    def interior(self) -> np.ndarray:
        return self.values[: self.space.dofmap.n_interior]

    @property
    def boundary(self) -> np.ndarray:
        return self.values[self.space.dofmap.n_interior:]

    def is_homogeneous(self) -> bool:
        return bool(np.all(self.boundary == 0.0))

    def __add__(self, other: "DofVector") -> "DofVector":
        return DofVector(self.space, self.values + other.values)

    def __sub__(self, other: "DofVector") -> "DofVector":
        return DofVector(self.space, self.values - other.values)

    def __mul__(self, c: float) -> "DofVector":
        return DofVector(self.space, c * self.values)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        mesh = self.space.mesh
        return {
            "k": self.space.k,
            "mesh": mesh.checksum(),
            "elements": [self.element_moments(T).tolist() for T in range(mesh.num_elements)],
            "edges": [self.edge_moments(E).tolist() for E in range(mesh.num_edges)],
            "vertices": self.vertex_values.tolist(),
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict()).encode()

    @classmethod
    def from_dict(cls, space: DiscreteSpace, data: dict) -> "DofVector":
        if data["k"] != space.k or data["mesh"] != space.mesh.checksum():
            raise ValueError("DOF vector was written for a different mesh or degree")
        v = cls(space)
        dm = space.dofmap
        for T, block in enumerate(data["elements"]):
            v.values[dm.element_slice(T)] = block
        for E, block in enumerate(data["edges"]):
            v.values[dm.edge_slice(E)] = block
        v.values[dm.vertex_index] = data["vertices"]
        return v


def interpolate(space: DiscreteSpace, v: Function) -> DofVector:
    """Element/edge L2 projections onto P^{k-1} and vertex values of ``v``."""
    mesh, k, dm = space.mesh, space.k, space.dofmap
    out = DofVector(space)
    if k > 0:
        for T in range(mesh.num_elements):
            out.values[dm.element_slice(T)] = l2_project(
                space.element_basis(T, k - 1), space.element_rule(T), v
            )
        for E in range(mesh.num_edges):
            out.values[dm.edge_slice(E)] = l2_project(
                space.edge_basis(E, k - 1), space.edge_rule(E), v
            )
    out.values[dm.vertex_index] = np.asarray(v(mesh.vertices), dtype=float)
    return out


def restrict(v: DofVector, T: int) -> np.ndarray:
    """Local vector: element moments, edge moments along E_T, vertex values along the cycle."""
    return v.values[v.space.dofmap.local_indices(T)]


def apply_dirichlet(v: DofVector, g: Optional[Function] = None) -> DofVector:
    """Copy of ``v`` with boundary blocks replaced by the DOFs of ``g`` (zero if None)."""
    space = v.space
    mesh, k, dm = space.mesh, space.k, space.dofmap
    out = DofVector(space, v.values)
    out.values[dm.n_interior:] = 0.0
    if g is None:
        return out
    if k > 0:
        for E in np.flatnonzero(mesh.edge_boundary):
            out.values[dm.edge_slice(E)] = l2_project(space.edge_basis(E, k - 1), space.edge_rule(E), g)
    bv = np.flatnonzero(mesh.vertex_boundary)
    out.values[dm.vertex_index[bv]] = np.asarray(g(mesh.vertices[bv]), dtype=float)
    return out
