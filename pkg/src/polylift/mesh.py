"""Polygonal meshes of the plane, mesh family generators and the fan submesh."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence, Union

import numpy as np

FAMILIES = ("cartesian", "distorted-quad", "hexagonal-dominant", "triangular")

# relative threshold on signed areas (fan triangles, element cycles)
AREA_TOL = 1e-12


class MeshError(ValueError):
    """Base class for mesh problems."""


class MeshParseError(MeshError):
    pass


class MeshValidationError(MeshError):
    pass


def signed_area(points: np.ndarray) -> float:
    """Shoelace formula for a closed polygon given by its vertex cycle."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def _triangle_area(a, b, c) -> float:
    return 0.5 * float((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))


@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    """Conforming polygonal mesh.

    Elements are counterclockwise vertex cycles.  Local edge ``i`` of an
    element joins cycle vertices ``i`` and ``i + 1``; ``element_edges[T][i]``
    is its global index.  Global edges are stored with ``start < end``, which
    fixes the orientation used by edge polynomial bases.
    """

    vertices: np.ndarray
    elements: tuple
    edges: np.ndarray
    edge_boundary: np.ndarray
    edge_elements: tuple
    element_edges: tuple
    star_centers: np.ndarray
    diameters: np.ndarray
    areas: np.ndarray
    vertex_boundary: np.ndarray = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def element_points(self, T: int) -> np.ndarray:
        return self.vertices[self.elements[T]]

    def edge_length(self, E: int) -> float:
        a, b = self.vertices[self.edges[E]]
        return float(np.linalg.norm(b - a))

    def local_edge_same_orientation(self, T: int, i: int) -> bool:
        """Whether local edge ``i`` of ``T`` runs along the global orientation."""
        cyc = self.elements[T]
        return cyc[i] < cyc[(i + 1) % len(cyc)]

    @classmethod
    def from_polygons(
        cls,
        vertices: Sequence,
        elements: Sequence[Sequence[int]],
        star_centers: Optional[Sequence] = None,
    ) -> "PolygonalMesh":
        verts = np.asarray(vertices, dtype=float).reshape(-1, 2)
        elems = tuple(np.asarray(e, dtype=int) for e in elements)
        if not elems:
            raise MeshValidationError("mesh has no elements")
        nv = len(verts)

        edge_index: dict = {}
        edge_list: list = []
        incidence: list = []
        element_edges = []
        areas = np.empty(len(elems))
        for T, cyc in enumerate(elems):
            if len(cyc) < 3:
                raise MeshValidationError(f"element {T} has fewer than 3 vertices")
            if cyc.min() < 0 or cyc.max() >= nv:
                raise MeshValidationError(f"element {T} references an unknown vertex")
            if len(set(cyc.tolist())) != len(cyc):
                raise MeshValidationError(f"element {T} repeats a vertex")
            pts = verts[cyc]
            areas[T] = signed_area(pts)
            scale = np.ptp(pts, axis=0).max() ** 2
            if areas[T] <= AREA_TOL * scale:
                raise MeshValidationError(
                    f"element {T} is not counterclockwise (signed area {areas[T]:.3e})"
                )
            eids = []
            for i in range(len(cyc)):
                a, b = int(cyc[i]), int(cyc[(i + 1) % len(cyc)])
                key = (min(a, b), max(a, b))
                if key not in edge_index:
                    edge_index[key] = len(edge_list)
                    edge_list.append(key)
                    incidence.append([])
                E = edge_index[key]
                incidence[E].append((T, a < b))
                eids.append(E)
            element_edges.append(np.array(eids, dtype=int))

        for E, inc in enumerate(incidence):
            if len(inc) > 2:
                raise MeshValidationError(f"edge {edge_list[E]} shared by {len(inc)} elements")
            if len(inc) == 2 and inc[0][1] == inc[1][1]:
                raise MeshValidationError(
                    f"edge {edge_list[E]} has the same orientation in both elements"
                )
        used = np.zeros(nv, dtype=bool)
        for cyc in elems:
            used[cyc] = True
        if not used.all():
            raise MeshValidationError(
                f"dangling vertices not attached to any element: {np.flatnonzero(~used)[:5].tolist()}"
            )

        edges = np.array(edge_list, dtype=int)
        edge_boundary = np.array([len(inc) == 1 for inc in incidence])
        vertex_boundary = np.zeros(nv, dtype=bool)
        vertex_boundary[edges[edge_boundary].ravel()] = True

        if star_centers is None:
            centers = np.array([polygon_centroid(verts[c]) for c in elems])
        else:
            centers = np.asarray(star_centers, dtype=float).reshape(-1, 2)
            if len(centers) != len(elems):
                raise MeshValidationError("starCenters must have one point per element")

        diameters = np.empty(len(elems))
        for T, cyc in enumerate(elems):
            pts = verts[cyc]
            diff = pts[:, None, :] - pts[None, :, :]
            diameters[T] = np.sqrt((diff**2).sum(-1)).max()
            xT = centers[T]
            for i in range(len(cyc)):
                tri_area = _triangle_area(xT, pts[i], pts[(i + 1) % len(cyc)])
                if tri_area <= AREA_TOL * diameters[T] ** 2:
                    raise MeshValidationError(
                        f"star center of element {T} does not see edge {i}: "
                        "the fan triangulation is not positively oriented"
                    )

        return cls(
            vertices=verts,
            elements=elems,
            edges=edges,
            edge_boundary=edge_boundary,
            edge_elements=tuple(tuple(t for t, _ in inc) for inc in incidence),
            element_edges=tuple(element_edges),
            star_centers=centers,
            diameters=diameters,
            areas=areas,
            vertex_boundary=vertex_boundary,
        )

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "elements": [c.tolist() for c in self.elements],
            "starCenters": self.star_centers.tolist(),
        }

    def checksum(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def same_as(self, other: "PolygonalMesh") -> bool:
        return (
            np.array_equal(self.vertices, other.vertices)
            and len(self.elements) == len(other.elements)
            and all(np.array_equal(a, b) for a, b in zip(self.elements, other.elements))
            and np.array_equal(self.star_centers, other.star_centers)
        )


# ---------------------------------------------------------------- generators


def _grid(n: int):
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    return verts, vid


def _quads(n: int, vid):
    return [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            for j in range(n) for i in range(n)]


def _hexagonal(n: int):
    W = H = 1.0 / n
    delta = 0.1 / n

    def walls(j):
        if j % 2 == 0:
            return [i * W for i in range(n + 1)]
        return [0.0] + [(i + 0.5) * W for i in range(n)] + [1.0]

    vertices: list = []
    interface_nodes = []  # per interface: sorted list of (x, vertex id)
    for j in range(n + 1):
        lower = set(walls(j - 1)) if j >= 1 else set()
        upper = set(walls(j)) if j <= n - 1 else set()
        xs = sorted(lower | upper)
        nodes = []
        for x in xs:
            y = j * H
            if 0 < j < n and 0.0 < x < 1.0:
                y += delta if x in upper else -delta
            nodes.append((x, len(vertices)))
            vertices.append((x, y))
        interface_nodes.append(nodes)

    elements = []
    for j in range(n):
        w = walls(j)
        for xa, xb in zip(w[:-1], w[1:]):
            bottom = [v for x, v in interface_nodes[j] if xa <= x <= xb]
            top = [v for x, v in interface_nodes[j + 1] if xa <= x <= xb]
            elements.append(bottom + top[::-1])
    return np.array(vertices), elements


def generate_mesh(family: str, n: int, seed: int = 0) -> PolygonalMesh:
    """Mesh of the unit square from one of the built-in families."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if family == "cartesian":
        verts, vid = _grid(n)
        return PolygonalMesh.from_polygons(verts, _quads(n, vid))
    if family == "distorted-quad":
        verts, vid = _grid(n)
        rng = np.random.default_rng(seed)
        interior = np.all((verts > 0.0) & (verts < 1.0), axis=1)
        m = int(interior.sum())
        r = (0.2 / n) * rng.uniform(0.0, 1.0, m)
        theta = rng.uniform(0.0, 2 * np.pi, m)
        verts = verts.copy()
        verts[interior] += np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        return PolygonalMesh.from_polygons(verts, _quads(n, vid))
    if family == "triangular":
        verts, vid = _grid(n)
        tris = []
        for j in range(n):
            for i in range(n):
                a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
                tris += [[a, b, c], [a, c, d]]
        return PolygonalMesh.from_polygons(verts, tris)
    if family == "hexagonal-dominant":
        verts, elems = _hexagonal(n)
        return PolygonalMesh.from_polygons(verts, elems)
    raise ValueError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")


# ---------------------------------------------------------------- file format


def load_mesh(source: Union[bytes, str, IO]) -> PolygonalMesh:
    """Read the JSON mesh format; star centers default to element centroids."""
    if hasattr(source, "read"):
        source = source.read()
    try:
        data = json.loads(source)
        vertices = np.asarray(data["vertices"], dtype=float)
        elements = [list(map(int, e)) for e in data["elements"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise MeshParseError(f"malformed mesh stream: {exc}") from exc
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshParseError("vertices must be a list of [x, y] pairs")
    return PolygonalMesh.from_polygons(vertices, elements, data.get("starCenters"))


def dump_mesh(mesh: PolygonalMesh) -> bytes:
    return json.dumps(mesh.to_dict()).encode("utf-8")


# ---------------------------------------------------------------- submesh


@dataclass(frozen=True, eq=False)
class SimplicialSubmesh:
    """Fan triangulation: point ``nV + T`` is the star center of element ``T``.

    Triangle rows are ``(star center, v_i, v_{i+1})`` so the first local
    vertex is always the element center.
    """

    points: np.ndarray
    triangles: np.ndarray
    parent: np.ndarray
    element_triangles: tuple

    def triangle_areas(self) -> np.ndarray:
        p = self.points[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def build_submesh(mesh: PolygonalMesh) -> SimplicialSubmesh:
    nv = mesh.num_vertices
    points = np.vstack([mesh.vertices, mesh.star_centers])
    tris, parent, per_elem = [], [], []
    for T, cyc in enumerate(mesh.elements):
        start = len(tris)
        m = len(cyc)
        for i in range(m):
            tris.append((nv + T, int(cyc[i]), int(cyc[(i + 1) % m])))
            parent.append(T)
        per_elem.append(np.arange(start, len(tris)))
    sub = SimplicialSubmesh(points, np.array(tris, dtype=int), np.array(parent), tuple(per_elem))
    areas = sub.triangle_areas()
    bad = np.flatnonzero(areas <= AREA_TOL * mesh.diameters[sub.parent] ** 2)
    if bad.size:
        raise MeshValidationError(
            f"degenerate fan triangle {int(bad[0])} in element {int(sub.parent[bad[0]])}"
        )
    return sub


# ---------------------------------------------------------------- regularity


@dataclass(frozen=True)
class RegularityReport:
    estimated_rho: float
    min_edge_ratio: float
    worst_element: int


def regularity_report(mesh: PolygonalMesh) -> RegularityReport:
    rho = np.empty(mesh.num_elements)
    edge_ratio = np.empty(mesh.num_elements)
    for T, cyc in enumerate(mesh.elements):
        pts = mesh.vertices[cyc]
        nxt = np.roll(pts, -1, axis=0)
        xT = mesh.star_centers[T]
        inradius = min(point_segment_distance(xT, a, b) for a, b in zip(pts, nxt))
        rho[T] = inradius / mesh.diameters[T]
        edge_ratio[T] = np.linalg.norm(nxt - pts, axis=1).min() / mesh.diameters[T]
    worst = int(np.argmin(rho))
    return RegularityReport(float(rho[worst]), float(edge_ratio.min()), worst)
