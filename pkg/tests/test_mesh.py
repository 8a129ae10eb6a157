import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from polylift.mesh import (FAMILIES, MeshParseError, MeshValidationError, PolygonalMesh, build_submesh,
                           dump_mesh, generate_mesh, load_mesh, point_segment_distance,
                           regularity_report, signed_area)

DATA = Path(__file__).parent / "data"


def test_cartesian_counts():
    m = generate_mesh("cartesian", 1)
    assert (m.num_elements, m.num_edges, m.num_vertices) == (1, 4, 4)
    assert m.h == pytest.approx(np.sqrt(2), abs=1e-15)
    m = generate_mesh("cartesian", 4)
    assert (m.num_elements, m.num_edges, m.num_vertices) == (16, 40, 25)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_area_sum_and_fan(family, n):
    m = generate_mesh(family, n, seed=3)
    assert abs(m.areas.sum() - 1.0) <= 1e-12
    sub = build_submesh(m)
    per = np.bincount(sub.parent, weights=sub.triangle_areas(), minlength=m.num_elements)
    assert np.allclose(per, m.areas, rtol=0, atol=1e-12)
    for T, cyc in enumerate(m.elements):
        assert signed_area(m.vertices[cyc]) > 0


@pytest.mark.parametrize("family", FAMILIES)
def test_edge_incidence(family):
    m = generate_mesh(family, 4, seed=1)
    for E, els in enumerate(m.edge_elements):
        assert len(els) == (1 if m.edge_boundary[E] else 2)
    assert all(a < b for a, b in m.edges)


def test_hexagonal_golden():
    stored = load_mesh((DATA / "hexagonal_n8.json").read_bytes())
    fresh = generate_mesh("hexagonal-dominant", 8, 0)
    assert stored.same_as(fresh)
    assert fresh.num_elements == 68
    # independent shoelace sum over the raw polygons
    raw = json.loads((DATA / "hexagonal_n8.json").read_text())
    V = np.array(raw["vertices"])
    total = 0.0
    for cyc in raw["elements"]:
        p = V[cyc]
        total += 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
    assert total == pytest.approx(1.0, abs=1e-12)


def test_deterministic_and_seeded():
    a = generate_mesh("distorted-quad", 6, seed=4)
    assert a.same_as(generate_mesh("distorted-quad", 6, seed=4))
    assert not a.same_as(generate_mesh("distorted-quad", 6, seed=5))
    base = generate_mesh("cartesian", 6)
    shift = np.linalg.norm(a.vertices - base.vertices, axis=1)
    assert shift.max() <= 0.2 / 6 + 1e-15
    assert np.all(shift[base.vertex_boundary] == 0)


def test_round_trip():
    m = generate_mesh("cartesian", 2)
    back = load_mesh(dump_mesh(m))
    assert back.same_as(m)
    assert back.checksum() == m.checksum()


def test_clockwise_rejected():
    V = [[0, 0], [1, 0], [1, 1], [0, 1]]
    with pytest.raises(MeshValidationError):
        load_mesh(json.dumps({"vertices": V, "elements": [[0, 3, 2, 1]]}))


def test_missing_star_centers_uses_centroids():
    V = [[0, 0], [1, 0], [1, 1], [0, 1], [2, 0], [2, 1]]
    m = load_mesh(json.dumps({"vertices": V, "elements": [[0, 1, 2, 3], [1, 4, 5, 2]]}))
    assert np.allclose(m.star_centers, [[0.5, 0.5], [1.5, 0.5]])


def test_star_center_outside_rejected():
    V = [[0, 0], [1, 0], [1, 1], [0, 1]]
    with pytest.raises(MeshValidationError):
        load_mesh(json.dumps({"vertices": V, "elements": [[0, 1, 2, 3]], "starCenters": [[2.0, 0.5]]}))


def test_dangling_and_malformed():
    with pytest.raises(MeshParseError):
        load_mesh(b"{not json")
    with pytest.raises(MeshParseError):
        load_mesh(json.dumps({"vertices": [[0, 0]]}))
    V = [[0, 0], [1, 0], [1, 1], [0, 1], [5, 5]]
    with pytest.raises(MeshValidationError):
        load_mesh(json.dumps({"vertices": V, "elements": [[0, 1, 2, 3]]}))


def test_submesh_examples():
    sq = build_submesh(generate_mesh("cartesian", 1))
    assert len(sq.triangles) == 4
    assert np.allclose(sq.triangle_areas(), 0.25)
    sub = build_submesh(generate_mesh("cartesian", 2))
    assert len(sub.triangles) == 16
    assert sub.triangle_areas().sum() == pytest.approx(1.0, abs=1e-12)


def test_submesh_conforming_on_hexagons():
    m = generate_mesh("hexagonal-dominant", 4)
    hexes = [T for T, c in enumerate(m.elements) if len(c) == 6]
    assert hexes
    sub = build_submesh(m)
    assert len(sub.element_triangles[hexes[0]]) == 6
    # every triangle edge is shared by two triangles, or lies on the boundary
    count = Counter()
    for tri in sub.triangles:
        for i in range(3):
            count[tuple(sorted((int(tri[i]), int(tri[(i + 1) % 3]))))] += 1
    bnd = {tuple(e) for e, b in zip(m.edges.tolist(), m.edge_boundary) if b}
    for e, c in count.items():
        assert c == (1 if e in bnd else 2)


def test_regularity_square():
    rep = regularity_report(generate_mesh("cartesian", 1))
    assert rep.estimated_rho == pytest.approx(0.5 / np.sqrt(2), abs=1e-14)
    assert rep.min_edge_ratio == pytest.approx(1 / np.sqrt(2), abs=1e-14)
    for n in (2, 5, 9):
        r = regularity_report(generate_mesh("cartesian", n))
        assert r.estimated_rho == pytest.approx(rep.estimated_rho, rel=1e-12)
        assert r.min_edge_ratio == pytest.approx(rep.min_edge_ratio, rel=1e-12)


def test_regularity_distorted_regression():
    m = generate_mesh("distorted-quad", 8, seed=1)
    rep = regularity_report(m)
    assert rep.estimated_rho == pytest.approx(0.28176419264932423, rel=1e-12)
    # brute force over all boundary segments
    rho = []
    for T, cyc in enumerate(m.elements):
        p = m.vertices[cyc]
        d = [point_segment_distance(m.star_centers[T], p[i], p[(i + 1) % len(p)]) for i in range(len(p))]
        rho.append(min(d) / m.diameters[T])
    assert rep.estimated_rho == pytest.approx(min(rho), rel=1e-14)
    assert 0 < rep.estimated_rho < 1 and 0 < rep.min_edge_ratio <= 1


def test_unknown_family():
    with pytest.raises(ValueError):
        generate_mesh("voronoi", 3)


def test_from_polygons_is_frozen():
    m = PolygonalMesh.from_polygons(np.array([[0, 0], [1, 0], [0, 1.0]]), [[0, 1, 2]])
    assert m.num_elements == 1 and m.edge_boundary.all()
