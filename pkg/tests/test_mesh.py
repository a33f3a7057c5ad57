import numpy as np
import pytest

from darcy_benard.mesh import BoundaryTag, boundary_faces, build_unit_square


def test_single_cell():
    m = build_unit_square(1)
    assert (m.n_cells, m.n_vertices, m.cell_size_h) == (1, 4, 1.0)


def test_two_by_two_counts():
    m = build_unit_square(2)
    assert (m.n_cells, m.n_vertices) == (4, 9)


def test_n128_cell_count():
    assert build_unit_square(128).n_cells == 16384


@pytest.mark.parametrize("n", [0, -3, 2.5])
def test_rejects_bad_n(n):
    with pytest.raises(ValueError):
        build_unit_square(n)


def test_vertices_lexicographic_x_fastest():
    m = build_unit_square(3)
    assert np.allclose(m.vertex_coords[:4], [[0, 0], [1 / 3, 0], [2 / 3, 0], [1, 0]])
    assert np.allclose(m.vertex_coords[4], [0, 1 / 3])


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_cells_are_ccw_squares_of_side_h(n):
    m = build_unit_square(n)
    v = m.vertex_coords[m.cell_vertex_ids]  # (cells, 4, 2)
    h = m.cell_size_h
    assert np.allclose(v[:, 1] - v[:, 0], [h, 0])
    assert np.allclose(v[:, 2] - v[:, 1], [0, h])
    assert np.allclose(v[:, 3] - v[:, 2], [-h, 0])
    assert np.all((m.vertex_coords >= 0) & (m.vertex_coords <= 1))
    area = np.sum((v[:, 2, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1]))
    assert abs(area - 1.0) <= 1e-14


@pytest.mark.parametrize("n", [2, 4, 7])
def test_vertex_valence(n):
    m = build_unit_square(n)
    count = np.bincount(m.cell_vertex_ids.ravel(), minlength=m.n_vertices).reshape(n + 1, n + 1)
    assert np.all(count[1:-1, 1:-1] == 4)
    assert count[0, 0] == count[0, -1] == count[-1, 0] == count[-1, -1] == 1
    assert np.all(count[0, 1:-1] == 2)


def test_boundary_face_counts():
    assert len(boundary_faces(build_unit_square(4), BoundaryTag.Bottom)) == 4
    m1 = build_unit_square(1)
    assert all(len(boundary_faces(m1, t)) == 1 for t in BoundaryTag)
    m64 = build_unit_square(64)
    assert sum(len(boundary_faces(m64, t)) for t in BoundaryTag) == 256


@pytest.mark.parametrize("tag", list(BoundaryTag))
def test_boundary_faces_lie_on_their_edge_in_order(tag):
    m = build_unit_square(5)
    faces = boundary_faces(m, tag)
    along = []
    for cell, face in faces:
        v = m.vertex_coords[m.cell_vertex_ids[cell]]
        a, b = v[face], v[(face + 1) % 4]
        mid = 0.5 * (a + b)
        along.append(mid[0] if tag in (BoundaryTag.Bottom, BoundaryTag.Top) else mid[1])
        coord = {BoundaryTag.Bottom: (1, 0.0), BoundaryTag.Top: (1, 1.0),
                 BoundaryTag.Left: (0, 0.0), BoundaryTag.Right: (0, 1.0)}[tag]
        assert mid[coord[0]] == coord[1]
    assert np.all(np.diff(along) > 0)


def test_every_boundary_face_has_exactly_one_tag():
    m = build_unit_square(4)
    faces = [f for t in BoundaryTag for f in boundary_faces(m, t)]
    assert len(faces) == len(set(faces)) == 16


def test_locate_points():
    m = build_unit_square(4)
    cells, ref = m.locate([[0.3, 0.6], [1.0, 1.0], [0.0, 0.0]])
    assert list(cells) == [2 * 4 + 1, 15, 0]
    assert np.allclose(ref, [[0.2, 0.4], [1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        m.locate([[1.5, 0.2]])


def test_boundary_tag_parse():
    assert BoundaryTag.parse(" Left ") is BoundaryTag.Left
    with pytest.raises(ValueError):
        BoundaryTag.parse("front")
