"""Structured quadrilateral meshes of the unit square."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BoundaryTag(enum.Enum):
    """The four edges of the unit square."""

    Bottom = "bottom"  # z = 0
    Top = "top"  # z = 1
    Left = "left"  # x = 0
    Right = "right"  # x = 1

    @classmethod
    def parse(cls, name: str) -> BoundaryTag:
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown boundary {name!r}") from None


# local face ids follow the CCW vertex order: bottom, right, top, left
LOCAL_FACE = {
    BoundaryTag.Bottom: 0,
    BoundaryTag.Right: 1,
    BoundaryTag.Top: 2,
    BoundaryTag.Left: 3,
}

# outward unit normal per boundary
OUTWARD_NORMAL = {
    BoundaryTag.Bottom: (0.0, -1.0),
    BoundaryTag.Right: (1.0, 0.0),
    BoundaryTag.Top: (0.0, 1.0),
    BoundaryTag.Left: (-1.0, 0.0),
}


@dataclass(frozen=True)
class Mesh:
    """Uniform n x n grid of axis-aligned square cells.

    Vertices and cells are numbered lexicographically with x running fastest.
    Each cell lists its vertices counterclockwise starting at the lower-left
    corner.
    """

    n_cells_per_side: int
    vertex_coords: np.ndarray = field(repr=False)  # (n_vertices, 2)
    cell_vertex_ids: np.ndarray = field(repr=False)  # (n_cells, 4)

    @property
    def n(self) -> int:
        return self.n_cells_per_side

    @property
    def cell_size_h(self) -> float:
        return 1.0 / self.n_cells_per_side

    @property
    def n_cells(self) -> int:
        return self.n_cells_per_side**2

    @property
    def n_vertices(self) -> int:
        return (self.n_cells_per_side + 1) ** 2

    def cell_origin(self, cell_id) -> np.ndarray:
        """Lower-left corner(s) of the given cell(s)."""
        cell_id = np.asarray(cell_id)
        ci = cell_id % self.n
        cj = cell_id // self.n
        return np.stack([ci * self.cell_size_h, cj * self.cell_size_h], axis=-1)

    def cell_origins(self) -> np.ndarray:
        return self.cell_origin(np.arange(self.n_cells))

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Return (cell ids, reference coordinates) for points in the closed square.

        Points on interior cell edges are assigned to the cell above/right;
        points on x=1 or z=1 go to the last cell in that direction.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(pts < -1e-14) or np.any(pts > 1.0 + 1e-14):
            raise ValueError("points must lie in the unit square")
        n = self.n
        scaled = np.clip(pts, 0.0, 1.0) * n
        idx = np.minimum(np.floor(scaled).astype(np.int64), n - 1)
        ref = np.clip(scaled - idx, 0.0, 1.0)
        cells = idx[:, 1] * n + idx[:, 0]
        return cells, ref


def build_unit_square(n: int) -> Mesh:
    """Build the uniform n x n quadrilateral mesh of [0,1]^2."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    ticks = np.linspace(0.0, 1.0, n + 1)
    xv, zv = np.meshgrid(ticks, ticks, indexing="xy")
    coords = np.column_stack([xv.ravel(), zv.ravel()])

    cj, ci = np.divmod(np.arange(n * n), n)
    ll = cj * (n + 1) + ci
    cells = np.column_stack([ll, ll + 1, ll + n + 2, ll + n + 1])

    coords.setflags(write=False)
    cells.setflags(write=False)
    return Mesh(n, coords, cells)


def boundary_faces(mesh: Mesh, tag: BoundaryTag) -> list[tuple[int, int]]:
    """Boundary faces on one edge as (cell_id, local_face_id), ordered along the edge."""
    n = mesh.n
    k = np.arange(n)
    if tag is BoundaryTag.Bottom:
        cells = k
    elif tag is BoundaryTag.Top:
        cells = (n - 1) * n + k
    elif tag is BoundaryTag.Left:
        cells = k * n
    elif tag is BoundaryTag.Right:
        cells = k * n + n - 1
    else:
        raise ValueError(f"invalid boundary tag {tag!r}")
    face = LOCAL_FACE[tag]
    return [(int(c), face) for c in cells]
