"""Tensor-product Lagrange elements on the reference cell [0,1]^2 and Gauss rules."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Mesh

_NODES_1D = {
    1: np.array([0.0, 1.0]),
    2: np.array([0.0, 0.5, 1.0]),
}

# (i, j) index pairs into the 1-D node sets, in local node order.
# Q1: corners CCW.  Q2: corners CCW, edge midpoints (bottom, right, top, left), center.
_NODE_INDEX = {
    1: [(0, 0), (1, 0), (1, 1), (0, 1)],
    2: [(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)],
}


@dataclass(frozen=True)
class ReferenceElement:
    order: int

    def __post_init__(self):
        if self.order not in _NODES_1D:
            raise ValueError(f"only Q1 and Q2 are supported, got order {self.order}")

    @property
    def node_coords_1d(self) -> np.ndarray:
        return _NODES_1D[self.order]

    @property
    def nodes_per_cell(self) -> int:
        return (self.order + 1) ** 2

    @property
    def node_index(self) -> list[tuple[int, int]]:
        return _NODE_INDEX[self.order]

    @property
    def node_coords(self) -> np.ndarray:
        """Reference coordinates of the local nodes, shape (nodes_per_cell, 2)."""
        t = self.node_coords_1d
        return np.array([(t[i], t[j]) for i, j in self.node_index])


Q1 = ReferenceElement(1)
Q2 = ReferenceElement(2)


def _lagrange_1d(order: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the 1-D nodal Lagrange basis, shape (len(t), order+1)."""
    if order == 1:
        vals = np.stack([1.0 - t, t], axis=-1)
        ders = np.stack([-np.ones_like(t), np.ones_like(t)], axis=-1)
    else:
        vals = np.stack(
            [2.0 * (t - 0.5) * (t - 1.0), -4.0 * t * (t - 1.0), 2.0 * t * (t - 0.5)],
            axis=-1,
        )
        ders = np.stack([4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0], axis=-1)
    return vals, ders


def _check_points(p) -> tuple[np.ndarray, bool]:
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != 2:
        raise ValueError("reference points must be (xi, eta) pairs")
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("reference point outside the closed reference cell [0,1]^2")
    return pts, single


def shape_values(elem: ReferenceElement, p) -> np.ndarray:
    """Nodal basis values at reference point(s) p.

    Returns shape (nodes_per_cell,) for a single point, else (n_points, nodes_per_cell).
    """
    pts, single = _check_points(p)
    vx, _ = _lagrange_1d(elem.order, pts[:, 0])
    vz, _ = _lagrange_1d(elem.order, pts[:, 1])
    ii = np.array([i for i, _ in elem.node_index])
    jj = np.array([j for _, j in elem.node_index])
    out = vx[:, ii] * vz[:, jj]
    return out[0] if single else out


def shape_gradients(elem: ReferenceElement, p) -> np.ndarray:
    """Reference gradients (d/dxi, d/deta) of the nodal bases.

    Returns shape (nodes_per_cell, 2) for a single point, else (n_points, nodes_per_cell, 2).
    """
    pts, single = _check_points(p)
    vx, dx = _lagrange_1d(elem.order, pts[:, 0])
    vz, dz = _lagrange_1d(elem.order, pts[:, 1])
    ii = np.array([i for i, _ in elem.node_index])
    jj = np.array([j for _, j in elem.node_index])
    out = np.stack([dx[:, ii] * vz[:, jj], vx[:, ii] * dz[:, jj]], axis=-1)
    return out[0] if single else out


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n_q, 2) in [0,1]^2
    weights: np.ndarray  # (n_q,)

    @property
    def n_points(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_1d(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0,1]."""
    if int(q) != q or not 1 <= q <= 6:
        raise ValueError(f"points per direction must be in 1..6, got {q!r}")
    x, w = np.polynomial.legendre.leggauss(int(q))
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def gauss_rule(points_per_direction: int) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule on [0,1]^2 (xi runs fastest)."""
    x, w = gauss_1d(points_per_direction)
    xi, eta = np.meshgrid(x, x, indexing="xy")
    wx, wz = np.meshgrid(w, w, indexing="xy")
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    wts = (wx * wz).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts)


def map_to_physical(mesh: Mesh, cell_id: int, p) -> tuple[np.ndarray, float, np.ndarray]:
    """Affine map of reference point p into cell `cell_id`.

    Returns (physical point, det J, inverse Jacobian).
    """
    if not 0 <= cell_id < mesh.n_cells:
        raise ValueError(f"cell {cell_id} out of range")
    h = mesh.cell_size_h
    x0 = mesh.cell_origin(cell_id)
    x = x0 + h * np.asarray(p, dtype=float)
    return x, h * h, np.eye(2) / h
