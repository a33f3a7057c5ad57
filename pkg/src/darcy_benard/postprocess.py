"""Nusselt numbers, line probes and error norms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dofs import DofMap, quadrature_points
from .element import QuadratureRule, gauss_1d, gauss_rule, shape_gradients, shape_values
from .mesh import OUTWARD_NORMAL, BoundaryTag, Mesh, boundary_faces


@dataclass
class NusseltProfile:
    boundary: BoundaryTag
    samples: np.ndarray  # (n_samples, 2): arclength coordinate, local Nu
    average: float


def _edge_points(boundary: BoundaryTag, s: np.ndarray) -> np.ndarray:
    zero, one = np.zeros_like(s), np.ones_like(s)
    return {
        BoundaryTag.Bottom: np.column_stack([s, zero]),
        BoundaryTag.Top: np.column_stack([s, one]),
        BoundaryTag.Left: np.column_stack([zero, s]),
        BoundaryTag.Right: np.column_stack([one, s]),
    }[boundary]


def _edge_cells(mesh: Mesh, boundary: BoundaryTag, k: np.ndarray) -> np.ndarray:
    """Cell id of the k-th boundary face along `boundary`."""
    cells = np.array([c for c, _ in boundary_faces(mesh, boundary)])
    return cells[k]


def nusselt_functional(space: DofMap, boundary: BoundaryTag, q: int = 4) -> np.ndarray:
    """Vector w with w . theta = integral over the edge of n . grad theta_h.

    n is the outward normal, so a hot wall held at 1 against a cold wall at 0
    gives a positive value (1 for pure conduction across a unit gap).
    """
    if not isinstance(boundary, BoundaryTag):
        raise ValueError(f"invalid boundary {boundary!r}")
    t, w = gauss_1d(q)
    ref = _edge_points(boundary, t)
    normal = np.array(OUTWARD_NORMAL[boundary])
    dphi = shape_gradients(space.element, ref)  # (q, nb, 2)
    # the 1/h of the gradient cancels the h of the edge length
    ref_w = np.einsum("q,qid,d->i", w, dphi, normal)
    cells = np.array([c for c, _ in boundary_faces(space.mesh, boundary)])
    out = np.zeros(space.n_dofs)
    np.add.at(out, space.cell_to_global[cells].ravel(), np.tile(ref_w, cells.size))
    return out


def local_nusselt(theta, space: DofMap, mesh: Mesh, boundary: BoundaryTag,
                  n_samples: int = 101) -> NusseltProfile:
    """Local Nu = n . grad theta_h sampled uniformly along an edge.

    On cell edges the one-sided gradients of the two neighbouring cells are
    averaged; the average Nu integrates the traces exactly with 4-point Gauss.
    """
    if not isinstance(boundary, BoundaryTag):
        raise ValueError(f"invalid boundary {boundary!r}")
    th = np.asarray(theta, dtype=float)
    s = np.linspace(0.0, 1.0, n_samples)
    pts = _edge_points(boundary, s)
    n = mesh.n
    k_right = np.minimum(np.floor(s * n).astype(np.int64), n - 1)
    on_edge = np.isclose(s * n, np.rint(s * n), rtol=0.0, atol=1e-9)
    k_left = np.where(on_edge, np.maximum(np.rint(s * n).astype(np.int64) - 1, 0), k_right)
    normal = np.array(OUTWARD_NORMAL[boundary])
    g_r = space.gradient(th, pts, cells=_edge_cells(mesh, boundary, k_right))
    g_l = space.gradient(th, pts, cells=_edge_cells(mesh, boundary, k_left))
    nu = 0.5 * (g_r + g_l) @ normal
    avg = float(nusselt_functional(space, boundary) @ th)
    return NusseltProfile(boundary, np.column_stack([s, nu]), avg)


def average_nusselt(theta, space: DofMap, boundary: BoundaryTag) -> float:
    return float(nusselt_functional(space, boundary) @ np.asarray(theta, dtype=float))


def line_probe(field, space: DofMap, mesh: Mesh, line: tuple[str, float],
               n_samples: int = 11, coords: Sequence[float] | None = None) -> np.ndarray:
    """FE values along a horizontal (`("horizontal", z)`) or vertical (`("vertical", x)`) line.

    Samples are uniform with endpoints unless `coords` lists the positions.
    Returns an array of (coordinate, value) rows.
    """
    kind, level = line
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"line position {level} outside [0, 1]")
    s = np.linspace(0.0, 1.0, n_samples) if coords is None else np.asarray(coords, dtype=float)
    if kind in ("horizontal", "z"):
        pts = np.column_stack([s, np.full_like(s, level)])
    elif kind in ("vertical", "x"):
        pts = np.column_stack([np.full_like(s, level), s])
    else:
        raise ValueError(f"line kind must be 'horizontal' or 'vertical', got {kind!r}")
    return np.column_stack([s, space.evaluate(np.asarray(field, dtype=float), pts)])


def l2_error(field, space: DofMap, mesh: Mesh, exact: Callable,
             quad: QuadratureRule | None = None) -> float:
    """sqrt(integral (field_h - exact)^2) by cellwise quadrature."""
    quad = quad or gauss_rule(6)
    phi = shape_values(space.element, quad.points)
    vals = np.asarray(field, dtype=float)[space.cell_to_global] @ phi.T
    xq = quadrature_points(mesh, quad)
    ex = np.broadcast_to(np.asarray(exact(xq[..., 0], xq[..., 1]), dtype=float), vals.shape)
    err2 = np.einsum("cq,q->", (vals - ex) ** 2, quad.weights) * mesh.cell_size_h**2
    return float(np.sqrt(err2))


def integral(field, space: DofMap, quad: QuadratureRule | None = None) -> float:
    """Integral of the FE function over the unit square."""
    quad = quad or gauss_rule(max(space.order + 1, 2))
    phi = shape_values(space.element, quad.points)
    vals = np.asarray(field, dtype=float)[space.cell_to_global] @ phi.T
    return float(np.einsum("cq,q->", vals, quad.weights) * space.mesh.cell_size_h**2)


def convergence_rate(errors: Sequence[float], mesh_sizes: Sequence[float]) -> list[float]:
    """rate_k = log(e_k / e_{k+1}) / log(h_k / h_{k+1})."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(mesh_sizes, dtype=float)
    if e.size < 2 or e.size != h.size:
        raise ValueError("need at least two (error, h) pairs of equal length")
    if np.any(e <= 0.0):
        raise ValueError("errors must be positive")
    if np.any(np.diff(h) >= 0.0):
        raise ValueError("mesh sizes must be strictly decreasing")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))
