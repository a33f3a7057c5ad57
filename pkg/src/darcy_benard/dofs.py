"""Global numbering of scalar Q1/Q2 nodal unknowns on a structured mesh."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .element import QuadratureRule, ReferenceElement, gauss_rule, shape_gradients, shape_values
from .linalg import SolverError, factorize
from .mesh import BoundaryTag, Mesh

ROLES = ("velocity-x", "velocity-z", "pressure", "temperature")


@dataclass(frozen=True, eq=False)
class DofMap:
    """Continuous scalar Qk space on `mesh`.

    Nodes sit on the uniform (k n + 1)^2 lattice, numbered lexicographically
    with x fastest, so shared nodes on cell interfaces get one global index.
    """

    mesh: Mesh
    order: int
    cell_to_global: np.ndarray = field(repr=False)  # (n_cells, nodes_per_cell)
    dof_coords: np.ndarray = field(repr=False)  # (n_dofs, 2)

    @property
    def n_dofs(self) -> int:
        return self.dof_coords.shape[0]

    @property
    def element(self) -> ReferenceElement:
        return ReferenceElement(self.order)

    @property
    def nodes_per_side(self) -> int:
        return self.order * self.mesh.n + 1

    @cached_property
    def boundary_masks(self) -> dict[BoundaryTag, np.ndarray]:
        x, z = self.dof_coords[:, 0], self.dof_coords[:, 1]
        # lattice coordinates are exact multiples of 1/(k n); compare on the index grid
        m = self.nodes_per_side - 1
        ix = np.rint(x * m).astype(np.int64)
        iz = np.rint(z * m).astype(np.int64)
        return {
            BoundaryTag.Bottom: iz == 0,
            BoundaryTag.Top: iz == m,
            BoundaryTag.Left: ix == 0,
            BoundaryTag.Right: ix == m,
        }

    def evaluate(self, coeffs, points) -> np.ndarray:
        """Values of the FE function with nodal coefficients `coeffs` at physical points."""
        cells, ref = self.mesh.locate(points)
        phi = shape_values(self.element, ref)
        return np.einsum("pi,pi->p", phi, np.asarray(coeffs)[self.cell_to_global[cells]])

    def gradient(self, coeffs, points, cells=None) -> np.ndarray:
        """Physical gradients at points, shape (n_points, 2).

        `cells` optionally forces the cell used for each point (for one-sided
        limits on cell edges).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if cells is None:
            cells, ref = self.mesh.locate(pts)
        else:
            cells = np.asarray(cells)
            ref = np.clip((pts - self.mesh.cell_origin(cells)) / self.mesh.cell_size_h, 0.0, 1.0)
        dphi = shape_gradients(self.element, ref)
        local = np.asarray(coeffs)[self.cell_to_global[cells]]
        return np.einsum("pid,pi->pd", dphi, local) / self.mesh.cell_size_h


@dataclass
class FieldVector:
    """Coefficient vector of a scalar field on a DofMap."""

    values: np.ndarray
    role: str
    space: DofMap = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.role not in ROLES:
            raise ValueError(f"unknown field role {self.role!r}")
        if self.values.shape != (self.space.n_dofs,):
            raise ValueError(
                f"field length {self.values.shape} does not match {self.space.n_dofs} dofs"
            )

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __call__(self, points) -> np.ndarray:
        return self.space.evaluate(self.values, points)

    def copy(self) -> FieldVector:
        return FieldVector(self.values.copy(), self.role, self.space)


def build_dof_map(mesh: Mesh, order: int) -> DofMap:
    elem = ReferenceElement(order)
    n = mesh.n
    m = order * n + 1
    cj, ci = np.divmod(np.arange(mesh.n_cells), n)
    local = np.array(elem.node_index)  # (nodes_per_cell, 2)
    gi = order * ci[:, None] + local[None, :, 0]
    gj = order * cj[:, None] + local[None, :, 1]
    c2g = gj * m + gi

    ticks = np.linspace(0.0, 1.0, m)
    xv, zv = np.meshgrid(ticks, ticks, indexing="xy")
    coords = np.column_stack([xv.ravel(), zv.ravel()])

    c2g.setflags(write=False)
    coords.setflags(write=False)
    return DofMap(mesh, order, c2g, coords)


def dirichlet_dofs(dofmap: DofMap, tags: Iterable[BoundaryTag]) -> list[tuple[int, tuple[float, float]]]:
    """Nodal dofs lying on any of the tagged edges, each once, in index order."""
    mask = np.zeros(dofmap.n_dofs, dtype=bool)
    for tag in tags:
        mask |= dofmap.boundary_masks[tag]
    idx = np.flatnonzero(mask)
    return [(int(i), (float(dofmap.dof_coords[i, 0]), float(dofmap.dof_coords[i, 1]))) for i in idx]


def dirichlet_indices(dofmap: DofMap, tags: Iterable[BoundaryTag]) -> np.ndarray:
    mask = np.zeros(dofmap.n_dofs, dtype=bool)
    for tag in tags:
        mask |= dofmap.boundary_masks[tag]
    return np.flatnonzero(mask)


def _call_pointwise(f: Callable, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    vals = f(x, z)
    return np.broadcast_to(np.asarray(vals, dtype=float), x.shape).copy()


def interpolate(dofmap: DofMap, f: Callable, role: str = "temperature") -> FieldVector:
    """Nodal interpolant; `f(x, z)` must accept coordinate arrays."""
    x, z = dofmap.dof_coords[:, 0], dofmap.dof_coords[:, 1]
    return FieldVector(_call_pointwise(f, x, z), role, dofmap)


class SparsityPattern:
    """CSR pattern for cell-local blocks scattered into a global matrix.

    `scatter` maps every (cell, i, j) local entry to its slot in the CSR data
    array, so repeated assembly is one bincount.
    """

    def __init__(self, rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]):
        n_cells, nr = rows.shape
        nc = cols.shape[1]
        r = np.broadcast_to(rows[:, :, None], (n_cells, nr, nc)).ravel().astype(np.int64)
        c = np.broadcast_to(cols[:, None, :], (n_cells, nr, nc)).ravel().astype(np.int64)
        keys = r * shape[1] + c
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.shape = shape
        self.indices = (uniq % shape[1]).astype(np.int32)
        row_of = uniq // shape[1]
        self.indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(self.indptr, row_of + 1, 1)
        self.indptr = np.cumsum(self.indptr).astype(np.int32)
        self.scatter = inverse.ravel()
        self.nnz = uniq.size
        self.local_shape = (n_cells, nr, nc)

    def assemble(self, local: np.ndarray) -> sp.csr_matrix:
        if local.shape != self.local_shape:
            raise ValueError(f"local block shape {local.shape} != {self.local_shape}")
        data = np.bincount(self.scatter, weights=local.ravel(), minlength=self.nnz)
        A = sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)
        A.has_sorted_indices = True
        return A


def assemble_vector(dofmap: DofMap, local: np.ndarray) -> np.ndarray:
    """Scatter-add cell vectors (n_cells, nodes_per_cell) into a global vector."""
    return np.bincount(dofmap.cell_to_global.ravel(), weights=local.ravel(), minlength=dofmap.n_dofs)


def quadrature_points(mesh: Mesh, quad: QuadratureRule) -> np.ndarray:
    """Physical quadrature points per cell, shape (n_cells, n_q, 2)."""
    return mesh.cell_origins()[:, None, :] + mesh.cell_size_h * quad.points[None, :, :]


def mass_matrix(dofmap: DofMap, quad: QuadratureRule | None = None, weight=None) -> sp.csr_matrix:
    """Scalar mass matrix, optionally weighted by values (n_cells, n_q) at quadrature points."""
    quad = quad or gauss_rule(4)
    phi = shape_values(dofmap.element, quad.points)
    h2 = dofmap.mesh.cell_size_h**2
    pattern = _pattern(dofmap)
    if weight is None:
        ref = np.einsum("q,qi,qj->ij", quad.weights, phi, phi) * h2
        local = np.broadcast_to(ref, pattern.local_shape)
    else:
        local = np.einsum("cq,qi,qj->cij", weight * quad.weights * h2, phi, phi)
    return pattern.assemble(np.ascontiguousarray(local))


def _pattern(row_map: DofMap, col_map: DofMap | None = None) -> SparsityPattern:
    """Sparsity pattern cached on the row space."""
    col_map = col_map or row_map
    cache = row_map.__dict__.setdefault("_patterns", {})
    hit = cache.get(id(col_map))
    if hit is None or hit[0] is not col_map:
        hit = (col_map, SparsityPattern(
            row_map.cell_to_global, col_map.cell_to_global, (row_map.n_dofs, col_map.n_dofs)
        ))
        cache[id(col_map)] = hit
    return hit[1]


def load_vector(dofmap: DofMap, f: Callable, quad: QuadratureRule | None = None) -> np.ndarray:
    """b_i = integral of f * phi_i, with f(x, z) evaluated at quadrature points."""
    quad = quad or gauss_rule(4)
    phi = shape_values(dofmap.element, quad.points)
    xq = quadrature_points(dofmap.mesh, quad)
    fq = _call_pointwise(f, xq[..., 0], xq[..., 1])
    local = np.einsum("cq,q,qi->ci", fq, quad.weights * dofmap.mesh.cell_size_h**2, phi)
    return assemble_vector(dofmap, local)


def l2_project(dofmap: DofMap, f: Callable, quad: QuadratureRule | None = None,
               role: str = "temperature") -> FieldVector:
    """L2 projection of f onto the space: solve M c = b."""
    quad = quad or gauss_rule(4)
    M = mass_matrix(dofmap, quad)
    b = load_vector(dofmap, f, quad)
    c = factorize(M, "spd").solve(b)
    res = np.linalg.norm(M @ c - b)
    if res > 1e-12 * max(np.linalg.norm(b), 1e-300):
        raise SolverError(f"mass solve residual {res:.3e} exceeds 1e-12 relative")
    return FieldVector(c, role, dofmap)
