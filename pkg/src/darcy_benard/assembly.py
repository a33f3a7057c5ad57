"""Assembly of the Darcy saddle-point blocks and the temperature system."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .dofs import (
    DofMap,
    _pattern,
    assemble_vector,
    load_vector,
    mass_matrix,
    quadrature_points,
)
from .element import QuadratureRule, gauss_rule, shape_gradients, shape_values
from .mesh import Mesh


@dataclass(frozen=True)
class CoefficientPoly:
    """c0 + c1 z + c2 z^2, required to be positive on [0, 1]."""

    c0: float = 1.0
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        z = np.linspace(0.0, 1.0, 1001)
        if np.any(self(z) <= 0.0):
            raise ValueError(f"coefficient {self} is not positive on [0, 1]")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return self.c0 + z * (self.c1 + z * self.c2)

    @property
    def is_constant_one(self) -> bool:
        return (self.c0, self.c1, self.c2) == (1.0, 0.0, 0.0)


def _as_coefficient(c) -> CoefficientPoly:
    if isinstance(c, CoefficientPoly):
        return c
    if np.isscalar(c):
        return CoefficientPoly(float(c))
    return CoefficientPoly(*map(float, c))


@dataclass
class DarcySystem:
    """Blocks of [[A, B^T], [B, 0]] [U; P] = [F; g].

    U stacks [all u_x; all u_z] on the scalar Q2 space, B_ij = -(psi_i, div phi_j).
    After `apply_dirichlet`, constrained velocity rows/columns of A are identity,
    the matching columns of B are zero, and `g` carries -B_c U_c.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    F: np.ndarray
    vel_space: DofMap = field(repr=False)
    pres_space: DofMap = field(repr=False)
    g: np.ndarray | None = None
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    boundary_applied: bool = False

    def __post_init__(self):
        if self.g is None:
            self.g = np.zeros(self.B.shape[0])

    @property
    def n_u(self) -> int:
        return self.A.shape[0]

    @property
    def n_p(self) -> int:
        return self.B.shape[0]


@dataclass
class TemperatureSystem:
    """(M + dt B_conv + dt S) theta = rhs, with the components kept for inspection."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    M: sp.csr_matrix
    B_conv: sp.csr_matrix
    S: sp.csr_matrix
    dt: float
    space: DofMap = field(repr=False)
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    boundary_applied: bool = False


def _check_same_mesh(*spaces: DofMap):
    meshes = {id(s.mesh) for s in spaces}
    if len(meshes) != 1:
        base = spaces[0].mesh.n
        if any(s.mesh.n != base for s in spaces):
            raise ValueError("spaces are built on different meshes")


def _coeff_at_quad(mesh: Mesh, coeff: CoefficientPoly, quad: QuadratureRule) -> np.ndarray:
    zq = quadrature_points(mesh, quad)[..., 1]
    vals = coeff(zq)
    if np.any(vals <= 0.0):
        raise ValueError(f"coefficient {coeff} is not positive at quadrature points")
    return vals


def velocity_mass(vel_space: DofMap, chi, quad: QuadratureRule | None = None) -> sp.csr_matrix:
    """A = blockdiag(M_chi, M_chi), M_chi the chi-weighted scalar Q2 mass matrix."""
    quad = quad or gauss_rule(4)
    chi = _as_coefficient(chi)
    Mchi = mass_matrix(vel_space, quad, weight=_coeff_at_quad(vel_space.mesh, chi, quad))
    return sp.block_diag([Mchi, Mchi], format="csr")


def divergence_matrix(vel_space: DofMap, pres_space: DofMap,
                      quad: QuadratureRule | None = None) -> sp.csr_matrix:
    """B = [B_x | B_z] with B_ij = -(psi_i, d phi_j / dx_k)."""
    quad = quad or gauss_rule(4)
    _check_same_mesh(vel_space, pres_space)
    psi = shape_values(pres_space.element, quad.points)
    dphi = shape_gradients(vel_space.element, quad.points)
    h = vel_space.mesh.cell_size_h
    pattern = _pattern(pres_space, vel_space)
    blocks = []
    for d in range(2):
        ref = -h * np.einsum("q,qi,qj->ij", quad.weights, psi, dphi[:, :, d])
        blocks.append(pattern.assemble(np.ascontiguousarray(
            np.broadcast_to(ref, pattern.local_shape))))
    return sp.hstack(blocks, format="csr")


def buoyancy_load(vel_space: DofMap, Ra: float, theta_old, quad: QuadratureRule | None = None,
                  theta_space: DofMap | None = None) -> np.ndarray:
    """F = Ra (phi_i . k, theta_h): nonzero only in the z-velocity block."""
    quad = quad or gauss_rule(4)
    theta_space = theta_space or getattr(theta_old, "space", vel_space)
    th = np.asarray(theta_old, dtype=float)
    if th.shape != (theta_space.n_dofs,):
        raise ValueError(f"theta has {th.shape} entries, space has {theta_space.n_dofs}")
    phi_u = shape_values(vel_space.element, quad.points)
    phi_t = shape_values(theta_space.element, quad.points)
    theta_q = th[theta_space.cell_to_global] @ phi_t.T  # (n_cells, n_q)
    h2 = vel_space.mesh.cell_size_h**2
    local = np.einsum("cq,q,qi->ci", theta_q, quad.weights * h2 * Ra, phi_u)
    Fz = assemble_vector(vel_space, local)
    return np.concatenate([np.zeros(vel_space.n_dofs), Fz])


def assemble_darcy(
    mesh: Mesh,
    vel_space: DofMap,
    pres_space: DofMap,
    chi,
    Ra: float,
    theta_old,
    quad: QuadratureRule | None = None,
    body_force: Callable | None = None,
) -> DarcySystem:
    """Assemble (chi v, u) - (div v, p) = Ra (v, theta_old k) + (v, f); -(q, div u) = 0.

    `body_force(x, z) -> (f1, f2)` adds an optional volume load.
    """
    quad = quad or gauss_rule(4)
    _check_same_mesh(vel_space, pres_space)
    if vel_space.mesh.n != mesh.n:
        raise ValueError("velocity space is not built on `mesh`")
    A = velocity_mass(vel_space, chi, quad)
    B = divergence_matrix(vel_space, pres_space, quad)
    F = buoyancy_load(vel_space, Ra, theta_old, quad)
    if body_force is not None:
        F = F + np.concatenate([
            load_vector(vel_space, lambda x, z: body_force(x, z)[0], quad),
            load_vector(vel_space, lambda x, z: body_force(x, z)[1], quad),
        ])
    return DarcySystem(A, B, F, vel_space, pres_space)


def stiffness_matrix(space: DofMap, zeta, quad: QuadratureRule | None = None) -> sp.csr_matrix:
    """S_ij = (grad phi_i, zeta(z) grad phi_j)."""
    quad = quad or gauss_rule(4)
    zeta = _as_coefficient(zeta)
    dphi = shape_gradients(space.element, quad.points)
    pattern = _pattern(space)
    if zeta.is_constant_one:
        ref = np.einsum("q,qid,qjd->ij", quad.weights, dphi, dphi)
        local = np.broadcast_to(ref, pattern.local_shape)
    else:
        zq = _coeff_at_quad(space.mesh, zeta, quad)
        local = np.einsum("cq,qid,qjd->cij", zq * quad.weights, dphi, dphi)
    return pattern.assemble(np.ascontiguousarray(local))


def convection_matrix(space: DofMap, velocity, quad: QuadratureRule | None = None,
                      vel_space: DofMap | None = None) -> sp.csr_matrix:
    """B_conv_ij = (phi_i, u_h . grad phi_j) for the stacked Q2 velocity `velocity`."""
    quad = quad or gauss_rule(4)
    vel_space = vel_space or space
    U = np.asarray(velocity, dtype=float)
    nv = vel_space.n_dofs
    if U.shape != (2 * nv,):
        raise ValueError(f"velocity vector has {U.shape} entries, expected {2 * nv}")
    phi_v = shape_values(vel_space.element, quad.points)
    phi = shape_values(space.element, quad.points)
    dphi = shape_gradients(space.element, quad.points)
    ux = U[:nv][vel_space.cell_to_global] @ phi_v.T
    uz = U[nv:][vel_space.cell_to_global] @ phi_v.T
    h = space.mesh.cell_size_h
    wq = quad.weights * h
    local = np.einsum("cq,qi,qj->cij", ux * wq, phi, dphi[:, :, 0])
    local += np.einsum("cq,qi,qj->cij", uz * wq, phi, dphi[:, :, 1])
    return _pattern(space).assemble(local)


def _same_pattern_sum(*terms: tuple[float, sp.csr_matrix]) -> sp.csr_matrix:
    base = terms[0][1]
    data = sum(c * M.data for c, M in terms)
    out = sp.csr_matrix((data, base.indices.copy(), base.indptr.copy()), shape=base.shape)
    out.has_sorted_indices = True
    return out


def assemble_temperature(
    mesh: Mesh,
    temp_space: DofMap,
    zeta,
    u_new,
    dt: float,
    theta_old,
    quad: QuadratureRule | None = None,
    M: sp.csr_matrix | None = None,
    S: sp.csr_matrix | None = None,
    vel_space: DofMap | None = None,
) -> TemperatureSystem:
    """Backward-Euler temperature system with the step-(n+1) velocity.

    M and S depend only on the mesh and zeta and may be passed in precomputed.
    """
    quad = quad or gauss_rule(4)
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if temp_space.mesh.n != mesh.n:
        raise ValueError("temperature space is not built on `mesh`")
    th = np.asarray(theta_old, dtype=float)
    if th.shape != (temp_space.n_dofs,):
        raise ValueError(f"theta has {th.shape} entries, space has {temp_space.n_dofs}")
    M = mass_matrix(temp_space, quad) if M is None else M
    S = stiffness_matrix(temp_space, zeta, quad) if S is None else S
    C = convection_matrix(temp_space, u_new, quad, vel_space)
    K = _same_pattern_sum((1.0, M), (dt, C), (dt, S))
    return TemperatureSystem(K, M @ th, M, C, S, float(dt), temp_space)


def assemble_steady_temperature(
    temp_space: DofMap,
    zeta,
    u_new,
    source: Callable | None = None,
    quad: QuadratureRule | None = None,
    vel_space: DofMap | None = None,
) -> TemperatureSystem:
    """Steady convection-diffusion (phi, u.grad theta) + (grad phi, zeta grad theta) = (phi, g)."""
    quad = quad or gauss_rule(4)
    S = stiffness_matrix(temp_space, zeta, quad)
    C = convection_matrix(temp_space, u_new, quad, vel_space)
    K = _same_pattern_sum((1.0, C), (1.0, S))
    rhs = load_vector(temp_space, source, quad) if source is not None else np.zeros(temp_space.n_dofs)
    zero = sp.csr_matrix(S.shape)
    return TemperatureSystem(K, rhs, zero, C, S, 0.0, temp_space)


def _normalize_bc(bc_values, n: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(bc_values, tuple) and len(bc_values) == 2 and isinstance(bc_values[0], np.ndarray):
        dofs = np.asarray(bc_values[0], dtype=np.int64)
        vals = np.asarray(bc_values[1], dtype=float)
    else:
        pairs = list(bc_values)
        dofs = np.array([int(d) for d, _ in pairs], dtype=np.int64)
        vals = np.array([float(v) for _, v in pairs], dtype=float)
    if dofs.shape != vals.shape:
        raise ValueError("boundary dofs and values differ in length")
    if dofs.size and (dofs.min() < 0 or dofs.max() >= n):
        raise ValueError("boundary dof index out of range")
    order = np.argsort(dofs, kind="stable")
    dofs, vals = dofs[order], vals[order]
    dup = np.flatnonzero(np.diff(dofs) == 0)
    if dup.size:
        if np.any(vals[dup] != vals[dup + 1]):
            bad = int(dofs[dup[vals[dup] != vals[dup + 1]][0]])
            raise ValueError(f"conflicting boundary values for dof {bad}")
        keep = np.ones(dofs.size, dtype=bool)
        keep[dup + 1] = False
        dofs, vals = dofs[keep], vals[keep]
    return dofs, vals


def eliminate_square(K: sp.csr_matrix, rhs: np.ndarray, dofs: np.ndarray, vals: np.ndarray
                     ) -> tuple[sp.csr_matrix, np.ndarray]:
    """Identity rows/columns for constrained dofs; known values moved to the rhs."""
    n = K.shape[0]
    K = K.copy()
    is_c = np.zeros(n, dtype=bool)
    is_c[dofs] = True
    full = np.zeros(n)
    full[dofs] = vals
    rows = np.repeat(np.arange(n), np.diff(K.indptr))
    cols = K.indices
    row_c = is_c[rows]
    col_c = is_c[cols]
    move = col_c & ~row_c
    rhs = rhs - np.bincount(rows[move], weights=K.data[move] * full[cols[move]], minlength=n)
    K.data[row_c | col_c] = 0.0
    diag = row_c & (rows == cols)
    if np.count_nonzero(diag) != dofs.size:
        raise ValueError("constrained row lacks a diagonal entry in the sparsity pattern")
    K.data[diag] = 1.0
    rhs[dofs] = vals
    return K, rhs


def _eliminate_columns(B: sp.csr_matrix, dofs: np.ndarray, vals: np.ndarray
                       ) -> tuple[sp.csr_matrix, np.ndarray]:
    """Zero the constrained columns of a rectangular block; return (B_f, -B_c vals)."""
    B = B.copy()
    full = np.zeros(B.shape[1])
    full[dofs] = vals
    g = -(B @ full)
    is_c = np.zeros(B.shape[1], dtype=bool)
    is_c[dofs] = True
    B.data[is_c[B.indices]] = 0.0
    return B, g


def apply_dirichlet(system, bc_values):
    """Return a copy of `system` with Dirichlet values imposed.

    `bc_values` is an iterable of (dof, value) pairs or a (dofs, values) tuple
    of arrays. Rows become identity and the known columns are eliminated to
    the right-hand side, so symmetric blocks stay symmetric.
    """
    if isinstance(system, DarcySystem):
        n = system.n_u
    elif isinstance(system, TemperatureSystem):
        n = system.matrix.shape[0]
    else:
        raise TypeError(f"cannot apply boundary values to {type(system).__name__}")
    dofs, vals = _normalize_bc(bc_values, n)
    if dofs.size == 0:
        return system

    if isinstance(system, DarcySystem):
        A, F = eliminate_square(system.A, system.F, dofs, vals)
        B, g = _eliminate_columns(system.B, dofs, vals)
        # rows of B^T P on constrained dofs vanish with the zeroed columns
        constrained = np.union1d(system.constrained, dofs)
        return replace(system, A=A, B=B, F=F, g=system.g + g, constrained=constrained,
                       boundary_applied=True)
    K, rhs = eliminate_square(system.matrix, system.rhs, dofs, vals)
    constrained = np.union1d(system.constrained, dofs)
    return replace(system, matrix=K, rhs=rhs, constrained=constrained, boundary_applied=True)


def velocity_bc(vel_space: DofMap, dofs: Iterable[int], ux, uz) -> tuple[np.ndarray, np.ndarray]:
    """Stacked-velocity boundary arrays from scalar dof indices and component values."""
    d = np.asarray(list(dofs) if not isinstance(dofs, np.ndarray) else dofs, dtype=np.int64)
    ux = np.broadcast_to(np.asarray(ux, dtype=float), d.shape)
    uz = np.broadcast_to(np.asarray(uz, dtype=float), d.shape)
    return np.concatenate([d, d + vel_space.n_dofs]), np.concatenate([ux, uz])
