"""Manufactured solution for the steady Darcy / convection-diffusion system.

    u - theta k + grad p = f,   div u = 0,   -lap theta + u . grad theta = g

with u = (sin pi x, -pi z cos pi x), p = sin pi x cos pi z and
theta = sin(pi x + pi z) on the unit square.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly
from .assembly import DarcySystem, apply_dirichlet
from .dofs import DofMap, build_dof_map, dirichlet_indices, interpolate
from .element import gauss_rule
from .linalg import factorize
from .mesh import BoundaryTag, Mesh, build_unit_square
from .postprocess import convergence_rate, l2_error
from .solver import DarcySolver, SolverOptions

PI = np.pi


def exact_u(x, z):
    return np.sin(PI * x)


def exact_w(x, z):
    return -PI * z * np.cos(PI * x)


def exact_p(x, z):
    return np.sin(PI * x) * np.cos(PI * z)


def exact_theta(x, z):
    return np.sin(PI * x + PI * z)


def exact_fields(point) -> tuple[float, float, float, float]:
    """(u, w, p, theta) at a point of the unit square."""
    x, z = point
    return float(exact_u(x, z)), float(exact_w(x, z)), float(exact_p(x, z)), float(exact_theta(x, z))


def forcing_f(x, z):
    f1 = np.sin(PI * x) + PI * np.cos(PI * x) * np.cos(PI * z)
    f2 = -PI * z * np.cos(PI * x) - PI * np.sin(PI * x) * np.sin(PI * z) - np.sin(PI * x + PI * z)
    return f1, f2


def forcing_g(x, z):
    return 2 * PI**2 * np.sin(PI * x + PI * z) + PI * np.cos(PI * x + PI * z) * (
        np.sin(PI * x) - PI * z * np.cos(PI * x)
    )


@dataclass
class MMSLevel:
    n: int
    total_dofs: int  # velocity + pressure unknowns
    err_u: float
    err_p: float
    err_theta: float
    mesh: Mesh = field(repr=False)
    vel_space: DofMap = field(repr=False)
    pres_space: DofMap = field(repr=False)
    U: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    cg_iterations: int = 0


@dataclass
class ConvergenceTable:
    levels: list[MMSLevel]
    rate_u: list[float]
    rate_p: list[float]
    rate_theta: list[float]

    def rows(self) -> list[dict]:
        out = []
        for k, lv in enumerate(self.levels):
            r = (lambda rates: rates[k - 1] if k > 0 else float("nan"))
            out.append({
                "level": k, "n": lv.n, "total_dofs": lv.total_dofs,
                "err_u": lv.err_u, "rate_u": r(self.rate_u),
                "err_p": lv.err_p, "rate_p": r(self.rate_p),
                "err_theta": lv.err_theta, "rate_theta": r(self.rate_theta),
            })
        return out


def solve_level(n: int, quad_points: int = 4, darcy_method: str = "schur") -> MMSLevel:
    """Darcy solve with exact-theta buoyancy, then the steady temperature solve."""
    quad = gauss_rule(quad_points)
    mesh = build_unit_square(n)
    q2 = build_dof_map(mesh, 2)
    q1 = build_dof_map(mesh, 1)
    theta_ex = interpolate(q2, exact_theta).values

    system = assembly.assemble_darcy(mesh, q2, q1, 1.0, 1.0, theta_ex, quad, body_force=forcing_f)
    wall = dirichlet_indices(q2, list(BoundaryTag))
    xw, zw = q2.dof_coords[wall, 0], q2.dof_coords[wall, 1]
    system = apply_dirichlet(system, assembly.velocity_bc(q2, wall, exact_u(xw, zw), exact_w(xw, zw)))
    darcy = DarcySolver(system, SolverOptions(darcy_method=darcy_method))
    U, P = darcy.solve(system.F, system.g)

    temp = assembly.assemble_steady_temperature(q2, 1.0, U, forcing_g, quad, q2)
    temp = apply_dirichlet(temp, (wall, exact_theta(xw, zw)))
    # steady convection-diffusion: Jacobi-GMRES stalls here, so factorize
    theta = factorize(temp.matrix, "general").solve(temp.rhs)

    nv = q2.n_dofs
    q6 = gauss_rule(6)
    eu = np.hypot(l2_error(U[:nv], q2, mesh, exact_u, q6), l2_error(U[nv:], q2, mesh, exact_w, q6))
    ep = l2_error(P, q1, mesh, exact_p, q6)
    et = l2_error(theta, q2, mesh, exact_theta, q6)
    return MMSLevel(n, 2 * nv + q1.n_dofs, eu, ep, et, mesh, q2, q1, U, P, theta,
                    darcy.last_iterations)


def run_convergence(levels: int = 6, base_n: int = 4, quad_points: int = 4,
                    darcy_method: str = "schur") -> ConvergenceTable:
    """Errors and observed rates on the meshes base_n * 2^k, k < levels."""
    if levels < 2:
        raise ValueError("need at least 2 levels")
    if base_n < 1:
        raise ValueError("base_n must be positive")
    results = [solve_level(base_n * 2**k, quad_points, darcy_method) for k in range(levels)]
    h = [1.0 / lv.n for lv in results]
    return ConvergenceTable(
        results,
        convergence_rate([lv.err_u for lv in results], h),
        convergence_rate([lv.err_p for lv in results], h),
        convergence_rate([lv.err_theta for lv in results], h),
    )
