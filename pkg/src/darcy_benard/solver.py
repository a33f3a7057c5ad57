"""Decoupled time stepping: Darcy solve, then temperature solve, with inner sweeps."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import assembly
from .assembly import DarcySystem, TemperatureSystem, apply_dirichlet
from .config import SimulationConfig
from .dofs import DofMap, build_dof_map, dirichlet_indices, l2_project, load_vector
from .element import gauss_rule
from .linalg import Factorization, cg, factorize, gmres, jacobi_preconditioner
from .mesh import BoundaryTag, Mesh, build_unit_square
from .postprocess import nusselt_functional

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    darcy_method: str = "schur"  # "schur" (CG on B A^-1 B^T) or "direct"
    cg_tol: float = 1e-10
    cg_max_iter: int = 20000
    deflate_constants: bool = True
    temperature_method: str = "gmres"  # "gmres" (Jacobi-preconditioned) or "direct"
    gmres_tol: float = 1e-10
    gmres_restart: int = 30
    gmres_max_iter: int = 2000


@dataclass
class SimState:
    u_x: np.ndarray
    u_z: np.ndarray
    p: np.ndarray
    theta: np.ndarray
    step_index: int = 0
    time: float = 0.0

    @property
    def velocity(self) -> np.ndarray:
        return np.concatenate([self.u_x, self.u_z])


@dataclass
class SteadyReport:
    converged: bool
    steps_taken: int
    final_residual: float
    residual_history: list[float] = field(default_factory=list)
    inner_sweeps: list[int] = field(default_factory=list)


def pressure_weights(pres_space: DofMap) -> np.ndarray:
    """w_j = integral of psi_j, so that w . P is the integral of p_h."""
    return load_vector(pres_space, lambda x, z: np.ones_like(x), gauss_rule(2))


class DarcySolver:
    """Reusable solver for a boundary-constrained Darcy system with fixed A and B.

    The velocity block is factorized once. With method "schur" the pressure
    comes from CG on the matrix-free operator B A^-1 B^T; with "direct" the
    whole saddle-point matrix (one pressure dof pinned) is factorized once.
    Either way the pressure is shifted to zero mean afterwards.
    """

    def __init__(self, system: DarcySystem, opts: SolverOptions | None = None,
                 factor_A: Factorization | None = None):
        self.opts = opts or SolverOptions()
        self.A = system.A
        self.B = system.B.tocsr()
        self.BT = self.B.T.tocsr()
        self.constrained = system.constrained
        self.factor_A = factor_A or factorize(system.A, "spd")
        self.weights = pressure_weights(system.pres_space)
        self.area = self.weights.sum()
        self._direct: Factorization | None = None
        self.last_iterations = 0
        if self.opts.darcy_method not in ("schur", "direct"):
            raise ValueError(f"unknown Darcy method {self.opts.darcy_method!r}")

    def schur_apply(self, p: np.ndarray) -> np.ndarray:
        return self.B @ self.factor_A.solve(self.BT @ p)

    def _direct_factor(self) -> Factorization:
        if self._direct is None:
            n_u, n_p = self.A.shape[0], self.B.shape[0]
            # pin pressure dof 0: zero its row and column, unit diagonal
            keep = np.ones(n_p)
            keep[0] = 0.0
            D = sp.diags(keep)
            Bp = D @ self.B
            pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(n_p, n_p))
            K = sp.bmat([[self.A, Bp.T], [Bp, pin]], format="csc")
            self._direct = factorize(K, "general")
        return self._direct

    def solve(self, F: np.ndarray, g: np.ndarray, p0: np.ndarray | None = None
              ) -> tuple[np.ndarray, np.ndarray]:
        n_u = self.A.shape[0]
        if self.opts.darcy_method == "direct":
            rhs = np.concatenate([F, g])
            rhs[n_u] = 0.0
            x = self._direct_factor().solve(rhs)
            P = x[n_u:]
            self.last_iterations = 0
        else:
            rhs = self.B @ self.factor_A.solve(F) - g
            P, self.last_iterations = cg(
                self.schur_apply, rhs, tol=self.opts.cg_tol, max_iter=self.opts.cg_max_iter,
                deflate_constants=self.opts.deflate_constants, x0=p0,
            )
        P = P - (self.weights @ P) / self.area
        U = self.factor_A.solve(F - self.BT @ P)
        c = self.constrained
        U[c] = F[c]
        return U, P

    def divergence_residual(self, U: np.ndarray, g: np.ndarray) -> float:
        return float(np.linalg.norm(self.B @ U - g))


def solve_darcy_step(system: DarcySystem, factor_A: Factorization | None = None,
                     solver_opts: SolverOptions | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Solve one constrained Darcy system: pressure first, then velocity."""
    solver = DarcySolver(system, solver_opts, factor_A)
    return solver.solve(system.F, system.g)


def solve_temperature_step(system: TemperatureSystem, solver_opts: SolverOptions | None = None,
                           x0=None) -> np.ndarray:
    """Solve the (boundary-constrained) temperature system."""
    opts = solver_opts or SolverOptions()
    K = system.matrix
    c = system.constrained
    if opts.temperature_method == "direct":
        theta = factorize(K, "general").solve(system.rhs)
    else:
        if x0 is not None:
            x0 = np.array(x0, dtype=float)
            x0[c] = system.rhs[c]
        theta, _, _ = gmres(
            K, system.rhs, precond=jacobi_preconditioner(K), tol=opts.gmres_tol,
            restart=opts.gmres_restart, max_iter=opts.gmres_max_iter, x0=x0,
        )
    # constrained rows are identity rows: copy the prescribed values exactly
    theta[c] = system.rhs[c]
    return theta


@dataclass
class ScenarioSetup:
    """Boundary data and initial temperature for one run."""

    temperature_bc: dict[BoundaryTag, float]
    theta0: Callable
    nusselt_boundary: BoundaryTag


def scenario_setup(config: SimulationConfig) -> ScenarioSetup:
    a = config.perturb_amp
    if config.scenario == "left_heated":
        return ScenarioSetup(
            {BoundaryTag.Left: 1.0, BoundaryTag.Right: 0.0},
            lambda x, z: 1.0 - x,
            BoundaryTag.Left,
        )
    if config.scenario == "bottom_heated":
        return ScenarioSetup(
            {BoundaryTag.Bottom: 1.0, BoundaryTag.Top: 0.0},
            lambda x, z: (1.0 - z) + a * np.sin(np.pi * z) * np.cos(2.0 * np.pi * x),
            BoundaryTag.Bottom,
        )
    raise ValueError(f"scenario {config.scenario!r} has no time-dependent setup")


class Simulation:
    """Mesh, spaces, constant operators and factorizations for one configuration."""

    def __init__(self, config: SimulationConfig, setup: ScenarioSetup | None = None,
                 opts: SolverOptions | None = None):
        self.config = config
        self.setup = setup or scenario_setup(config)
        self.opts = opts or SolverOptions(
            darcy_method=config.darcy_solver, temperature_method=config.temperature_solver
        )
        self.quad = gauss_rule(config.quad_points)
        self.mesh: Mesh = build_unit_square(config.n)
        self.q2: DofMap = build_dof_map(self.mesh, 2)
        self.q1: DofMap = build_dof_map(self.mesh, 1)
        self.chi = config.chi
        self.zeta = config.zeta

        # no-slip on every wall
        wall = dirichlet_indices(self.q2, list(BoundaryTag))
        self.vel_bc = assembly.velocity_bc(self.q2, wall, 0.0, 0.0)
        A = assembly.velocity_mass(self.q2, self.chi, self.quad)
        B = assembly.divergence_matrix(self.q2, self.q1, self.quad)
        zero_F = np.zeros(A.shape[0])
        self.darcy = apply_dirichlet(DarcySystem(A, B, zero_F, self.q2, self.q1), self.vel_bc)
        self.darcy_solver = DarcySolver(self.darcy, self.opts)

        self.M = assembly.mass_matrix(self.q2, self.quad)
        self.S = assembly.stiffness_matrix(self.q2, self.zeta, self.quad)
        dofs, vals = [], []
        for tag, value in self.setup.temperature_bc.items():
            idx = dirichlet_indices(self.q2, [tag])
            dofs.append(idx)
            vals.append(np.full(idx.size, float(value)))
        self.temp_bc = (np.concatenate(dofs), np.concatenate(vals)) if dofs else (
            np.zeros(0, dtype=np.int64), np.zeros(0))
        self.nu_weights = nusselt_functional(self.q2, self.setup.nusselt_boundary)

    # -- single solves -------------------------------------------------
    def darcy_step(self, theta: np.ndarray, p0=None) -> tuple[np.ndarray, np.ndarray]:
        F = assembly.buoyancy_load(self.q2, self.config.ra, theta, self.quad)
        F = F.copy()
        c = self.darcy.constrained
        # constrained rows carry the (zero) wall velocity
        F[c] = self.darcy.F[c]
        return self.darcy_solver.solve(F, self.darcy.g, p0)

    def temperature_step(self, U: np.ndarray, theta_old: np.ndarray, x0=None) -> np.ndarray:
        system = assembly.assemble_temperature(
            self.mesh, self.q2, self.zeta, U, self.config.dt, theta_old, self.quad,
            M=self.M, S=self.S,
        )
        system = apply_dirichlet(system, self.temp_bc)
        return solve_temperature_step(system, self.opts, x0=theta_old if x0 is None else x0)

    # -- states --------------------------------------------------------
    def initial_state(self) -> SimState:
        theta = l2_project(self.q2, self.setup.theta0, self.quad).values
        nv = self.q2.n_dofs
        return SimState(np.zeros(nv), np.zeros(nv), np.zeros(self.q1.n_dofs), theta, 0, 0.0)

    def nusselt(self, theta: np.ndarray) -> float:
        return float(self.nu_weights @ theta)


def advance(state: SimState, sim: Simulation, max_inner: int | None = None
            ) -> tuple[SimState, list[float]]:
    """One time step with velocity-temperature inner sweeps.

    Returns the new state and the inner changes ||theta_k - theta_{k-1}||.
    """
    cfg = sim.config
    max_inner = cfg.max_inner if max_inner is None else max_inner
    theta_n = state.theta
    buoyancy = theta_n
    prev = theta_n
    P = state.p
    changes: list[float] = []
    for _ in range(max_inner):
        U, P = sim.darcy_step(buoyancy, p0=P)
        theta = sim.temperature_step(U, theta_n, x0=prev)
        change = float(np.linalg.norm(theta - prev))
        changes.append(change)
        prev = theta
        buoyancy = theta
        if change <= cfg.inner_tol:
            break
    nv = sim.q2.n_dofs
    new = SimState(U[:nv].copy(), U[nv:].copy(), P, prev, state.step_index + 1,
                   state.time + cfg.dt)
    return new, changes


def run_to_steady(config: SimulationConfig | Simulation, state: SimState | None = None,
                  progress: Callable[[dict], None] | None = None,
                  ) -> tuple[SimState, SteadyReport]:
    """March until ||theta^{n+1} - theta^n||_2 < steady_tol, max_steps or t_final."""
    sim = config if isinstance(config, Simulation) else Simulation(config)
    cfg = sim.config
    state = state or sim.initial_state()
    history: list[float] = []
    sweeps: list[int] = []
    residual = math.inf
    converged = False
    while state.step_index < cfg.max_steps and state.time < cfg.t_final * (1 - 1e-12):
        new, changes = advance(state, sim)
        residual = float(np.linalg.norm(new.theta - state.theta))
        history.append(residual)
        sweeps.append(len(changes))
        state = new
        if progress is not None:
            progress({
                "step": state.step_index,
                "time": state.time,
                "residual": residual,
                "inner_sweeps": len(changes),
                "nu": sim.nusselt(state.theta),
            })
        if not np.isfinite(residual):
            log.warning("non-finite residual at step %d", state.step_index)
            break
        if residual < cfg.steady_tol:
            converged = True
            break
    return state, SteadyReport(converged, state.step_index, residual, history, sweeps)
