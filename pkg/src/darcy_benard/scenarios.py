"""Scenario orchestration: single runs, the manufactured-solution study and sweeps."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import io, mms
from .config import SimulationConfig
from .postprocess import line_probe, local_nusselt
from .solver import Simulation, SimState, SteadyReport, run_to_steady

log = logging.getLogger(__name__)

SUMMARY_HEADER = ("scenario", "ra", "n", "dt", "converged", "steps", "final_residual", "nu")
SWEEP_HEADER = ("value", "nu", "steps", "residual", "converged", "status")
CONVERGENCE_HEADER = ("level", "n", "total_dofs", "err_u", "rate_u", "err_p", "rate_p",
                      "err_theta", "rate_theta")
# probe positions used for the manufactured-solution midline tables
MMS_PROBES = np.round(np.linspace(0.0, 1.0, 11), 10)


@dataclass
class RunResult:
    summary: dict
    files: list[Path] = field(default_factory=list)
    state: SimState | None = field(default=None, repr=False)
    report: SteadyReport | None = field(default=None, repr=False)
    sim: Simulation | None = field(default=None, repr=False)
    members: list[RunResult] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return bool(self.summary.get("converged", True))


def _write_midlines(out: Path, sim: Simulation, state: SimState, n_samples: int = 101) -> list[Path]:
    files = []
    horiz = ("horizontal", 0.5)
    vert = ("vertical", 0.5)
    for name, vals, space, line in (
        ("u", state.u_x, sim.q2, horiz),
        ("w", state.u_z, sim.q2, horiz),
        ("theta", state.theta, sim.q2, horiz),
        ("p", state.p, sim.q1, vert),
    ):
        rows = line_probe(vals, space, sim.mesh, line, n_samples)
        files.append(io.write_csv(out / f"midline_{name}.csv", ("coord", "value"), rows))
    return files


def run_scenario(config: SimulationConfig, output_dir=None, write_files: bool = True,
                 progress: Callable[[dict], None] | None = None) -> RunResult:
    """March a left- or bottom-heated configuration to steady state and write its outputs."""
    if config.scenario == "mms":
        return run_mms(config.levels, config.base_n, output_dir or config.output_dir)
    out = Path(output_dir or config.output_dir)
    sim = Simulation(config)
    files: list[Path] = []
    log_fh = None
    if write_files:
        out.mkdir(parents=True, exist_ok=True)
        log_path = out / "progress.jsonl"
        log_fh = log_path.open("w", encoding="utf-8")
        files.append(log_path)

    def emit(record):
        if log_fh is not None:
            log_fh.write(json.dumps(record) + "\n")
        if progress is not None:
            progress(record)

    try:
        state, report = run_to_steady(sim, progress=emit)
    finally:
        if log_fh is not None:
            log_fh.close()

    nu = sim.nusselt(state.theta)
    summary = {
        "scenario": config.scenario, "ra": config.ra, "n": config.n, "dt": config.dt,
        "converged": report.converged, "steps": report.steps_taken,
        "final_residual": report.final_residual, "nu": nu,
    }
    if write_files:
        profile = local_nusselt(state.theta, sim.q2, sim.mesh, sim.setup.nusselt_boundary)
        files.append(io.write_csv(out / "nusselt_profile.csv", ("x", "nu_local"), profile.samples))
        files.append(io.write_csv(out / "summary.csv", SUMMARY_HEADER,
                                  [[summary[k] for k in SUMMARY_HEADER]]))
        files.append(io.write_vtk(out / "fields.vtk", sim.q2, sim.q1, state.u_x, state.u_z,
                                  state.p, state.theta))
        files += _write_midlines(out, sim, state)
    return RunResult(summary, files, state, report, sim)


def run_mms(levels: int = 6, base_n: int = 4, output_dir="output", write_files: bool = True,
            darcy_method: str = "schur") -> RunResult:
    """Manufactured-solution convergence study; writes convergence.csv and midline tables."""
    table = mms.run_convergence(levels, base_n, darcy_method=darcy_method)
    rows = table.rows()
    files: list[Path] = []
    if write_files:
        out = Path(output_dir)
        files.append(io.write_dict_csv(out / "convergence.csv", rows, CONVERGENCE_HEADER))
        files += write_mms_midlines(out, midline_level(table))
    summary = {"levels": levels, "base_n": base_n, "rows": rows,
               "rate_u": table.rate_u[-1], "rate_p": table.rate_p[-1],
               "rate_theta": table.rate_theta[-1]}
    return RunResult(summary, files)


def midline_level(table: mms.ConvergenceTable, n: int = 64) -> mms.MMSLevel:
    """Level used for the midline tables: n if present, otherwise the finest."""
    for lv in table.levels:
        if lv.n == n:
            return lv
    return table.levels[-1]


def mms_midlines(level: mms.MMSLevel, coords=MMS_PROBES) -> dict[str, np.ndarray]:
    """(coord, numerical, exact, |error|) rows for u, w, theta on z=0.5 and p on x=0.5."""
    nv = level.vel_space.n_dofs
    specs = {
        "u": (level.U[:nv], level.vel_space, ("horizontal", 0.5), mms.exact_u),
        "w": (level.U[nv:], level.vel_space, ("horizontal", 0.5), mms.exact_w),
        "theta": (level.theta, level.vel_space, ("horizontal", 0.5), mms.exact_theta),
        "p": (level.P, level.pres_space, ("vertical", 0.5), mms.exact_p),
    }
    out = {}
    for name, (vals, space, line, exact) in specs.items():
        probe = line_probe(vals, space, level.mesh, line, coords=coords)
        s = probe[:, 0]
        x, z = (s, np.full_like(s, 0.5)) if line[0] == "horizontal" else (np.full_like(s, 0.5), s)
        ex = exact(x, z)
        out[name] = np.column_stack([s, probe[:, 1], ex, np.abs(probe[:, 1] - ex)])
    return out


def write_mms_midlines(out: Path, level: mms.MMSLevel) -> list[Path]:
    return [io.write_csv(out / f"midline_{name}.csv", ("coord", "value", "exact", "error"), rows)
            for name, rows in mms_midlines(level).items()]


def run_sweep(base_config: SimulationConfig, ra_list: Sequence[float] | None = None,
              h_list: Sequence[int] | None = None, output_dir=None,
              write_files: bool = True) -> RunResult:
    """One run per Rayleigh number or per mesh resolution (cells per side); sweep.csv aggregates."""
    if (ra_list is None) == (h_list is None):
        raise ValueError("give exactly one of ra_list or h_list")
    key, values = ("ra", list(ra_list)) if ra_list is not None else ("n", list(h_list))
    if not values:
        raise ValueError("sweep list is empty")
    out = Path(output_dir or base_config.output_dir)
    rows, files, members = [], [], []
    for v in values:
        v = float(v) if key == "ra" else int(v)
        member_dir = out / f"{key}_{io.format_value(v)}"
        try:
            res = run_scenario(base_config.with_(**{key: v}), member_dir, write_files)
            s = res.summary
            rows.append({"value": v, "nu": s["nu"], "steps": s["steps"],
                         "residual": s["final_residual"], "converged": s["converged"],
                         "status": "ok" if s["converged"] else "not_converged"})
            files += res.files
            members.append(res)
        except Exception as exc:  # a failed member is recorded, the sweep goes on
            log.error("sweep member %s=%s failed: %s", key, v, exc)
            rows.append({"value": v, "nu": math.nan, "steps": 0, "residual": math.nan,
                         "converged": False, "status": f"error: {exc}"})
    if write_files:
        files.append(io.write_dict_csv(out / "sweep.csv", rows, SWEEP_HEADER))
    summary = {"key": key, "rows": rows, "converged": all(r["converged"] for r in rows)}
    return RunResult(summary, files, members=members)
