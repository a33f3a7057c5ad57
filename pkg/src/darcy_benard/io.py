"""CSV and legacy-VTK writers."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dofs import DofMap

VTK_QUAD = 9


def format_value(v) -> str:
    """Shortest round-trip text for numbers; other values via str()."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def write_dict_csv(path, records: Sequence[Mapping], header: Sequence[str] | None = None) -> Path:
    header = list(header or (records[0].keys() if records else []))
    return write_csv(path, header, ([r.get(k, "") for k in header] for r in records))


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_vtk(path, vel_space: DofMap, pres_space: DofMap, u_x, u_z, p, theta) -> Path:
    """Legacy ASCII unstructured grid on the Q2 node lattice.

    Each Q2 cell is split into four bilinear quads; pressure is evaluated
    at the Q2 nodes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coords = vel_space.dof_coords
    m = vel_space.nodes_per_side
    j, i = np.divmod(np.arange((m - 1) ** 2), m - 1)
    ll = j * m + i
    quads = np.column_stack([ll, ll + 1, ll + m + 1, ll + m])
    p_nodes = pres_space.evaluate(np.asarray(p, dtype=float), coords)

    lines = [
        "# vtk DataFile Version 3.0",
        "darcy-benard fields",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {coords.shape[0]} double",
    ]
    lines += [f"{x:.17g} {z:.17g} 0" for x, z in coords]
    lines.append(f"CELLS {quads.shape[0]} {5 * quads.shape[0]}")
    lines += [f"4 {a} {b} {c} {d}" for a, b, c, d in quads]
    lines.append(f"CELL_TYPES {quads.shape[0]}")
    lines += [str(VTK_QUAD)] * quads.shape[0]
    lines.append(f"POINT_DATA {coords.shape[0]}")
    lines.append("VECTORS velocity double")
    lines += [f"{a:.17g} {b:.17g} 0" for a, b in zip(np.asarray(u_x, float), np.asarray(u_z, float))]
    for name, vals in (("temperature", theta), ("pressure", p_nodes)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{v:.17g}" for v in np.asarray(vals, dtype=float)]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_vtk_counts(path) -> dict[str, int]:
    """Point and cell counts from a legacy VTK file (for round-trip checks)."""
    counts = {}
    for line in Path(path).read_text(encoding="ascii").splitlines():
        head = line.split()
        if head and head[0] in ("POINTS", "CELLS", "CELL_TYPES", "POINT_DATA"):
            counts[head[0]] = int(head[1])
    return counts
