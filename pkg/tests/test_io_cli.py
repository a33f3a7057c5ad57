import json

import numpy as np
import pytest

from darcy_benard import cli, io
from darcy_benard.dofs import build_dof_map
from darcy_benard.mesh import build_unit_square


def test_vtk_single_cell(tmp_path):
    mesh = build_unit_square(1)
    q2, q1 = build_dof_map(mesh, 2), build_dof_map(mesh, 1)
    path = io.write_vtk(tmp_path / "f.vtk", q2, q1, np.zeros(9), np.ones(9),
                        np.arange(4.0), np.linspace(0, 1, 9))
    counts = io.read_vtk_counts(path)
    assert counts == {"POINTS": 9, "CELLS": 4, "CELL_TYPES": 4, "POINT_DATA": 9}
    text = path.read_text()
    assert "DATASET UNSTRUCTURED_GRID" in text and "VECTORS velocity double" in text
    assert "SCALARS temperature double 1" in text and "SCALARS pressure double 1" in text


def test_vtk_point_count_matches_q2_dofs(tmp_path):
    mesh = build_unit_square(3)
    q2, q1 = build_dof_map(mesh, 2), build_dof_map(mesh, 1)
    rng = np.random.default_rng(0)
    p = rng.random(q1.n_dofs)
    path = io.write_vtk(tmp_path / "f.vtk", q2, q1, rng.random(q2.n_dofs), rng.random(q2.n_dofs),
                        p, rng.random(q2.n_dofs))
    counts = io.read_vtk_counts(path)
    assert counts["POINTS"] == q2.n_dofs and counts["CELLS"] == 4 * mesh.n_cells
    lines = path.read_text().splitlines()
    pstart = lines.index("SCALARS pressure double 1") + 2
    pvals = np.array([float(v) for v in lines[pstart:pstart + q2.n_dofs]])
    # pressure at Q1 vertices is carried over exactly (17 significant digits)
    q1_at_q2 = [np.flatnonzero(np.all(np.isclose(q2.dof_coords, c), axis=1))[0] for c in q1.dof_coords]
    assert np.array_equal(pvals[q1_at_q2], p)


def test_csv_round_trip_shortest_repr(tmp_path):
    path = io.write_csv(tmp_path / "a.csv", ("x", "y"), [(0.1, 1 / 3), (2, float("nan"))])
    rows = io.read_csv(path)
    assert rows[0] == {"x": "0.1", "y": repr(1 / 3)}
    assert float(rows[0]["y"]) == 1 / 3 and rows[1]["y"] == "nan"


def write_cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text, encoding="utf-8")
    return p


def test_cli_run_writes_manifest(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "scenario = bottom_heated\nra = 0\nperturb_amp = 0\nn = 4\ndt = 0.1\n")
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--output-dir", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["converged"] and abs(summary["nu"] - 1.0) < 1e-6
    for name in ("summary.csv", "nusselt_profile.csv", "fields.vtk", "progress.jsonl",
                 "midline_u.csv", "midline_w.csv", "midline_theta.csv", "midline_p.csv"):
        assert (out / name).is_file()
    record = json.loads((out / "progress.jsonl").read_text().splitlines()[0])
    assert set(record) == {"step", "time", "residual", "inner_sweeps", "nu"}


def test_cli_env_override(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path, "scenario = left_heated\nra = 0\nn = 2\ndt = 0.1\n")
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["run", str(cfg), "--output-dir", str(tmp_path / "ignored")]) == 0
    assert (tmp_path / "env_out" / "summary.csv").is_file()
    assert not (tmp_path / "ignored").exists()


def test_cli_not_converged_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, "scenario = left_heated\nra = 50\nn = 4\ndt = 0.01\nmax_steps = 2\n")
    assert cli.main(["run", str(cfg), "--output-dir", str(tmp_path / "o")]) == 2


def test_cli_error_exit_code(tmp_path, capsys):
    assert cli.main(["run", str(write_cfg(tmp_path, "ra = -5\n"))]) == 1
    assert "error" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 1


def test_cli_mms_two_levels(tmp_path, capsys):
    assert cli.main(["mms", "--levels", "2", "--base-n", "2", "--output-dir", str(tmp_path)]) == 0
    rows = io.read_csv(tmp_path / "convergence.csv")
    assert len(rows) == 2 and rows[0]["rate_u"] == "nan" and float(rows[1]["rate_u"]) > 0
    assert list(rows[0]) == ["level", "n", "total_dofs", "err_u", "rate_u", "err_p", "rate_p",
                             "err_theta", "rate_theta"]
    assert cli.main(["mms", "--levels", "1"]) == 1


def test_cli_sweep(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "scenario = left_heated\nn = 4\ndt = 0.05\n")
    assert cli.main(["sweep", str(cfg), "--ra", "5,10", "--output-dir", str(tmp_path / "s")]) == 0
    rows = io.read_csv(tmp_path / "s" / "sweep.csv")
    assert [r["value"] for r in rows] == ["5.0", "10.0"]
    member = io.read_csv(tmp_path / "s" / "ra_10.0" / "summary.csv")[0]
    assert member["nu"] == rows[1]["nu"]  # aggregation preserves member values exactly


def test_cli_sweep_mesh_sizes_parse():
    args = cli.build_parser().parse_args(["sweep", "x.cfg", "--h", "0.0625,32"])
    assert args.h == [16, 32]
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["sweep", "x.cfg", "--ra", ""])
