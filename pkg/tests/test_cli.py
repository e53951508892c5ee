"""Command-line driver: exit codes, CSV shape and byte-level determinism."""

import csv
import io
import json

import numpy as np
import pytest

import cases
from layerode import build_mesh, problem_to_dict, solve, validate
from layerode.cli import (
    EXIT_BAND,
    EXIT_MESH,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_VALIDATION,
    main,
)


def _write_problem(tmp_path, spec, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(problem_to_dict(spec)), encoding="utf-8")
    return str(path)


def _rows(text):
    data_lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(data_lines))))


def test_validate_reports_alpha(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.constant_two_scale())
    assert main(["validate", "--problem", path]) == EXIT_OK
    assert capsys.readouterr().out == "alpha = 2\n"


def test_validate_json_payload(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.variable_three_scale())
    assert main(["validate", "--problem", path, "--json"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["alpha"] == 2.0
    assert payload["n"] == 3


def test_validate_rejects_bad_sign_with_exit_3(tmp_path, capsys):
    spec = problem_to_dict(cases.constant_two_scale())
    spec["A"] = [[[3.0], [1.0]], [[-1.0], [3.0]]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    assert main(["validate", "--problem", str(path)]) == EXIT_VALIDATION
    assert "validation error" in capsys.readouterr().err


def test_missing_problem_file_is_a_usage_error(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["validate", "--problem", missing]) == EXIT_PARSE
    capsys.readouterr()


def test_malformed_json_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    assert main(["validate", "--problem", str(path)]) == EXIT_PARSE
    capsys.readouterr()


def test_unknown_key_exits_2(tmp_path, capsys):
    data = problem_to_dict(cases.steady_scalar())
    data["plot"] = True
    path = tmp_path / "extra.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    assert main(["validate", "--problem", str(path)]) == EXIT_PARSE
    assert "plot" in capsys.readouterr().err


def test_mesh_csv_round_trips_points(tmp_path, capsys):
    spec = cases.layer_two_scale()
    path = _write_problem(tmp_path, spec)
    assert main(["mesh", "--problem", path, "--N", "16"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# sigmas = ")
    rows = _rows(out)
    assert rows[0] == ["j", "t_j", "delta_j"]
    assert rows[1] == ["0", "0", ""]
    mesh = build_mesh(validate(spec), 16)
    points = [float(row[1]) for row in rows[1:]]
    assert points == mesh.points.tolist()
    deltas = [float(row[2]) for row in rows[2:]]
    assert deltas == mesh.deltas.tolist()


def test_mesh_unusable_n_exits_4(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.layer_two_scale())
    assert main(["mesh", "--problem", path, "--N", "6"]) == EXIT_MESH
    assert "mesh error" in capsys.readouterr().err


def test_solve_csv_matches_library(tmp_path, capsys):
    spec = cases.constant_two_scale()
    path = _write_problem(tmp_path, spec)
    assert main(["solve", "--problem", path, "--N", "16", "--certify"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "# max_principle = ok" in out
    assert "# stability_ok = true" in out
    rows = _rows(out)
    assert rows[0] == ["j", "t_j", "U_1", "U_2"]
    grid = solve(validate(spec), 16)
    values = np.array([[float(row[2]), float(row[3])] for row in rows[1:]]).T
    assert np.array_equal(values, grid.values)


def test_solve_decompose_adds_part_columns(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.layer_two_scale())
    assert main(["solve", "--problem", path, "--N", "16", "--decompose"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["j", "t_j", "U_1", "U_2", "V_1", "V_2", "W_1", "W_2"]
    for row in rows[1:]:
        u, v, w = float(row[2]), float(row[4]), float(row[6])
        assert abs(u - (v + w)) <= 1e-10 * (1.0 + abs(u))


def test_solve_output_is_deterministic(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.variable_three_scale())
    assert main(["solve", "--problem", path, "--N", "8"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(["solve", "--problem", path, "--N", "8"]) == EXIT_OK
    assert capsys.readouterr().out == first


def test_out_file_matches_stdout_with_lf_endings(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.layer_two_scale())
    target = tmp_path / "mesh.csv"
    assert main(["mesh", "--problem", path, "--N", "8", "--out", str(target)]) == EXIT_OK
    capsys.readouterr()
    assert main(["mesh", "--problem", path, "--N", "8"]) == EXIT_OK
    piped = capsys.readouterr().out
    data = target.read_bytes()
    assert b"\r" not in data
    assert data.decode("utf-8") == piped


def test_converge_band_gate(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.decay_scalar())
    args = ["converge", "--problem", path, "--N", "16,32,64", "--mode", "exact"]
    assert main(args + ["--min-p", "0.5"]) == EXIT_OK
    capsys.readouterr()
    assert main(args + ["--min-p", "2.0"]) == EXIT_BAND
    assert "below the requested band" in capsys.readouterr().err


def test_converge_band_gate_fails_when_order_absent(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.steady_scalar())
    args = ["converge", "--problem", path, "--N", "8,16", "--min-p", "0.5"]
    assert main(args) == EXIT_BAND
    capsys.readouterr()


def test_converge_exact_mode_needs_constant_coefficients(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.variable_three_scale())
    args = ["converge", "--problem", path, "--N", "16,32", "--mode", "exact"]
    assert main(args) == EXIT_PARSE
    assert "two_mesh" in capsys.readouterr().err


def test_converge_json_rows(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.decay_scalar())
    args = ["converge", "--problem", path, "--N", "16,32", "--mode", "exact", "--json"]
    assert main(args) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["mode"] == "exact_oracle"
    assert [row["N"] for row in payload["rows"]] == [16, 32]
    assert payload["rows"][1]["p"] is None


def test_sweep_uniform_rows_and_custom_grid(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.constant_two_scale())
    args = [
        "sweep", "--problem", path, "--N", "16,32", "--mode", "exact",
        "--eps-grid", "0.0001,0.01;0.0625,0.25",
    ]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    rows = _rows(out)
    labels = {row[0] for row in rows[1:]}
    assert "uniform" in labels
    assert len([row for row in rows[1:] if row[0] == "uniform"]) == 2


def test_sweep_jobs_do_not_change_output(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.constant_two_scale())
    args = [
        "sweep", "--problem", path, "--N", "16,32", "--mode", "exact",
        "--eps-grid", "0.0001,0.01;0.0625,0.25;0.125,0.5",
    ]
    assert main(args) == EXIT_OK
    sequential = capsys.readouterr().out
    assert main(args + ["--jobs", "2"]) == EXIT_OK
    assert capsys.readouterr().out == sequential


def test_sweep_band_gate(tmp_path, capsys):
    path = _write_problem(tmp_path, cases.constant_two_scale())
    args = [
        "sweep", "--problem", path, "--N", "16,32", "--mode", "exact",
        "--eps-grid", "0.0001,0.01", "--min-p-uniform", "2.0",
    ]
    assert main(args) == EXIT_BAND
    capsys.readouterr()
