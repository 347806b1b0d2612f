import json
import subprocess
import sys

import pytest

from roundoff.cli import build_parser, run
from roundoff.harness import ResultTable

QUICK = ["--polygon", "square", "--h-max", "0.25", "--beta", "0.6", "-o"]


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["frobnicate"])


def test_construct_writes_outline(tmp_path, capsys):
    assert run(["construct", *QUICK, str(tmp_path), "--n", "2"]) == 0
    assert (tmp_path / "domain.svg").exists()
    assert len((tmp_path / "boundary.txt").read_text().splitlines()) > 100
    assert "n=2 pieces=8" in capsys.readouterr().out


def test_mesh_and_solve(tmp_path, capsys):
    assert run(["mesh", *QUICK, str(tmp_path)]) == 0
    header = (tmp_path / "mesh.txt").read_text().splitlines()[0].split()
    assert header[2] == "2"
    assert run(["solve", *QUICK, str(tmp_path), "--source", "one"]) == 0
    assert (tmp_path / "solution.txt").exists()
    assert "cg_iterations=" in capsys.readouterr().out


def test_norms_writes_csv(tmp_path):
    assert run(["norms", *QUICK, str(tmp_path), "--a-list", "0,0.3"]) == 0
    lines = (tmp_path / "norms.csv").read_text().splitlines()
    assert len(lines) == 3


def test_sweep_with_config_file(tmp_path):
    cfg = {"polygon": "square", "n_list": [1, 2], "a_list": [0.3], "h_max": 0.25, "beta": 0.6, "eigen": False,
           "output": str(tmp_path)}  # fmt: skip
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert run(["sweep", "--config", str(path)]) == 0
    table = ResultTable.from_csv(tmp_path / "results.csv")
    assert [r.n for r in table.rows] == [1, 2]
    assert (tmp_path / "ratio_vs_n.svg").exists()
    assert (tmp_path / "outlines.svg").exists()


def test_sweep_exit_code_on_failed_rows(tmp_path):
    code = run(["sweep", *QUICK, str(tmp_path), "--n-list", "1", "--rho", "0.9", "--rho-prime", "0.1", "--no-plots"])
    assert code == 1
    assert not ResultTable.from_csv(tmp_path / "results.csv").rows[0].ok


def test_polygon_json_file(tmp_path):
    poly = tmp_path / "tri.json"
    poly.write_text(json.dumps([[0, 0], [1, 0], [0, 1]]))
    assert run(["construct", "--polygon", str(poly), "-o", str(tmp_path)]) == 0


def test_bad_arguments_exit_2(tmp_path, capsys):
    assert run(["construct", "--polygon", "square", "--n-list", "2,1", "-o", str(tmp_path)]) == 2
    assert run(["construct", "--config", str(tmp_path / "missing.json"), "-o", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_out_of_range_rho_exit_2(tmp_path):
    assert run(["construct", "--polygon", "square", "--rho", "0.9", "--rho-prime", "0.1", "-o", str(tmp_path)]) == 2


def test_invalid_polygon_exit_1(tmp_path, capsys):
    poly = tmp_path / "bowtie.json"
    poly.write_text(json.dumps([[0, 0], [1, 1], [1, 0], [0, 1]]))
    assert run(["construct", "--polygon", str(poly), "-o", str(tmp_path)]) == 1
    assert capsys.readouterr().err.strip()


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "roundoff", "construct", "--polygon", "lshape", "-o", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    assert "pieces=12" in out.stdout
