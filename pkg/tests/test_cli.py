from __future__ import annotations

import csv
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from nonsaddle.cli import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main
from nonsaddle.config import AnalysisConfig, config_from_dict, load_config, parse_config
from nonsaddle.flowfield import ConfigError
from nonsaddle.pipeline import report_json, run

SMALL = """
[flow]
id = planar_cycle

[params]
sigma = 1

[grid]
resolution = 48

[outer]
tau = 1.0
step = 0.01

[influence]
T_max = 40
n_perturb = 8
max_confirm = 1

[run]
stages = classify, conley, influence
output_dir = out
"""


def _schema():
    return json.loads(resources.files("nonsaddle").joinpath("schema/report.schema.json").read_text())


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_list_flows(capsys):
    assert main(["list-flows", "--json"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert [r["id"] for r in rows][:3] == ["torus_homoclinic", "saddle_node_torus", "mendelson"]
    assert main(["list-flows"]) == EXIT_OK
    assert "planar_cycle" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "nonsaddle", "list-flows"], capture_output=True, text=True)
    assert out.returncode == 0 and "robust_family" in out.stdout


def test_analyze_writes_valid_report(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    assert main(["analyze", str(cfg)]) == EXIT_OK
    assert "verdict: attractor" in capsys.readouterr().out
    out = tmp_path / "out"
    report = json.loads((out / "report.json").read_text())
    jsonschema.validate(report, _schema())
    assert report["verdict"] == "attractor"
    assert report["artifacts"] == ["cells_block.csv", "cells_influence.csv", "report.json"]
    assert report["config"]["resolution"] == 48
    assert "timing" not in report
    names = {c["name"] for c in report["cross_checks"]}
    assert {"index_pair_invariants", "conley_certificate", "partition_total", "euler_agreement"} <= names
    assert all(c["status"] in ("pass", "fail", "n/a") for c in report["cross_checks"])


def test_stdout_and_output_override(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    target = tmp_path / "elsewhere"
    assert main(["influence", str(cfg), "-o", str(target), "--stdout"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["conley"] is None and report["influence"] is not None
    assert (target / "report.json").exists()


def test_dump_cells(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    assert main(["dump-cells", str(cfg)]) == EXIT_OK
    assert capsys.readouterr().out.split() == ["cells_block.csv", "cells_influence.csv"]
    rows = list(csv.reader(open(tmp_path / "out" / "cells_influence.csv")))
    assert rows[0] == ["i", "j", "class"] and len(rows) == 1 + 48 * 48
    assert {r[2] for r in rows[1:]} <= {"ASTAR", "RSTAR", "HOM", "K", "OUT", "DISS_P", "DISS_N", "DISS_E"}


def test_robustness_command(tmp_path, capsys):
    text = """
[flow]
id = robust_family
[grid]
resolution = 64
[outer]
tau = 1.0
[robustness]
lambdas = 0, 0.04, 0.16
[run]
output_dir = rob
"""
    cfg = _write(tmp_path, text)
    assert main(["robustness", str(cfg)]) == EXIT_OK
    report = json.loads((tmp_path / "rob" / "report.json").read_text())
    jsonschema.validate(report, _schema())
    assert report["robustness"]["window"] == [0.0, 0.04]
    assert report["verdict"] is None


@pytest.mark.parametrize("text", [
    "[flow]\nid = no_such_flow\n",
    "[grid]\nresolution = 64\n",
    "[flow]\nid = planar_cycle\n[grid]\nresolution = -3\n",
    "[flow]\nid = planar_cycle\n[params]\nbogus = 1\n",
    "[flow]\nid = planar_cycle\n[run]\nstages = classify, teleport\n",
    "[flow]\nid = planar_cycle\n[homology]\ncoefficients = Q\n",
    "this is not an ini file",
])
def test_config_errors_exit_2(tmp_path, capsys, text):
    cfg = _write(tmp_path, text)
    assert main(["analyze", str(cfg)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["analyze", str(tmp_path / "absent.ini")]) == EXIT_CONFIG


def test_non_isolating_block_exits_3(tmp_path, capsys):
    text = SMALL.replace("[run]", "[block]\nkind = disk\ncx = 0\ncy = 0\nradius = 1.0\n\n[run]")
    cfg = _write(tmp_path, text)
    assert main(["analyze", str(cfg)]) == EXIT_STAGE
    assert "classify" in capsys.readouterr().err


def test_config_round_trip(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    assert cfg.output_dir == str(tmp_path / "out")
    again = config_from_dict(cfg.as_dict())
    assert again == cfg
    assert parse_config(SMALL).output_dir == "out"
    with pytest.raises(ConfigError):
        AnalysisConfig("planar_cycle", tau=-1.0)


def test_config_echo_reruns_to_identical_report(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    first = run(cfg)
    again = run(config_from_dict(first.report["config"]))
    assert report_json(again.report) == report_json(first.report)
