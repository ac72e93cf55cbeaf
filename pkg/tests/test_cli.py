import csv
import json
from pathlib import Path

import pytest

from arwlab.cli import config_hash, main

GOLDEN = Path(__file__).parent / "golden" / "stabilize-worked.json"
WORKED = ["--particles", "[[0],[0]]", "--tapes", '{"0":["s","+1","s"],"1":["s"]}', "--seed", "7"]


def run(args, out):
    return main(args + ["--out", str(out)])


def only(out, suffix):
    (p,) = Path(out).glob(f"*{suffix}")
    return p


def test_stabilize_golden(tmp_path):
    assert run(["stabilize"] + WORKED, tmp_path) == 0
    assert only(tmp_path, ".json").read_bytes() == GOLDEN.read_bytes()


def test_stabilize_empty_and_budget(tmp_path):
    assert run(["stabilize"], tmp_path / "a") == 0
    snap = json.loads(only(tmp_path / "a", ".json").read_text())["snapshot"]
    assert snap["config"] == {} and snap["odometer"] == {}
    assert run(["stabilize", "--particles", "[[0]]", "--budget", "0"], tmp_path / "b") == 2


def test_stabilize_ssm(tmp_path):
    assert run(["stabilize", "--model", "ssm", "--kappa", "3", "--particles", "[[0],[0],[0]]",
                "--domain", '{"lower":[0],"side":[1]}'], tmp_path) == 0
    snap = json.loads(only(tmp_path, ".json").read_text())["snapshot"]
    assert snap["dissipated"] == 3


def test_bad_config_exits_1(tmp_path, capsys):
    assert run(["stabilize", "--model", "xyz"], tmp_path) == 1
    assert run(["estimate-escape", "--trials", "0"], tmp_path) == 1
    assert run(["dd", "--n", "3"], tmp_path) == 1  # ssm needs kappa
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["geometry", "--config", str(bad)]) == 1
    assert "arwlab" in capsys.readouterr().err


def test_dd_curve_and_determinism(tmp_path):
    args = ["dd", "--n", "1", "--d", "1", "--kappa", "3", "--insertions", "9"]
    assert run(args, tmp_path / "a") == 0
    assert run(args, tmp_path / "b") == 0
    a, b = only(tmp_path / "a", ".csv"), only(tmp_path / "b", ".csv")
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.read_text().splitlines()[1:]))
    assert [int(r["remaining"]) for r in rows] == [1, 2, 0, 1, 2, 0, 1, 2, 0]


def test_recursion_exit_codes(tmp_path):
    assert run(["recursion"], tmp_path) == 0
    header = only(tmp_path, ".csv").read_text().splitlines()[1]
    assert header == "k,L_k,R_k,zeta_k,p_bound,margin"
    assert run(["recursion", "--c4", "0"], tmp_path / "r") == 3
    assert json.loads(only(tmp_path / "r", ".json").read_text())["failing_k"] == 0
    assert run(["recursion", "--kbar", "5", "--k-max", "2"], tmp_path / "x") == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"d": 1, "L": 20, "R": 2}))
    assert main(["geometry", "--config", str(cfg), "--R", "3", "--out", str(tmp_path / "o")]) == 0
    doc = json.loads(only(tmp_path / "o", ".json").read_text())
    assert doc["config"]["R"] == 3 and doc["kernel"]["ring"] == 3
    assert doc["config_hash"] == config_hash(doc["config"])


def test_refuses_foreign_overwrite(tmp_path):
    assert run(["geometry", "--d", "1", "--L", "10", "--R", "2"], tmp_path) == 0
    p = only(tmp_path, ".csv")
    p.write_text("# config_hash=somethingelse\n")
    assert run(["geometry", "--d", "1", "--L", "10", "--R", "2"], tmp_path) == 1
    assert p.read_text() == "# config_hash=somethingelse\n"


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("ARWLAB_OUT", str(tmp_path / "env"))
    assert main(["kernel-table", "--t", "[1.0]", "--radius", "1"]) == 0
    assert list((tmp_path / "env").glob("kernel-*.csv"))


@pytest.mark.parametrize("args", [
    ["estimate-escape", "--L", "10", "--R", "2", "--zeta", "0.3", "--trials", "10", "--jobs", "1"],
    ["fixation", "--zeta", "0.3", "--ladder", "[2,4]", "--l-grid", "[0,1,2]", "--trials", "10", "--jobs", "1"],
    ["slt-demo", "--L", "6", "--R", "1", "--walkers", "2"],
    ["kernel-table", "--d", "2", "--t", "[0.5, 2]", "--radius", "2"],
    ["geometry", "--d", "2", "--L", "20", "--R", "4"],
])
def test_subcommands_run(tmp_path, args):
    assert run(args, tmp_path) == 0
    doc = json.loads(only(tmp_path, ".json").read_text())
    assert "runtime" not in doc and len(doc["config_hash"]) == 12


def test_json_format_embeds_rows(tmp_path):
    assert run(["dd", "--n", "1", "--d", "1", "--kappa", "3", "--insertions", "3", "--format", "json"], tmp_path) == 0
    assert not list(tmp_path.glob("*.csv"))
    assert len(json.loads(only(tmp_path, ".json").read_text())["rows"]) == 3


def test_timing_flag(tmp_path):
    assert run(["geometry", "--d", "1", "--L", "10", "--R", "2", "--timing", "--format", "json"], tmp_path) == 0
    assert "runtime" in json.loads(only(tmp_path, ".json").read_text())
