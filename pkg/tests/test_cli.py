from __future__ import annotations

import hashlib
import json
import subprocess
import sys

import pytest
from conftest import FIXTURES

from attackplan.cli import EXIT_EXEC_FAILED, EXIT_OK, EXIT_UNSOLVABLE, EXIT_USAGE, main
from attackplan.netmodel import (
    Host,
    OsFingerprint,
    add_host,
    new_workspace,
    save_workspace,
)


def digest(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture()
def generated(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--topology", "star", "--machines", "30", "--seed", "3", "--out", str(out)]) == EXIT_OK
    return out


def test_run_star(capsys):
    assert main(["run", "--topology", "star", "--machines", "60", "--goal", "10.0.3.2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "0: Mark_as_compromised localagent localhost"
    assert "execution: success" in out


def test_run_chain_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--topology", "chain", "--depth", "3", "--seed", "2", "--out", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["catalog.json", "domain.pddl", "ground_truth.json", "mapping.tsv", "plan.txt",
                     "problem.pddl", "trace.json", "workspace.json"]
    assert json.loads((out / "trace.json").read_text())["status"] == "success"


def test_generate_files(generated):
    assert sorted(p.name for p in generated.iterdir()) == ["catalog.json", "ground_truth.json", "workspace.json"]


def test_transform_plan_validate(generated, tmp_path, capsys):
    gt = json.loads((generated / "ground_truth.json").read_text())
    target = gt["targets"][0]
    tdir = tmp_path / "t"
    inputs = [generated / n for n in ("workspace.json", "catalog.json")]
    before = [digest(p) for p in inputs]
    args = ["transform", str(generated / "workspace.json"), "--catalog", str(generated / "catalog.json"),
            "--goal", target, "--out", str(tdir)]
    assert main(args) == EXIT_OK
    first = {n: digest(tdir / n) for n in ("domain.pddl", "problem.pddl", "mapping.tsv")}
    assert main(args) == EXIT_OK
    assert first == {n: digest(tdir / n) for n in first}
    assert before == [digest(p) for p in inputs]

    plan = tmp_path / "plan.txt"
    assert main(["plan", "--domain", str(tdir / "domain.pddl"), "--problem", str(tdir / "problem.pddl"),
                 "--mapping", str(tdir / "mapping.tsv"), "--out", str(plan)]) == EXIT_OK
    assert capsys.readouterr().out.rstrip().splitlines()[-1].startswith("total-time: ")
    assert main(["validate", str(plan), "--domain", str(tdir / "domain.pddl"), "--problem", str(tdir / "problem.pddl"),
                 "--ground-truth", str(generated / "ground_truth.json"), "--catalog", str(generated / "catalog.json"),
                 "--mapping", str(tdir / "mapping.tsv"), "--goal", target]) == EXIT_OK
    assert "execution: success" in capsys.readouterr().out


def test_validate_rejects_truncated_plan(generated, tmp_path, capsys):
    target = json.loads((generated / "ground_truth.json").read_text())["targets"][0]
    tdir = tmp_path / "t"
    main(["transform", str(generated / "workspace.json"), "--catalog", str(generated / "catalog.json"),
          "--goal", target, "--out", str(tdir)])
    plan = tmp_path / "plan.txt"
    main(["plan", "--domain", str(tdir / "domain.pddl"), "--problem", str(tdir / "problem.pddl"), "--out", str(plan)])
    lines = plan.read_text().splitlines()
    plan.write_text("\n".join(lines[:-2]) + "\n")
    code = main(["validate", str(plan), "--domain", str(tdir / "domain.pddl"), "--problem", str(tdir / "problem.pddl")])
    assert code == EXIT_EXEC_FAILED
    assert "invalid plan" in capsys.readouterr().out


def test_unsolvable_goal(tmp_path, capsys):
    ws = new_workspace(Host("localhost"), ["n0"])
    add_host(ws, Host("10.0.0.9", OsFingerprint(os="Plan9"), tcp_ports={17}), ["n0"])
    (tmp_path / "ws.json").write_text(save_workspace(ws))
    tdir = tmp_path / "t"
    assert main(["transform", str(tmp_path / "ws.json"), "--catalog", str(FIXTURES / "hp_openview_catalog.json"),
                 "--goal", "10.0.0.9", "--out", str(tdir)]) == EXIT_OK
    capsys.readouterr()
    code = main(["plan", "--domain", str(tdir / "domain.pddl"), "--problem", str(tdir / "problem.pddl")])
    assert code == EXIT_UNSOLVABLE
    assert capsys.readouterr().out.strip() == "unsolvable"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["run", "--machines", "0"],
        ["run", "--topology", "ring"],
        ["plan", "--domain", "/nonexistent/domain.pddl", "--problem", "/nonexistent/problem.pddl"],
        ["bench", "machines", "--values", "20,10"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_transform_needs_goal(generated, tmp_path, capsys):
    code = main(["transform", str(generated / "workspace.json"), "--catalog", str(generated / "catalog.json"),
                 "--out", str(tmp_path / "t")])
    assert code == EXIT_USAGE
    assert "--goal" in capsys.readouterr().err


def test_bad_workspace_reports_path(tmp_path, capsys):
    bad = tmp_path / "ws.json"
    bad.write_text('{"format": 1}')
    code = main(["transform", str(bad), "--catalog", str(FIXTURES / "hp_openview_catalog.json"),
                 "--goal", "x", "--out", str(tmp_path / "t")])
    assert code == EXIT_USAGE
    assert "required property" in capsys.readouterr().err


def test_bench_in_process(tmp_path):
    out = tmp_path / "bench.csv"
    code = main(["bench", "machines", "--values", "10,20", "--seeds", "2", "--actions", "60", "--in-process",
                 "--out", str(out)])
    assert code == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[0].startswith("variable,value,seed")
    assert len(rows) == 5


def test_console_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "attackplan.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("generate", "transform", "plan", "validate", "run", "bench"):
        assert sub in proc.stdout
