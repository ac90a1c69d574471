import dataclasses
import json
import subprocess
import sys

import pytest

from test_pipeline import ALL_MALE
from usv_assembly.cli import main
from usv_assembly.mapgen import bundled
from usv_assembly.navigation import NavParams
from usv_assembly.scenario import dump_scenario


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def test_run_success(out, capsys):
    assert main(["run", "--scenario", "demo-pair", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["outcome"] == "Success" and summary["final_connectivity"] == 1
    assert (out / "steps.jsonl").is_file()


def test_global_flags_before_command(out):
    assert main(["--scenario", "demo-pair", "--seed", "4", "--out", str(out), "plan"]) == 0
    assert json.loads((out / "summary.json").read_text())["seed"] == 4
    assert not (out / "steps.jsonl").exists()


def test_infeasible_exit_code(tmp_path, out):
    scn = tmp_path / "male.scn"
    scn.write_text(ALL_MALE)
    assert main(["run", "--scenario", str(scn), "--out", str(out)]) == 2
    assert main(["plan", "--scenario", str(scn), "--out", str(out)]) == 2


def test_navigation_failure_exit_code(tmp_path, out, capsys):
    # with no replans allowed the first conflict on the way out ends the run
    sc = dataclasses.replace(bundled("map1-genderless"), navigation=NavParams(max_replans=0))
    scn = tmp_path / "stuck.scn"
    scn.write_text(dump_scenario(sc))
    assert main(["run", "--scenario", str(scn), "--out", str(out)]) == 3
    summary = json.loads(capsys.readouterr().out)
    assert summary["outcome"] == "Fail" and summary["diagnostic"]["reason"] == "replan limit"


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--scenario", "no-such-map"],
        ["run"],
        ["run", "--scenario", "demo-pair", "--seed", "-1"],
        ["batch", "--scenario", "demo-pair", "--runs", "0"],
        ["render", "--in", "/nonexistent/log.jsonl", "--out", "x.svg"],
        ["fly"],
    ],
)
def test_input_errors(argv, capsys):
    assert main(argv) == 4


def test_bad_scenario_file(tmp_path, capsys):
    scn = tmp_path / "bad.scn"
    scn.write_text("usv-assembly-scenario 1\nmap 6 x\n")
    assert main(["plan", "--scenario", str(scn)]) == 4
    assert "bad.scn:2:7" in capsys.readouterr().err


def test_batch_and_render(out, capsys):
    assert main(["batch", "--scenario", "demo-pair", "--runs", "2", "--out", str(out)]) == 0
    report = json.loads((out / "batch-demo-pair.json").read_text())
    assert report["format"] == "usv-assembly-batch" and len(report["rows"]) == 2
    assert main(["run", "--scenario", "demo-pair", "--out", str(out)]) == 0
    svg = out / "demo.svg"
    assert main(["render", "--in", str(out / "steps.jsonl"), "--out", str(svg), "--style", "mono"]) == 0
    assert "<svg" in svg.read_text()


def test_track_command(out, capsys):
    argv = ["track", "--traj", "eight", "--controller", "adrc", "--duration", "2", "--out", str(out)]
    assert main(argv) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["trajectory"] == "eight" and summary["controller"] == "adrc"
    assert (out / "track-eight-adrc.jsonl").is_file()
    assert json.loads((out / "track-eight-adrc-summary.json").read_text()) == summary


def test_console_module_entry(tmp_path):
    done = subprocess.run(
        [sys.executable, "-m", "usv_assembly.cli", "plan", "--scenario", "map1-gendered", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert done.returncode == 0
    assert json.loads(done.stdout)["c_min"] == 1
