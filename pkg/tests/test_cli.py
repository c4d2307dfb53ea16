import json

import pytest
from click.testing import CliRunner
from src.obslab import cli

LOOP_5 = [
    [0, 1, 2, 3, 4],
    [1, 0, 3, 4, 2],
    [2, 4, 0, 1, 3],
    [3, 2, 4, 0, 1],
    [4, 3, 1, 2, 0],
]


@pytest.fixture
def runner(monkeypatch):
    for key in ("OBSLAB_BUDGET", "OBSLAB_FLOW_WINDOW", "OBSLAB_SEED", "OBSLAB_FORMAT", "OBSLAB_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    return CliRunner()


class TestCommands:
    def test_heisenberg_obstructed(self, runner):
        result = runner.invoke(cli, ["heisenberg", "--k", "2", "--nu", "injective"])
        assert result.exit_code == 0
        assert "splitting: OBSTRUCTED" in result.output

    def test_cohomology(self, runner):
        result = runner.invoke(cli, ["cohomology", "--group", "cyclic:2", "--module", "Z2", "--degree", "3"])
        assert result.exit_code == 0
        assert "H3: Z/2" in result.output

    def test_loop_is_not_a_group(self, runner):
        result = runner.invoke(cli, ["group-check", "--table", json.dumps(LOOP_5)])
        assert result.exit_code == 2

    def test_unknown_group_family(self, runner):
        result = runner.invoke(cli, ["cohomology", "--group", "dihedral:4", "--module", "Z2", "--degree", "1"])
        assert result.exit_code == 2

    def test_delta_hjr_json(self, runner):
        result = runner.invoke(cli, ["delta-hjr", "--fixture", "FX1", "--format", "json"])
        assert result.exit_code == 0
        report = json.loads(result.stdout)
        assert report["command"] == "delta-hjr"
        assert report["verdict"]["ok"] is True

    def test_format_from_env(self, runner, monkeypatch):
        monkeypatch.setenv("OBSLAB_FORMAT", "json")
        result = runner.invoke(cli, ["heisenberg", "--k", "3", "--nu", "zero"])
        assert result.exit_code == 0
        assert json.loads(result.stdout)["results"]["splitting"] == "SPLIT"


class TestWitnessReplay:
    def test_resolve_then_replay(self, runner, tmp_path):
        result = runner.invoke(cli, ["resolve", "--fixture", "FX-C2", "--format", "json"])
        assert result.exit_code == 0
        report = json.loads(result.stdout)
        assert report["witnesses"]

        path = tmp_path / "resolve.json"
        path.write_text(result.stdout)
        replay = runner.invoke(cli, ["oracle-compare", "--report", str(path), "--format", "json"])
        assert replay.exit_code == 0
        results = json.loads(replay.stdout)["results"]
        assert results["verified"] == results["witnesses"] == len(report["witnesses"])

    def test_tampered_report_fails(self, runner, tmp_path):
        result = runner.invoke(cli, ["resolve", "--fixture", "FX-C2", "--format", "json"])
        report = json.loads(result.stdout)
        report["witnesses"][0]["witness"][0]["entries"] = []
        report["witnesses"][0]["target"][0]["entries"] = [{"args": [1, 1, 1], "value": [1]}]

        path = tmp_path / "tampered.json"
        path.write_text(json.dumps(report))
        replay = runner.invoke(cli, ["oracle-compare", "--report", str(path)])
        assert replay.exit_code == 1
        assert "verdict: violation" in replay.stdout


class TestFiberCheck:
    def test_violation_exits_one(self, runner, tmp_path):
        problem = {
            "group": {"family": "heisenberg", "n": 2},
            "module": {"moduli": [2]},
            "obstruction": {"N": [0, 1], "nu": [{"args": [1], "value": [1]}]},
        }
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(problem))
        result = runner.invoke(cli, ["fiber-check", "--problem", str(path)])
        assert result.exit_code == 1
        assert "axiom: fiber" in result.stdout

    def test_heisenberg_fiber_holds(self, runner):
        result = runner.invoke(cli, ["fiber-check", "--k", "2"])
        assert result.exit_code == 0
        assert "fiber: True" in result.stdout


COMMANDS = [
    ["group-check", "--group", "klein"],
    ["cohomology", "--group", "cyclic:2", "--module", "Z2", "--degree", "3"],
    ["delta-hjr", "--fixture", "FX1"],
    ["delta-mod", "--fixture", "FX1"],
    ["partial", "--fixture", "FX1"],
    ["resolve", "--fixture", "FX-C2"],
    ["resolve-obstruction", "--fixture", "FX1"],
    ["fiber-check", "--k", "2"],
    ["section-change", "--fixture", "FX1"],
    ["exactness", "--fixture", "FX1"],
    ["heisenberg", "--k", "2"],
    ["heisenberg", "--k", "2", "--nu", "zero"],
    ["oracle-compare", "--group", "cyclic:2", "--module", "Z2", "--samples", "3", "--seed", "5"],
]


class TestDeterminism:
    @pytest.mark.parametrize("args", COMMANDS, ids=[" ".join(a) for a in COMMANDS])
    def test_reports_repeat_and_replay(self, runner, tmp_path, args):
        first = runner.invoke(cli, args + ["--format", "json"])
        second = runner.invoke(cli, args + ["--format", "json"])
        assert first.exit_code == 0
        assert first.stdout == second.stdout

        path = tmp_path / "report.json"
        path.write_text(first.stdout)
        replay = runner.invoke(cli, ["oracle-compare", "--report", str(path), "--format", "json"])
        assert replay.exit_code == 0
        results = json.loads(replay.stdout)["results"]
        assert results["verified"] == results["witnesses"] == len(json.loads(first.stdout)["witnesses"])
