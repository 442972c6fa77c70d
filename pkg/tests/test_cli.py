"""Tests for the click command line"""

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from src.cli.commands import EXIT_CONFIG, EXIT_OK, to_jsonable
from src.cli.config import parse_config
from src.cli.main import cli
from src.core.errors import ConfigSchemaError
from src.core.run_archive import RunArchive

FAST = {
    "quadrature": {"nodes": 32, "tol": 1e-11, "max_doublings": 4},
    "epsilon": [0.01],
    "chart_samples": 20,
    "validation_samples": 10,
}


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, name="run.json", **content):
    path = tmp_path / name
    path.write_text(json.dumps({**FAST, **content}))
    return str(path)


def invoke(runner, *args):
    return runner.invoke(cli, ["--quiet", *args], obj={}, catch_exceptions=False)


class TestAnalyze:

    def test_harmonic_document(self, runner, tmp_path):
        config = write_config(tmp_path, scenario={"name": "harmonic_potential"})
        out = tmp_path / "result.json"
        result = invoke(runner, "analyze", "--config", config, "--verify", "off", "--out", str(out))
        assert result.exit_code == EXIT_OK

        document = json.loads(out.read_text())
        for key in ("config", "chart_checks", "averaging", "zeros", "orbits", "sweep"):
            assert key in document
        assert document["chart_checks"]["poisson"]["valid"]
        assert document["averaging"]["cross_check"]["passed"]
        assert document["config"]["tool"]["name"] == "PoissonOrbits"
        (zero,) = document["zeros"]["zeros"]
        assert zero["point"] == pytest.approx([0.5, -0.5], abs=1e-8)
        assert zero["stability"] == "stable"
        assert document["orbits"] == []

    def test_identical_runs_give_identical_bytes(self, runner, tmp_path):
        config = write_config(tmp_path, scenario={"name": "harmonic_potential"}, cross_check=False)
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        for path in (first, second):
            result = invoke(runner, "analyze", "--config", config, "--verify", "off", "--out", str(path))
            assert result.exit_code == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_verified_orbit(self, runner, tmp_path):
        config = write_config(tmp_path, scenario={"name": "harmonic_potential"}, cross_check=False,
                              integrator={"rtol": 1e-9, "atol": 1e-11})
        out = tmp_path / "result.json"
        result = invoke(runner, "analyze", "--config", config, "--out", str(out))
        assert result.exit_code == EXIT_OK
        (orbit,) = json.loads(out.read_text())["orbits"]
        assert orbit["certificate"]["status"] == "converged"
        assert orbit["certificate"]["distance"] < 0.1
        assert orbit["floquet_consistent"] is True
        assert orbit["continuation"] is None

    def test_zeros_as_csv(self, runner, tmp_path):
        config = write_config(tmp_path, scenario={"name": "zero_hopf"}, cross_check=False)
        out = tmp_path / "zeros.csv"
        result = invoke(runner, "analyze", "--config", config, "--verify", "off", "--format", "csv",
                        "--out", str(out))
        assert result.exit_code == EXIT_OK
        frame = pd.read_csv(out)
        assert sorted(frame["r"].round(6)) == [0.618034, 1.618034]
        assert list(frame.columns[:2]) == ["r", "z0"]

    def test_schema_errors_exit_2(self, runner, tmp_path):
        config = write_config(tmp_path, scenario={"name": "nope"}, order=3, bogus=1)
        result = invoke(runner, "analyze", "--config", config)
        assert result.exit_code == EXIT_CONFIG
        assert '"problems"' in result.output
        for path in ('"order"', '"bogus"', '"scenario.name"'):
            assert path in result.output

    def test_missing_config_file(self, runner, tmp_path):
        result = invoke(runner, "analyze", "--config", str(tmp_path / "missing.json"))
        assert result.exit_code == EXIT_CONFIG
        assert "configuration file not found" in result.output

    def test_order_flag_is_range_checked(self, runner, tmp_path):
        config = write_config(tmp_path, scenario={"name": "harmonic_potential"})
        result = runner.invoke(cli, ["--quiet", "analyze", "--config", config, "--order", "3"], obj={})
        assert result.exit_code == 2


class TestSweep:

    def sweep_config(self, tmp_path, values):
        return write_config(tmp_path, scenario={"name": "harmonic_potential"}, verify=False,
                            sweep={"parameter": "c002", "values": values})

    def test_json_rows_in_grid_order(self, runner, tmp_path):
        out = tmp_path / "sweep.json"
        result = invoke(runner, "sweep", "--config", self.sweep_config(tmp_path, [-3.0, -1.0, 1.0, 3.0]),
                        "--workers", "2", "--out", str(out))
        assert result.exit_code == EXIT_OK
        sweep = json.loads(out.read_text())["sweep"]
        assert sweep["parameter"] == "c002"
        assert [row["swept_value"] for row in sweep["rows"]] == [-3.0, -1.0, 1.0, 3.0]
        assert [row["zero_count"] for row in sweep["rows"]] == [1, 1, 0, 0]
        assert all(row["error"] is None for row in sweep["rows"])

    def test_csv_rows(self, runner, tmp_path):
        out = tmp_path / "sweep.csv"
        result = invoke(runner, "sweep", "--config", self.sweep_config(tmp_path, [-2.0, 3.0]),
                        "--format", "csv", "--out", str(out))
        assert result.exit_code == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame["zero_count"]) == [1, 0]
        assert frame.loc[0, "zero0_r"] == pytest.approx(0.5, abs=1e-8)
        assert frame.loc[0, "zero0_stability"] == "stable"

    def test_jsonl_rows(self, runner, tmp_path):
        out = tmp_path / "nested" / "sweep.jsonl"
        result = invoke(runner, "sweep", "--config", self.sweep_config(tmp_path, [-2.0, 3.0]),
                        "--format", "jsonl", "--out", str(out))
        assert result.exit_code == EXIT_OK
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert [row["zero_count"] for row in rows] == [1, 0]

    def test_empty_grid_exits_2(self, runner, tmp_path):
        result = invoke(runner, "sweep", "--config", self.sweep_config(tmp_path, []))
        assert result.exit_code == EXIT_CONFIG
        assert "grid is empty" in result.output

    def test_missing_sweep_exits_2(self, runner, tmp_path):
        config = write_config(tmp_path, scenario={"name": "harmonic_potential"})
        out = tmp_path / "sweep.json"
        result = invoke(runner, "sweep", "--config", config, "--out", str(out))
        assert result.exit_code == EXIT_CONFIG
        assert json.loads(out.read_text())["error"]["error"] == "config_schema"

    def test_archive_records_sweep(self, runner, tmp_path):
        workspace = tmp_path / "workspace"
        out = tmp_path / "sweep.json"
        result = runner.invoke(cli, ["--quiet", "--archive", str(workspace), "sweep", "--config",
                                     self.sweep_config(tmp_path, [-2.0, 3.0]), "--out", str(out)], obj={})
        assert result.exit_code == EXIT_OK
        (run,) = RunArchive(str(workspace)).list_runs("sweep")
        assert run.exit_code == EXIT_OK
        assert run.config["sweep"]["parameter"] == "c002"
        rows = RunArchive(str(workspace)).get_sweep_rows(run.run_id)
        assert [row["zero_count"] for row in rows] == [1, 0]


class TestListScenarios:

    def test_text(self, runner):
        result = invoke(runner, "list-scenarios")
        assert result.exit_code == 0
        for name in ("harmonic_potential", "zero_hopf", "duffing"):
            assert name in result.output

    def test_json(self, runner):
        result = invoke(runner, "list-scenarios", "--json")
        names = [entry["name"] for entry in json.loads(result.stdout)]
        assert names == ["harmonic_potential", "zero_hopf", "duffing"]


class TestConfig:

    def test_epsilons_sorted_descending(self):
        config = parse_config({"scenario": {"name": "duffing"}, "epsilon": [1e-4, 1e-2, 1e-3]})
        assert config.epsilons == (1e-2, 1e-3, 1e-4)

    def test_renamed_tolerances(self):
        config = parse_config({"scenario": {"name": "duffing"}, "newton": {"newton_tol": 1e-10},
                               "shooting": {"shoot_tol": 1e-8}})
        assert config.newton.tol == 1e-10
        assert config.shooting.tol == 1e-8

    def test_problems_are_collected(self):
        with pytest.raises(ConfigSchemaError) as info:
            parse_config({"scenario": {"name": "duffing"}, "epsilon": [], "newton": {"bogus": 1},
                          "sweep": {"parameter": "x1"}})
        paths = {path for path, _ in info.value.problems}
        assert {"epsilon", "newton.bogus", "sweep.parameter"} <= paths

    def test_sweep_range(self):
        config = parse_config({"scenario": {"name": "harmonic_potential"},
                               "sweep": {"parameter": "c002", "start": -3, "stop": 3, "count": 4}})
        assert config.sweep.values == pytest.approx((-3.0, -1.0, 1.0, 3.0))

    def test_nonfinite_values_serialize_as_null(self):
        assert to_jsonable({"a": float("nan"), "b": [float("inf"), 1.0]}) == {"a": None, "b": [None, 1.0]}
