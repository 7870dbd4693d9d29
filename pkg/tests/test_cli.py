import json

import pytest
from click.testing import CliRunner

from app.cli import SWEEP_HEADER, cli
from app.utils.errors import ExitCode
from app.utils.instance_io import parse_instance


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, ["--log-level", "WARNING", *args])


class TestGen:
    def test_lower_bound(self, runner):
        result = invoke(runner, "gen", "lower-bound", "--n", "3", "--alpha", "2")
        assert result.exit_code == 0
        instance = parse_instance(result.stdout)
        assert [job.release for job in instance.jobs] == [0.0, 1.0, 2.0]

    def test_random_is_deterministic(self, runner, tmp_path):
        args = ("gen", "random", "--seed", "9", "--n", "6", "--m", "2")
        first = invoke(runner, *args, "--out", str(tmp_path / "a.yaml"))
        second = invoke(runner, *args, "--out", str(tmp_path / "b.yaml"))
        assert first.exit_code == second.exit_code == 0
        assert (tmp_path / "a.yaml").read_text() == (tmp_path / "b.yaml").read_text()

    def test_random_bad_range(self, runner):
        result = invoke(runner, "gen", "random", "--seed", "1", "--n", "3", "--workload", "2", "1")
        assert result.exit_code == ExitCode.USAGE


class TestSimulate:
    def test_writes_report(self, runner, tmp_path, instance_yaml):
        source = tmp_path / "instance.yaml"
        source.write_text(instance_yaml)
        out, trace = tmp_path / "run.json", tmp_path / "trace.csv"
        result = invoke(runner, "simulate", str(source), "--out", str(out), "--trace", str(trace))
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["m"] == 2
        assert all(check["passed"] for check in report["checks"])
        assert trace.read_text().startswith("interval_index,")
        assert "certified ratio" in result.stdout

    def test_with_oracle(self, runner, tmp_path):
        source = tmp_path / "lb.yaml"
        assert invoke(runner, "gen", "lower-bound", "--n", "4", "--alpha", "2", "--out", str(source)).exit_code == 0
        out = tmp_path / "run.json"
        result = invoke(runner, "simulate", str(source), "--with-oracle", "--out", str(out))
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["empirical_ratio"] <= 4.0

    def test_multiprocessor_with_oracle(self, runner, tmp_path):
        source = tmp_path / "random.yaml"
        args = ("gen", "random", "--seed", "2", "--n", "7", "--m", "2", "--alpha", "1.5", "--out", str(source))
        assert invoke(runner, *args).exit_code == 0
        out = tmp_path / "run.json"
        result = invoke(runner, "simulate", str(source), "--with-oracle", "--out", str(out))
        assert result.exit_code == ExitCode.OK, result.output
        report = json.loads(out.read_text())
        assert report["oracle"]["converged"]
        assert report["certificate"]["g"] <= report["oracle"]["total"] + 1e-6 * (1 + report["cost"]["total"])

    def test_malformed_instance(self, runner, tmp_path):
        source = tmp_path / "broken.yaml"
        source.write_text("alpha: 2\nm: 1\njobs:\n  - {id: a, release: 2, deadline: 1, workload: 1, value: 1}\n")
        out = tmp_path / "run.json"
        result = invoke(runner, "simulate", str(source), "--out", str(out))
        assert result.exit_code == ExitCode.PARSE_FAILURE
        assert "line 4" in result.output
        assert not out.exists()

    def test_missing_instance(self, runner, tmp_path):
        result = invoke(runner, "simulate", str(tmp_path / "missing.yaml"))
        assert result.exit_code == ExitCode.PARSE_FAILURE

    def test_invalid_delta(self, runner, tmp_path, instance_yaml):
        source = tmp_path / "instance.yaml"
        source.write_text(instance_yaml)
        result = invoke(runner, "simulate", str(source), "--delta", "2", "--out", str(tmp_path / "run.json"))
        assert result.exit_code == ExitCode.USAGE


class TestOracle:
    def test_writes_report(self, runner, tmp_path):
        source = tmp_path / "lb.yaml"
        assert invoke(runner, "gen", "lower-bound", "--n", "3", "--alpha", "2", "--out", str(source)).exit_code == 0
        out = tmp_path / "oracle.json"
        result = invoke(runner, "oracle", str(source), "--method", "yds", "--out", str(out))
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["oracle"]["method"] == "yds"
        assert report["oracle"]["converged"]
        assert "" in report["subset_energies"]

    def test_multiprocessor_uses_gradient_descent(self, runner, tmp_path, instance_yaml):
        source = tmp_path / "instance.yaml"
        source.write_text(instance_yaml)
        out = tmp_path / "oracle.json"
        result = invoke(runner, "oracle", str(source), "--out", str(out))
        assert result.exit_code == ExitCode.OK, result.output
        report = json.loads(out.read_text())
        assert report["oracle"]["method"] == "pgd"
        assert report["oracle"]["converged"]

    def test_yds_needs_one_processor(self, runner, tmp_path, instance_yaml):
        source = tmp_path / "instance.yaml"
        source.write_text(instance_yaml)
        assert invoke(runner, "oracle", str(source), "--method", "yds").exit_code == ExitCode.USAGE


class TestSweep:
    def test_n_sweep(self, runner, tmp_path):
        out = tmp_path / "sweep.csv"
        result = invoke(runner, "sweep", "--kind", "n", "--values", "2,3", "--workers", "1", "--out", str(out))
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert len(lines) == 3

    def test_delta_sweep_needs_instance(self, runner):
        result = invoke(runner, "sweep", "--kind", "delta", "--values", "0.5")
        assert result.exit_code == ExitCode.USAGE
