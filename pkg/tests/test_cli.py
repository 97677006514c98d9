"""Tests for the command-line entry point."""

import json
from pathlib import Path

import pytest
from pytest_mock import MockerFixture

from sparsefront.cli import build_parser, main
from sparsefront.schemas import RunRecord


@pytest.mark.unit
class TestParser:
    """Test suite for argument parsing."""

    def test_run_options(self) -> None:
        """Test the run command accepts seed, output and trace options."""
        args = build_parser().parse_args(["run", "--config", "exp.toml", "--seed", "3", "--out", "res", "--trace"])

        assert args.command == "run"
        assert args.seed == 3
        assert args.out == "res"
        assert args.trace is True

    def test_config_is_required(self) -> None:
        """Test a command without --config exits with a usage error."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["report"])

    def test_unknown_command(self) -> None:
        """Test an unknown command exits with a usage error."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["solve", "--config", "exp.toml"])


@pytest.mark.unit
class TestExitCodes:
    """Test suite for exit codes by error family."""

    def test_bad_config_exits_two(self, tmp_path: Path) -> None:
        """
        Test an unknown config key maps to the configuration exit code.

        Args:
            tmp_path: Pytest temporary directory
        """
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"instances": [], "colour": "blue"}), encoding="utf-8")

        assert main(["run", "--config", str(path), "--log-file", ""]) == 2

    def test_ingest_without_section(self, experiment_file: Path) -> None:
        """
        Test ingest refuses a config without an ingest section.

        Args:
            experiment_file: Experiment config fixture
        """
        assert main(["ingest", "--config", str(experiment_file), "--log-file", ""]) == 2

    def test_all_runs_failed_exits_one(self, experiment_file: Path, mocker: MockerFixture) -> None:
        """
        Test a run where every cell failed maps to the solver exit code.

        Args:
            experiment_file: Experiment config fixture
            mocker: Pytest-mock fixture
        """
        failed = RunRecord(instance="toy", pipeline="scal", seed=0, config_hash="x", status="failed", error="boom")
        run_pipeline = mocker.patch("sparsefront.cli.run_pipeline", return_value=[failed])

        assert main(["run", "--config", str(experiment_file), "--seed", "4", "--log-file", ""]) == 1
        assert run_pipeline.call_args.args[1] == [4]

    def test_log_file_is_written(self, tmp_path: Path) -> None:
        """
        Test the log file receives the run banner.

        Args:
            tmp_path: Pytest temporary directory
        """
        path = tmp_path / "bad.json"
        path.write_text("{}", encoding="utf-8")
        log_file = tmp_path / "run.log"

        main(["report", "--config", str(path), "--log-file", str(log_file)])

        assert "sparsefront" in log_file.read_text(encoding="utf-8")


@pytest.mark.slow
@pytest.mark.integration
class TestCommands:
    """Test suite for end-to-end commands on the toy experiment."""

    def test_run_then_report(self, experiment_file: Path, tmp_path: Path) -> None:
        """
        Test run, reference and report succeed and write their outputs.

        Args:
            experiment_file: Experiment config fixture
            tmp_path: Pytest temporary directory
        """
        config = str(experiment_file)

        assert main(["run", "--config", config, "--log-file", ""]) == 0
        assert main(["reference", "--config", config, "--log-file", ""]) == 0
        assert main(["report", "--config", config, "--log-file", ""]) == 0

        results = tmp_path / "results"
        assert (results / "runs.json").exists()
        assert (results / "reference_toy.csv").exists()
        assert (results / "metrics.csv").exists()

    def test_out_overrides_output_dir(self, experiment_file: Path, tmp_path: Path) -> None:
        """
        Test --out redirects the run outputs.

        Args:
            experiment_file: Experiment config fixture
            tmp_path: Pytest temporary directory
        """
        out = tmp_path / "elsewhere"

        assert main(["run", "--config", str(experiment_file), "--out", str(out), "--seed", "1", "--log-file", ""]) == 0
        assert (out / "runs.json").exists()
