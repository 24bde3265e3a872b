"""Integration tests for the command-line interface and its exit codes."""

import json

import pytest

from rnpsim.cli.commands import (
    EXIT_INVARIANT,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    MANIFEST_FILENAME,
    main,
)
from rnpsim.config.settings import ChoConfig, SolverConfig
from rnpsim.core import diagnostics, stepper
from rnpsim.core.errors import NumericalError
from rnpsim.core.models import CSV_COLUMNS, InvariantCheck
from rnpsim.parser.config_parser import render_config


@pytest.fixture
def write_config(tmp_path):
    """Write a config object to an INI file and return its path as a string."""

    def write(config, name="run.ini"):
        path = tmp_path / name
        path.write_text(render_config(config), encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def run_config(write_config):
    return write_config(SolverConfig(nx=8, ny=8, T_final=0.005, output_every=4, P0_amp=0.1))


class TestCheckConfig:
    """check-config validates without running."""

    def test_shipped_baseline(self, configs_dir, capsys):
        code = main(["check-config", str(configs_dir / "baseline.ini")])
        assert code == EXIT_OK
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["command"] == "check-config"
        assert manifest["section"] == "rnp"
        assert manifest["config"]["nx"] == 64
        assert manifest["config"]["tau"] == 1e-4

    def test_shipped_cho(self, configs_dir, capsys):
        assert main(["check-config", str(configs_dir / "cho.ini")]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["section"] == "cho"

    def test_invalid_value(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[rnp]\nnx = 2\n", encoding="utf-8")
        assert main(["check-config", str(path)]) == EXIT_USAGE
        assert "Error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check-config", str(tmp_path / "absent.ini")]) == EXIT_USAGE


class TestRunCommand:
    """run writes diagnostics and a manifest and maps outcomes to exit codes."""

    def test_successful_run(self, run_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", run_config, "--out", str(out)]) == EXIT_OK

        csv_lines = (out / "diagnostics.csv").read_text(encoding="utf-8").splitlines()
        assert csv_lines[0] == ",".join(CSV_COLUMNS)
        assert len(csv_lines) > 2
        manifest = json.loads((out / MANIFEST_FILENAME).read_text(encoding="utf-8"))
        assert manifest["passed"] is True
        assert manifest["error"] is None
        assert {c["name"] for c in manifest["invariants"]} >= {"mass_balance", "mean_ode"}
        assert manifest == json.loads(capsys.readouterr().out)
        assert (out / "rnpsim.log").exists()

    def test_deterministic_output(self, run_config, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["run", run_config, "--out", str(first)]) == EXIT_OK
        assert main(["run", run_config, "--out", str(second)]) == EXIT_OK
        assert (first / "diagnostics.csv").read_bytes() == (second / "diagnostics.csv").read_bytes()

    def test_wrong_section(self, write_config, tmp_path):
        path = write_config(ChoConfig(nx=8, ny=8), "cho.ini")
        assert main(["run", path, "--out", str(tmp_path / "out")]) == EXIT_USAGE

    def test_invalid_initial_data(self, tmp_path, capsys):
        path = tmp_path / "run.ini"
        path.write_text("[rnp]\nnx = 8\nny = 8\nP0_const = 0.99\nP0_amp = 0.1\n", encoding="utf-8")
        out = tmp_path / "out"
        assert main(["run", str(path), "--out", str(out)]) == EXIT_USAGE
        assert "initial deviation bound" in capsys.readouterr().err
        assert not (out / MANIFEST_FILENAME).exists()

    def test_invariant_failure(self, run_config, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(
            diagnostics,
            "evaluate_invariants",
            lambda result, config: [InvariantCheck("mass_balance", False, "forced")],
        )
        out = tmp_path / "out"
        assert main(["run", run_config, "--out", str(out)]) == EXIT_INVARIANT
        assert "mass_balance" in capsys.readouterr().err
        manifest = json.loads((out / MANIFEST_FILENAME).read_text(encoding="utf-8"))
        assert manifest["passed"] is False

    def test_numerical_failure(self, run_config, tmp_path, monkeypatch):
        def failing(*args, **kwargs):
            raise NumericalError("Newton iteration stalled", residual=1.0, iterations=50)

        monkeypatch.setattr(stepper, "ch_step", failing)
        out = tmp_path / "out"
        assert main(["run", run_config, "--out", str(out)]) == EXIT_NUMERICAL

        manifest = json.loads((out / MANIFEST_FILENAME).read_text(encoding="utf-8"))
        assert "Newton iteration stalled" in manifest["error"]
        assert manifest["passed"] is False
        # the initial record is flushed before the failure is reported
        lines = (out / "diagnostics.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2

    def test_unwritable_manifest(self, run_config, tmp_path, capsys):
        out = tmp_path / "out"
        (out / MANIFEST_FILENAME).mkdir(parents=True)
        assert main(["run", run_config, "--out", str(out)]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert "cannot write manifest" in err
        assert "Traceback" not in err

    def test_unwritable_diagnostics(self, run_config, tmp_path, capsys):
        out = tmp_path / "out"
        (out / "diagnostics.csv").mkdir(parents=True)
        assert main(["run", run_config, "--out", str(out)]) == EXIT_USAGE
        assert "cannot write run output" in capsys.readouterr().err


class TestChoCommand:
    """cho runs the scalar model."""

    def test_pure_phase(self, write_config, tmp_path, capsys):
        path = write_config(ChoConfig(nx=8, ny=8, tau=1e-3, T_final=0.05, output_every=10))
        out = tmp_path / "out"
        assert main(["cho", path, "--out", str(out)]) == EXIT_OK
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["passed"] is True
        assert manifest["results"]["max_recursion_error"] <= 1e-12
        assert (out / "diagnostics.csv").exists()


class TestVerifyMz:
    """verify-mz is reproducible under a fixed seed."""

    def test_same_seed_same_report(self, capsys):
        argv = ["verify-mz", "--trials", "50", "--seed", "7", "--nx", "8"]
        assert main(argv) == EXIT_OK
        first = capsys.readouterr().out
        assert main(argv) == EXIT_OK
        assert capsys.readouterr().out == first
        report = json.loads(first)
        assert report["trials"] == 50
        assert report["violations"] == 0

    def test_bad_arguments(self):
        assert main(["verify-mz", "--trials", "-1"]) == EXIT_USAGE


class TestStability:
    """stability runs the twin-run probe on tilde configs only."""

    def test_tilde_config(self, write_config, capsys):
        path = write_config(
            SolverConfig(variant="tilde", nx=8, ny=8, P0_amp=0.05, T_final=0.004, output_every=2)
        )
        assert main(["stability", path, "--sigma", "0.002"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["d_sigma"] > 0

    def test_rejects_flory_huggins(self, write_config):
        path = write_config(SolverConfig(nx=8, ny=8, T_final=0.004))
        assert main(["stability", path]) == EXIT_USAGE


class TestUsage:
    """Argument handling."""

    def test_no_command(self, capsys):
        assert main([]) == EXIT_USAGE

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert "rnpsim" in capsys.readouterr().out
