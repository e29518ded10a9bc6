import json

import numpy as np
import pytest

from app.config import config_echo, parse_config
from app.dependencies import resolve_log_level, resolve_output_dir
from app.errors import ConfigParseError, ConfigValidationError, StepTooLarge
from app.io import read_table
from app.models.run import Experiment
from app.routers import EXIT_ERROR, EXIT_OK, EXIT_VERIFY_FAILED, verify
from app.routers.sweep import expand_sweep
from main import main

SMALL_MODEL = {"n_intermediate": 21, "n_modes": 21, "t_max": 10.0, "fit_window": [1.0, 9.0]}
SHORT_SPIN = {"t_max": 1.0, "dt": 1e-3, "output_every": 10}


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


def raising_check(ctx):
    raise StepTooLarge("dt too large")


raising_check.module = "spin-master"


def crashing_check(ctx):
    raise ValueError("operands could not be broadcast together")


crashing_check.module = "et-model"


class TestParseConfig:
    def test_defaults_filled(self):
        config = parse_config('{"experiment": "et-sim"}')
        assert config.model.n_intermediate == 201
        assert config.model.lam == 0.01
        assert config.spin is None

    def test_lambda_alias(self):
        config = parse_config('{"experiment": "et-sim", "model": {"lambda": 0.02}}')
        assert config.model.lam == 0.02
        assert config_echo(config)["model"]["lambda"] == 0.02

    def test_experiment_override(self):
        config = parse_config('{"experiment": "et-sim"}', experiment="rp-sim")
        assert config.experiment is Experiment.RP_SIM
        assert config.spin.k_S == 1.0

    def test_negative_rate_names_key_path(self):
        with pytest.raises(ConfigValidationError) as exc:
            parse_config('{"experiment": "rp-sim", "spin": {"k_S": -1}}')
        assert exc.value.key_path == "spin.k_S"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigValidationError) as exc:
            parse_config('{"experiment": "et-sim", "model": {"bogus": 1}}')
        assert exc.value.key_path == "model.bogus"

    def test_unknown_experiment(self):
        with pytest.raises(ConfigValidationError) as exc:
            parse_config('{"experiment": "nope"}')
        assert exc.value.key_path == "experiment"

    @pytest.mark.parametrize("text", ["{not json", "[1, 2]", ""])
    def test_malformed(self, text):
        with pytest.raises(ConfigParseError):
            parse_config(text)

    def test_sweep_requires_section(self):
        with pytest.raises(ConfigValidationError) as exc:
            parse_config('{"experiment": "sweep"}')
        assert exc.value.key_path == "sweep"

    def test_sweep_section_ignored_elsewhere(self, caplog):
        parse_config('{"experiment": "et-sim", "sweep": {"parameter": "model.g", "values": [0.1]}}')
        assert "Ignoring the sweep section" in caplog.text


class TestSweepExpansion:
    def test_one_config_per_value(self):
        config = parse_config(json.dumps({
            "experiment": "sweep",
            "sweep": {"parameter": "model.lambda", "values": [0.001, 0.002, 0.005, 0.01, 0.02]},
        }))
        points = expand_sweep(config)
        assert [value for value, _ in points] == [0.001, 0.002, 0.005, 0.01, 0.02]
        assert [point.model.lam for _, point in points] == [0.001, 0.002, 0.005, 0.01, 0.02]
        assert all(point.experiment is Experiment.ET_SIM and point.sweep is None for _, point in points)

    def test_spin_parameter(self):
        config = parse_config(json.dumps({
            "experiment": "sweep",
            "sweep": {"parameter": "spin.k_T", "values": [0.0, 0.5], "experiment": "rp-sim"},
        }))
        assert [point.spin.k_T for _, point in expand_sweep(config)] == [0.0, 0.5]

    def test_unknown_parameter(self):
        config = parse_config('{"experiment": "sweep", "sweep": {"parameter": "model.nope", "values": [1]}}')
        with pytest.raises(ConfigValidationError) as exc:
            expand_sweep(config)
        assert exc.value.key_path == "sweep.parameter"

    def test_invalid_swept_value(self):
        config = parse_config(json.dumps({
            "experiment": "sweep",
            "sweep": {"parameter": "spin.k_S", "values": [1.0, -1.0], "experiment": "rp-sim"},
        }))
        with pytest.raises(ConfigValidationError) as exc:
            expand_sweep(config)
        assert exc.value.key_path == "spin.k_S"


class TestEnvironment:
    def test_output_dir_precedence(self, monkeypatch):
        monkeypatch.setenv("RPLAB_OUTPUT_DIR", "from_env")
        config = parse_config('{"experiment": "et-sim", "output_dir": "from_config"}')
        assert str(resolve_output_dir(config, "from_cli")) == "from_cli"
        assert str(resolve_output_dir(config)) == "from_config"
        assert str(resolve_output_dir(parse_config('{"experiment": "et-sim"}'))) == "from_env"
        monkeypatch.delenv("RPLAB_OUTPUT_DIR")
        assert str(resolve_output_dir(parse_config('{"experiment": "et-sim"}'))) == "rplab_output"

    def test_log_level(self, monkeypatch):
        import logging

        monkeypatch.setenv("RPLAB_LOG_LEVEL", "debug")
        assert resolve_log_level() == logging.DEBUG
        assert resolve_log_level(quiet=True) == logging.WARNING
        monkeypatch.setenv("RPLAB_LOG_LEVEL", "chatty")
        assert resolve_log_level() == logging.INFO


class TestMain:
    def test_et_sim(self, tmp_path):
        config = write_config(tmp_path, {"experiment": "et-sim", "model": SMALL_MODEL})
        out = tmp_path / "out"
        assert main([config, "--output-dir", str(out), "--quiet"]) == EXIT_OK
        rates = json.loads((out / "rates.json").read_text())
        assert rates["k_golden"] == pytest.approx(2 * np.pi * 1e-4 * 10.0)
        assert rates["dim"] == 43
        assert rates["max_abs_rho_RP_reduced"] == 0.0
        pops = read_table(out / "populations.csv")
        assert pops.columns[:5] == ["t", "P_R", "P_Pstar", "P_P", "coherence_bound"]
        assert "classical_P_P" in pops.columns
        assert len(pops.rows) == 101
        assert pops.metadata["config"]["model"]["n_intermediate"] == 21
        assert json.loads((out / "config.json").read_text())["model"]["lambda"] == 0.01
        assert (out / "amplitudes.csv").exists()

    def test_rp_sim(self, tmp_path):
        config = write_config(tmp_path, {"experiment": "rp-sim", "spin": SHORT_SPIN})
        out = tmp_path / "out"
        assert main([config, "--output-dir", str(out)]) == EXIT_OK
        for name in ("entropy", "populations", "yields", "coherence"):
            assert len(read_table(out / f"{name}.csv").rows) == 101
        entropy = read_table(out / "entropy.csv")
        assert entropy.columns == ["t", "S_haberkorn", "S_jones_hore", "S_dephasing(eta=0.5)"]
        summary = json.loads((out / "summary.json").read_text())
        assert summary["jones_hore"]["max_entropy"] == pytest.approx(0.4146, abs=1e-3)
        assert summary["haberkorn"]["Y_S"] + summary["haberkorn"]["survival"] == pytest.approx(1.0, abs=1e-6)

    def test_output_dir_from_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        config = write_config(tmp_path, {"experiment": "rp-sim", "spin": SHORT_SPIN, "output_dir": "cfg_out"})
        assert main([config]) == EXIT_OK
        assert (tmp_path / "cfg_out" / "summary.json").exists()

    def test_missing_config_file(self, tmp_path):
        assert main([str(tmp_path / "absent.json")]) == EXIT_ERROR

    def test_invalid_config(self, tmp_path, caplog):
        config = write_config(tmp_path, {"experiment": "rp-sim", "spin": {"k_S": -1}})
        assert main([config, "--output-dir", str(tmp_path / "out")]) == EXIT_ERROR
        assert "spin.k_S" in caplog.text

    def test_malformed_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert main([str(path)]) == EXIT_ERROR

    def test_numerical_error_exits_with_error(self, tmp_path):
        config = write_config(tmp_path, {"experiment": "rp-sim", "spin": dict(SHORT_SPIN, dt=0.05)})
        assert main([config, "--output-dir", str(tmp_path / "out")]) == EXIT_ERROR

    def test_experiment_flag(self, tmp_path):
        config = write_config(tmp_path, {"experiment": "et-sim", "model": SMALL_MODEL, "spin": SHORT_SPIN})
        out = tmp_path / "out"
        assert main([config, "--experiment", "rp-sim", "--output-dir", str(out)]) == EXIT_OK
        assert (out / "entropy.csv").exists()
        assert not (out / "rates.json").exists()


class TestVerifyExitCodes:
    @staticmethod
    def fake_check(passed):
        def fake(ctx):
            return verify._result("fake", "cli-io", 1.0, 0.5, passed)
        fake.module = "cli-io"
        return fake

    def test_passing_suite(self, tmp_path, monkeypatch):
        monkeypatch.setattr(verify, "CHECKS", [self.fake_check(True)])
        config = write_config(tmp_path, {"experiment": "verify"})
        assert main([config, "--output-dir", str(tmp_path / "out")]) == EXIT_OK
        report = json.loads((tmp_path / "out" / "verify_report.json").read_text())
        assert report["passed"] is True
        assert report["properties"][0]["status"] == "pass"

    def test_failing_suite(self, tmp_path, monkeypatch):
        monkeypatch.setattr(verify, "CHECKS", [self.fake_check(True), self.fake_check(False)])
        config = write_config(tmp_path, {"experiment": "verify"})
        assert main([config, "--output-dir", str(tmp_path / "out")]) == EXIT_VERIFY_FAILED

    def test_raising_property_is_a_failure(self, tmp_path, monkeypatch):
        monkeypatch.setattr(verify, "CHECKS", [raising_check])
        config = write_config(tmp_path, {"experiment": "verify"})
        assert main([config, "--output-dir", str(tmp_path / "out")]) == EXIT_VERIFY_FAILED
        report = json.loads((tmp_path / "out" / "verify_report.json").read_text())
        assert report["failures"] == ["raising_check"]
        assert report["properties"][0]["detail"].startswith("StepTooLarge")

    def test_unexpected_exception_does_not_stop_the_suite(self, tmp_path, monkeypatch):
        monkeypatch.setattr(verify, "CHECKS", [crashing_check, self.fake_check(True)])
        config = write_config(tmp_path, {"experiment": "verify"})
        assert main([config, "--output-dir", str(tmp_path / "out")]) == EXIT_VERIFY_FAILED
        report = json.loads((tmp_path / "out" / "verify_report.json").read_text())
        assert report["failures"] == ["crashing_check"]
        assert [p["status"] for p in report["properties"]] == ["fail", "pass"]
        assert report["properties"][0]["detail"].startswith("ValueError")


@pytest.mark.slow
class TestEndToEnd:
    def test_rate_scales_with_coupling_squared(self, tmp_path):
        config = write_config(tmp_path, {
            "experiment": "sweep",
            "model": {"g": 0.0, "t_max": 25.0, "fit_window": [2.0, 20.0]},
            "sweep": {"parameter": "model.lambda", "values": [0.0025, 0.005, 0.01]},
        })
        out = tmp_path / "out"
        assert main([config, "--output-dir", str(out)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        k = [point["k_fitted"] for point in summary["points"]]
        assert k[2] / k[0] == pytest.approx(16.0, rel=0.05)
        assert (out / "point_002" / "rates.json").exists()
        assert len(read_table(out / "summary.csv").rows) == 3

    def test_verify_is_deterministic(self, tmp_path):
        config = write_config(tmp_path, {"experiment": "verify", "seed": 7})
        first, second = tmp_path / "a", tmp_path / "b"
        assert main([config, "--output-dir", str(first), "--quiet"]) == EXIT_OK
        assert main([config, "--output-dir", str(second), "--quiet"]) == EXIT_OK
        assert (first / "verify_report.json").read_bytes() == (second / "verify_report.json").read_bytes()
