import json
import math
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from conftest import logistic_evidence_quadrature, make_logistic_csv
from qanneal.cli import main, run
from qanneal.io import ConfigError, RunConfig, load_binary_regression_csv, report_from_json

IDENTICAL = {"mu0": 0.0, "var0": 1.0, "mu1": 0.0, "var1": 1.0}


def toy_config(**overrides):
    fields = {
        "command": "anneal-toy",
        "particles": 32,
        "K": 4,
        "moves": 1,
        "seed": 1,
        "extras": dict(IDENTICAL),
    }
    fields.update(overrides)
    return RunConfig(**fields)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy.csv"
    make_logistic_csv(path, n_rows=40, n_features=2, seed=0)
    model = load_binary_regression_csv(path)
    truth = logistic_evidence_quadrature(model)
    return str(path), truth


class TestValidation:
    def test_every_violation_listed(self):
        config = RunConfig(
            command="smc",
            path_kind="qpath",
            q=None,
            particles=0,
            K=0,
            moves=-1,
            dataset=None,
        )
        with pytest.raises(ConfigError) as err:
            run(config)
        fields = [message.split(":")[0] for message in err.value.errors]
        assert set(fields) == {"q", "particles", "K", "moves", "dataset"}

    def test_q_rejected_off_the_qpath(self):
        with pytest.raises(ConfigError, match="only meaningful"):
            run(toy_config(path_kind="geometric", q=0.5))

    def test_escort_requires_nu(self):
        with pytest.raises(ConfigError, match="nu"):
            run(toy_config(path_kind="escort"))

    def test_nu_rejected_outside_escort(self):
        with pytest.raises(ConfigError, match="nu"):
            run(toy_config(path_kind="moment", extras={**IDENTICAL, "nu": 3.0}))

    def test_adaptive_schedule_rejected_for_ais(self):
        with pytest.raises(ConfigError, match="schedule"):
            run(toy_config(command="ais", schedule="adaptive"))

    def test_dataset_rejected_for_toy_commands(self):
        with pytest.raises(ConfigError, match="dataset"):
            run(toy_config(dataset="anything.csv"))

    def test_missing_dataset_file_is_a_config_error(self):
        with pytest.raises(ConfigError, match="not found"):
            run(RunConfig(command="smc", dataset="no/such/file.csv"))

    def test_grid_q_rejects_explicit_q(self):
        with pytest.raises(ConfigError, match="grid-q"):
            run(toy_config(command="grid-q", path_kind="qpath", q=0.9))

    def test_unknown_names_rejected(self):
        config = RunConfig(command="warp", path_kind="spline", schedule="cubic")
        with pytest.raises(ConfigError) as err:
            run(config)
        assert len(err.value.errors) == 3


class TestToyRuns:
    @pytest.mark.parametrize(
        "kind,extra",
        [
            ("geometric", {}),
            ("qpath", {}),
            ("moment", {}),
            ("escort", {"nu": 3.0}),
        ],
    )
    def test_identical_endpoints_give_exact_zero(self, capsys, kind, extra):
        q = 0.3 if kind == "qpath" else None
        config = toy_config(path_kind=kind, q=q, extras={**IDENTICAL, **extra})
        report = run(config)
        assert report.log_Z == 0.0
        assert "log_Z=0 " in capsys.readouterr().out

    def test_scaled_target_recovered(self, capsys):
        config = toy_config(
            schedule="adaptive",
            particles=256,
            K=10,
            moves=2,
            seed=5,
            extras={"target_log_scale": 1.5},
        )
        report = run(config)
        assert abs(report.log_Z - 1.5) < 0.4
        assert report.extras["true_log_Z"] == 1.5

    def test_ais_traces_align(self, capsys):
        config = toy_config(command="ais", K=6, particles=20, seed=2, extras={})
        report = run(config)
        assert math.isfinite(report.log_Z)
        assert len(report.beta_trace) == 6
        assert len(report.ess_trace) == 6
        assert len(report.acceptance_trace) == 6
        assert report.beta_trace[-1] == 1.0
        assert report.config_echo == config

    def test_bdmc_reports_both_bounds(self, capsys):
        config = toy_config(command="bdmc", K=6, particles=24, seed=3, extras={})
        report = run(config)
        gap = report.extras["bdmc_gap"]
        assert gap == pytest.approx(report.extras["upper_bound"] - report.log_Z, abs=1e-12)

    def test_moment_path_run_is_finite(self, capsys):
        config = toy_config(path_kind="moment", particles=64, K=6, seed=4, extras={})
        report = run(config)
        assert math.isfinite(report.log_Z)

    def test_heuristic_outputs_selection(self, capsys, tmp_path):
        out = tmp_path / "h.json"
        config = RunConfig(
            command="heuristic-q",
            particles=200,
            seed=5,
            output=str(out),
            extras={"restarts": 10},
        )
        report = run(config)
        assert math.isnan(report.log_Z)
        assert set(report.extras) >= {"q", "beta1", "loss", "feasible"}
        assert report.extras["q"] < 1.0
        text = out.read_text()
        assert '"log_Z": "nan"' in text
        assert report_from_json(text) == report


class TestDeterminismAndFiles:
    def test_same_seed_same_report(self, capsys):
        config = toy_config(
            particles=64, K=5, seed=9, extras={"target_log_scale": 0.7}
        )
        first = run(config)
        second = run(config)
        assert replace(first, wallclock_s=0.0) == replace(second, wallclock_s=0.0)

    def test_written_report_round_trips(self, capsys, tmp_path):
        out = tmp_path / "run.json"
        config = toy_config(particles=48, K=4, seed=6, output=str(out))
        report = run(config)
        assert report_from_json(out.read_text()) == report

    def test_json_bytes_identical_except_wallclock(self, capsys, tmp_path):
        out = tmp_path / "run.json"
        config = toy_config(
            particles=48, K=4, seed=6, output=str(out),
            extras={"target_log_scale": 0.2},
        )
        texts = []
        for _ in range(2):
            run(config)
            parsed = json.loads(out.read_text())
            parsed["wallclock_s"] = 0.0
            texts.append(json.dumps(parsed))
        assert texts[0] == texts[1]

    def test_trace_csv_written(self, capsys, tmp_path):
        csv_path = tmp_path / "trace.csv"
        config = toy_config(
            particles=32, K=3, seed=2, extras={**IDENTICAL, "trace_csv": str(csv_path)}
        )
        run(config)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "step,beta,ess,acceptance"
        assert len(lines) == 4


class TestGridQ:
    def test_sweep_reports_best_q(self, capsys, tmp_path):
        out = tmp_path / "grid.json"
        config = RunConfig(
            command="grid-q",
            path_kind="qpath",
            particles=16,
            K=4,
            seed=2,
            output=str(out),
            extras={"grid_count": 5},
        )
        report = run(config)
        qs = report.extras["qs"]
        assert len(qs) == 5
        assert np.all(np.diff(qs) < 0.0)
        delta = 1.0 - report.extras["best_q"]
        assert 1e-5 <= delta <= 1e-1
        assert report.extras["best_gap"] == min(report.extras["bdmc_gaps"])

        per_q = sorted(p for p in tmp_path.iterdir() if p.name != "grid.json")
        assert len(per_q) == 5
        sub = report_from_json(per_q[0].read_text())
        assert sub.config_echo.command == "bdmc"
        assert sub.config_echo.q == qs[0]

    def test_summary_line_names_best_q(self, capsys):
        config = RunConfig(
            command="grid-q", path_kind="qpath", particles=12, K=3, seed=4,
            extras={"grid_count": 3},
        )
        run(config)
        assert "best_q=" in capsys.readouterr().out


class TestSmcCommand:
    def test_matches_quadrature_within_half_nat(self, capsys, dataset):
        path, truth = dataset
        config = RunConfig(
            command="smc", dataset=path, particles=256, K=10,
            schedule="adaptive", moves=2, seed=11,
        )
        report = run(config)
        assert abs(report.log_Z - truth) < 0.5

    def test_deterministic_given_seed(self, capsys, dataset):
        path, _ = dataset
        config = RunConfig(
            command="smc", dataset=path, particles=64, K=6, moves=1, seed=3
        )
        assert run(config).log_Z == run(config).log_Z


class TestMainExitCodes:
    def test_success_returns_zero(self, capsys):
        code = main(
            ["anneal-toy", "--mu0", "0", "--var0", "1", "--mu1", "0", "--var1", "1",
             "--particles", "16", "--k", "3", "--seed", "1"]
        )
        assert code == 0
        assert "anneal-toy: log_Z=0" in capsys.readouterr().out

    def test_config_error_returns_two(self, capsys):
        code = main(["smc", "--particles", "0"])
        assert code == 2
        err = capsys.readouterr().err
        assert "config error: dataset" in err
        assert "config error: particles" in err

    def test_runtime_failure_returns_three(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("0,1\n1,oops\n")
        code = main(["smc", "--dataset", str(bad)])
        assert code == 3
        assert "runtime failure" in capsys.readouterr().err

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "qanneal.cli", "anneal-toy", "--mu0", "0",
             "--var0", "1", "--mu1", "0", "--var1", "1", "--particles", "16",
             "--k", "3"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "log_Z=0" in proc.stdout
