import json
import math

import numpy as np
import pytest

from debiased_mc import ShiftedGeometricLaw, ToyGeometricModel, mse_inflation_factor, run_estimate
from debiased_mc.cli import main, read_config_file
from debiased_mc.report import ESTIMATE_COLUMNS


def read_csv_row(path):
    header, data = path.read_text().strip().split("\n")
    return dict(zip(header.split(","), data.split(",")))


class TestEstimateCommands:
    def test_toy_csv_matches_library(self, tmp_path, capsys):
        out = tmp_path / "toy.csv"
        code = main(["toy", "--reps", "5000", "--seed", "9", "--out", str(out), "--no-plot"])
        assert code == 0
        row = read_csv_row(out)
        assert list(row) == list(ESTIMATE_COLUMNS)
        report = run_estimate(ToyGeometricModel(1.0, 1.0, 0.5),
                              ShiftedGeometricLaw(p=0.5, shift=0), 5000, seed=9)
        assert float(row["mean"]) == report.mean
        assert float(row["stderr"]) == report.stderr
        assert int(row["M"]) == 5000
        assert row["experiment"] == "toy"
        assert "mean" in capsys.readouterr().out

    def test_json_report(self, tmp_path):
        out = tmp_path / "toy.json"
        code = main(["toy", "--reps", "2000", "--seed", "3", "--out", str(out),
                     "--format", "json", "--no-plot"])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["experiment"] == "toy"
        assert payload["law"]["type"] == "shifted_geometric"
        assert "wall_time_s" in payload
        assert payload["n_failed"] == 0

    def test_figure_rendered_alongside(self, tmp_path):
        out = tmp_path / "toy.csv"
        assert main(["toy", "--reps", "2000", "--seed", "3", "--out", str(out)]) == 0
        assert (tmp_path / "toy.png").exists()

    def test_no_plot_suppresses_figure(self, tmp_path):
        out = tmp_path / "toy.csv"
        assert main(["toy", "--reps", "2000", "--seed", "3", "--out", str(out), "--no-plot"]) == 0
        assert not (tmp_path / "toy.png").exists()

    def test_quad_runs(self, tmp_path):
        out = tmp_path / "quad.csv"
        code = main(["quad", "--reps", "20000", "--seed", "4", "--out", str(out), "--no-plot"])
        assert code == 0
        row = read_csv_row(out)
        assert float(row["mean"]) == pytest.approx(2.0 / math.pi, abs=0.01)

    def test_adaptive_root_runs(self, tmp_path):
        out = tmp_path / "root.json"
        code = main(["root", "--adaptive", "--reps", "5000", "--seed", "2",
                     "--out", str(out), "--format", "json", "--no-plot"])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["sigma2_hat_mean"] is None
        assert payload["law"]["type"] == "adaptive"
        assert abs(payload["mean"] - 1.0) < 0.05

    def test_heston_preset_small_run(self, tmp_path):
        out = tmp_path / "heston.csv"
        code = main(["heston", "--preset", "broadie_kaya_2", "--reps", "500",
                     "--seed", "5", "--out", str(out), "--no-plot"])
        assert code == 0
        row = read_csv_row(out)
        assert abs(float(row["mean"]) - 6.8) < 2.0


class TestDeterminism:
    def test_rerun_byte_identical_csv(self, tmp_path):
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["quad", "--reps", "20000", "--seed", "11", "--no-plot"]
        assert main(argv + ["--out", str(out_a)]) == 0
        assert main(argv + ["--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_thread_count_does_not_change_report(self, tmp_path):
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        base = ["root", "--reps", "10000", "--seed", "11", "--no-plot"]
        assert main(base + ["--threads", "1", "--out", str(out_a)]) == 0
        assert main(base + ["--threads", "3", "--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_json_identical_up_to_wall_time(self, tmp_path):
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["toy", "--reps", "5000", "--seed", "1", "--format", "json", "--no-plot"]
        assert main(argv + ["--out", str(out_a)]) == 0
        assert main(argv + ["--out", str(out_b)]) == 0
        a, b = json.loads(out_a.read_text()), json.loads(out_b.read_text())
        a.pop("wall_time_s"), b.pop("wall_time_s")
        assert a == b


class TestDesignCommand:
    def test_inflation_column_matches_library(self, tmp_path):
        out = tmp_path / "design.csv"
        code = main(["design", "--r-min", "0.1", "--r-max", "0.9", "--r-steps", "9",
                     "--out", str(out), "--no-plot"])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        header = lines[0].split(",")
        r_idx, inf_idx = header.index("r"), header.index("inflation")
        for line in lines[1:]:
            cells = line.split(",")
            r = float(cells[r_idx])
            assert abs(float(cells[inf_idx]) - mse_inflation_factor(r)) <= 1e-12

    def test_cost_budget_columns(self, tmp_path):
        out = tmp_path / "design.csv"
        code = main(["design", "--r-min", "0.2", "--r-max", "0.3", "--r-steps", "2",
                     "--cost-budget", "50", "--out", str(out), "--no-plot"])
        assert code == 0
        header = out.read_text().strip().split("\n")[0].split(",")
        assert "cost_s" in header and "cost_objective" in header

    def test_stdout_when_no_out(self, capsys):
        assert main(["design", "--r-steps", "3"]) == 0
        assert "inflation" in capsys.readouterr().out

    def test_design_figure(self, tmp_path):
        out = tmp_path / "design.csv"
        assert main(["design", "--r-steps", "5", "--out", str(out)]) == 0
        assert (tmp_path / "design.png").exists()


class TestConfigFile:
    def test_precedence_cli_over_file_over_default(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# toy run\nreps = 3000\nseed = 21\nr = 0.25\n")
        out = tmp_path / "toy.csv"
        code = main(["toy", "--config", str(cfg), "--seed", "99",
                     "--out", str(out), "--no-plot"])
        assert code == 0
        row = read_csv_row(out)
        assert int(row["M"]) == 3000          # from file
        assert int(row["seed"]) == 99         # CLI wins
        report = run_estimate(ToyGeometricModel(1.0, 1.0, 0.25),
                              ShiftedGeometricLaw(p=0.5, shift=0), 3000, seed=99)
        assert float(row["mean"]) == report.mean  # r from file, p default

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus_key = 3\n")
        assert main(["toy", "--config", str(cfg)]) == 2

    def test_bool_parsing(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("adaptive = true\nepsilon = 0.001\n")
        parsed = read_config_file(str(cfg))
        assert parsed == {"adaptive": True, "epsilon": 0.001}

    def test_experiment_mismatch_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("experiment = quad\n")
        assert main(["toy", "--config", str(cfg)]) == 2


class TestExitCodes:
    def test_config_error_unknown_name(self, capsys):
        assert main(["quad", "--integrand", "sin_pi_x", "--reps", "1"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_infeasible_design(self, capsys):
        assert main(["quad", "--p", "0.4", "--reps", "100"]) == 3
        err = capsys.readouterr().err
        assert "error:" in err and "p" in err

    def test_io_error(self, tmp_path, capsys):
        target = tmp_path / "missing_dir" / "out.csv"
        assert main(["toy", "--reps", "100", "--out", str(target), "--no-plot"]) == 4

    def test_invalid_p(self, capsys):
        assert main(["toy", "--p", "1.5", "--reps", "100"]) == 2

    def test_infeasible_adaptive_heston(self, capsys):
        assert main(["heston", "--adaptive", "--reps", "100"]) == 3
