import json
from pathlib import Path

import pytest

from nomapair.cli import main
from nomapair.harness import RESULTS_HEADER


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEnumerate:
    def test_k8_prints_764(self, capsys):
        code, out, _ = run(capsys, "enumerate", "--k", "8")
        assert code == 0
        assert out.strip() == "764"

    def test_k4(self, capsys):
        code, out, _ = run(capsys, "enumerate", "--k", "4")
        assert code == 0 and out.strip() == "10"


class TestUsageErrors:
    def test_unknown_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["enumerate", "--zap", "1"])
        assert exc.value.code == 2

    def test_unknown_strategy_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--strategy", "wrong"])
        assert exc.value.code == 2

    def test_missing_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_runtime_error_one_line(self, capsys):
        code, out, err = run(capsys, "summarize", "--results", "/nonexistent/results.csv")
        assert code == 1
        assert err.startswith("error:")
        assert len(err.strip().splitlines()) == 1


class TestGenerateAndSolve:
    def test_generate_writes_scenario(self, tmp_path, capsys):
        out_file = tmp_path / "scenario.json"
        code, out, _ = run(capsys, "generate", "--k", "3", "--n", "2",
                           "--seed", "4", "--out", str(out_file))
        assert code == 0
        doc = json.loads(out_file.read_text())
        assert doc["k"] == 3 and doc["n"] == 2

    def test_solve_unit_instance_prints_ln2(self, tmp_path, capsys):
        scen = {
            "format_version": 1, "k": 1, "n": 1,
            "distances_m": [10.0], "noise_w": [1.0], "p_max_w": 1.0,
            "seed": 0, "channels": [[[1.0, 0.0]]],
        }
        path = tmp_path / "unit.json"
        path.write_text(json.dumps(scen))
        code, out, _ = run(capsys, "solve", "--strategy", "beamforming_only",
                           "--scenario", str(path))
        assert code == 0
        lines = dict(l.split("=", 1) for l in out.splitlines() if "=" in l and "," not in l.split("=", 1)[0])
        assert abs(float(lines["min_rate_nats"]) - 0.6931471805599453) < 1e-4
        assert abs(float(lines["min_rate_bits"]) - 1.0) < 1e-4

    def test_solve_generated_instance(self, capsys):
        code, out, _ = run(capsys, "solve", "--strategy", "greedy",
                           "--k", "2", "--n", "2", "--seed", "1")
        assert code == 0
        assert "min_rate_bits=" in out


class TestSweepAndSummarize:
    def test_sweep_and_summarize(self, tmp_path, capsys):
        cfg = {
            "scenario": {"k": 2, "n": 2},
            "strategies": ["beamforming_only"],
            "p_max_sweep_dbm": [38.0],
            "n_realizations": 2,
            "base_seed": 3,
            "out_dir": str(tmp_path / "out"),
        }
        cfg_path = tmp_path / "experiment.json"
        cfg_path.write_text(json.dumps(cfg))
        code, out, _ = run(capsys, "sweep", "--config", str(cfg_path))
        assert code == 0
        results = tmp_path / "out" / "results.csv"
        lines = results.read_text().splitlines()
        assert lines[0] == RESULTS_HEADER
        assert len(lines) == 3

        summary_out = tmp_path / "summary.csv"
        code, out, _ = run(capsys, "summarize", "--results", str(results),
                           "--out", str(summary_out))
        assert code == 0
        assert "beamforming_only" in out
        assert summary_out.exists()
