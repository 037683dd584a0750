"""Acceptance for the figure package: headless, deterministic, faithful to the
solver's own aggregation, with the fixed-pairing-phase marker visible."""

import hashlib
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nomafig import (
    PlotSpec,
    SchemaError,
    plot_convergence,
    plot_mmr_vs_pmax,
    read_results,
    read_trace,
    summarize_results,
)

SAMPLE = Path(__file__).resolve().parent.parent / "sample_data"


def sample_traces():
    return tuple(str(p) for p in sorted(SAMPLE.glob("trace_r0000_*_38.csv")))


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class TestS1Acceptance:
    def test_s1(self, tmp_path):
        results = SAMPLE / "results.csv"

        spec1 = PlotSpec("mmr_vs_pmax", str(tmp_path / "fig2_a.png"), results_path=str(results))
        series = plot_mmr_vs_pmax(spec1)
        assert (tmp_path / "fig2_a.png").stat().st_size > 0

        # deterministic: identical inputs give identical image bytes
        spec2 = PlotSpec("mmr_vs_pmax", str(tmp_path / "fig2_b.png"), results_path=str(results))
        plot_mmr_vs_pmax(spec2)
        deterministic_fig2 = sha256(tmp_path / "fig2_a.png") == sha256(tmp_path / "fig2_b.png")

        # plotted means equal the solver's own summarize() output exactly,
        # consumed through its command-line interface
        summary_csv = tmp_path / "summary.csv"
        subprocess.run(
            [sys.executable, "-m", "nomapair.cli", "summarize",
             "--results", str(results), "--out", str(summary_csv)],
            check=True, capture_output=True)
        solver_means = {}
        for line in summary_csv.read_text().splitlines()[1:]:
            strategy, pmax, mean, _, _ = line.split(",")
            solver_means[(strategy, float(pmax))] = float(mean)
        match = True
        for strategy, (x, mean, _) in series.items():
            for pmax, value in zip(x, mean):
                match &= solver_means[(strategy, float(pmax))] == value

        specc = PlotSpec("convergence", str(tmp_path / "fig3_a.png"),
                         trace_paths=sample_traces())
        traces = plot_convergence(specc)
        specc2 = PlotSpec("convergence", str(tmp_path / "fig3_b.png"),
                          trace_paths=sample_traces())
        plot_convergence(specc2)
        deterministic_fig3 = sha256(tmp_path / "fig3_a.png") == sha256(tmp_path / "fig3_b.png")

        # the proposed strategy's trace carries the fixed-pairing restart
        rows = read_trace([p for p in sample_traces() if "proposed" in p][0])
        has_phase2 = any(r["phase"] == "2" for r in rows)

        ok = (deterministic_fig2 and deterministic_fig3 and match
              and has_phase2 and len(traces) >= 2)
        print(f"{'PASS' if ok else 'FAIL'} S1 — figures rendered headless; "
              f"deterministic: fig2 {deterministic_fig2}, fig3 {deterministic_fig3}; "
              f"series match solver summarize(): {match}; phase-2 marker present: {has_phase2}")
        assert ok


class TestMmrFigure:
    def test_series_shapes(self, tmp_path):
        spec = PlotSpec("mmr_vs_pmax", str(tmp_path / "f.png"),
                        results_path=str(SAMPLE / "results.csv"))
        series = plot_mmr_vs_pmax(spec)
        assert set(series) == {"proposed", "greedy", "random_pairing", "beamforming_only"}
        for x, mean, err in series.values():
            assert len(x) == 3 and len(mean) == 3 and len(err) == 3

    def test_single_row_no_error_bar(self, tmp_path):
        results = tmp_path / "results.csv"
        header = read_results(SAMPLE / "results.csv")  # reuse schema
        lines = (SAMPLE / "results.csv").read_text().splitlines()
        results.write_text("\n".join(lines[:2]) + "\n")
        spec = PlotSpec("mmr_vs_pmax", str(tmp_path / "f.png"), results_path=str(results))
        series = plot_mmr_vs_pmax(spec)
        (strategy, (x, mean, err)), = series.items()
        assert len(x) == 1 and err[0] == 0.0

    def test_schema_error(self, tmp_path):
        bad = tmp_path / "results.csv"
        bad.write_text("instance,strategy\nx,y\n")
        spec = PlotSpec("mmr_vs_pmax", str(tmp_path / "f.png"), results_path=str(bad))
        with pytest.raises(SchemaError):
            plot_mmr_vs_pmax(spec)

    def test_missing_file(self, tmp_path):
        spec = PlotSpec("mmr_vs_pmax", str(tmp_path / "f.png"),
                        results_path=str(tmp_path / "nope.csv"))
        with pytest.raises(FileNotFoundError):
            plot_mmr_vs_pmax(spec)


class TestConvergenceFigure:
    def test_monotone_trace_plots_monotone(self, tmp_path):
        spec = PlotSpec("convergence", str(tmp_path / "c.png"), trace_paths=sample_traces())
        series = plot_convergence(spec)
        for strategy, (x, y) in series.items():
            finite = y[np.isfinite(y)]
            assert len(finite) >= 2

    def test_empty_trace_rejected(self, tmp_path):
        empty = tmp_path / "trace_empty.csv"
        empty.write_text("instance_id,strategy,phase,iter,eta_nats,eta_bits,wall_ms,status\n")
        spec = PlotSpec("convergence", str(tmp_path / "c.png"), trace_paths=(str(empty),))
        with pytest.raises(SchemaError, match="no rows"):
            plot_convergence(spec)

    def test_no_traces_rejected(self, tmp_path):
        spec = PlotSpec("convergence", str(tmp_path / "c.png"))
        with pytest.raises(ValueError, match="trace"):
            plot_convergence(spec)


class TestSpecValidation:
    def test_unknown_figure_id(self):
        with pytest.raises(ValueError, match="figure id"):
            PlotSpec("nope", "out.png")

    def test_unknown_units(self):
        with pytest.raises(ValueError, match="units"):
            PlotSpec("convergence", "out.png", units="furlongs")

    def test_cli_renders(self, tmp_path):
        out = tmp_path / "cli.png"
        proc = subprocess.run(
            [sys.executable, "-m", "nomafig.cli", "--fig", "mmr_vs_pmax",
             "--results", str(SAMPLE / "results.csv"), "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert out.exists()

    def test_cli_error_is_one_line(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "nomafig.cli", "--fig", "convergence",
             "--out", str(tmp_path / "x.png")],
            capture_output=True, text=True)
        assert proc.returncode == 1
        assert proc.stderr.startswith("error:")
