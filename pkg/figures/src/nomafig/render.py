"""Render the two benchmark figures from solver CSV output.

Pure file-to-file transformations: a results.csv (pinned schema, one row per
solved instance) feeds the average max-min-rate-versus-power figure, and
per-run trace CSVs feed the convergence figure.  Rates are plotted in bps/Hz
by default, converting from the stored nats where needed.  Rendering is
headless and deterministic: identical inputs produce identical image bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "RESULTS_HEADER",
    "TRACE_HEADER",
    "STRATEGY_LABELS",
    "PlotSpec",
    "SchemaError",
    "read_results",
    "summarize_results",
    "read_trace",
    "plot_mmr_vs_pmax",
    "plot_convergence",
]

RESULTS_HEADER = ("instance_id,seed,strategy,pmax_dbm,min_rate_nats,min_rate_bits,"
                  "iters_phase1,iters_phase2,wall_ms,capped,pairs")
TRACE_HEADER = "instance_id,strategy,phase,iter,eta_nats,eta_bits,wall_ms,status"

LN2 = float(np.log(2.0))

STRATEGY_LABELS = {
    "proposed": "Alg. 1 (proposed)",
    "random_pairing": "Random Pairing",
    "scheme1": "Scheme 1",
    "scheme2": "Scheme 2",
    "greedy": "Greedy Pairing",
    "exhaustive": "Exhaustive Search",
    "beamforming_only": "Beamforming",
}

#: Fixed drawing order and markers so output never depends on dict ordering.
STRATEGY_ORDER = ("exhaustive", "proposed", "greedy", "random_pairing",
                  "scheme1", "scheme2", "beamforming_only")
MARKERS = {"exhaustive": "*", "proposed": "o", "greedy": "s", "random_pairing": "^",
           "scheme1": "v", "scheme2": "D", "beamforming_only": "x"}


class SchemaError(ValueError):
    """A CSV input does not match the documented schema."""


FIGURE_IDS = ("mmr_vs_pmax", "convergence")


@dataclass(frozen=True)
class PlotSpec:
    figure_id: str
    out_path: str
    results_path: str | None = None
    trace_paths: tuple = ()
    units: str = "bits"           # bits (bps/Hz) or nats

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise ValueError(f"unknown figure id '{self.figure_id}', have {FIGURE_IDS}")
        if self.units not in ("bits", "nats"):
            raise ValueError(f"units must be 'bits' or 'nats', got '{self.units}'")


def read_results(path) -> list:
    """Rows of results.csv as dicts, in file order."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"results file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise SchemaError(f"{path}: expected header {RESULTS_HEADER!r}")
    cols = RESULTS_HEADER.split(",")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(cols):
            raise SchemaError(f"{path}: row has {len(parts)} fields, expected {len(cols)}")
        out.append(dict(zip(cols, parts)))
    return out


def summarize_results(rows, units: str = "bits") -> dict:
    """Per (strategy, pmax): mean, standard error, count of the min-rate.

    Same arithmetic and row order as the solver's own summarizer (float64
    mean over rows in file order), so the plotted series reproduce its means
    exactly.
    """
    column = "min_rate_bits" if units == "bits" else "min_rate_nats"
    groups: dict = {}
    for row in rows:
        value = float(row[column])
        if not np.isfinite(value):
            continue
        groups.setdefault((row["strategy"], float(row["pmax_dbm"])), []).append(value)
    out = {}
    for key, vals in groups.items():
        arr = np.asarray(vals, dtype=float)
        stderr = float(np.std(arr, ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
        out[key] = (float(np.mean(arr)), stderr, len(arr))
    return out


def plot_mmr_vs_pmax(spec: PlotSpec) -> dict:
    """Average max-min rate versus power budget, one error-barred line per strategy.

    Returns the plotted series {strategy: (pmax[], mean[], stderr[])} for
    verification against the solver's summarizer.
    """
    rows = read_results(spec.results_path)
    summary = summarize_results(rows, spec.units)
    if not summary:
        raise SchemaError(f"{spec.results_path}: no usable result rows")

    strategies = [s for s in STRATEGY_ORDER if any(k[0] == s for k in summary)]
    strategies += sorted({k[0] for k in summary} - set(strategies))
    fig, ax = plt.subplots(figsize=(6.4, 4.4), dpi=130)
    series = {}
    for strategy in strategies:
        points = sorted((pmax, *summary[(s, pmax)])
                        for s, pmax in summary if s == strategy)
        x = np.array([p[0] for p in points])
        mean = np.array([p[1] for p in points])
        err = np.array([p[2] for p in points])
        series[strategy] = (x, mean, err)
        ax.errorbar(x, mean, yerr=err, marker=MARKERS.get(strategy, "."),
                    capsize=3, label=STRATEGY_LABELS.get(strategy, strategy))
    unit_label = "bps/Hz" if spec.units == "bits" else "nats/s/Hz"
    ax.set_xlabel("BS power budget (dBm)")
    ax.set_ylabel(f"Average max-min rate ({unit_label})")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return series


def read_trace(path) -> list:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trace file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise SchemaError(f"{path}: expected header {TRACE_HEADER!r}")
    cols = TRACE_HEADER.split(",")
    rows = [dict(zip(cols, line.split(","))) for line in lines[1:] if line]
    if not rows:
        raise SchemaError(f"{path}: trace has no rows")
    return rows


def plot_convergence(spec: PlotSpec) -> dict:
    """Objective versus outer iteration for each strategy's trace.

    The restart of the fixed-pairing phase is marked with a vertical line
    for traces that contain one.  Returns {strategy: (iteration[], eta[])}.
    """
    if not spec.trace_paths:
        raise ValueError("convergence figure needs at least one trace file")
    fig, ax = plt.subplots(figsize=(6.4, 4.4), dpi=130)
    column = "eta_bits" if spec.units == "bits" else "eta_nats"
    series = {}
    markers_done = set()
    for path in spec.trace_paths:
        rows = read_trace(path)
        strategy = rows[0]["strategy"]
        solves = 0
        xs, ys = [], []
        phase2_at = None
        for row in rows:
            if int(row["iter"]) > 0:
                solves += 1
            if row["phase"] == "2" and phase2_at is None:
                phase2_at = solves
            xs.append(solves)
            ys.append(float(row[column]))
        series[strategy] = (np.array(xs), np.array(ys))
        ax.plot(xs, ys, marker=MARKERS.get(strategy, "."), markersize=3,
                label=STRATEGY_LABELS.get(strategy, strategy))
        if phase2_at is not None and strategy not in markers_done:
            markers_done.add(strategy)
            ax.axvline(phase2_at, linestyle=":", alpha=0.5)
    unit_label = "bps/Hz" if spec.units == "bits" else "nats/s/Hz"
    ax.set_xlabel("Outer iteration")
    ax.set_ylabel(f"Objective ({unit_label})")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return series
