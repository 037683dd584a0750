"""Benchmark figure rendering from solver CSV output."""

from .render import (
    PlotSpec,
    SchemaError,
    plot_convergence,
    plot_mmr_vs_pmax,
    read_results,
    read_trace,
    summarize_results,
)

__version__ = "0.1.0"

__all__ = [
    "PlotSpec",
    "SchemaError",
    "plot_convergence",
    "plot_mmr_vs_pmax",
    "read_results",
    "read_trace",
    "summarize_results",
]
