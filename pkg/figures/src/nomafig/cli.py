"""Command-line figure rendering from benchmark CSV files."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_IDS, PlotSpec, plot_convergence, plot_mmr_vs_pmax


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nomafig", description="Render benchmark figures from results/trace CSV files")
    parser.add_argument("--fig", required=True, choices=FIGURE_IDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--results", help="results.csv (for mmr_vs_pmax)")
    parser.add_argument("--traces", nargs="*", default=[],
                        help="trace CSV files or a directory of trace_*.csv (for convergence)")
    parser.add_argument("--units", choices=("bits", "nats"), default="bits")
    return parser


def _expand_traces(raw) -> tuple:
    paths = []
    for item in raw:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("trace_*.csv")))
        else:
            paths.append(p)
    return tuple(str(p) for p in paths)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = PlotSpec(figure_id=args.fig, out_path=args.out,
                        results_path=args.results,
                        trace_paths=_expand_traces(args.traces),
                        units=args.units)
        if args.fig == "mmr_vs_pmax":
            if not args.results:
                raise ValueError("--results is required for the mmr_vs_pmax figure")
            plot_mmr_vs_pmax(spec)
        else:
            plot_convergence(spec)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
