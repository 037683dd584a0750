"""Command-line entry point.

Subcommands: ``generate`` (write a scenario file), ``solve`` (one instance,
one strategy), ``sweep`` (Monte Carlo experiment), ``summarize`` (aggregate
a results file) and ``enumerate`` (pairing counts).  Exits 0 on success, 2
on usage errors, 1 on runtime failures with a one-line ``error:`` message.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .baselines import StrategyId, solve_strategy
from .chanmodel import ScenarioConfig, generate_scenario, load_scenario, save_scenario
from .core import involution_count
from .harness import (
    ExperimentConfig,
    format_pairs,
    load_experiment_config,
    run_experiment,
    summarize,
    summary_csv,
    summary_table,
)
from .sca import SolverSettings


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nomapair",
        description="Max-min-rate NOMA beamforming with dynamic user pairing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a channel scenario file")
    p.add_argument("--k", type=int, default=8, help="number of users")
    p.add_argument("--n", type=int, default=4, help="number of BS antennas")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pmax-dbm", type=float, default=38.0)
    p.add_argument("--out", required=True, help="output scenario file")

    p = sub.add_parser("solve", help="solve one instance with one strategy")
    p.add_argument("--strategy", required=True, choices=[s.value for s in StrategyId])
    p.add_argument("--scenario", help="scenario file (otherwise generated from --k/--n/--seed)")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pmax-dbm", type=float, default=None,
                   help="override the scenario power budget")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=200)

    p = sub.add_parser("sweep", help="run a Monte Carlo strategy sweep")
    p.add_argument("--config", default="default",
                   help="experiment config file, or 'default' for built-in defaults")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")

    p = sub.add_parser("summarize", help="aggregate a results.csv file")
    p.add_argument("--results", required=True)
    p.add_argument("--out", help="also write the summary as CSV to this path")

    p = sub.add_parser("enumerate", help="count feasible pairings for K users")
    p.add_argument("--k", type=int, required=True)

    return parser


def _cmd_generate(args) -> int:
    cfg = ScenarioConfig(K=args.k, N=args.n, seed=args.seed, p_max_dbm=args.pmax_dbm)
    scenario = generate_scenario(cfg)
    save_scenario(scenario, args.out)
    print(f"wrote scenario K={args.k} N={args.n} seed={args.seed} to {args.out}")
    return 0


def _cmd_solve(args) -> int:
    if args.scenario:
        scenario = load_scenario(args.scenario)
        if args.pmax_dbm is not None:
            scenario = scenario.with_power_budget(10.0 ** ((args.pmax_dbm - 30.0) / 10.0))
    else:
        pmax = args.pmax_dbm if args.pmax_dbm is not None else 38.0
        scenario = generate_scenario(
            ScenarioConfig(K=args.k, N=args.n, seed=args.seed, p_max_dbm=pmax))
    settings = SolverSettings(convergence_tol=args.tol, max_outer_iters=args.max_iters,
                              seed=args.seed)
    rec = solve_strategy(scenario, settings, args.strategy)
    print(f"strategy={rec.strategy} pmax_dbm={rec.p_max_dbm:g} pairs={format_pairs(rec.pairs)}")
    print("rate_bits_per_user=" + ",".join(repr(float(v)) for v in rec.rate_bits))
    print(f"min_rate_nats={rec.min_rate_nats!r}")
    print(f"min_rate_bits={rec.min_rate_bits!r}")
    print(f"iters_phase1={rec.iters_phase1} iters_phase2={rec.iters_phase2} capped={rec.capped}")
    return 0


def _cmd_sweep(args) -> int:
    if args.config == "default":
        cfg = ExperimentConfig()
    else:
        cfg = load_experiment_config(args.config)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    records = run_experiment(cfg)
    print(f"computed {len(records)} cells into {Path(cfg.out_dir) / 'results.csv'}")
    return 0


def _cmd_summarize(args) -> int:
    rows = summarize(args.results)
    if not rows:
        print("no result rows to summarize")
        return 0
    sys.stdout.write(summary_table(rows))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(summary_csv(rows))
    return 0


def _cmd_enumerate(args) -> int:
    print(involution_count(args.k))
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "summarize": _cmd_summarize,
    "enumerate": _cmd_enumerate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
