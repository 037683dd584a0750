"""Monte Carlo experiment engine.

A sweep runs every (channel realization, power budget, strategy) cell,
using common random numbers: realization r always uses scenario seed
``base_seed + r`` so all strategies and budgets see the same channels.
Results are appended to ``results.csv`` (one pinned-schema row per cell)
with per-run convergence traces beside it; reruns skip cells that already
have a row, and failed cells are logged to ``errors.csv`` without aborting
the sweep.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import StrategyId, solve_strategy
from .chanmodel import Scenario, ScenarioConfig, generate_scenario
from .sca import ResultRecord, SolverSettings, TRACE_HEADER

__all__ = [
    "RESULTS_HEADER",
    "ExperimentConfig",
    "SummaryRow",
    "run_experiment",
    "summarize",
    "summary_table",
    "summary_csv",
    "load_experiment_config",
    "save_experiment_config",
    "format_pairs",
]

RESULTS_HEADER = ("instance_id,seed,strategy,pmax_dbm,min_rate_nats,min_rate_bits,"
                  "iters_phase1,iters_phase2,wall_ms,capped,pairs")

DEFAULT_SWEEP_DBM = (26.0, 30.0, 34.0, 38.0, 42.0)
DEFAULT_STRATEGIES = (
    StrategyId.PROPOSED.value,
    StrategyId.SCHEME1.value,
    StrategyId.SCHEME2.value,
    StrategyId.GREEDY.value,
    StrategyId.RANDOM_PAIRING.value,
    StrategyId.BEAMFORMING_ONLY.value,
)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = ScenarioConfig()
    strategies: tuple = DEFAULT_STRATEGIES
    p_max_sweep_dbm: tuple = DEFAULT_SWEEP_DBM
    n_realizations: int = 50
    base_seed: int = 0
    out_dir: str = "results"
    settings: SolverSettings = SolverSettings()

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not all(np.isfinite(self.p_max_sweep_dbm)):
            raise ValueError("sweep power values must be finite")
        for name in self.strategies:
            StrategyId(name)
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "p_max_sweep_dbm", tuple(float(p) for p in self.p_max_sweep_dbm))


def save_experiment_config(cfg: ExperimentConfig, path) -> None:
    doc = {
        "scenario": {
            "k": cfg.scenario.K,
            "n": cfg.scenario.N,
            "cell_radius_m": cfg.scenario.cell_radius_m,
            "min_distance_m": cfg.scenario.min_distance_m,
            "bandwidth_hz": cfg.scenario.bandwidth_hz,
            "noise_psd_dbm_hz": cfg.scenario.noise_psd_dbm_hz,
            "pathloss_a": cfg.scenario.pathloss_a,
            "pathloss_b": cfg.scenario.pathloss_b,
        },
        "strategies": list(cfg.strategies),
        "p_max_sweep_dbm": list(cfg.p_max_sweep_dbm),
        "n_realizations": cfg.n_realizations,
        "base_seed": cfg.base_seed,
        "out_dir": cfg.out_dir,
        "convergence_tol": cfg.settings.convergence_tol,
        "max_outer_iters": cfg.settings.max_outer_iters,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_experiment_config(path) -> ExperimentConfig:
    with open(path) as fh:
        doc = json.load(fh)
    sc = doc.get("scenario", {})
    scenario = ScenarioConfig(
        K=sc.get("k", 8),
        N=sc.get("n", 4),
        cell_radius_m=sc.get("cell_radius_m", 200.0),
        min_distance_m=sc.get("min_distance_m", 10.0),
        bandwidth_hz=sc.get("bandwidth_hz", 20e6),
        noise_psd_dbm_hz=sc.get("noise_psd_dbm_hz", -174.0),
        pathloss_a=sc.get("pathloss_a", 145.4),
        pathloss_b=sc.get("pathloss_b", 37.5),
    )
    settings = SolverSettings(
        convergence_tol=doc.get("convergence_tol", 1e-3),
        max_outer_iters=doc.get("max_outer_iters", 200),
    )
    return ExperimentConfig(
        scenario=scenario,
        strategies=tuple(doc.get("strategies", DEFAULT_STRATEGIES)),
        p_max_sweep_dbm=tuple(doc.get("p_max_sweep_dbm", DEFAULT_SWEEP_DBM)),
        n_realizations=doc.get("n_realizations", 50),
        base_seed=doc.get("base_seed", 0),
        out_dir=doc.get("out_dir", "results"),
        settings=settings,
    )


def format_pairs(pairs) -> str:
    """Edge list as 1-based 'near-far' tokens, e.g. '1-5;2-6'."""
    return ";".join(f"{k + 1}-{l + 1}" for k, l in pairs)


def _result_row(rec: ResultRecord) -> str:
    return (
        f"{rec.instance_id},{rec.seed},{rec.strategy},{rec.p_max_dbm:g},"
        f"{rec.min_rate_nats!r},{rec.min_rate_bits!r},"
        f"{rec.iters_phase1},{rec.iters_phase2},{rec.wall_ms:.3f},"
        f"{str(rec.capped).lower()},{format_pairs(rec.pairs)}"
    )


def _cell_key(instance_id: str, strategy: str, pmax_dbm: float) -> tuple:
    return (instance_id, strategy, f"{pmax_dbm:g}")


def _existing_keys(results_path: Path) -> set:
    done = set()
    if not results_path.exists():
        return done
    with open(results_path) as fh:
        header = fh.readline().strip()
        if header != RESULTS_HEADER:
            raise ValueError(f"{results_path}: unexpected results schema: {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) >= 4:
                done.add((parts[0], parts[2], parts[3]))
    return done


def _worker_count() -> int:
    raw = os.environ.get("NOMA_PAIR_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run all missing sweep cells; returns the records computed in this call.

    Row order in ``results.csv`` is fully determined by the config (sorted by
    realization, budget, strategy), so two identical runs produce identical
    files except for the wall-time column.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    done = _existing_keys(results_path)

    cells = []
    for r in range(cfg.n_realizations):
        instance_id = f"r{r:04d}"
        seed = cfg.base_seed + r
        base = generate_scenario(replace(cfg.scenario, seed=seed))
        for pmax in cfg.p_max_sweep_dbm:
            scenario = base.with_power_budget(10.0 ** ((pmax - 30.0) / 10.0))
            for strategy in cfg.strategies:
                key = _cell_key(instance_id, strategy, pmax)
                if key not in done:
                    cells.append((key, instance_id, seed, strategy, pmax, scenario))

    def run_cell(cell):
        key, instance_id, seed, strategy, pmax, scenario = cell
        settings = replace(cfg.settings, seed=seed)
        try:
            rec = solve_strategy(scenario, settings, strategy, instance_id=instance_id,
                                 pairing_seed=seed)
            return key, rec, None
        except Exception as exc:   # cell failures must not abort the sweep
            return key, None, f"{type(exc).__name__}: {exc}"

    workers = _worker_count()
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(c) for c in cells]

    new_rows = {}
    records = []
    errors = []
    for key, rec, err in outcomes:
        if rec is None:
            errors.append((key, err))
            continue
        records.append(rec)
        new_rows[key] = _result_row(rec)
        trace_name = f"trace_{key[0]}_{key[1]}_{key[2]}.csv"
        with open(out_dir / trace_name, "w") as fh:
            fh.write(TRACE_HEADER + "\n")
            for line in rec.trace.csv_rows(rec.instance_id, rec.strategy):
                fh.write(line + "\n")

    _merge_results(results_path, new_rows, cfg)
    if errors:
        with open(out_dir / "errors.csv", "a") as fh:
            for (instance_id, strategy, pmax), err in errors:
                fh.write(f"{instance_id},{strategy},{pmax},{err}\n")
    return records


def _merge_results(results_path: Path, new_rows: dict, cfg: ExperimentConfig) -> None:
    rows = {}
    if results_path.exists():
        with open(results_path) as fh:
            fh.readline()
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    parts = line.split(",")
                    rows[(parts[0], parts[2], parts[3])] = line
    rows.update(new_rows)

    strategy_order = {name: i for i, name in enumerate(cfg.strategies)}

    def sort_key(key):
        instance_id, strategy, pmax = key
        return (instance_id, float(pmax), strategy_order.get(strategy, 99), strategy)

    with open(results_path, "w") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for key in sorted(rows, key=sort_key):
            fh.write(rows[key] + "\n")


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    pmax_dbm: float
    mean_min_rate_bits: float
    stderr_min_rate_bits: float
    count: int


def summarize(results_path) -> list:
    """Per (strategy, power budget): mean and standard error of the min-rate.

    A pure function of the file contents; rows in file order within each
    group, means in bps/Hz.
    """
    results_path = Path(results_path)
    if not results_path.exists():
        raise FileNotFoundError(f"results file not found: {results_path}")
    groups: dict = {}
    order: list = []
    with open(results_path) as fh:
        header = fh.readline().strip()
        if header != RESULTS_HEADER:
            raise ValueError(f"{results_path}: unexpected results schema: {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) < 6:
                continue
            strategy, pmax, bits = parts[2], float(parts[3]), float(parts[5])
            if not np.isfinite(bits):
                continue
            key = (strategy, pmax)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(bits)
    out = []
    for strategy, pmax in order:
        vals = np.asarray(groups[(strategy, pmax)], dtype=float)
        stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out.append(SummaryRow(strategy, pmax, float(np.mean(vals)), stderr, len(vals)))
    return out


def summary_table(rows) -> str:
    """Pretty text table plus CSV-ready lines for a summary."""
    if not rows:
        return "no result rows to summarize\n"
    lines = [f"{'strategy':<18} {'pmax_dbm':>8} {'mean_bps_hz':>12} {'stderr':>10} {'count':>6}"]
    for r in rows:
        lines.append(
            f"{r.strategy:<18} {r.pmax_dbm:>8g} {r.mean_min_rate_bits:>12.4f} "
            f"{r.stderr_min_rate_bits:>10.4f} {r.count:>6d}"
        )
    return "\n".join(lines) + "\n"


def summary_csv(rows) -> str:
    lines = ["strategy,pmax_dbm,mean_min_rate_bits,stderr_min_rate_bits,count"]
    for r in rows:
        lines.append(
            f"{r.strategy},{r.pmax_dbm:g},{r.mean_min_rate_bits!r},"
            f"{r.stderr_min_rate_bits!r},{r.count}"
        )
    return "\n".join(lines) + "\n"
