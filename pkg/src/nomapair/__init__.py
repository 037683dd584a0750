"""Max-min-rate downlink NOMA beamforming with dynamic user pairing.

Solver library and benchmark harness: an inner-approximation algorithm over
the relaxed mixed-integer pairing problem, six comparison strategies, and a
seeded Monte Carlo experiment engine.
"""

from .chanmodel import (
    Scenario,
    ScenarioConfig,
    generate_scenario,
    load_scenario,
    noise_power_w,
    path_loss_db,
    save_scenario,
)
from .core import (
    BeamformerSet,
    PairingMatrix,
    PairingMode,
    RateReport,
    enumerate_pairings,
    involution_count,
    pairing_from_pairs,
    rate_report,
    sinr,
    validate_pairing,
)
from .baselines import StrategyId, exhaustive_search, solve_strategy
from .harness import ExperimentConfig, run_experiment, summarize
from .sca import ResultRecord, SolverSettings, algorithm1, complexity_estimate, round_pairing, sca_loop

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "ScenarioConfig",
    "generate_scenario",
    "load_scenario",
    "save_scenario",
    "noise_power_w",
    "path_loss_db",
    "BeamformerSet",
    "PairingMatrix",
    "PairingMode",
    "RateReport",
    "enumerate_pairings",
    "involution_count",
    "pairing_from_pairs",
    "rate_report",
    "sinr",
    "validate_pairing",
    "StrategyId",
    "exhaustive_search",
    "solve_strategy",
    "ExperimentConfig",
    "run_experiment",
    "summarize",
    "ResultRecord",
    "SolverSettings",
    "algorithm1",
    "complexity_estimate",
    "round_pairing",
    "sca_loop",
]
