"""Comparison pairing strategies.

Five fixed strategies produce a pairing matrix up front (index-based
schemes, a greedy max-pair pattern, a uniformly random matching, and no
pairing at all), then hand power control to the fixed-pairing SCA loop.
Exhaustive search solves every feasible pairing and keeps the best.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .chanmodel import Scenario
from .core import (
    MAX_ENUMERATION_K,
    PairingMatrix,
    enumerate_pairings,
    involution_count,
    pairing_from_pairs,
)
from .sca import ResultRecord, SolverSettings, algorithm1, fixed_pairing_solve, greedy_pattern_pairs

__all__ = [
    "StrategyId",
    "scheme1_pairing",
    "scheme2_pairing",
    "greedy_pairing",
    "random_pairing",
    "beamforming_only",
    "exhaustive_search",
    "solve_strategy",
]


class StrategyId(str, Enum):
    PROPOSED = "proposed"
    RANDOM_PAIRING = "random_pairing"
    SCHEME1 = "scheme1"
    SCHEME2 = "scheme2"
    GREEDY = "greedy"
    EXHAUSTIVE = "exhaustive"
    BEAMFORMING_ONLY = "beamforming_only"


def scheme1_pairing(K: int) -> PairingMatrix:
    """Adjacent-index pairs: user 2k-1 with user 2k (1-based)."""
    if K < 2:
        raise ValueError("pairing schemes need K >= 2")
    return pairing_from_pairs(K, [(2 * k, 2 * k + 1) for k in range(K // 2)])


def scheme2_pairing(K: int) -> PairingMatrix:
    """Outermost-with-innermost pairs: user k with user K-k+1 (1-based)."""
    if K < 2:
        raise ValueError("pairing schemes need K >= 2")
    return pairing_from_pairs(K, [(k, K - 1 - k) for k in range(K // 2)])


def greedy_pairing(K: int) -> PairingMatrix:
    """Front half with back half, maximizing the number of pairs."""
    if K < 2:
        raise ValueError("pairing schemes need K >= 2")
    return pairing_from_pairs(K, greedy_pattern_pairs(K))


def random_pairing(K: int, seed: int) -> PairingMatrix:
    """Uniform draw over all feasible pairings (including partial and empty).

    Exact uniformity over the enumerated set up to the enumeration guard;
    beyond it, a shuffled maximal matching keeps the draw cheap and
    deterministic per seed.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng([seed, 0x7A1])
    if K <= MAX_ENUMERATION_K:
        candidates = list(enumerate_pairings(K))
        return candidates[int(rng.integers(len(candidates)))]
    order = rng.permutation(K)
    pairs = [tuple(sorted((int(order[2 * i]), int(order[2 * i + 1])))) for i in range(K // 2)]
    return pairing_from_pairs(K, pairs)


def beamforming_only(K: int) -> PairingMatrix:
    """No pairing at all: conventional per-user beamforming."""
    return pairing_from_pairs(K, [])


def make_pairing(strategy: StrategyId, K: int, seed: int = 0) -> PairingMatrix:
    """Pairing matrix for any fixed (non-search) strategy."""
    if strategy is StrategyId.SCHEME1:
        return scheme1_pairing(K)
    if strategy is StrategyId.SCHEME2:
        return scheme2_pairing(K)
    if strategy is StrategyId.GREEDY:
        return greedy_pairing(K)
    if strategy is StrategyId.RANDOM_PAIRING:
        return random_pairing(K, seed)
    if strategy is StrategyId.BEAMFORMING_ONLY:
        return beamforming_only(K)
    raise ValueError(f"{strategy.value} does not define a fixed pairing")


def exhaustive_search(s: Scenario, settings: SolverSettings,
                      instance_id: str = "") -> ResultRecord:
    """Fixed-pairing solve for every feasible pairing; best min-rate wins.

    Ties break toward the lexicographically smallest pair list, making the
    reduction independent of evaluation order.  Refuses K beyond the
    enumeration guard, quoting the candidate count.
    """
    if s.K > MAX_ENUMERATION_K:
        raise ValueError(
            f"exhaustive search refused for K={s.K} (> {MAX_ENUMERATION_K}): "
            f"{involution_count(s.K)} candidate pairings"
        )
    candidates = []
    for pairing in enumerate_pairings(s.K):
        rec = fixed_pairing_solve(s, settings, pairing,
                                  StrategyId.EXHAUSTIVE.value, instance_id)
        candidates.append(rec)
    best_rate = max(r.min_rate_nats for r in candidates)
    best = min((r for r in candidates if r.min_rate_nats == best_rate),
               key=lambda r: r.pairs)
    best.candidate_records = candidates
    return best


def solve_strategy(s: Scenario, settings: SolverSettings, strategy: StrategyId | str,
                   instance_id: str = "", pairing_seed: int | None = None) -> ResultRecord:
    """Run one strategy on one scenario and report exact oracle rates."""
    strategy = StrategyId(strategy)
    if strategy is StrategyId.PROPOSED:
        return algorithm1(s, settings, strategy.value, instance_id)
    if strategy is StrategyId.EXHAUSTIVE:
        return exhaustive_search(s, settings, instance_id)
    seed = pairing_seed if pairing_seed is not None else settings.seed
    pairing = make_pairing(strategy, s.K, seed)
    return fixed_pairing_solve(s, settings, pairing, strategy.value, instance_id)
