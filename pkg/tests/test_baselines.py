import numpy as np
import pytest

from nomapair.baselines import (
    StrategyId,
    beamforming_only,
    exhaustive_search,
    greedy_pairing,
    make_pairing,
    random_pairing,
    scheme1_pairing,
    scheme2_pairing,
    solve_strategy,
)
from nomapair.core import enumerate_pairings, involution_count, validate_pairing
from nomapair.sca import SolverSettings

from conftest import scenario

SETTINGS = SolverSettings()


class TestFixedSchemes:
    def test_scheme1_k8(self):
        assert scheme1_pairing(8).pairs() == [(0, 1), (2, 3), (4, 5), (6, 7)]

    def test_scheme1_odd(self):
        assert scheme1_pairing(3).pairs() == [(0, 1)]
        assert scheme1_pairing(2).pairs() == [(0, 1)]

    def test_scheme2_k8(self):
        assert scheme2_pairing(8).pairs() == [(0, 7), (1, 6), (2, 5), (3, 4)]

    def test_scheme2_odd(self):
        assert scheme2_pairing(5).pairs() == [(0, 4), (1, 3)]

    def test_greedy_k8(self):
        assert greedy_pairing(8).pairs() == [(0, 4), (1, 5), (2, 6), (3, 7)]

    def test_greedy_k4(self):
        assert greedy_pairing(4).pairs() == [(0, 2), (1, 3)]

    def test_beamforming_only_zero(self):
        assert beamforming_only(5).pairs() == []

    def test_pair_counts(self):
        for K in range(2, 13):
            assert len(scheme1_pairing(K).pairs()) == K // 2
            assert len(scheme2_pairing(K).pairs()) == K // 2
            assert len(greedy_pairing(K).pairs()) == K // 2
            assert len(beamforming_only(K).pairs()) == 0

    def test_all_valid_through_k12(self):
        for K in range(2, 13):
            for build in (scheme1_pairing, scheme2_pairing, greedy_pairing, beamforming_only):
                assert validate_pairing(build(K)) == []
            assert validate_pairing(random_pairing(K, seed=K)) == []

    def test_small_k_rejected(self):
        with pytest.raises(ValueError):
            scheme1_pairing(1)


class TestRandomPairing:
    def test_deterministic_per_seed(self):
        a = random_pairing(6, seed=5)
        b = random_pairing(6, seed=5)
        assert a.pairs() == b.pairs()

    def test_uniform_over_k2(self):
        counts = {(): 0, ((0, 1),): 0}
        n = 4000
        for seed in range(n):
            counts[tuple(random_pairing(2, seed).pairs())] += 1
        # chi-square with 1 dof at the 0.1% level
        chi2 = sum((c - n / 2) ** 2 / (n / 2) for c in counts.values())
        assert chi2 < 10.83, counts

    def test_covers_the_space_k3(self):
        seen = {tuple(random_pairing(3, seed).pairs()) for seed in range(300)}
        assert len(seen) == involution_count(3)

    def test_large_k_maximal_matching(self):
        m = random_pairing(12, seed=0)
        assert len(m.pairs()) == 6
        assert validate_pairing(m) == []


class TestExhaustive:
    def test_candidate_count_k4(self):
        s = scenario(K=4, N=2, seed=0)
        rec = exhaustive_search(s, SETTINGS)
        assert len(rec.candidate_records) == 10
        assert rec.strategy == "exhaustive"

    def test_best_of_two_k2(self):
        s = scenario(K=2, N=2, seed=1)
        rec = exhaustive_search(s, SETTINGS)
        rates = [r.min_rate_nats for r in rec.candidate_records]
        assert rec.min_rate_nats == pytest.approx(max(rates), rel=1e-12)

    def test_guard_names_count(self):
        s = scenario(K=4, N=2, seed=0)
        big = type(s)(K=11, N=2, distances_m=np.linspace(10, 200, 11),
                      channels=np.ones((11, 2)), noise_w=np.ones(11), p_max_w=1.0)
        with pytest.raises(ValueError, match="35696"):
            exhaustive_search(big, SETTINGS)

    def test_dominates_fixed_baselines(self):
        for seed in (2, 3):
            s = scenario(K=4, N=2, seed=seed)
            exh = exhaustive_search(s, SETTINGS)
            for strat in (StrategyId.SCHEME1, StrategyId.SCHEME2, StrategyId.GREEDY,
                          StrategyId.RANDOM_PAIRING, StrategyId.BEAMFORMING_ONLY):
                rec = solve_strategy(s, SETTINGS, strat, pairing_seed=seed)
                assert exh.min_rate_nats >= rec.min_rate_nats - 1e-9


class TestSolveStrategy:
    def test_dispatch_labels(self):
        s = scenario(K=2, N=2, seed=4)
        for strat in StrategyId:
            rec = solve_strategy(s, SETTINGS, strat, pairing_seed=0)
            assert rec.strategy == strat.value
            assert rec.min_rate_nats >= 0
            assert rec.scenario_hash == s.content_hash()

    def test_string_names_accepted(self):
        s = scenario(K=2, N=2, seed=5)
        rec = solve_strategy(s, SETTINGS, "beamforming_only")
        assert rec.pairs == []

    def test_unknown_strategy(self):
        s = scenario(K=2, N=2, seed=6)
        with pytest.raises(ValueError):
            solve_strategy(s, SETTINGS, "zigzag")
