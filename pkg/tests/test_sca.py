import numpy as np
import pytest

from nomapair.chanmodel import Scenario
from nomapair.core import (
    BeamformerSet,
    PairingMatrix,
    PairingMode,
    pairing_from_pairs,
    rate_report,
    validate_pairing,
)
from nomapair.sca import (
    SolverSettings,
    algorithm1,
    complexity_estimate,
    fixed_pairing_solve,
    greedy_pattern_pairs,
    initial_point,
    round_pairing,
    sca_loop,
)
from nomapair.surrogate import relaxed_min_rate

from conftest import random_feasible_alpha, scenario, unit_scenario  # noqa: F401

SETTINGS = SolverSettings()


class TestInitialPoint:
    def test_feasible_by_construction(self):
        for seed in range(5):
            s = scenario(K=6, N=2, seed=seed)
            it = initial_point(s, SETTINGS)
            assert it.w.total_power() <= s.p_max_w
            assert np.all(it.a.entries >= 0) and np.all(it.a.entries <= 1)
            # degree and chain sums stay strictly inside the polytope
            m = it.a.entries
            assert np.all(m.sum(axis=0) < 1) and np.all(m.sum(axis=1) < 1)
            for k in range(s.K):
                for l in range(k + 1, s.K):
                    assert m[k, l] + m[l].sum() < 1
                    assert m[k, l] + m[:, k].sum() < 1
            it.check_mu_cover(s)

    def test_k2_greedy_entry(self):
        s = scenario(K=2, N=2, seed=1)
        it = initial_point(s, SETTINGS)
        assert it.a.entries[0, 1] == 0.5

    def test_greedy_pattern(self):
        assert greedy_pattern_pairs(8) == [(0, 4), (1, 5), (2, 6), (3, 7)]
        assert greedy_pattern_pairs(3) == [(0, 2)]

    def test_deterministic(self):
        s = scenario(K=4, N=2, seed=2)
        a = initial_point(s, SETTINGS)
        b = initial_point(s, SETTINGS)
        assert np.array_equal(a.w.vectors, b.w.vectors)
        assert np.array_equal(a.a.entries, b.a.entries)
        assert a.eta == b.eta

    def test_eta_is_exact_min_rate(self):
        s = scenario(K=4, N=2, seed=3)
        it = initial_point(s, SETTINGS)
        assert it.eta == pytest.approx(relaxed_min_rate(s, it.w, it.a), rel=1e-12)


class TestScaLoop:
    def test_single_user_capacity(self, unit_scenario):
        it, trace = sca_loop(unit_scenario, SETTINGS)
        assert it.eta == pytest.approx(np.log(2.0), abs=1e-4)
        assert trace.phase_iterations(1) <= 3

    def test_orthogonal_two_user_equal_split(self):
        # orthogonal equal-gain channels, no pairing: optimum splits power
        # equally on matched filters; brute-force grid over splits as oracle
        g = 2.0
        p = 1.0
        s = Scenario(K=2, N=2, distances_m=[10.0, 10.0],
                     channels=[[g, 0.0], [0.0, g]], noise_w=[1.0, 1.0], p_max_w=p)
        zero = pairing_from_pairs(2, [])
        grid = np.linspace(0.0, p, 2001)
        oracle = max(min(np.log1p(q * g * g), np.log1p((p - q) * g * g)) for q in grid)
        it, trace = sca_loop(s, SETTINGS, fixed_pairing=zero)
        assert it.eta == pytest.approx(oracle, abs=1e-3)
        assert it.eta == pytest.approx(np.log(1 + p * g * g / 2), abs=1e-3)

    def test_trace_monotone_within_phase(self):
        for seed in range(4):
            s = scenario(K=4, N=2, seed=40 + seed)
            it, trace = sca_loop(s, SETTINGS)
            etas = [r.eta_nats for r in trace.rows if r.phase == 1]
            assert np.all(np.diff(etas) >= -1e-9)

    def test_invalid_fixed_pairing_rejected(self):
        s = scenario(K=3, N=2, seed=5)
        bad = PairingMatrix(np.array([[0, 1, 1], [0, 0, 0], [0, 0, 0.0]]))
        with pytest.raises(ValueError, match="infeasible"):
            sca_loop(s, SETTINGS, fixed_pairing=bad)

    def test_iteration_cap_flags(self):
        s = scenario(K=4, N=2, seed=6)
        tight = SolverSettings(max_outer_iters=2, convergence_tol=1e-12)
        it, trace = sca_loop(s, tight)
        assert 1 in trace.capped_phases

    def test_trace_csv_rows(self):
        s = scenario(K=2, N=2, seed=7)
        it, trace = sca_loop(s, SETTINGS)
        rows = trace.csv_rows("r0001", "proposed")
        assert rows[0].startswith("r0001,proposed,1,0,")
        assert len(rows) == len(trace.rows)


class TestRoundPairing:
    def test_round_half_up(self):
        a = np.zeros((6, 6))
        a[0, 1], a[2, 3], a[4, 5] = 0.49, 0.5, 0.51
        out = round_pairing(PairingMatrix(a, PairingMode.RELAXED))
        assert out.pairs() == [(2, 3), (4, 5)]

    def test_row_conflict_keeps_largest(self):
        a = np.zeros((3, 3))
        a[0, 1], a[0, 2] = 0.6, 0.55
        out = round_pairing(PairingMatrix(a, PairingMode.RELAXED))
        assert out.pairs() == [(0, 1)]

    def test_tie_breaks_lexicographic(self):
        a = np.zeros((3, 3))
        a[0, 1], a[0, 2] = 0.7, 0.7
        out = round_pairing(PairingMatrix(a, PairingMode.RELAXED))
        assert out.pairs() == [(0, 1)]

    def test_idempotent_on_feasible_binary(self):
        binary = pairing_from_pairs(6, [(0, 3), (1, 4)])
        relaxed = PairingMatrix(binary.entries, PairingMode.RELAXED)
        assert round_pairing(relaxed).pairs() == binary.pairs()

    def test_binary_mode_rejected(self):
        with pytest.raises(ValueError, match="relaxed"):
            round_pairing(pairing_from_pairs(2, []))

    def test_always_feasible_random(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            K = int(rng.integers(2, 9))
            raw = np.triu(rng.uniform(0, 1, (K, K)), 1)
            out = round_pairing(PairingMatrix(raw, PairingMode.RELAXED))
            assert validate_pairing(out) == []


class TestAlgorithm1:
    def test_report_matches_exact_oracle(self):
        s = scenario(K=4, N=2, seed=8)
        rec = algorithm1(s, SETTINGS)
        pairing = pairing_from_pairs(4, rec.pairs)
        # re-derive the final beamformers from the trace-free record is not
        # possible, so check the reported consistency fields instead
        assert rec.min_rate_nats == pytest.approx(min(rec.rate_nats), rel=1e-12)
        assert rec.min_rate_bits == pytest.approx(rec.min_rate_nats / np.log(2), rel=1e-12)
        assert validate_pairing(pairing) == []

    def test_two_user_near_far_pairs(self):
        # single-antenna downlink: power-domain pairing is the only tool and
        # should win on most seeds, never beating the exhaustive check
        paired = 0
        for seed in range(6):
            s = scenario(K=2, N=1, seed=60 + seed)
            rec = algorithm1(s, SETTINGS)
            exh_best = max(
                fixed_pairing_solve(s, SETTINGS, pairing_from_pairs(2, p), "x").min_rate_nats
                for p in ([], [(0, 1)])
            )
            assert rec.min_rate_nats <= exh_best + 1e-6
            paired += bool(rec.pairs)
        assert paired >= 4

    def test_phases_recorded(self):
        s = scenario(K=4, N=2, seed=9)
        rec = algorithm1(s, SETTINGS)
        assert rec.iters_phase1 >= 1
        assert rec.iters_phase2 >= 1
        phases = {r.phase for r in rec.trace.rows}
        assert phases == {1, 2}

    def test_deterministic(self):
        s = scenario(K=4, N=2, seed=10)
        a = algorithm1(s, SETTINGS)
        b = algorithm1(s, SETTINGS)
        assert a.min_rate_nats == b.min_rate_nats
        assert a.pairs == b.pairs

    def test_phase2_trace_matches_binary_oracle(self):
        # at binary pairings the traced objective IS the exact rate oracle,
        # so the value reported at phase-2 convergence matches it tightly
        for seed in range(3):
            s = scenario(K=4, N=2, seed=80 + seed)
            rec = algorithm1(s, SETTINGS)
            last_phase2 = [r.eta_nats for r in rec.trace.rows if r.phase == 2][-1]
            assert last_phase2 == pytest.approx(rec.min_rate_nats, abs=1e-4)


class TestComplexity:
    def test_complexity_model_counts(self):
        x, y, order = complexity_estimate(8, 4)
        assert (x, y) == (409, 97)
        assert order == pytest.approx(409.0**2.5 * (97.0**2 + 409))

    def test_k1(self):
        assert complexity_estimate(1, 1)[:2] == (10, 3)

    def test_quadratic_growth(self):
        x1 = complexity_estimate(64, 4)[0]
        x2 = complexity_estimate(128, 4)[0]
        assert x2 / x1 == pytest.approx(4.0, rel=0.02)

    def test_invalid(self):
        with pytest.raises(ValueError):
            complexity_estimate(0, 4)
