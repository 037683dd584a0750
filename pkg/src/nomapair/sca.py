"""Outer loop of the inner-approximation algorithm.

Phase 1 iterates build-coefficients / solve-subproblem / update on the
relaxed problem until the objective moves less than the convergence
tolerance.  The relaxed pairing matrix is then rounded to a feasible binary
one and phase 2 re-runs the loop with the pairing frozen, warm-started from
the phase-1 beamformers.  The reported figures always come from the exact
binary-pairing rate oracle, never from surrogate values.

The traced objective ``eta`` is the exact relaxed min-rate of each iterate,
which the inner-approximation step makes non-decreasing (up to solver
tolerance and the documented epsilon clamps); the raw subproblem optimum is
traced alongside.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import conic, surrogate
from .chanmodel import Scenario, watts_to_dbm
from .core import (
    BeamformerSet,
    PairingMatrix,
    PairingMode,
    pairing_from_pairs,
    rate_report,
    validate_pairing,
)
from .surrogate import EPS_ACT, EPS_V, Iterate, make_iterate

__all__ = [
    "SolverSettings",
    "TraceRow",
    "SolveTrace",
    "ResultRecord",
    "SubproblemError",
    "initial_point",
    "sca_loop",
    "round_pairing",
    "algorithm1",
    "fixed_pairing_solve",
    "complexity_estimate",
    "TRACE_HEADER",
]

TRACE_HEADER = "instance_id,strategy,phase,iter,eta_nats,eta_bits,wall_ms,status"

RELAXED_PHASE = 1
FIXED_PHASE = 2


@dataclass(frozen=True)
class SolverSettings:
    convergence_tol: float = 1e-3      # nats, on consecutive objective values
    max_outer_iters: int = 200
    eps_act: float = EPS_ACT
    eps_v: float = EPS_V
    rounding_policy: str = "largest_fraction"
    init_policy: str = "matched_filter"
    seed: int = 0
    backend: str = "clarabel"

    def __post_init__(self):
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    phase: int
    iteration: int        # 0 is the initial point of the phase
    eta_nats: float       # exact relaxed min-rate of the iterate
    eta_sub_nats: float   # subproblem optimum that produced it (nan at iteration 0)
    status: str
    wall_ms: float


@dataclass
class SolveTrace:
    rows: list = field(default_factory=list)
    capped_phases: set = field(default_factory=set)
    stalled_phases: set = field(default_factory=set)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def extend(self, other: "SolveTrace") -> None:
        self.rows.extend(other.rows)
        self.capped_phases |= other.capped_phases
        self.stalled_phases |= other.stalled_phases

    def phase_iterations(self, phase: int) -> int:
        return sum(1 for r in self.rows if r.phase == phase and r.iteration > 0)

    def eta_sequence(self, phase: int | None = None) -> list:
        return [r.eta_nats for r in self.rows if phase is None or r.phase == phase]

    def csv_rows(self, instance_id: str, strategy: str) -> list:
        ln2 = float(np.log(2.0))
        out = []
        for r in self.rows:
            out.append(
                f"{instance_id},{strategy},{r.phase},{r.iteration},"
                f"{r.eta_nats!r},{r.eta_nats / ln2!r},{r.wall_ms:.3f},{r.status}"
            )
        return out


@dataclass
class ResultRecord:
    """One solved instance, as reported by any strategy."""

    instance_id: str
    seed: int | None
    strategy: str
    p_max_dbm: float
    pairs: list
    rate_nats: np.ndarray
    rate_bits: np.ndarray
    min_rate_nats: float
    min_rate_bits: float
    iters_phase1: int
    iters_phase2: int
    wall_ms: float
    capped: bool
    scenario_hash: str
    trace: SolveTrace
    error: str | None = None
    candidate_records: list | None = None   # filled by exhaustive search


class SubproblemError(RuntimeError):
    """A subproblem did not come back optimal; carries the state for diagnosis."""

    def __init__(self, message: str, iterate: Iterate, outcome):
        super().__init__(message)
        self.iterate = iterate
        self.outcome = outcome


def greedy_pattern_pairs(K: int) -> list:
    """Pairs (k, K - floor(K/2) + k): front half with back half, max pair count."""
    half = K // 2
    return [(k, K - half + k) for k in range(half)]


def initial_point(s: Scenario, settings: SolverSettings,
                  fixed_pairing: PairingMatrix | None = None) -> Iterate:
    """Deterministic strictly feasible starting iterate.

    Beamformers are matched filters at 90% of the power budget split equally
    (always feasible, never degenerate).  The relaxed pairing starts at 0.5
    on the greedy pattern and at a small interior level on every other upper
    triangular entry, so each candidate pair constraint is active from the
    first iteration and the pairing competition is explored under full
    constraints (useless pairs decay to zero within a few steps).  With a
    fixed pairing the binary matrix is used as-is.
    """
    norms = np.linalg.norm(s.channels, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero channel vector; cannot build matched-filter start")
    scale = np.sqrt(0.9 * s.p_max_w / s.K)
    w0 = BeamformerSet(scale * s.channels / norms[:, None])
    if fixed_pairing is not None:
        alpha0 = fixed_pairing.entries.copy()
    else:
        # the floor keeps degree/chain sums feasible for any K while staying
        # at or above the activation threshold at desk-scale user counts
        floor = min(2.0 * settings.eps_act, 0.45 / max(1, s.K - 2))
        alpha0 = np.triu(np.full((s.K, s.K), floor), 1)
        for k, l in greedy_pattern_pairs(s.K):
            alpha0[k, l] = 0.5
    return make_iterate(s, w0, PairingMatrix(alpha0, PairingMode.RELAXED),
                        active_floor=settings.eps_act)


def _next_iterate(s: Scenario, outcome, eps_act: float) -> Iterate:
    """Clamp the solver point back into the exact feasible set and refresh mu.

    Pairing entries within the corner threshold of their bounds snap onto
    them: the rate effect is O(threshold) relative, and it keeps the next
    expansion free of epsilon dust.
    """
    w = outcome.w
    total = w.total_power()
    if total > s.p_max_w:
        w = BeamformerSet(w.vectors * np.sqrt(s.p_max_w / total))
    alpha = np.clip(outcome.a.entries, 0.0, 1.0)
    alpha[alpha < EPS_V] = 0.0
    alpha[alpha > 1.0 - EPS_V] = 1.0
    return make_iterate(s, w, PairingMatrix(alpha, PairingMode.RELAXED), active_floor=eps_act)


def _solve_step(s: Scenario, settings: SolverSettings, it: Iterate, frozen: bool):
    """One subproblem solve behind an exact ascent guard.

    The default solve is accepted when it is certified optimal and the
    iterate it produces does not decrease the tracked objective (solver
    certificates are measured in the solver's scaled norms and can be wrong
    on badly conditioned instances, so the guard uses our own exact rate
    arithmetic instead of trust).  Otherwise a deterministic ladder of
    alternative interior-point profiles, a padded re-expansion and the
    second backend is tried; the best ascending feasible point wins even if
    its gap is uncertified.  Returns (outcome, note, next_iterate), where
    outcome None means no ascending point was found (phase stall).
    """
    def build(iterate):
        coeffs = surrogate.build_coeffs(s, iterate, settings.eps_act, settings.eps_v,
                                        alpha_frozen=frozen)
        return conic.build_subproblem(s, coeffs, iterate)

    base = build(it)
    alt_backend = "scs" if settings.backend != "scs" else "clarabel"

    def padded_program():
        padded = make_iterate(s, it.w, it.a, eta=it.eta,
                              active_floor=settings.eps_act, mu_pad=1e-9)
        return build(padded)

    attempts = (
        (lambda: base, settings.backend, "default", ""),
        (lambda: base, settings.backend, "wide_equil", "[wide_equil]"),
        (lambda: base, settings.backend, "no_statreg", "[no_statreg]"),
        (padded_program, settings.backend, "default", "[padded]"),
        (lambda: base, alt_backend, "default", f"[{alt_backend}]"),
    )
    best = None
    for program_fn, backend, profile, tag in attempts:
        outcome = conic.solve(program_fn(), backend=backend, profile=profile)
        if outcome.status is conic.SolveStatus.INFEASIBLE:
            return outcome, outcome.raw_status + tag, None
        if outcome.w is None:
            continue
        candidate = _next_iterate(s, outcome, settings.eps_act)
        if candidate.eta < it.eta - 1e-12:
            continue
        if outcome.status is conic.SolveStatus.OPTIMAL:
            return outcome, outcome.raw_status + tag, candidate
        if best is None or candidate.eta > best[2].eta:
            best = (outcome, outcome.raw_status + tag + "(uncertified)", candidate)
    if best is not None:
        return best
    return None, "no ascending feasible point", None


def sca_loop(s: Scenario, settings: SolverSettings,
             fixed_pairing: PairingMatrix | None = None,
             start: Iterate | None = None) -> tuple:
    """Iterate subproblems until the objective settles; returns (iterate, trace).

    With ``fixed_pairing`` the pairing entries are constants and only the
    beamformers and lifts move.  Raises :class:`SubproblemError` if a
    subproblem reports infeasible (the expansion point is feasible by
    construction, so that indicates trouble worth surfacing).  An
    unrecoverable numerical stall ends the phase at the last good iterate,
    flagged in the trace; hitting the iteration cap flags the phase capped.
    """
    frozen = fixed_pairing is not None
    if frozen:
        violations = validate_pairing(fixed_pairing)
        if violations:
            raise ValueError(f"fixed pairing is infeasible: {[v.value for v in violations]}")

    phase = FIXED_PHASE if frozen else RELAXED_PHASE
    it = start if start is not None else initial_point(s, settings, fixed_pairing)
    trace = SolveTrace()
    trace.append(TraceRow(phase, 0, it.eta, float("nan"), "init", 0.0))

    prev_sub = None
    for i in range(1, settings.max_outer_iters + 1):
        t0 = time.perf_counter()
        outcome, note, candidate = _solve_step(s, settings, it, frozen)
        if outcome is not None and outcome.status is conic.SolveStatus.INFEASIBLE:
            raise SubproblemError(
                f"subproblem at iteration {i} reported infeasible "
                f"(backend {outcome.raw_status})", it, outcome)
        if candidate is None:
            wall = (time.perf_counter() - t0) * 1e3
            trace.append(TraceRow(phase, i, it.eta, float("nan"), "stalled:" + note, wall))
            trace.stalled_phases.add(phase)
            break
        prev_eta = it.eta
        it = candidate
        wall = (time.perf_counter() - t0) * 1e3
        trace.append(TraceRow(phase, i, it.eta, float(outcome.eta), note, wall))
        # converged once neither the exact objective nor the subproblem
        # optimum moves by the tolerance anymore
        sub_settled = prev_sub is not None and abs(float(outcome.eta) - prev_sub) < settings.convergence_tol
        prev_sub = float(outcome.eta)
        if abs(it.eta - prev_eta) < settings.convergence_tol and sub_settled:
            break
    else:
        trace.capped_phases.add(phase)
    return it, trace


def round_pairing(a: PairingMatrix) -> PairingMatrix:
    """Round a relaxed pairing to the nearest feasible binary one.

    Entry-wise round-half-up, then repair conflicts greedily: candidate
    pairs are ranked by their pre-rounding fraction (ties broken by smallest
    index pair) and accepted only while each user stays in at most one pair.
    Feasible binary inputs come back unchanged.
    """
    if a.mode is not PairingMode.RELAXED:
        raise ValueError("round_pairing expects a relaxed-mode matrix")
    frac = a.entries
    K = a.K
    cand = [(k, l) for k in range(K) for l in range(k + 1, K) if frac[k, l] + 0.5 >= 1.0]
    cand.sort(key=lambda kl: (-frac[kl[0], kl[1]], kl[0], kl[1]))
    used = set()
    kept = []
    for k, l in cand:
        if k in used or l in used:
            continue
        kept.append((k, l))
        used.update((k, l))
    out = pairing_from_pairs(K, kept)
    assert not validate_pairing(out)
    return out


def algorithm1(s: Scenario, settings: SolverSettings = SolverSettings(),
               strategy: str = "proposed", instance_id: str = "") -> ResultRecord:
    """Full two-phase run: relaxed pairing, rounding, fixed-pairing re-solve.

    Phase 2 restarts from the shared initialization policy, exactly like
    every other fixed-pairing solve; the rounded pairing is therefore
    evaluated identically to how exhaustive search would evaluate it, and
    the returned rates are the exact oracle values at the final beamformers
    under the rounded binary pairing.
    """
    t0 = time.perf_counter()
    it1, trace = sca_loop(s, settings)
    pairing = round_pairing(it1.a)
    it2, trace2 = sca_loop(s, settings, fixed_pairing=pairing)
    trace.extend(trace2)
    wall_ms = (time.perf_counter() - t0) * 1e3

    report = rate_report(s, it2.w, pairing)
    return ResultRecord(
        instance_id=instance_id,
        seed=s.seed,
        strategy=strategy,
        p_max_dbm=float(watts_to_dbm(s.p_max_w)),
        pairs=pairing.pairs(),
        rate_nats=report.per_user_rate_nats,
        rate_bits=report.per_user_rate_bits,
        min_rate_nats=report.min_rate_nats,
        min_rate_bits=report.min_rate_bits,
        iters_phase1=trace.phase_iterations(RELAXED_PHASE),
        iters_phase2=trace.phase_iterations(FIXED_PHASE),
        wall_ms=wall_ms,
        capped=bool(trace.capped_phases),
        scenario_hash=s.content_hash(),
        trace=trace,
    )


def fixed_pairing_solve(s: Scenario, settings: SolverSettings, pairing: PairingMatrix,
                        strategy: str, instance_id: str = "") -> ResultRecord:
    """Power control under a given binary pairing (the baseline inner solver)."""
    t0 = time.perf_counter()
    it, trace = sca_loop(s, settings, fixed_pairing=pairing)
    wall_ms = (time.perf_counter() - t0) * 1e3
    report = rate_report(s, it.w, pairing)
    return ResultRecord(
        instance_id=instance_id,
        seed=s.seed,
        strategy=strategy,
        p_max_dbm=float(watts_to_dbm(s.p_max_w)),
        pairs=pairing.pairs(),
        rate_nats=report.per_user_rate_nats,
        rate_bits=report.per_user_rate_bits,
        min_rate_nats=report.min_rate_nats,
        min_rate_bits=report.min_rate_bits,
        iters_phase1=0,
        iters_phase2=trace.phase_iterations(FIXED_PHASE),
        wall_ms=wall_ms,
        capped=bool(trace.capped_phases),
        scenario_hash=s.content_hash(),
        trace=trace,
    )


def complexity_estimate(K: int, N: int) -> tuple:
    """Subproblem size in the reference convention and the interior-point order.

    ``x = 6 K^2 + 3 K + 1`` quadratic/linear constraints and
    ``y = N K + K^2 + 1`` (complex-counted) variables give a per-iteration
    cost of order ``x^2.5 (y^2 + x)``.
    """
    if K < 1 or N < 1:
        raise ValueError("K and N must be >= 1")
    x = 6 * K * K + 3 * K + 1
    y = N * K + K * K + 1
    return x, y, float(x) ** 2.5 * (float(y) ** 2 + x)
