"""Exact objective and constraint evaluation for paired NOMA beamforming.

This module is the ground-truth oracle: given a scenario, a set of
beamformers and a pairing matrix it computes interference terms, SINRs,
per-user rates and the min-rate, straight from the definitions with no
approximation.  It also owns the combinatorics of valid pairings (a valid
binary pairing matrix is exactly a partial matching on the distance-ordered
users) including full enumeration for exhaustive search.

Pairing semantics: ``alpha[k, l] = 1`` with ``k < l`` means the nearer user
k and the farther user l form a SIC pair; user k decodes l's message first
and cancels it, so l's beam no longer interferes at k, while k's message
must remain decodable at k's receiver and l's message must be decodable at
both receivers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "PairingMode",
    "PairingMatrix",
    "BeamformerSet",
    "RateReport",
    "PairingViolation",
    "phi",
    "psi",
    "sinr",
    "rate_report",
    "validate_pairing",
    "enumerate_pairings",
    "involution_count",
    "pairing_from_pairs",
]

LN2 = float(np.log(2.0))

#: Enumeration guard: the search space grows as the involution numbers.
MAX_ENUMERATION_K = 10

#: Tolerance used when classifying matrix entries as binary.
BINARY_TOL = 1e-9


class PairingMode(str, Enum):
    BINARY = "binary"
    RELAXED = "relaxed"


class PairingViolation(str, Enum):
    """Identifiers for the individual pairing-feasibility rules."""

    NOT_BINARY = "entries_not_binary"
    OUT_OF_RANGE = "entries_outside_unit_interval"
    DIAGONAL = "diagonal_not_zero"
    LOWER_TRIANGLE = "lower_triangle_not_zero"
    COLUMN_SUM = "user_paired_as_far_more_than_once"
    ROW_SUM = "user_paired_as_near_more_than_once"
    CHAIN_NEAR = "far_user_also_acts_as_near_user"
    CHAIN_FAR = "near_user_also_paired_as_far"


@dataclass(frozen=True)
class PairingMatrix:
    """K-by-K user pairing assignment, strictly upper-triangular.

    ``mode`` distinguishes the solver's continuous relaxation (entries in
    [0, 1]) from true binary assignments; rate oracles only accept binary.
    """

    entries: np.ndarray
    mode: PairingMode = PairingMode.BINARY

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"pairing matrix must be square, got shape {a.shape}")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "mode", PairingMode(self.mode))
        a.setflags(write=False)

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    def pairs(self) -> list[tuple[int, int]]:
        """Active (near, far) index pairs, entries >= 1/2, sorted."""
        k_idx, l_idx = np.nonzero(self.entries >= 0.5)
        return sorted(zip(k_idx.tolist(), l_idx.tolist()))

    def is_binary(self) -> bool:
        a = self.entries
        return bool(np.all((np.abs(a) <= BINARY_TOL) | (np.abs(a - 1.0) <= BINARY_TOL)))


def pairing_from_pairs(K: int, pairs: Sequence[tuple[int, int]]) -> PairingMatrix:
    """Build a binary pairing matrix from (near, far) index pairs."""
    a = np.zeros((K, K))
    for k, l in pairs:
        if not 0 <= k < l < K:
            raise ValueError(f"pair ({k}, {l}) must satisfy 0 <= near < far < K={K}")
        a[k, l] = 1.0
    return PairingMatrix(a, PairingMode.BINARY)


@dataclass(frozen=True)
class BeamformerSet:
    """K complex beamforming vectors of length N, one per user."""

    vectors: np.ndarray   # shape (K, N), complex

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2:
            raise ValueError(f"beamformers must be a (K, N) array, got shape {v.shape}")
        object.__setattr__(self, "vectors", v)
        v.setflags(write=False)

    @property
    def K(self) -> int:
        return self.vectors.shape[0]

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.vectors) ** 2))


@dataclass(frozen=True)
class RateReport:
    per_user_rate_nats: np.ndarray
    per_user_rate_bits: np.ndarray
    min_rate_nats: float

    @property
    def min_rate_bits(self) -> float:
        return self.min_rate_nats / LN2


def _received_powers(s, w: BeamformerSet) -> np.ndarray:
    """Matrix R with R[k, l] = |h_k^H w_l|^2."""
    inner = np.conj(s.channels) @ w.vectors.T   # (K, K): row k = h_k^H w_l over l
    return np.abs(inner) ** 2


def phi(s, w: BeamformerSet, a: PairingMatrix, k: int) -> float:
    """Interference-plus-noise at user k's own receiver.

    ``sum_{l != k} (1 - alpha[k, l]) |h_k^H w_l|^2 + sigma_k^2``; the paired
    far user's beam is removed by SIC in proportion to alpha[k, l].  Valid
    for both binary and relaxed matrices.
    """
    r = _received_powers(s, w)[k]
    weight = 1.0 - a.entries[k]
    total = float(np.sum(weight * r) - weight[k] * r[k])
    return total + float(s.noise_w[k])


def psi(s, w: BeamformerSet, ell: int, k: int) -> float:
    """Interference-plus-noise at receiver ``ell`` when decoding user k's message.

    Before SIC everything except k's own beam is noise at receiver ell,
    including ell's own intended signal; independent of the pairing matrix.
    """
    if ell == k:
        raise ValueError("psi is defined for a paired receiver, need ell != k")
    r = _received_powers(s, w)[ell]
    return float(np.sum(r) - r[k]) + float(s.noise_w[ell])


def _require_binary(a: PairingMatrix, op: str) -> None:
    if a.mode is not PairingMode.BINARY:
        raise ValueError(f"{op} is an exact oracle and requires a binary pairing matrix, got mode={a.mode.value}")


def sinr(s, w: BeamformerSet, a: PairingMatrix, k: int) -> float:
    """Effective SINR of user k under binary pairing.

    The minimum of user k's own-receiver SINR and, when k is the far user
    of a pair, the SINR of k's message at the paired near receiver (the SIC
    decodability requirement).  Unpaired combinations contribute +inf and
    drop out of the minimum, so with an all-zero matrix this is exactly the
    conventional-beamforming SINR.
    """
    _require_binary(a, "sinr")
    r = _received_powers(s, w)
    gamma = r[k, k] / phi(s, w, a, k)
    for ell in range(a.K):
        if ell == k:
            continue
        if a.entries[ell, k] >= 0.5:
            gamma = min(gamma, r[ell, k] / (a.entries[ell, k] * psi(s, w, ell, k)))
    return float(gamma)


def rate_report(s, w: BeamformerSet, a: PairingMatrix) -> RateReport:
    """Per-user achievable rates ln(1 + SINR) in nats/s/Hz, plus bps/Hz and the minimum."""
    _require_binary(a, "rate_report")
    nats = np.array([np.log1p(sinr(s, w, a, k)) for k in range(a.K)])
    return RateReport(
        per_user_rate_nats=nats,
        per_user_rate_bits=nats / LN2,
        min_rate_nats=float(nats.min()),
    )


def validate_pairing(a: PairingMatrix) -> list[PairingViolation]:
    """Check every pairing-feasibility rule; the returned list is empty iff valid.

    Violations are data, not errors: all broken rules are reported at once.
    """
    m = a.entries
    K = a.K
    out: list[PairingViolation] = []

    if a.mode is PairingMode.BINARY:
        if not a.is_binary():
            out.append(PairingViolation.NOT_BINARY)
    elif np.any(m < -BINARY_TOL) or np.any(m > 1.0 + BINARY_TOL):
        out.append(PairingViolation.OUT_OF_RANGE)

    if np.any(np.abs(np.diag(m)) > BINARY_TOL):
        out.append(PairingViolation.DIAGONAL)
    if np.any(np.abs(np.tril(m, -1)) > BINARY_TOL):
        out.append(PairingViolation.LOWER_TRIANGLE)
    if np.any(m.sum(axis=0) > 1.0 + BINARY_TOL):
        out.append(PairingViolation.COLUMN_SUM)
    if np.any(m.sum(axis=1) > 1.0 + BINARY_TOL):
        out.append(PairingViolation.ROW_SUM)

    row_sums = m.sum(axis=1)
    col_sums = m.sum(axis=0)
    chain_near = False
    chain_far = False
    for k in range(K):
        for ell in range(k + 1, K):
            # the far user of an active pair may not itself pair again,
            # neither as a near user (row ell) nor as a far user (column ell
            # is already covered; column k guards the near slot).
            if m[k, ell] + row_sums[ell] > 1.0 + BINARY_TOL:
                chain_near = True
            if m[k, ell] + col_sums[k] > 1.0 + BINARY_TOL:
                chain_far = True
    if chain_near:
        out.append(PairingViolation.CHAIN_NEAR)
    if chain_far:
        out.append(PairingViolation.CHAIN_FAR)
    return out


def involution_count(K: int) -> int:
    """Number of partial matchings on K users: I(n) = I(n-1) + (n-1) I(n-2)."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    a, b = 1, 1   # I(0), I(1)
    if K == 0:
        return 1
    for n in range(2, K + 1):
        a, b = b, b + (n - 1) * a
    return b


def _matchings(users: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
    if not users:
        yield []
        return
    first, rest = users[0], users[1:]
    # first stays unpaired
    for sub in _matchings(rest):
        yield sub
    # first pairs with each later user
    for i, other in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for sub in _matchings(remaining):
            yield [(first, other)] + sub


def enumerate_pairings(K: int) -> Iterator[PairingMatrix]:
    """Yield every feasible binary pairing matrix (every partial matching).

    Includes the empty pairing.  Refuses K beyond the enumeration guard,
    quoting how many matrices the request would produce.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > MAX_ENUMERATION_K:
        raise ValueError(
            f"refusing to enumerate pairings for K={K} (> {MAX_ENUMERATION_K}): "
            f"that would yield {involution_count(K)} matrices"
        )
    for pairs in _matchings(tuple(range(K))):
        yield pairing_from_pairs(K, pairs)
